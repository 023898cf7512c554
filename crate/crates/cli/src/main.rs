//! `eigenorient` command-line tool.

mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "eigenorient", version, about = "Orient eigenbases, track them over windows, and regress on them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AngleUnit {
    Deg,
    Rad,
}

impl AngleUnit {
    pub fn name(self) -> &'static str {
        match self {
            AngleUnit::Deg => "deg",
            AngleUnit::Rad => "rad",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Unit of angles in output (and in angle input files)
    #[arg(long, value_enum, default_value = "deg")]
    pub angle_unit: AngleUnit,
    /// Largest accepted max |VᵀV - I| for an input basis
    #[arg(long, default_value_t = 1e-8)]
    pub ortho_tol: f64,
    /// Re-orthonormalize the input basis with a QR pass before orienting
    #[arg(long)]
    pub reorthonormalize: bool,
    /// Centre panel columns before decomposition (default)
    #[arg(long, overrides_with = "no_center")]
    pub center: bool,
    /// Require panels to be centred already
    #[arg(long = "no-center")]
    pub no_center: bool,
}

impl Common {
    pub fn centering(&self) -> bool {
        !self.no_center
    }
}

#[derive(Debug, Clone, Args)]
pub struct Windowing {
    /// Rows per window (default 8 × number of features)
    #[arg(long)]
    pub window_len: Option<usize>,
    /// Rows between window starts (default: the window length)
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Orient an eigenvector matrix (or the eigenvectors of a panel)
    Orient {
        /// Eigenvector matrix CSV, columns are eigenvectors (a data panel with --from-panel)
        input: PathBuf,
        /// Eigenvalue CSV, one row or one column (default n, n-1, ..., 1)
        #[arg(long)]
        values: Option<PathBuf>,
        /// Treat the input as a data panel and decompose it first
        #[arg(long)]
        from_panel: bool,
        /// Output JSON path (default stdout)
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Rebuild the oriented basis from an angle matrix
    Generate {
        /// Output JSON of `orient`, or an angle matrix CSV in --angle-unit
        input: PathBuf,
        /// Return only the rotation of this (zero-based) subspace
        #[arg(long)]
        subspace: Option<usize>,
        /// Output JSON path (default stdout)
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Unit of a CSV angle matrix
        #[arg(long, value_enum, default_value = "deg")]
        angle_unit: AngleUnit,
    },
    /// Rolling decompose, orient and regress over windows of a panel
    Track {
        /// Panel CSV holding features and the response column
        input: PathBuf,
        /// Response column, by header name or zero-based index
        #[arg(long)]
        y_col: String,
        /// Number of retained components
        #[arg(long, default_value_t = 1)]
        q: usize,
        #[command(flatten)]
        windows: Windowing,
        /// Skip orientation (unoriented baseline)
        #[arg(long)]
        no_orient: bool,
        /// Scramble eigenvector signs per window with this seed
        #[arg(long, value_name = "SEED")]
        inject_flips: Option<u64>,
        /// Directory for beta.csv, theta.csv and signs.csv
        #[arg(long)]
        series_dir: Option<PathBuf>,
        /// Output JSON path (default stdout)
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Directional statistics of the oriented bases of panel windows
    Dispersion {
        /// Panel CSV
        input: PathBuf,
        /// Column to exclude from the features, by name or index
        #[arg(long)]
        y_col: Option<String>,
        #[command(flatten)]
        windows: Windowing,
        /// Refine concentrations by maximum likelihood
        #[arg(long)]
        refine: bool,
        /// Directory for kappa.csv
        #[arg(long)]
        series_dir: Option<PathBuf>,
        /// Output JSON path (default stdout)
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Fit an oriented principal-component regression, optionally predict
    Regress {
        /// Training panel CSV
        input: PathBuf,
        /// Response column, by header name or zero-based index
        #[arg(long)]
        y_col: String,
        /// Number of retained components
        #[arg(long, default_value_t = 1)]
        q: usize,
        /// Out-of-sample panel with the same columns (response optional)
        #[arg(long)]
        test: Option<PathBuf>,
        /// Output JSON path (default stdout)
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic rotated-ellipsoid panel
    Synth {
        /// Axis standard deviations, strictly descending
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        axes: Vec<f64>,
        /// Upper-triangle angles, row by row, in --angle-unit (default all zero)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Vec<f64>,
        /// Rows per window
        #[arg(long, default_value_t = 1000)]
        m: usize,
        /// Number of windows, each drawn with its own seed
        #[arg(long, default_value_t = 1)]
        windows: usize,
        /// Isotropic noise standard deviation
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Factor weights; adds a response column `y`
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        weights: Vec<f64>,
        /// Response noise standard deviation
        #[arg(long, default_value_t = 0.0)]
        y_noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "deg")]
        angle_unit: AngleUnit,
        /// Output CSV path (default stdout)
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Markdown walkthrough of the orientation steps
    Walkthrough {
        /// Rebuild the four-dimensional reference basis instead
        #[arg(long)]
        r4: bool,
        /// Output path (default stdout)
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Orient {
            input,
            values,
            from_panel,
            out,
            common,
        } => commands::orient(&input, values.as_deref(), from_panel, out.as_deref(), &common),
        Command::Generate {
            input,
            subspace,
            out,
            angle_unit,
        } => commands::generate(&input, subspace, out.as_deref(), angle_unit),
        Command::Track {
            input,
            y_col,
            q,
            windows,
            no_orient,
            inject_flips,
            series_dir,
            out,
            common,
        } => commands::track(&commands::TrackArgs {
            input: &input,
            y_col: &y_col,
            q,
            windows: &windows,
            orient: !no_orient,
            inject_flips,
            series_dir: series_dir.as_deref(),
            out: out.as_deref(),
            common: &common,
        }),
        Command::Dispersion {
            input,
            y_col,
            windows,
            refine,
            series_dir,
            out,
            common,
        } => commands::dispersion(
            &input,
            y_col.as_deref(),
            &windows,
            refine,
            series_dir.as_deref(),
            out.as_deref(),
            &common,
        ),
        Command::Regress {
            input,
            y_col,
            q,
            test,
            out,
            common,
        } => commands::regress(&input, &y_col, q, test.as_deref(), out.as_deref(), &common),
        Command::Synth {
            axes,
            theta,
            m,
            windows,
            noise,
            weights,
            y_noise,
            seed,
            angle_unit,
            out,
        } => commands::synth(&commands::SynthArgs {
            axes: &axes,
            theta: &theta,
            m,
            windows,
            noise,
            weights: &weights,
            y_noise,
            seed,
            angle_unit,
            out: out.as_deref(),
        }),
        Command::Walkthrough { r4, out } => commands::walkthrough(r4, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = serde_json::json!({ "error": "UsageError", "message": e.to_string().trim_end() });
            eprintln!("{err}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}
