use std::path::Path;

use eigenorient::dirstats::{dispersion_with, mean_eigenbasis, BasisEnsemble, DispersionOptions};
use eigenorient::eigenflow::{
    decompose_panel, fit_oriented, predict, rolling_track, split_windows, Panel, PanelDecomposer, SvdDecomposer,
    TrackOptions, WindowConfig,
};
use eigenorient::synthkit::{regression_stream, EllipsoidSpec, FlippingDecomposer};
use eigenorient::{
    generate_oriented_eigenvectors, orient_eigenvectors_with, AngleMatrix, EigenSystem, OrientOptions,
    OrientedEigensystem,
};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::io::{self, Table};
use crate::{AngleUnit, Common, Windowing};

fn orient_options(common: &Common) -> OrientOptions {
    OrientOptions {
        ortho_tol: common.ortho_tol,
        reorthonormalize: common.reorthonormalize,
        ..Default::default()
    }
}

fn angles_out(theta: &AngleMatrix, unit: AngleUnit) -> DMatrix<f64> {
    match unit {
        AngleUnit::Deg => theta.to_degrees(),
        AngleUnit::Rad => theta.as_matrix().clone(),
    }
}

fn angles_in(m: DMatrix<f64>, unit: AngleUnit) -> Result<AngleMatrix, CliError> {
    Ok(match unit {
        AngleUnit::Deg => AngleMatrix::from_degrees(m)?,
        AngleUnit::Rad => AngleMatrix::from_matrix(m)?,
    })
}

fn signs_json(signs: &[i8]) -> Value {
    Value::Array(signs.iter().map(|&s| Value::from(s)).collect())
}

/// Features and optional response split out of a panel table.
fn split_columns(table: &Table, y_col: Option<&str>) -> Result<(Panel, Option<DVector<f64>>), CliError> {
    let names = table.column_names();
    let y_idx = y_col.map(|k| table.column_index(k)).transpose()?;
    let keep: Vec<usize> = (0..table.data.ncols()).filter(|&c| Some(c) != y_idx).collect();
    if keep.is_empty() {
        return Err(CliError::Validation("panel has no feature columns".into()));
    }
    let features = table.data.select_columns(keep.iter());
    let panel = Panel::new(features, keep.iter().map(|&c| names[c].clone()).collect())?;
    let y = y_idx.map(|c| table.data.column(c).into_owned());
    Ok((panel, y))
}

fn window_config(windows: &Windowing, n: usize) -> Result<WindowConfig, CliError> {
    let default = WindowConfig::default_for(n);
    let len = windows.window_len.unwrap_or(default.len);
    let stride = windows.stride.unwrap_or(len);
    if len == 0 || stride == 0 {
        return Err(CliError::Validation("--window-len and --stride must be positive".into()));
    }
    Ok(WindowConfig { len, stride })
}

fn oriented_json(o: &OrientedEigensystem, unit: AngleUnit) -> Value {
    json!({
        "n": o.dim(),
        "signs": signs_json(&o.signs),
        "theta": io::matrix(&angles_out(&o.theta, unit)),
        "theta_unit": unit.name(),
        "sort_indices": o.sort_indices,
        "Vor": io::matrix(&o.vor),
        "eigenvalues": io::vector(&o.eor),
    })
}

pub fn orient(
    input: &Path,
    values: Option<&Path>,
    from_panel: bool,
    out: Option<&Path>,
    common: &Common,
) -> Result<(), CliError> {
    let table = io::read_table(input)?;
    let sys = if from_panel {
        if values.is_some() {
            return Err(CliError::Validation("--values cannot be combined with --from-panel".into()));
        }
        let (panel, _) = split_columns(&table, None)?;
        decompose_panel(&panel, common.centering())?.system
    } else {
        let n = table.data.ncols();
        let lambdas = match values {
            Some(p) => io::read_vector(p)?,
            None => DVector::from_fn(n, |i, _| (n - i) as f64),
        };
        EigenSystem::new(table.data, lambdas)?
    };
    let oriented = orient_eigenvectors_with(&sys, &orient_options(common))?;
    io::write_json(out, &oriented_json(&oriented, common.angle_unit))
}

pub fn generate(input: &Path, subspace: Option<usize>, out: Option<&Path>, unit: AngleUnit) -> Result<(), CliError> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?;
    let theta = if text.trim_start().starts_with('{') {
        let doc: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", input.display())))?;
        let m = io::matrix_from_json(&doc["theta"], "theta")?;
        let unit = match doc["theta_unit"].as_str() {
            Some("rad") => AngleUnit::Rad,
            Some("deg") => AngleUnit::Deg,
            Some(other) => return Err(CliError::Parse(format!("unknown theta_unit `{other}`"))),
            None => unit,
        };
        angles_in(m, unit)?
    } else {
        angles_in(io::read_table(input)?.data, unit)?
    };
    let value = match subspace {
        None => json!({
            "n": theta.dim(),
            "Vor": io::matrix(&generate_oriented_eigenvectors(&theta, None)?),
        }),
        Some(k) => json!({
            "n": theta.dim(),
            "subspace": k,
            "rotation": io::matrix(&generate_oriented_eigenvectors(&theta, Some(k))?),
        }),
    };
    io::write_json(out, &value)
}

pub struct TrackArgs<'a> {
    pub input: &'a Path,
    pub y_col: &'a str,
    pub q: usize,
    pub windows: &'a Windowing,
    pub orient: bool,
    pub inject_flips: Option<u64>,
    pub series_dir: Option<&'a Path>,
    pub out: Option<&'a Path>,
    pub common: &'a Common,
}

pub fn track(args: &TrackArgs) -> Result<(), CliError> {
    let table = io::read_table(args.input)?;
    let (panel, y) = split_columns(&table, Some(args.y_col))?;
    let y = y.expect("response column requested");
    let n = panel.ncols();
    if args.q == 0 || args.q > n {
        return Err(CliError::Validation(format!("--q must be in 1..={n}")));
    }
    let config = window_config(args.windows, n)?;
    let (panels, ys): (Vec<_>, Vec<_>) = split_windows(&panel, &y, config)?.into_iter().unzip();
    if panels.is_empty() {
        return Err(CliError::Validation(format!(
            "panel has {} rows, fewer than one window of {}",
            panel.nrows(),
            config.len
        )));
    }
    let center = args.common.centering();
    let decomposer: Box<dyn PanelDecomposer> = match args.inject_flips {
        Some(seed) => Box::new(FlippingDecomposer {
            seed,
            auto_center: center,
        }),
        None => Box::new(SvdDecomposer { auto_center: center }),
    };
    let opts = TrackOptions {
        orient: args.orient,
        orient_options: orient_options(args.common),
    };
    let record = rolling_track(decomposer.as_ref(), &panels, &ys, args.q, &opts)?;
    let unit = args.common.angle_unit;

    let windows: Vec<Value> = record
        .entries
        .iter()
        .map(|e| {
            json!({
                "k": e.window,
                "signs": signs_json(&e.signs),
                "theta": e.oriented.as_ref().map(|o| io::matrix(&angles_out(&o.theta, unit))),
                "beta": io::vector(&e.beta_hat),
                "eigenvalues": io::vector(&e.eigenvalues),
                "residual_rms": io::num(e.residual_rms),
            })
        })
        .collect();
    let value = json!({
        "n": n,
        "q": args.q,
        "window_len": config.len,
        "stride": config.stride,
        "oriented": args.orient,
        "theta_unit": unit.name(),
        "beta_sign_changes": record.beta_sign_changes(),
        "windows": windows,
    });

    if let Some(dir) = args.series_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let mut header = vec!["window".to_string()];
        header.extend((0..args.q).map(|c| format!("beta_{c}")));
        let rows: Vec<Vec<f64>> = record
            .entries
            .iter()
            .map(|e| std::iter::once(e.window as f64).chain(e.beta_hat.iter().copied()).collect())
            .collect();
        io::write_csv(&dir.join("beta.csv"), &header, &rows)?;

        let mut header = vec!["window".to_string()];
        header.extend((0..n).map(|c| format!("s_{c}")));
        let rows: Vec<Vec<f64>> = record
            .entries
            .iter()
            .map(|e| std::iter::once(e.window as f64).chain(e.signs.iter().map(|&s| f64::from(s))).collect())
            .collect();
        io::write_csv(&dir.join("signs.csv"), &header, &rows)?;

        if args.orient {
            let mut header = vec!["window".to_string()];
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
            header.extend(pairs.iter().map(|(i, j)| format!("theta_{i}_{j}")));
            let rows: Vec<Vec<f64>> = record
                .entries
                .iter()
                .filter_map(|e| e.oriented.as_ref().map(|o| (e.window, angles_out(&o.theta, unit))))
                .map(|(w, t)| std::iter::once(w as f64).chain(pairs.iter().map(|&(i, j)| t[(i, j)])).collect())
                .collect();
            io::write_csv(&dir.join("theta.csv"), &header, &rows)?;
        }
    }
    io::write_json(args.out, &value)
}

pub fn dispersion(
    input: &Path,
    y_col: Option<&str>,
    windows: &Windowing,
    refine: bool,
    series_dir: Option<&Path>,
    out: Option<&Path>,
    common: &Common,
) -> Result<(), CliError> {
    let table = io::read_table(input)?;
    let (panel, _) = split_columns(&table, y_col)?;
    let n = panel.ncols();
    let config = window_config(windows, n)?;
    let placeholder = DVector::zeros(panel.nrows());
    let opts = orient_options(common);
    let mut members = Vec::new();
    for (w, (p, _)) in split_windows(&panel, &placeholder, config)?.into_iter().enumerate() {
        let oriented = decompose_panel(&p, common.centering())
            .and_then(|d| orient_eigenvectors_with(&d.system, &opts))
            .map_err(|e| CliError::Library(eigenorient::Error::Window { window: w, source: Box::new(e) }))?;
        members.push(oriented);
    }
    if members.len() < 2 {
        return Err(CliError::Validation(format!(
            "dispersion needs at least 2 windows, panel of {} rows gives {}",
            panel.nrows(),
            members.len()
        )));
    }
    let ensemble = BasisEnsemble::new(members)?;
    let mean = mean_eigenbasis(&ensemble)?;
    let report = dispersion_with(&ensemble, &DispersionOptions { refine })?;
    let unit = common.angle_unit;

    if let Some(dir) = series_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let header: Vec<String> = ["subspace", "dim", "r_bar", "circular_variance", "kappa", "capped"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                vec![
                    k as f64,
                    report.dims[k] as f64,
                    report.r_bar[k],
                    report.circular_variance[k],
                    report.kappa_basis[k],
                    if report.kappa_capped[k] { 1.0 } else { 0.0 },
                ]
            })
            .collect();
        io::write_csv(&dir.join("kappa.csv"), &header, &rows)?;
    }

    let value = json!({
        "n": n,
        "windows": ensemble.len(),
        "r_bar": io::vector(&report.r_bar),
        "circular_variance": io::vector(&report.circular_variance),
        "kappa_basis": io::vector(&report.kappa_basis),
        "kappa_capped": report.kappa_capped,
        "dims": report.dims,
        "lambda_bar": io::vector(&mean.lambda_bar),
        "theta_bar": io::matrix(&angles_out(&mean.theta_bar, unit)),
        "theta_unit": unit.name(),
        "V_bar": io::matrix(&mean.v_bar),
    });
    io::write_json(out, &value)
}

pub fn regress(
    input: &Path,
    y_col: &str,
    q: usize,
    test: Option<&Path>,
    out: Option<&Path>,
    common: &Common,
) -> Result<(), CliError> {
    let table = io::read_table(input)?;
    let (panel, y) = split_columns(&table, Some(y_col))?;
    let y = y.expect("response column requested");
    let n = panel.ncols();
    let (train, means) = if common.centering() {
        panel.centered()
    } else {
        (panel.clone(), DVector::zeros(n))
    };
    let decomposition = decompose_panel(&train, false)?;
    let oriented = orient_eigenvectors_with(&decomposition.system, &orient_options(common))?;
    let model = fit_oriented(&y, &decomposition, &oriented, q)?;
    let unit = common.angle_unit;

    let mut value = json!({
        "n": n,
        "q": q,
        "beta": io::vector(&model.beta_hat),
        "signs": signs_json(&oriented.signs),
        "eigenvalues": io::vector(&oriented.eor),
        "theta": io::matrix(&angles_out(&oriented.theta, unit)),
        "theta_unit": unit.name(),
        "residual_rms": io::num(model.residual_rms),
    });

    if let Some(path) = test {
        let test_table = io::read_table(path)?;
        let has_y = test_table.data.ncols() == table.data.ncols();
        let (out_panel, y_out) = split_columns(&test_table, has_y.then_some(y_col))?;
        if out_panel.ncols() != n {
            return Err(CliError::Validation(format!(
                "test panel has {} feature columns, training has {n}",
                out_panel.ncols()
            )));
        }
        // Same centring as the training panel.
        let mut shifted = out_panel.data().clone();
        for (c, mut col) in shifted.column_iter_mut().enumerate() {
            col.add_scalar_mut(-means[c]);
        }
        let prediction = predict(&Panel::from_matrix(shifted)?, &model)?;
        value["predictions"] = io::vector(&prediction);
        if let Some(y_out) = y_out {
            let rms = ((prediction - y_out).norm_squared() / out_panel.nrows() as f64).sqrt();
            value["prediction_rms"] = io::num(rms);
        }
    }
    io::write_json(out, &value)
}

pub struct SynthArgs<'a> {
    pub axes: &'a [f64],
    pub theta: &'a [f64],
    pub m: usize,
    pub windows: usize,
    pub noise: f64,
    pub weights: &'a [f64],
    pub y_noise: f64,
    pub seed: u64,
    pub angle_unit: AngleUnit,
    pub out: Option<&'a Path>,
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let n = args.axes.len();
    let pairs = n * n.saturating_sub(1) / 2;
    let mut angles = DMatrix::zeros(n, n);
    if !args.theta.is_empty() {
        if args.theta.len() != pairs {
            return Err(CliError::Validation(format!(
                "--theta needs {pairs} upper-triangle angles for {n} axes, got {}",
                args.theta.len()
            )));
        }
        let mut it = args.theta.iter();
        for i in 0..n {
            for j in i + 1..n {
                angles[(i, j)] = *it.next().expect("counted");
            }
        }
    }
    if args.windows == 0 {
        return Err(CliError::Validation("--windows must be at least 1".into()));
    }
    let cloud = EllipsoidSpec {
        axis_lengths: args.axes.to_vec(),
        rotation_theta: angles_in(angles, args.angle_unit)?,
        m: args.m,
        noise_sigma: args.noise,
        seed: args.seed,
    };
    let with_y = !args.weights.is_empty();
    let weights = if with_y { args.weights.to_vec() } else { vec![0.0; n] };
    let (panels, ys) = regression_stream(&cloud, args.windows, &weights, args.y_noise)?;

    let mut text = String::new();
    let mut header: Vec<String> = (0..n).map(|c| format!("x{c}")).collect();
    if with_y {
        header.push("y".into());
    }
    text.push_str(&header.join(","));
    text.push('\n');
    for (panel, y) in panels.iter().zip(&ys) {
        for r in 0..panel.nrows() {
            let mut cells: Vec<String> = panel.data().row(r).iter().map(|&x| io::round12(x).to_string()).collect();
            if with_y {
                cells.push(io::round12(y[r]).to_string());
            }
            text.push_str(&cells.join(","));
            text.push('\n');
        }
    }
    io::write_output(args.out, &text)
}

pub fn walkthrough(r4: bool, out: Option<&Path>) -> Result<(), CliError> {
    let transcript = if r4 {
        eigenorient::walkthrough::reconstruction_r4()?
    } else {
        eigenorient::walkthrough::walkthrough_r3()?
    };
    io::write_output(out, &transcript.to_markdown())
}
