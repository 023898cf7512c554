use thiserror::Error;

/// Errors raised by orientation, directional statistics and the regression pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("basis is not orthonormal: max |VᵀV - I| = {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    NonOrthonormalInput { residual: f64, tolerance: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("pivot entry {value:.3e} is negative; the column must be reflected before solving angles")]
    PivotNegative { value: f64 },

    #[error("Givens axes ({i}, {j}) out of range for dimension {n}")]
    AxisOutOfRange { n: usize, i: usize, j: usize },

    #[error("subspace index {k} out of range for dimension {n}")]
    SubspaceOutOfRange { n: usize, k: usize },

    #[error("angle matrix is invalid: {0}")]
    InvalidAngles(String),

    #[error("mean direction undefined: resultant norm {norm:.3e}")]
    UndefinedMeanDirection { norm: f64 },

    #[error("mean basis is far from orthogonal: polar correction {correction:.3e} exceeds {tolerance:.3e}")]
    NonOrthogonalMean { correction: f64, tolerance: f64 },

    #[error("ensemble is degenerate in subspace {subspace}: resultant norm {norm:.3e}")]
    DegenerateEnsemble { subspace: usize, norm: f64 },

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid dimension {0}: need at least 2")]
    InvalidDimension(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular design: retained component {component} has sqrt(lambda) = {value:.3e}")]
    SingularDesign { component: usize, value: f64 },

    #[error("window {window}: {source}")]
    Window {
        window: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_window(self, window: usize) -> Self {
        match self {
            e @ Error::Window { .. } => e,
            e => Error::Window {
                window,
                source: Box::new(e),
            },
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonOrthonormalInput { .. } => "NonOrthonormalInput",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::PivotNegative { .. } => "PivotNegative",
            Error::AxisOutOfRange { .. } => "AxisOutOfRange",
            Error::SubspaceOutOfRange { .. } => "SubspaceOutOfRange",
            Error::InvalidAngles(_) => "InvalidAngles",
            Error::UndefinedMeanDirection { .. } => "UndefinedMeanDirection",
            Error::NonOrthogonalMean { .. } => "NonOrthogonalMean",
            Error::DegenerateEnsemble { .. } => "DegenerateEnsemble",
            Error::InvalidEnsemble(_) => "InvalidEnsemble",
            Error::InvalidDimension(_) => "InvalidDimension",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::SingularDesign { .. } => "SingularDesign",
            Error::Window { source, .. } => source.kind(),
        }
    }

    /// Window index for errors raised inside a rolling track.
    pub fn window(&self) -> Option<usize> {
        match self {
            Error::Window { window, .. } => Some(*window),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
