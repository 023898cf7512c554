use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Library(#[from] eigenorient::Error),
}

impl CliError {
    /// Machine-readable form written to standard error.
    pub fn to_json(&self) -> Value {
        match self {
            CliError::Parse(msg) => json!({ "error": "ParseError", "message": msg }),
            CliError::Validation(msg) => json!({ "error": "ValidationError", "message": msg }),
            CliError::Io(msg) => json!({ "error": "IoError", "message": msg }),
            CliError::Library(e) => {
                let mut v = json!({
                    "error": "ValidationError",
                    "kind": e.kind(),
                    "message": e.to_string(),
                });
                if let Some(w) = e.window() {
                    v["window"] = w.into();
                }
                v
            }
        }
    }
}

