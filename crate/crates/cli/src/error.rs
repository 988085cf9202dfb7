use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("path not found: {}", .0.display())]
    MissingPath(PathBuf),
    #[error(transparent)]
    Core(#[from] eirm_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
