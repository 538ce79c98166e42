use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] uos_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
