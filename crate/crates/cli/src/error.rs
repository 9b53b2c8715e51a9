use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: node index {index} out of range for {nodes} nodes")]
    NodeOutOfRange {
        line: usize,
        index: usize,
        nodes: usize,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("no tuning candidate passed verification ({0} tried)")]
    NoVerifiedCandidate(usize),

    #[error(transparent)]
    Engine(#[from] bingnn::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
