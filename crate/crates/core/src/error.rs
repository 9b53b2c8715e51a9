use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("{variant}: operand {position} must be {expected}")]
    OperandKind {
        variant: String,
        position: &'static str,
        expected: &'static str,
    },

    #[error("invalid kernel variant: {0}")]
    InvalidVariant(String),

    #[error("precision chain mismatch: {0}")]
    PrecisionChain(String),

    #[error("unknown trinary strategy: {0}")]
    UnknownStrategy(String),

    #[error("edge #{index} ({src}, {dst}) out of range for {nodes} nodes")]
    EdgeOutOfRange {
        index: usize,
        src: usize,
        dst: usize,
        nodes: usize,
    },

    #[error("tileset ({tile_row}, {set_index}) out of range")]
    TilesetOutOfRange { tile_row: usize, set_index: usize },

    #[error("invalid scale vector: {0}")]
    InvalidScale(String),

    #[error("malformed FRDC data: {0}")]
    Format(String),

    #[error("layer {index}: {source}")]
    Layer {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid model: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dims(op: &'static str, detail: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn in_layer(self, index: usize) -> Self {
        Error::Layer {
            index,
            source: Box::new(self),
        }
    }
}
