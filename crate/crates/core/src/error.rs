use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty graph")]
    EmptyGraph,

    #[error("node id {id} out of range for graph with {node_count} nodes")]
    NodeOutOfRange { id: usize, node_count: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("partition covers {got} nodes, expected {expected}")]
    PartitionSize { expected: usize, got: usize },

    #[error("benchmark generation failed: {0}")]
    Generation(String),

    /// An internal invariant was violated. Indicates a bug rather than bad input.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
