use std::path::PathBuf;

/// Errors produced by graph loading, inference and training.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{msg} (lines {})", join_lines(.lines))]
    Validation { msg: String, lines: Vec<usize> },

    #[error("node index {index} out of range for graph with {num_nodes} nodes")]
    Index { index: usize, num_nodes: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("trace contains no snapshots")]
    EmptyTrace,

    #[error("evaluation mask selects no nodes")]
    EmptyMask,

    #[error("numerical failure at epoch {epoch}: {msg}")]
    Numerical {
        epoch: usize,
        last_good: Option<usize>,
        msg: String,
    },

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn join_lines(lines: &[usize]) -> String {
    lines
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
