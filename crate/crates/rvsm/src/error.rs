use std::fmt;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where in a file a parse problem was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(u64),
    /// Zero-based index of a PLY vertex.
    Vertex(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Vertex(i) => write!(f, "vertex {i}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}, {location}: {message}", path.display())]
    Parse { path: PathBuf, location: Location, message: String },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] rvsm_core::Error),

    /// A class model failed numerically during training.
    #[error("training class {class_id} failed: {source}")]
    Training { class_id: u32, source: rvsm_core::Error },

    #[error("{0}")]
    Benchmark(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, location: Location, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), location, message: message.into() }
    }

    /// Process exit status: 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(e) if !e.is_input_error() => 3,
            Error::Training { .. } | Error::Benchmark(_) => 3,
            _ => 2,
        }
    }
}
