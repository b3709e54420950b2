use std::fmt;
use std::io;
use std::path::Path;

/// Where in an input file a parse error was detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Byte(u64),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(l) => write!(f, "line {l}"),
            Location::Byte(b) => write!(f, "byte {b}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("parse error at {location}: {message}")]
    Parse { location: Location, message: String },
    #[error("bad magic: expected \"{}\", found \"{}\"", .expected.escape_ascii(), .found.escape_ascii())]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt stream: {0}")]
    Corrupt(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{0}")]
    Config(String),
    #[error("weights: {0}")]
    Weights(String),
    #[error("model mismatch: stream was coded with model hash {header:016x}, got {model:016x}")]
    ModelMismatch { header: u64, model: u64 },
    #[error("model mismatch: {0}")]
    WrongModel(String),
}

/// Coarse error classes, used by the command-line tool to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Format,
    Config,
    Model,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Io => 2,
            ErrorKind::Format => 3,
            ErrorKind::Config => 4,
            ErrorKind::Model => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Io => "io",
            ErrorKind::Format => "format",
            ErrorKind::Config => "config",
            ErrorKind::Model => "model",
        }
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_) => ErrorKind::Io,
            Error::Parse { .. }
            | Error::BadMagic { .. }
            | Error::UnsupportedVersion(_)
            | Error::Corrupt(_) => ErrorKind::Format,
            Error::InvalidInput(_) | Error::Config(_) => ErrorKind::Config,
            Error::Weights(_) | Error::ModelMismatch { .. } | Error::WrongModel(_) => {
                ErrorKind::Model
            }
        }
    }

    pub(crate) fn parse_line(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            location: Location::Line(line),
            message: message.into(),
        }
    }

    pub(crate) fn parse_byte(offset: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            location: Location::Byte(offset),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// `fs::read` with the path in the error message.
pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| with_path(path, e))
}

/// `fs::write` with the path in the error message.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| with_path(path, e))
}

pub fn with_path(path: &Path, e: io::Error) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}
