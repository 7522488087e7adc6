use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed dyadic literal `{0}`")]
    Dyadic(String),

    #[error("window {window} is not aligned to level {level}")]
    Misaligned { window: String, level: u32 },

    #[error("level {have} is too coarse, need at least {need}")]
    LevelTooCoarse { have: u32, need: u32 },

    #[error("time {0} is not a dyadic stage endpoint of the schedule")]
    NotStageEndpoint(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("windows do not overlap")]
    DisjointWindows,

    #[error("test function support escapes the field window")]
    SupportEscape,

    #[error("CFL number {cfl} exceeds 0.5")]
    Cfl { cfl: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("decode error: {0}")]
    Decode(String),

    #[error("configuration errors: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            msg: err.to_string(),
        }
    }
}
