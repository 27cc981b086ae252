use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the SLAM engine, the simulator and the file formats.
#[derive(Debug, Error)]
pub enum SlamError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),

    #[error("invalid scan: {0}")]
    InvalidScan(String),

    #[error("invalid world: {0}")]
    InvalidWorld(String),

    #[error("invalid lidar model: {0}")]
    InvalidLidar(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("pose {x:.3} {y:.3} outside world bounds")]
    OutOfBounds { x: f64, y: f64 },

    #[error("trajectory leaves world bounds at t={t:.3}s ({x:.3}, {y:.3})")]
    TrajectoryOutOfBounds { t: f64, x: f64, y: f64 },

    #[error("robot pose ({x:.3}, {y:.3}) left the local map extent")]
    LeftLocalMap { x: f64, y: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("view {0} is already linked")]
    AlreadyLinked(usize),

    #[error("unknown experience id {0}")]
    UnknownExperience(usize),

    #[error("transition endpoints must differ (node {0})")]
    SelfLoop(usize),

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<SlamError>,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SlamError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SlamError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        SlamError::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = SlamError> = std::result::Result<T, E>;
