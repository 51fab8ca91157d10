use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("mesh has no triangles left after dropping {dropped} degenerate ones")]
    EmptyMesh { dropped: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("size mismatch: {left} vs {right} points")]
    SizeMismatch { left: usize, right: usize },
    #[error("exact EMD is limited to {cap} points, got {n}; use emd_approx instead")]
    ExactCapExceeded { n: usize, cap: usize },
    #[error("auction did not converge within {0} bidding rounds")]
    NonConvergence(usize),
    #[error("cannot draw {requested} points from a cloud of {available}")]
    NotEnoughPoints { requested: usize, available: usize },
    #[error("label {0} is not present in the mask")]
    LabelAbsent(u32),
    #[error("pixel {pixel} has color {color:?}, which is not in the palette")]
    UnknownColor { pixel: usize, color: [u8; 3] },
    #[error("loss became non-finite at epoch {0}")]
    Divergence(usize),
    #[error("no records for group {0}")]
    EmptyGroup(String),
    #[error("missing checkpoint {0}")]
    MissingCheckpoint(PathBuf),
    #[error("config: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Errors caused by the request itself (bad config, bad input files,
    /// missing checkpoints) rather than by a pipeline stage.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Invalid(_)
                | Error::Config(_)
                | Error::MissingCheckpoint(_)
                | Error::EmptyMesh { .. }
                | Error::LabelAbsent(_)
                | Error::UnknownColor { .. }
        )
    }

    /// Tags an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
