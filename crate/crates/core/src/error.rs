use std::path::PathBuf;

/// Errors raised anywhere in the reachability pipeline.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("lift at step {step}: {source}")]
    Lift {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite training loss at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("degenerate snapshot window: every singular value is below the truncation threshold")]
    DegenerateWindow,

    #[error("degenerate set: axis {axis} has zero half-width")]
    DegenerateSet { axis: usize },

    #[error("ill-conditioned lift at step {step}: condition number {cond:e}")]
    IllConditionedLift { step: usize, cond: f64 },

    #[error("contact front at step {step} leaves its own halfspaces: {detail}")]
    Sandwich { step: usize, detail: String },

    #[error("misaligned inputs: {0}")]
    Misaligned(String),

    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),

    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI.
    ///
    /// 1 is reserved for validation failures, which are not errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Toml(_)
            | Error::MissingArtifact(_)
            | Error::Io { .. }
            | Error::Json(_)
            | Error::Csv(_)
            | Error::Checkpoint(_)
            | Error::Misaligned(_)
            | Error::Shape(_) => 2,
            Error::Trajectory { source, .. }
            | Error::Sample { source, .. }
            | Error::Lift { source, .. } => source.exit_code(),
            Error::NonFinite { .. }
            | Error::Divergence { .. }
            | Error::DegenerateWindow
            | Error::DegenerateSet { .. }
            | Error::IllConditionedLift { .. }
            | Error::Sandwich { .. } => 3,
        }
    }

    /// Innermost error, skipping index wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Trajectory { source, .. }
            | Error::Sample { source, .. }
            | Error::Lift { source, .. } => source.root(),
            e => e,
        }
    }
}
