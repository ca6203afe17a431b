use std::path::PathBuf;

/// Error type shared by every sharpflow-core module.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("grid must be square, got {rows}x{cols}")]
    NonSquareGrid { rows: usize, cols: usize },

    #[error("grid resolution {m} cannot represent the mode cutoff {n}; need m >= n")]
    GridTooCoarse { m: usize, n: usize },

    #[error("mode cutoff must be at least 1")]
    ZeroCutoff,

    #[error("time must be nonnegative, got {t}")]
    NegativeTime { t: f64 },

    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("field cutoffs differ: {left} vs {right}")]
    CutoffMismatch { left: usize, right: usize },

    #[error("solution blew up at step {step}: sup |u| = {sup:.3e} exceeds {limit}")]
    BlowUp { step: usize, sup: f64, limit: f64 },

    #[error(
        "interface sits too close to the domain boundary: clearance {clearance:.4} < 4*eps = {required:.4}"
    )]
    ClearanceViolation { clearance: f64, required: f64 },

    #[error("this check is only defined for circle interfaces")]
    NotACircle,

    #[error("pointwise or averaged renormalization requires the divergence noise family")]
    RenormWithoutMollifier,

    #[error("snapshot file {path}: {reason}")]
    SnapshotFormat { path: PathBuf, reason: String },

    #[error("trajectory record is empty; need at least one snapshot")]
    EmptyTrajectory,

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
