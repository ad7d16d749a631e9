use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no price basis: no transactions and no auction price for {0}")]
    NoPriceBasis(String),

    #[error("transaction {index} ({trade_id}) lies outside the trading grid of {delivery}")]
    OutsideGrid {
        index: usize,
        trade_id: String,
        delivery: String,
    },

    #[error("transaction {index} ({trade_id}) belongs to {found}, expected {expected}")]
    WrongDelivery {
        index: usize,
        trade_id: String,
        found: String,
        expected: String,
    },

    #[error("variable not yet available: minute {minute} precedes shift {shift}")]
    NotYetAvailable { minute: i64, shift: i64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate distance distribution: {0}")]
    DegenerateDistances(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("channel `{channel}` unavailable at origin {origin}: {reason}")]
    ChannelUnavailable {
        channel: String,
        origin: String,
        reason: String,
    },

    #[error("coverage gap in series `{series}` at minute {minute}")]
    CoverageGap { series: String, minute: i64 },

    #[error("index misalignment: {0}")]
    IndexMisalignment(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty horizon: band start step {from_step} leaves nothing of horizon {horizon}")]
    EmptyHorizon { from_step: usize, horizon: usize },

    #[error("reference price {price} outside transformed curve [{low}, {high}]")]
    ReferenceOutsideCurve { price: f64, low: f64, high: f64 },

    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    #[error("missing transform state: {0}")]
    MissingTransform(&'static str),

    #[error("insufficient training days: need at least {needed}, have {available}")]
    InsufficientTraining { needed: usize, available: usize },

    #[error("inconsistent trade state: {0}")]
    InconsistentState(String),

    #[error("empty grid")]
    EmptyGrid,

    #[error("artifact format: {0}")]
    Artifact(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("missing artifact {path}; run `{producer}` first")]
    MissingArtifact { path: String, producer: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 for invalid input or configuration, 3 for a
    /// missing upstream artifact, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingArtifact { .. } => 3,
            Error::Config { .. }
            | Error::InvalidParameter(_)
            | Error::Csv { .. }
            | Error::NoPriceBasis(_)
            | Error::OutsideGrid { .. }
            | Error::WrongDelivery { .. }
            | Error::CoverageGap { .. }
            | Error::ChannelUnavailable { .. }
            | Error::InsufficientTraining { .. }
            | Error::DegenerateTraining(_)
            | Error::EmptyGrid => 2,
            _ => 1,
        }
    }
}
