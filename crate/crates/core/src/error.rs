use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("value {value} of feature `{feature}` in row {row} is outside the bin edge range ({lo}, {hi}]")]
    OutOfRange {
        feature: String,
        row: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid binning spec: {0}")]
    BinningSpec(String),

    #[error("invalid support: {0}")]
    Support(String),

    #[error("ERM did not converge after {iterations} iterations (gradient inf-norm {grad_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        last: Vec<f64>,
    },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("empty Rashomon set under quadratic model: threshold {theta} does not exceed ERM loss {loss}")]
    EmptyRashomonSet { theta: f64, loss: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid merge plan: {0}")]
    Plan(String),

    #[error("zero objective vector")]
    ZeroObjective,

    #[error("feature {feature} has {bins} coordinates; sign enumeration is limited to {limit} (use coarser bins)")]
    EnumerationLimit {
        feature: usize,
        bins: usize,
        limit: usize,
    },

    #[error("center-slice infeasible: fixing the other coordinates at the center leaves an empty set")]
    InfeasibleSlice,

    #[error("coordinate search did not terminate: {0}")]
    Search(String),

    #[error("starting point is outside the Rashomon set (loss {loss} > {theta})")]
    OutsideSet { loss: f64, theta: f64 },

    #[error("count overflow: {0}")]
    Overflow(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable identifier, used by the HTTP layer.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Dataset(_) => "dataset",
            Error::OutOfRange { .. } => "out_of_range",
            Error::BinningSpec(_) => "binning_spec",
            Error::Support(_) => "support",
            Error::NonConvergence { .. } => "non_convergence",
            Error::NotSpd(_) => "not_spd",
            Error::EmptyRashomonSet { .. } => "empty_rashomon_set",
            Error::Config(_) => "config",
            Error::Plan(_) => "plan",
            Error::ZeroObjective => "zero_objective",
            Error::EnumerationLimit { .. } => "enumeration_limit",
            Error::InfeasibleSlice => "infeasible_slice",
            Error::Search(_) => "search",
            Error::OutsideSet { .. } => "outside_set",
            Error::Overflow(_) => "overflow",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
