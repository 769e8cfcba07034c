use thiserror::Error;

/// Every failure the engine can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: cannot parse {column}: {message}")]
    ParseFailure {
        row: usize,
        column: String,
        message: String,
    },
    #[error("row {row}: {reason}")]
    InvariantViolation { row: usize, reason: String },
    #[error("Kaplan-Meier needs right-censored or event records only (row {0})")]
    UnsupportedStatus(usize),
    #[error("no uncensored event times to place internal knots")]
    EmptyUncensoredSet,
    #[error("invalid knots: {0}")]
    InvalidKnots(String),
    #[error("time {0} is outside the spline support")]
    OutOfSupport(f64),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("no closed-form cumulative hazard for this family")]
    AnalyticFormUnavailable,
    #[error("interval probability underflows to zero")]
    NonPositiveMass,
    #[error("quadrature order {0} is not one of 7, 11, 15")]
    UnsupportedOrder(usize),
    #[error("integrand is not finite at node {0}")]
    NonFiniteIntegrand(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),
    #[error("value {0} is outside the prior's support")]
    PriorOutOfSupport(f64),
    #[error("invalid simplex")]
    InvalidSimplex,
    #[error("invalid Cholesky factor of a correlation matrix")]
    InvalidCholesky,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("non-finite log likelihood for record {record}: {detail}")]
    NonFiniteLogLik { record: usize, detail: String },
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("every post-warmup transition diverged")]
    AllDivergent,
    #[error("no finite initial point after {0} attempts")]
    NonFiniteInit(usize),
    #[error("optimizer hit the iteration limit ({0})")]
    MaxIterations(usize),
    #[error("line search failed")]
    LineSearchFailure,
    #[error("prediction time {time} exceeds T_max = {t_max}")]
    ExtrapolationBeyondTmax { time: f64, t_max: f64 },
    #[error("unknown quantity `{0}`")]
    UnknownQuantity(String),
    #[error("condition time {0} is not before every prediction time")]
    ConditionAfterPredictionTime(f64),
    #[error("at least two draws are needed")]
    DegenerateDraws,
    #[error("models were evaluated on different units")]
    UnitMismatch,
    #[error("need at least 2 chains with 4 draws each")]
    InsufficientDraws,
    #[error("root not bracketed for subject {0}")]
    RootNotBracketed(usize),
    #[error("syntax error at position {position}: {message}")]
    SyntaxError { position: usize, message: String },
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("formula has more than one response")]
    DuplicateResponse,
    #[error("ambiguous spline options: give either df or knots, not both")]
    AmbiguousSplineOptions,
    #[error("bundle version {found} is not supported (expected {expected})")]
    BundleVersionMismatch { found: u32, expected: u32 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the caller's input or the filesystem rather than the model.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::MissingColumn(_)
                | Error::ParseFailure { .. }
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::SyntaxError { .. }
                | Error::UnknownFunction(_)
                | Error::DuplicateResponse
                | Error::AmbiguousSplineOptions
                | Error::Config(_)
                | Error::UnknownQuantity(_)
                | Error::UnsupportedFamily(_)
                | Error::UnsupportedOrder(_)
                | Error::BundleVersionMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
