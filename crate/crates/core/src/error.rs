use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("matrix dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix is not hermitian: deviation {deviation:e} exceeds tolerance {tolerance:e}")]
    NotHermitian { deviation: f64, tolerance: f64 },
    #[error("buffer holds {found} entries, expected {expected}")]
    BufferLength { expected: usize, found: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("q = {0} lies outside [0, 1]")]
    QOutOfRange(f64),
    #[error("matrix size must be positive")]
    ZeroDimension,
    #[error("couplings must be finite")]
    NonFiniteCoupling,
    #[error("state has dimension {state}, model expects {expected}")]
    StateDimension { expected: usize, state: usize },
    #[error("trace has imaginary part {imaginary:e} above bound {bound:e}")]
    ImaginaryTrace { imaginary: f64, bound: f64 },
    #[error("q-monotonicity check requires g, h >= 0 and q1 < q2")]
    MonotonicityDomain,
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("unexpected character {0:?} in word")]
    InvalidCharacter(char),
    #[error("exponent without a preceding letter")]
    DanglingExponent,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("invalid chain configuration: {0}")]
    InvalidConfig(String),
    #[error("hermiticity lost after {attempts} consecutive re-symmetrisations")]
    HermiticityLost { attempts: usize },
    #[error("missing correlator estimate for {0}")]
    MissingCorrelator(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("endpoint verdicts must be (True, False); got ({green:?}, {red:?})")]
    EndpointVerdicts { green: String, red: String },
    #[error("separation must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("search must start away from the origin")]
    StartAtOrigin,
    #[error("start point is already {0}; use the other search direction")]
    StartVerdict(bool),
    #[error("step budget of {0} exhausted without a verdict change")]
    BudgetExhausted(usize),
    #[error("full sweep of {0} angular steps without a verdict change")]
    FullCircle(usize),
    #[error("ray reached the origin without a convergent point")]
    OriginNotConvergent,
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("unrecognised dummy evaluator {0:?}")]
    InvalidDummy(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {needed} points beyond the cut, found {found}")]
    InsufficientPoints { needed: usize, found: usize },
    #[error("no samples")]
    NoSamples,
    #[error("missing moment for word {0}")]
    MissingMoment(String),
    #[error("flow point g = {0} is within 1e-6 of the pole 2g = 3")]
    PoleProximity(f64),
    #[error("runs are not paired at (g, h) and (g, -h): {0}")]
    Unpaired(String),
    #[error("root bracket [{lo}, {hi}] does not change sign")]
    NoBracket { lo: f64, hi: f64 },
}
