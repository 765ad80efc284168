use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty interval [{lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("{what} = {value} is below the minimum {min}")]
    BelowMinimum {
        what: &'static str,
        value: usize,
        min: usize,
    },
    #[error("non-finite parameter: {0}")]
    NonFinite(&'static str),
    #[error("edge-of-spectrum: lambda = {lambda} is within {margin} of the spectrum edge")]
    EdgeOfSpectrum { lambda: f64, margin: f64 },
    #[error("spectral parameter must have positive imaginary part, got {0}")]
    NonPositiveImaginary(f64),
    #[error("home space mismatch: expected {expected}, got {got}")]
    HomeSpaceMismatch {
        expected: &'static str,
        got: &'static str,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("window must be a bounded open interval")]
    UnboundedWindow,
    #[error("lambda = {lambda} is not inside window ({lo}, {hi}) with margin {margin}")]
    OutsideWindow {
        lambda: f64,
        lo: f64,
        hi: f64,
        margin: f64,
    },
    #[error("embedded resonance at lambda = {lambda} (condition number {condition:e})")]
    Resonance { lambda: f64, condition: f64 },
    #[error("LAP violation: imaginary part has eigenvalue {min_eigenvalue:e}")]
    LapViolation { min_eigenvalue: f64 },
    #[error("rank-deficient evaluation operator at lambda = {lambda}")]
    RankDeficient { lambda: f64 },
    #[error("fiber rank mismatch between windows: {source_rank} vs {target_rank}")]
    FiberRankMismatch {
        source_rank: usize,
        target_rank: usize,
    },
    #[error("well-definedness violated: residual {residual:e}")]
    WellDefinedness { residual: f64 },
    #[error("lambda = {lambda} is not regular for every operator involved")]
    Irregular { lambda: f64 },
    #[error("not converged: Cauchy tail {tail:e}")]
    NotConverged { tail: f64 },
    #[error("step control failure: error bound {bound:e}")]
    StepControl { bound: f64 },
    #[error("mass accounting defect {defect:e}")]
    MassDefect { defect: f64 },
    #[error("missing blocks at lambda = {lambdas:?}")]
    MissingBlocks { lambdas: Vec<f64> },
    #[error("perturbation is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("operation requires a {0} model")]
    WrongModel(&'static str),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
