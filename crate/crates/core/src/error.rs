use crate::gf2::BitVec;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("inconsistent system: right-hand side is outside the column space")]
    InconsistentSystem,

    #[error("matrix is not full row rank (rank {rank}, rows {rows})")]
    RankDeficient { rank: usize, rows: usize },

    #[error("cannot sample a full-row-rank {rows}x{cols} matrix")]
    TooManyRows { rows: usize, cols: usize },

    #[error("code has no information bits (m = n = {n})")]
    DegenerateCode { n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("probability {value} outside {range}")]
    InvalidProbability { value: f64, range: &'static str },

    #[error("KL divergence is infinite (q = {q}, p = {p})")]
    InfiniteDivergence { q: f64, p: f64 },

    #[error("coset leader table too large: m = {m} exceeds 24")]
    TableTooLarge { m: usize },

    #[error("instance too large for exact oracle: {0}")]
    InstanceTooLarge(String),

    #[error("hypothesis violated: rows are linearly dependent (row combination {combination})")]
    HypothesisViolated { combination: BitVec },

    #[error(
        "target matrix is not rank-dependent on the compromised stack (residual rank {residual})"
    )]
    NotRankDependent { residual: usize },

    #[error("system index {index} out of range ({count} systems)")]
    InvalidIndex { index: usize, count: usize },

    #[error("combinatorial guard exceeded: {0}")]
    CombinatorialGuard(String),

    #[error("inconsistent scenario: {0}")]
    InconsistentScenario(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
