use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),

    #[error("conditioning event has zero probability")]
    ZeroProbability,

    #[error("law is not lattice; use the lattice coupling")]
    NonLattice,

    #[error("block index k = {0} is out of range")]
    BlockIndex(u32),

    #[error("expected {expected} increments, got {got}")]
    Length { expected: usize, got: usize },

    #[error("acceptance ratio {ratio} > 1 at k = {k}, branch {branch}")]
    RatioViolation { k: u32, branch: u8, ratio: f64 },

    #[error("watchdog tripped after {0} function evaluations")]
    Watchdog(u64),

    #[error("no feasible m in [1, 1e9]")]
    NoFeasibleM,

    #[error("too few batches: {0} (need at least 30)")]
    TooFewBatches(usize),

    #[error("empty sample")]
    EmptySample,
}
