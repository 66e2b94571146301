use alloc::string::String;

use crate::monge::Pair;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("value out of range: {0}")]
    RangeError(String),
    #[error("bad distribution: {0}")]
    BadDistribution(String),
    #[error("infeasible decision: {0}")]
    Infeasible(String),
    #[error("carry-over rate is not 0 or 1: {0}")]
    NonIntegerCarryOver(String),
    #[error("pairs {0:?} and {1:?} are not neighbors")]
    NotNeighbors(Pair, Pair),
    #[error("the square inequality fails, the strong relation is empty")]
    StrongConditionFails,
    #[error("trace step {step} is infeasible")]
    InfeasibleTrace { step: usize },
    #[error("state budget of {limit} entries exceeded")]
    BudgetExceeded { limit: usize },
    #[error("period {t} state not covered by the table")]
    StateNotCovered { t: usize },
    #[error("transfer lost optimality: value {value} < optimum {optimum}")]
    NotOptimalAfterTransfer { value: f64, optimum: f64 },
    #[error("transfers did not reach a compatible decision within {steps} steps")]
    TransferDidNotConverge { steps: usize },
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("total quantity {q} outside 0..={max}")]
    QuantityOutOfRange { q: u32, max: u32 },
    #[error("instance is not a vertical model")]
    NotVertical,
    #[error("instance does not have the one-level upgrading structure")]
    NotOneLevelStructure,
    #[error("parameter sequence {0} increases over time")]
    MonotoneParamViolated(String),
    #[error("supply class costs must be strictly decreasing")]
    BadClassOrder,
    #[error("policy {policy} returned an infeasible decision at period {t}: {detail}")]
    PolicyInfeasibleDecision { policy: String, t: usize, detail: String },
}
