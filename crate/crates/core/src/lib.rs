//! Periodic-review dynamic matching between heterogeneous demand and supply types.
//!
//! The crate is `no_std` (with `alloc`). It carries the problem definitions, the exact
//! finite-horizon DP oracle, the dominance/priority analysis, the structured policy
//! families, the instance builders and a seeded path simulator. File formats, parallel
//! replication and the CLI live in the `typematch` crate.
//!
//! Indexing is zero-based everywhere: period `t` runs over `0..horizon`, demand types over
//! `0..m` and supply types over `0..n`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod dp;
pub mod error;
pub mod instance;
pub mod models;
pub mod monge;
pub mod policies;
pub mod rng;
pub mod sim;
pub mod transport;

pub use dp::{
    evaluate_policy_exact, policy_trace, solve_exact, ActionSet, ExactSolver, SolverOptions,
    TraceStep, ValueTable,
};
pub use error::Error;
pub use instance::{
    apply_decision, fold_waiting_costs, reward_of, transition, ArrivalModel, CarryOver,
    MatchingDecision, MatchingInstance, ModelTag, PostMatchState, RewardMatrix, SystemState,
    WaitingCosts,
};
pub use monge::{
    audit_compatibility, build_dominance_graph, is_perfect_pair, priority_tiers, weak_dominates,
    AuditMode, CompatibilityReport, DominanceGraph, Pair, PriorityTiers,
};
pub use policies::Policy;
pub use transport::{max_weight_transport, tier_greedy_transport, TransportResult};

/// Absolute tolerance for every value comparison.
pub const TOL: f64 = 1e-9;
