//! Policy families. Every policy maps `(t, state)` to a feasible decision.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::dp::ValueTable;
use crate::error::Error;
use crate::instance::{MatchingDecision, MatchingInstance, RewardMatrix, SystemState};
use crate::monge::{priority_tiers, DominanceGraph, PriorityTiers};
use crate::transport::{max_weight_transport, tier_greedy_transport};

pub mod consolidated;
pub mod horizontal;
pub mod iou;
pub mod vertical;

pub use consolidated::{consolidated_protection_policy, ConsolidatedPolicy};
pub use horizontal::{
    compute_protection_levels_2x2, protection_levels_unchecked, two_round_policy_2x2, CollapsedState,
    ProtectionEntry, ProtectionTable, TwoRoundPolicy,
};
pub use iou::{best_iou_policy, iou_admissible};
pub use vertical::{
    optimal_total_quantity, osa_policy, topdown_decision, topdown_policy, OsaMode, OsaPolicy, TopDownPolicy,
    TransformedState, VerticalRewards,
};

/// A state-feedback matching rule.
pub trait Policy: Send + Sync {
    fn name(&self) -> &str;
    fn decide(&self, t: usize, state: &SystemState) -> Result<MatchingDecision, Error>;
}

/// Shared handle to any policy.
pub type PolicyHandle = Arc<dyn Policy>;

/// Policy backed by a closure.
pub struct FnPolicy<F> {
    name: String,
    rule: F,
}

impl<F> FnPolicy<F>
where
    F: Fn(usize, &SystemState) -> Result<MatchingDecision, Error> + Send + Sync,
{
    pub fn new(name: impl Into<String>, rule: F) -> Self {
        Self { name: name.into(), rule }
    }
}

impl<F> Policy for FnPolicy<F>
where
    F: Fn(usize, &SystemState) -> Result<MatchingDecision, Error> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&self, t: usize, state: &SystemState) -> Result<MatchingDecision, Error> {
        (self.rule)(t, state)
    }
}

/// Never matches.
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn name(&self) -> &str {
        "zero"
    }

    fn decide(&self, _t: usize, state: &SystemState) -> Result<MatchingDecision, Error> {
        Ok(MatchingDecision::zeros(state.x.len(), state.y.len()))
    }
}

/// Myopic maximum-reward matching, or the tier walk when tiers are known.
pub struct GreedyPolicy {
    rewards: Vec<RewardMatrix>,
    tiers: Option<PriorityTiers>,
}

impl Policy for GreedyPolicy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn decide(&self, t: usize, state: &SystemState) -> Result<MatchingDecision, Error> {
        let r = &self.rewards[t];
        Ok(match &self.tiers {
            Some(tiers) => tier_greedy_transport(r, state, tiers).q,
            None => max_weight_transport(r, state).q,
        })
    }
}

pub fn greedy_policy(instance: &MatchingInstance, graph: Option<&DominanceGraph>) -> GreedyPolicy {
    let tiers = graph.filter(|g| g.strong_valid).and_then(|g| priority_tiers(g).ok());
    GreedyPolicy { rewards: (0..instance.horizon()).map(|t| instance.rewards(t).clone()).collect(), tiers }
}

/// First maximizer of the Bellman equation at every state.
pub struct OptimalPolicy {
    table: Arc<ValueTable>,
    name: String,
}

impl OptimalPolicy {
    pub fn new(table: Arc<ValueTable>) -> Self {
        Self { table, name: "optimal".into() }
    }

    pub fn named(table: Arc<ValueTable>, name: impl Into<String>) -> Self {
        Self { table, name: name.into() }
    }

    pub fn table(&self) -> &ValueTable {
        &self.table
    }
}

impl Policy for OptimalPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&self, t: usize, state: &SystemState) -> Result<MatchingDecision, Error> {
        self.table.best_action(t, state)
    }
}

/// Optimal decisions transferred until they respect the strong relation.
pub struct CompatibleOptimalPolicy {
    table: Arc<ValueTable>,
    graph: DominanceGraph,
}

impl CompatibleOptimalPolicy {
    pub fn new(table: Arc<ValueTable>, graph: DominanceGraph) -> Result<Self, Error> {
        if !graph.strong_valid {
            return Err(Error::StrongConditionFails);
        }
        Ok(Self { table, graph })
    }
}

impl Policy for CompatibleOptimalPolicy {
    fn name(&self) -> &str {
        "compatible-optimal"
    }

    fn decide(&self, t: usize, state: &SystemState) -> Result<MatchingDecision, Error> {
        let start = self.table.best_action(t, state)?;
        self.table.make_compatible_from(&self.graph, t, state, &start)
    }
}
