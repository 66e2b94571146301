//! Single-path simulation of a policy.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::Error;
use crate::instance::{apply_decision, MatchingInstance, SystemState};
use crate::policies::Policy;
use crate::rng::{self, SamplePath};

#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub total_reward: f64,
    /// Units matched in each period.
    pub matched: Vec<u32>,
    /// Leftover units that did not survive to the next period (all leftovers at the end).
    pub abandoned_demand: u32,
    pub abandoned_supply: u32,
}

/// Runs `policy` along `path`. Fractional carry-over is rounded stochastically with draws
/// keyed by `(seed, replication)`, so policies sharing a path share the rounding streams.
pub fn run_path(
    instance: &MatchingInstance,
    policy: &dyn Policy,
    path: &SamplePath,
    seed: u64,
    replication: u64,
) -> Result<PathOutcome, Error> {
    let horizon = instance.horizon();
    let mut state = SystemState::new(path.demand[0].clone(), path.supply[0].clone());
    let mut out = PathOutcome { total_reward: 0.0, matched: Vec::with_capacity(horizon), abandoned_demand: 0, abandoned_supply: 0 };
    for t in 0..horizon {
        let q = policy.decide(t, &state)?;
        let post = apply_decision(&state, &q).map_err(|e| Error::PolicyInfeasibleDecision {
            policy: policy.name().to_string(),
            t,
            detail: e.to_string(),
        })?;
        out.total_reward += instance.stage_value(t, &q, &post);
        out.matched.push(q.total());
        if t + 1 == horizon {
            out.abandoned_demand += post.u.iter().sum::<u32>();
            out.abandoned_supply += post.v.iter().sum::<u32>();
            break;
        }
        let mut x = Vec::with_capacity(post.u.len());
        for (i, u) in post.u.iter().enumerate() {
            let kept = rng::carry(seed, replication, t, rng::SIDE_CARRY_DEMAND, i, *u, instance.alpha(t));
            out.abandoned_demand += u - kept;
            x.push(kept + path.demand[t + 1][i]);
        }
        let mut y = Vec::with_capacity(post.v.len());
        for (j, v) in post.v.iter().enumerate() {
            let kept = rng::carry(seed, replication, t, rng::SIDE_CARRY_SUPPLY, j, *v, instance.beta(t));
            out.abandoned_supply += v - kept;
            y.push(kept + path.supply[t + 1][j]);
        }
        state = SystemState::new(x, y);
    }
    Ok(out)
}
