//! Policies addressable by name from configs and the CLI.

use std::sync::{Arc, Mutex};

use typematch_core::dp::ExactSolver;
use typematch_core::policies::consolidated::consolidated_protection_policy;
use typematch_core::policies::horizontal::{compute_protection_levels_2x2, two_round_policy_2x2};
use typematch_core::policies::iou::best_iou_policy;
use typematch_core::policies::vertical::{optimal_total_quantity, osa_policy, topdown_policy, OsaMode};
use typematch_core::policies::{greedy_policy, CompatibleOptimalPolicy, OptimalPolicy, PolicyHandle, ZeroPolicy};
use typematch_core::{build_dominance_graph, solve_exact, Error, MatchingInstance};

use crate::HarnessError;

pub const POLICY_NAMES: [&str; 11] = [
    "zero",
    "greedy",
    "tier-greedy",
    "optimal",
    "compatible-optimal",
    "two-round",
    "consolidated-protection",
    "topdown-optimal",
    "osa-exact",
    "osa-sampled",
    "iou",
];

/// Builds the policy called `name`. `sample_count` and `seed` feed the sampled policies.
pub fn build_policy(inst: &MatchingInstance, name: &str, sample_count: usize, seed: u64) -> Result<PolicyHandle, HarnessError> {
    let handle: PolicyHandle = match name {
        "zero" => Arc::new(ZeroPolicy),
        "greedy" => Arc::new(greedy_policy(inst, None)),
        "tier-greedy" => Arc::new(greedy_policy(inst, Some(&build_dominance_graph(inst)))),
        "optimal" => Arc::new(OptimalPolicy::new(Arc::new(solve_exact(inst)?))),
        "compatible-optimal" => {
            let table = Arc::new(solve_exact(inst)?);
            Arc::new(CompatibleOptimalPolicy::new(table, build_dominance_graph(inst))?)
        }
        "two-round" => Arc::new(two_round_policy_2x2(inst, compute_protection_levels_2x2(inst)?)?),
        "consolidated-protection" => {
            Arc::new(consolidated_protection_policy(inst, &build_dominance_graph(inst), sample_count, seed)?)
        }
        "topdown-optimal" => {
            let solver = Mutex::new(ExactSolver::new(inst)?);
            let rule = move |t: usize, s: &typematch_core::SystemState| -> Result<u32, Error> {
                let mut solver = solver.lock().expect("solver lock");
                optimal_total_quantity(&mut solver, t, s)?.ok_or(Error::StateNotCovered { t })
            };
            Arc::new(topdown_policy(inst, "topdown-optimal", rule)?)
        }
        "osa-exact" => Arc::new(osa_policy(inst, OsaMode::Exact)?),
        "osa-sampled" => Arc::new(osa_policy(inst, OsaMode::Sampled { samples: sample_count, seed })?),
        "iou" => Arc::new(best_iou_policy(inst)?.0),
        other => return Err(HarnessError::UnknownPolicy(other.to_string())),
    };
    Ok(handle)
}
