//! One-level upgrading: the best policy among those that serve intended pairs first.

use alloc::sync::Arc;

use crate::dp::{solve_exact_with, SolverOptions};
use crate::error::Error;
use crate::instance::{MatchingDecision, MatchingInstance, SystemState};
use crate::policies::OptimalPolicy;
use crate::TOL;

/// `q[i][i-1] = q[i+1][i] = 0` unless `q[i][i] = min(x_i, y_i)`.
pub fn iou_admissible(state: &SystemState, q: &MatchingDecision) -> bool {
    let m = state.x.len().min(state.y.len());
    for i in 0..m {
        if q.get(i, i) == state.x[i].min(state.y[i]) {
            continue;
        }
        if i >= 1 && q.get(i, i - 1) > 0 {
            return false;
        }
        if i + 1 < q.m() && q.get(i + 1, i) > 0 {
            return false;
        }
    }
    true
}

fn check_structure(instance: &MatchingInstance) -> Result<(), Error> {
    if instance.m() != instance.n() {
        return Err(Error::NotOneLevelStructure);
    }
    for t in 0..instance.horizon() {
        for i in 0..instance.m() {
            for j in 0..instance.n() {
                if j != i && j + 1 != i && instance.reward(t, i, j) != 0.0 {
                    return Err(Error::NotOneLevelStructure);
                }
            }
        }
    }
    for t in 0..instance.horizon().saturating_sub(1) {
        let rate = instance.alpha(t).max(instance.beta(t));
        for i in 0..instance.m() {
            if instance.reward(t, i, i) < rate * instance.reward(t + 1, i, i) - TOL {
                return Err(Error::AssumptionViolated(alloc::format!(
                    "r[{t}][{i}][{i}] < max(alpha, beta) r[{}][{i}][{i}]",
                    t + 1
                )));
            }
        }
    }
    Ok(())
}

/// Restricted DP over IOU-admissible decisions; returns the policy and its exact value.
pub fn best_iou_policy(instance: &MatchingInstance) -> Result<(OptimalPolicy, f64), Error> {
    check_structure(instance)?;
    let table = solve_exact_with(instance, SolverOptions::default(), Some(iou_admissible))?;
    let value = table.expected_value();
    Ok((OptimalPolicy::named(Arc::new(table), "iou"), value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn upgrades_wait_for_intended_pairs() {
        let s = SystemState::new(vec![1, 1], vec![1, 1]);
        let upgrade_only = MatchingDecision::from_rows(&[vec![0, 0], vec![1, 0]]).unwrap();
        assert!(!iou_admissible(&s, &upgrade_only));
        let both = MatchingDecision::from_rows(&[vec![0, 0], vec![1, 0]]).unwrap();
        let s2 = SystemState::new(vec![0, 1], vec![1, 0]);
        assert!(iou_admissible(&s2, &both));
        let intended = MatchingDecision::from_rows(&[vec![1, 0], vec![0, 1]]).unwrap();
        assert!(iou_admissible(&s, &intended));
    }
}
