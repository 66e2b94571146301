//! Instance builders for the horizontal and vertical specializations.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::instance::{ArrivalModel, CarryOver, MatchingInstance, ModelTag};
use crate::monge::Pair;
use crate::policies::VerticalRewards;
use crate::TOL;

/// Whether a failed assumption aborts the build or is recorded in the instance warnings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum AssumptionCheck {
    #[default]
    Enforce,
    Warn,
}

/// Arrival pmfs `demand[t][i]`, `supply[t][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Arrivals {
    pub demand: Vec<Vec<ArrivalModel>>,
    pub supply: Vec<Vec<ArrivalModel>>,
}

impl Arrivals {
    /// Same pmfs in every period.
    pub fn iid(horizon: usize, demand: Vec<ArrivalModel>, supply: Vec<ArrivalModel>) -> Self {
        Self { demand: vec![demand; horizon], supply: vec![supply; horizon] }
    }
}

fn assemble(
    rewards: &[Vec<Vec<f64>>],
    alpha: CarryOver,
    beta: CarryOver,
    arrivals: Arrivals,
    tag: ModelTag,
) -> Result<MatchingInstance, Error> {
    let horizon = rewards.len();
    let m = rewards.first().map_or(0, Vec::len);
    let n = rewards.first().and_then(|r| r.first()).map_or(0, Vec::len);
    Ok(MatchingInstance::new(m, n, horizon, rewards, alpha, beta, arrivals.demand, arrivals.supply)?.with_tag(tag))
}

fn settle(instance: MatchingInstance, failure: Option<String>, check: AssumptionCheck) -> Result<MatchingInstance, Error> {
    match (failure, check) {
        (None, _) => Ok(instance),
        (Some(msg), AssumptionCheck::Enforce) => Err(Error::AssumptionViolated(msg)),
        (Some(msg), AssumptionCheck::Warn) => Ok(instance.with_warnings(vec![msg])),
    }
}

/// First failing inequality of the 2x2 reward assumptions, including the decay of the
/// diagonal rewards that makes both diagonal pairs perfect.
pub fn horizontal_assumption_failure(instance: &MatchingInstance) -> Option<String> {
    let horizon = instance.horizon();
    let r = |t: usize, i: usize, j: usize| instance.reward(t, i, j);
    for t in 0..horizon {
        for k in 0..2 {
            let o = 1 - k;
            if r(t, k, k) < r(t, k, o).max(r(t, o, k)) - TOL {
                return Some(format!("diagonal dominance fails at t={t}, k={k}"));
            }
            if t + 1 == horizon {
                continue;
            }
            let rate = instance.alpha(t).max(instance.beta(t));
            if r(t, k, k) < rate * r(t + 1, k, k) - TOL {
                return Some(format!("diagonal decay fails at t={t}, k={k}"));
            }
            for other in 0..2 {
                if r(t, k, k) - r(t, k, o) < r(t + 1, other, k) - r(t + 1, other, o) - TOL {
                    return Some(format!("difference condition (demand side) fails at t={t}, k={k}, i={other}"));
                }
                if r(t, k, k) - r(t, o, k) < r(t + 1, k, other) - r(t + 1, o, other) - TOL {
                    return Some(format!("difference condition (supply side) fails at t={t}, k={k}, j={other}"));
                }
            }
        }
    }
    None
}

pub fn horizontal_2x2(
    rewards: &[Vec<Vec<f64>>],
    alpha: CarryOver,
    beta: CarryOver,
    arrivals: Arrivals,
    check: AssumptionCheck,
) -> Result<MatchingInstance, Error> {
    let inst = assemble(rewards, alpha, beta, arrivals, ModelTag::Horizontal2x2)?;
    if inst.m() != 2 || inst.n() != 2 {
        return Err(Error::DimensionMismatch("horizontal_2x2 needs 2x2 rewards".into()));
    }
    let failure = horizontal_assumption_failure(&inst);
    settle(inst, failure, check)
}

/// Premier and regular service: type 1 is premier on both sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PremierRegular {
    pub fare_premier: f64,
    pub fare_regular: f64,
    pub wage_premier: f64,
    pub wage_regular: f64,
    pub penalty: f64,
}

impl PremierRegular {
    pub fn rewards(&self, horizon: usize) -> Vec<Vec<Vec<f64>>> {
        let r = vec![
            vec![self.fare_premier - self.wage_premier, self.fare_regular - self.wage_regular - self.penalty],
            vec![self.fare_regular - self.wage_premier, self.fare_regular - self.wage_regular],
        ];
        vec![r; horizon]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prize {
    /// `R[t]`, shared by all demand types.
    Common(Vec<f64>),
    /// `R[t][i]` per demand type.
    PerDemand(Vec<Vec<f64>>),
}

/// Types on a directed segment; supply at `p` reaches demand at `q >= p`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineLayout {
    pub demand_pos: Vec<f64>,
    pub supply_pos: Vec<f64>,
    pub prize: Prize,
}

impl LineLayout {
    /// `reachable[i][j]` iff supply `j` lies upstream of (or at) demand `i`.
    pub fn reachability(&self) -> Vec<Vec<bool>> {
        self.demand_pos.iter().map(|d| self.supply_pos.iter().map(|s| d >= s).collect()).collect()
    }
}

pub fn directed_line(layout: &LineLayout, alpha: CarryOver, beta: CarryOver, arrivals: Arrivals) -> Result<MatchingInstance, Error> {
    if layout.demand_pos.iter().chain(&layout.supply_pos).any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::RangeError("line coordinates must be finite and nonnegative".into()));
    }
    let m = layout.demand_pos.len();
    let horizon = match &layout.prize {
        Prize::Common(r) => r.len(),
        Prize::PerDemand(r) => {
            if r.iter().any(|row| row.len() != m) {
                return Err(Error::DimensionMismatch("per-demand prizes need one entry per demand type".into()));
            }
            r.len()
        }
    };
    let rewards: Vec<Vec<Vec<f64>>> = (0..horizon)
        .map(|t| {
            layout
                .demand_pos
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    let prize = match &layout.prize {
                        Prize::Common(r) => r[t],
                        Prize::PerDemand(r) => r[t][i],
                    };
                    layout.supply_pos.iter().map(|s| if d >= s { prize - (d - s) } else { 0.0 }).collect()
                })
                .collect()
        })
        .collect();
    assemble(&rewards, alpha, beta, arrivals, ModelTag::DirectedLine)
}

fn nonincreasing(seq: &[f64], name: &str) -> Result<(), Error> {
    if seq.windows(2).any(|w| w[1] > w[0] + TOL) {
        return Err(Error::MonotoneParamViolated(name.into()));
    }
    Ok(())
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum())
}

/// `r[t][i][j] = R[t] - gamma[t] * |a_i - b_j|`.
#[allow(clippy::too_many_arguments)]
pub fn euclidean_instance(
    demand_points: &[Vec<f64>],
    supply_points: &[Vec<f64>],
    prize: &[f64],
    gamma: &[f64],
    alpha: CarryOver,
    beta: CarryOver,
    arrivals: Arrivals,
) -> Result<MatchingInstance, Error> {
    if prize.len() != gamma.len() {
        return Err(Error::DimensionMismatch("R and gamma need one entry per period".into()));
    }
    nonincreasing(prize, "R")?;
    nonincreasing(gamma, "gamma")?;
    let rewards: Vec<Vec<Vec<f64>>> = prize
        .iter()
        .zip(gamma)
        .map(|(r, g)| {
            demand_points
                .iter()
                .map(|a| supply_points.iter().map(|b| r - g * distance(a, b)).collect())
                .collect()
        })
        .collect();
    assemble(&rewards, alpha, beta, arrivals, ModelTag::Euclidean)
}

/// Demand and supply types sharing a location.
pub fn colocated_pairs(demand_points: &[Vec<f64>], supply_points: &[Vec<f64>]) -> Vec<Pair> {
    let mut out = Vec::new();
    for (i, a) in demand_points.iter().enumerate() {
        for (j, b) in supply_points.iter().enumerate() {
            if a == b {
                out.push(Pair::new(i, j));
            }
        }
    }
    out
}

/// Service classes: demand class `i` can be served by supply class `j <= i`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpgradeParams {
    /// `fares[t][i]`.
    pub fares: Vec<Vec<f64>>,
    /// Per-unit supply cost of each class, strictly decreasing.
    pub costs: Vec<f64>,
    /// Only the intended class and the one directly above may serve a demand class.
    pub one_level: bool,
}

impl UpgradeParams {
    /// The same rewards read as a directed line with `dist(i <- j) = c_j - c_i`.
    pub fn as_line(&self) -> LineLayout {
        let top = self.costs.first().copied().unwrap_or(0.0);
        let pos: Vec<f64> = self.costs.iter().map(|c| top - c).collect();
        LineLayout {
            demand_pos: pos.clone(),
            supply_pos: pos,
            prize: Prize::PerDemand(
                self.fares.iter().map(|f| f.iter().zip(&self.costs).map(|(f, c)| f - c).collect()).collect(),
            ),
        }
    }
}

pub fn upgrading_instance(params: &UpgradeParams, alpha: CarryOver, beta: CarryOver, arrivals: Arrivals) -> Result<MatchingInstance, Error> {
    if params.costs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::BadClassOrder);
    }
    let k = params.costs.len();
    if params.fares.iter().any(|f| f.len() != k) {
        return Err(Error::DimensionMismatch("fares need one entry per class".into()));
    }
    let rewards: Vec<Vec<Vec<f64>>> = params
        .fares
        .iter()
        .map(|f| {
            (0..k)
                .map(|i| {
                    (0..k)
                        .map(|j| {
                            let allowed = j <= i && (!params.one_level || j + 1 >= i);
                            if allowed {
                                f[i] - params.costs[j]
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    assemble(&rewards, alpha, beta, arrivals, ModelTag::Upgrading { one_level: params.one_level })
}

fn strictly_decreasing(rows: &[Vec<f64>]) -> bool {
    rows.iter().all(|r| r.windows(2).all(|w| w[0] > w[1]))
}

fn quality_gaps(values: &[Vec<f64>], rate: &[f64], side: &str) -> Option<String> {
    for t in 0..values.len().saturating_sub(1) {
        for i in 0..values[t].len().saturating_sub(1) {
            let now = values[t][i] - values[t][i + 1];
            let next = values[t + 1][i] - values[t + 1][i + 1];
            if now < rate[t] * next - TOL {
                return Some(format!("quality-gap condition fails for {side} types {i},{} at t={t}", i + 1));
            }
        }
    }
    None
}

pub fn vertical_instance(
    rewards: &VerticalRewards,
    alpha: CarryOver,
    beta: CarryOver,
    arrivals: Arrivals,
    check: AssumptionCheck,
) -> Result<MatchingInstance, Error> {
    if rewards.r_d.len() != rewards.r_s.len() {
        return Err(Error::DimensionMismatch("r_d and r_s need the same horizon".into()));
    }
    let tensor: Vec<Vec<Vec<f64>>> = rewards
        .r_d
        .iter()
        .zip(&rewards.r_s)
        .map(|(d, s)| d.iter().map(|a| s.iter().map(|b| a + b).collect()).collect())
        .collect();
    let inst = assemble(&tensor, alpha, beta, arrivals, ModelTag::Vertical)?;
    let failure = if !strictly_decreasing(&rewards.r_d) || !strictly_decreasing(&rewards.r_s) {
        Some("quality ordering: components must strictly decrease in the type index".into())
    } else {
        quality_gaps(&rewards.r_d, inst.alphas(), "demand").or_else(|| quality_gaps(&rewards.r_s, inst.betas(), "supply"))
    };
    settle(inst, failure, check)
}

/// First failing clause of the non-additive vertical assumption.
pub fn nonadditive_assumption_failure(instance: &MatchingInstance) -> Option<String> {
    let (m, n, horizon) = (instance.m(), instance.n(), instance.horizon());
    let r = |t: usize, i: usize, j: usize| instance.reward(t, i, j);
    for t in 0..horizon {
        for i in 0..m {
            for j in 0..n {
                if (i + 1 < m && r(t, i + 1, j) > r(t, i, j) + TOL) || (j + 1 < n && r(t, i, j + 1) > r(t, i, j) + TOL) {
                    return Some(format!("monotonicity clause fails at t={t}, ({i},{j})"));
                }
            }
        }
    }
    for t in 0..horizon.saturating_sub(1) {
        for i in 0..m {
            for j in 0..n {
                if i + 1 < m {
                    let now = r(t, i, j) - r(t, i + 1, j);
                    if (0..n).any(|k| now < instance.alpha(t) * (r(t + 1, i, k) - r(t + 1, i + 1, k)) - TOL) {
                        return Some(format!("rate clause fails for demand types {i},{} at t={t}", i + 1));
                    }
                }
                if j + 1 < n {
                    let now = r(t, i, j) - r(t, i, j + 1);
                    if (0..m).any(|k| now < instance.beta(t) * (r(t + 1, k, j) - r(t + 1, k, j + 1)) - TOL) {
                        return Some(format!("rate clause fails for supply types {j},{} at t={t}", j + 1));
                    }
                }
            }
        }
    }
    for t in 0..horizon {
        for i in 0..m.saturating_sub(1) {
            for j in 0..n.saturating_sub(1) {
                if r(t, i, j) - r(t, i, j + 1) < r(t, i + 1, j) - r(t, i + 1, j + 1) - TOL {
                    return Some(format!("supermodularity clause fails at t={t}, ({i},{j})"));
                }
            }
        }
    }
    None
}

/// `r[t][i][j] = a[t][i] + b[t][j] + gamma * a[t][i] * b[t][j]`.
#[allow(clippy::too_many_arguments)]
pub fn vertical_nonadditive(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    gamma: f64,
    alpha: CarryOver,
    beta: CarryOver,
    arrivals: Arrivals,
    check: AssumptionCheck,
) -> Result<MatchingInstance, Error> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch("a and b need the same horizon".into()));
    }
    let tensor: Vec<Vec<Vec<f64>>> = a
        .iter()
        .zip(b)
        .map(|(at, bt)| at.iter().map(|x| bt.iter().map(|y| x + y + gamma * x * y).collect()).collect())
        .collect();
    let inst = assemble(&tensor, alpha, beta, arrivals, ModelTag::VerticalNonAdditive)?;
    let failure = if !strictly_decreasing(a) || !strictly_decreasing(b) {
        Some("quality ordering: a and b must strictly decrease in the type index".into())
    } else {
        nonadditive_assumption_failure(&inst)
    };
    settle(inst, failure, check)
}
