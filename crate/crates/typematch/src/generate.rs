//! Seeded generators of small instances whose premises hold by construction. Rewards of
//! the structured families are nonnegative.
//!
//! Sizes stay within m, n <= 3, T <= 4 and arrival supports inside {0, 1, 2}; larger
//! draws are shrunk until the reachable lattice stays small enough for the exact oracle.

use typematch_core::models::{self, Arrivals, AssumptionCheck, LineLayout, Prize, UpgradeParams};
use typematch_core::monge::RelationSet;
use typematch_core::policies::VerticalRewards;
use typematch_core::rng::uniform;
use typematch_core::{
    build_dominance_graph, is_perfect_pair, ArrivalModel, AuditMode, MatchingInstance, Pair, SystemState, WaitingCosts,
};

/// Cap on the product of per-type lattice sizes.
pub const LATTICE_CAP: u64 = 20_000;

const STREAM: u64 = u64::MAX;

/// Counter-based draw source on a stream of its own.
#[derive(Debug, Clone)]
pub struct Gen {
    seed: u64,
    counter: u64,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    pub fn unif(&mut self) -> f64 {
        let u = uniform(self.seed, STREAM, self.counter);
        self.counter += 1;
        u
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unif()
    }

    /// Uniform on the quarter grid of `[lo, hi]`.
    pub fn grid(&mut self, lo: f64, hi: f64) -> f64 {
        (self.range(lo, hi) * 4.0).round() / 4.0
    }

    /// Uniform on `lo..=hi`.
    pub fn int(&mut self, lo: u32, hi: u32) -> u32 {
        lo + ((self.unif() * f64::from(hi - lo + 1)) as u32).min(hi - lo)
    }

    pub fn coin(&mut self) -> bool {
        self.unif() < 0.5
    }

    pub fn pick<T: Copy>(&mut self, xs: &[T]) -> T {
        xs[self.int(0, xs.len() as u32 - 1) as usize]
    }

    /// Random pmf on a nonempty subset of `0..=max`.
    pub fn pmf(&mut self, max: u32) -> ArrivalModel {
        let mut support: Vec<u32> = (0..=max).filter(|_| self.coin()).collect();
        if support.is_empty() {
            support.push(self.int(0, max));
        }
        let weights: Vec<f64> = support.iter().map(|_| self.range(0.2, 1.0)).collect();
        let total: f64 = weights.iter().sum();
        ArrivalModel::new(support, weights.iter().map(|w| w / total).collect()).expect("valid pmf")
    }

    pub fn arrivals(&mut self, horizon: usize, m: usize, n: usize, max: u32) -> Arrivals {
        Arrivals {
            demand: (0..horizon).map(|_| (0..m).map(|_| self.pmf(max)).collect()).collect(),
            supply: (0..horizon).map(|_| (0..n).map(|_| self.pmf(max)).collect()).collect(),
        }
    }

    pub fn rate(&mut self) -> f64 {
        if self.coin() {
            1.0
        } else {
            0.0
        }
    }

    /// Nonincreasing sequence of length `len` starting in `[lo, hi]`.
    pub fn nonincreasing(&mut self, len: usize, lo: f64, hi: f64, max_step: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(len);
        let mut cur = self.grid(lo, hi);
        for _ in 0..len {
            v.push(cur);
            cur -= self.grid(0.0, max_step);
        }
        v
    }
}

/// Product of the per-type lattice sizes.
pub fn lattice_size(inst: &MatchingInstance) -> u64 {
    let (bx, by) = inst.lattice_bounds();
    bx.iter().chain(&by).map(|b| u64::from(*b) + 1).product()
}

/// Horizon and arrival cap for an `m x n` draw such that the lattice stays under the cap.
fn shape(g: &mut Gen, m: usize, n: usize, patient: bool) -> (usize, u32) {
    let horizon = g.int(2, 4) as usize;
    let max = g.int(1, 2);
    let mut best = (horizon, max);
    for (h, k) in [(horizon, max), (horizon, 1), (horizon.min(3), 1), (2, 1)] {
        best = (h, k);
        let bound = if patient { h as u64 * u64::from(k) } else { u64::from(k) };
        if (bound + 1).pow((m + n) as u32) <= LATTICE_CAP {
            break;
        }
    }
    best
}

/// One single-period transport case: rewards, and the state whose quantities are matched.
pub fn transport_case(g: &mut Gen) -> (Vec<Vec<f64>>, SystemState) {
    let m = g.int(1, 3) as usize;
    let n = g.int(1, 3) as usize;
    let rewards = (0..m).map(|_| (0..n).map(|_| g.grid(-2.0, 6.0)).collect()).collect();
    let x = (0..m).map(|_| g.int(0, 3)).collect();
    let y = (0..n).map(|_| g.int(0, 3)).collect();
    (rewards, SystemState::new(x, y))
}

/// 2x2 rewards meeting both horizontal reward assumptions.
pub fn horizontal_rewards(g: &mut Gen, horizon: usize, alpha: f64, beta: f64) -> Vec<Vec<Vec<f64>>> {
    let base = |g: &mut Gen| {
        let r12 = g.grid(0.0, 3.0);
        let r21 = g.grid(0.0, 3.0);
        let r11 = r12.max(r21) + g.grid(0.0, 3.0);
        let r22 = r12.max(r21) + g.grid(0.0, 3.0);
        vec![vec![r11, r12], vec![r21, r22]]
    };
    if g.coin() {
        let mut shift = g.nonincreasing(horizon, 0.0, 0.0, 1.0);
        let floor = shift[horizon - 1];
        shift.iter_mut().for_each(|s| *s -= floor);
        let b = base(g);
        return shift.iter().map(|s| b.iter().map(|row| row.iter().map(|r| r + s).collect()).collect()).collect();
    }
    for _ in 0..50 {
        let r: Vec<Vec<Vec<f64>>> = (0..horizon).map(|_| base(g)).collect();
        let probe = models::horizontal_2x2(
            &r,
            alpha.into(),
            beta.into(),
            Arrivals::iid(horizon, vec![ArrivalModel::deterministic(0); 2], vec![ArrivalModel::deterministic(0); 2]),
            AssumptionCheck::Enforce,
        );
        if probe.is_ok() {
            return r;
        }
    }
    let b = base(g);
    vec![b; horizon]
}

pub fn horizontal_instance(g: &mut Gen, alpha: f64, beta: f64) -> MatchingInstance {
    let (horizon, max) = shape(g, 2, 2, alpha > 0.0 || beta > 0.0);
    let r = horizontal_rewards(g, horizon, alpha, beta);
    let arrivals = g.arrivals(horizon, 2, 2, max);
    models::horizontal_2x2(&r, alpha.into(), beta.into(), arrivals, AssumptionCheck::Enforce).expect("generated rewards meet the assumptions")
}

fn line_instance(g: &mut Gen, m: usize, n: usize, colocate: bool, alpha: f64, beta: f64) -> MatchingInstance {
    let (horizon, max) = shape(g, m, n, alpha > 0.0 || beta > 0.0);
    let demand_pos: Vec<f64> = (0..m).map(|_| g.grid(0.0, 4.0)).collect();
    let mut supply_pos: Vec<f64> = (0..n).map(|_| g.grid(0.0, 4.0)).collect();
    if colocate {
        let k = g.int(0, (m.min(n) - 1) as u32) as usize;
        supply_pos[k] = demand_pos[k];
    }
    let prize = Prize::Common(g.nonincreasing(horizon, 7.0, 9.0, 0.5));
    let layout = LineLayout { demand_pos, supply_pos, prize };
    models::directed_line(&layout, alpha.into(), beta.into(), g.arrivals(horizon, m, n, max)).expect("line instance")
}

fn euclidean(g: &mut Gen, m: usize, n: usize, colocate: bool, alpha: f64, beta: f64) -> MatchingInstance {
    let (horizon, max) = shape(g, m, n, alpha > 0.0 || beta > 0.0);
    let point = |g: &mut Gen| vec![g.grid(0.0, 2.0), g.grid(0.0, 2.0)];
    let dpts: Vec<Vec<f64>> = (0..m).map(|_| point(g)).collect();
    let mut spts: Vec<Vec<f64>> = (0..n).map(|_| point(g)).collect();
    if colocate {
        let k = g.int(0, (m.min(n) - 1) as u32) as usize;
        spts[k] = dpts[k].clone();
    }
    let prize = g.nonincreasing(horizon, 9.0, 11.0, 0.5);
    let gamma = g.nonincreasing(horizon, 1.0, 2.0, 0.5).into_iter().map(|v| v.max(0.0)).collect::<Vec<_>>();
    models::euclidean_instance(&dpts, &spts, &prize, &gamma, alpha.into(), beta.into(), g.arrivals(horizon, m, n, max))
        .expect("euclidean instance")
}

pub fn vertical_rewards(g: &mut Gen, horizon: usize, m: usize, n: usize) -> VerticalRewards {
    let side = |g: &mut Gen, k: usize| -> Vec<Vec<f64>> {
        let mut gaps: Vec<f64> = (0..k.saturating_sub(1)).map(|_| g.grid(0.25, 2.0)).collect();
        let level = g.nonincreasing(horizon, 2.0, 4.0, 0.5);
        (0..horizon)
            .map(|t| {
                let mut row = Vec::with_capacity(k);
                let mut v = level[t] + gaps.iter().sum::<f64>();
                for i in 0..k {
                    row.push(v);
                    if i < gaps.len() {
                        v -= gaps[i];
                    }
                }
                for gap in gaps.iter_mut() {
                    *gap = (*gap - g.grid(0.0, 0.5)).max(0.25);
                }
                row
            })
            .collect()
    };
    VerticalRewards { r_d: side(g, m), r_s: side(g, n) }
}

/// Additive vertical instance; gaps shrink over time so the quality-gap condition holds.
pub fn vertical_instance(g: &mut Gen, alpha: f64, beta: f64) -> MatchingInstance {
    let m = g.int(2, 3) as usize;
    let n = g.int(2, 3) as usize;
    let (horizon, max) = shape(g, m, n, true);
    let rewards = vertical_rewards(g, horizon, m, n);
    models::vertical_instance(&rewards, alpha.into(), beta.into(), g.arrivals(horizon, m, n, max), AssumptionCheck::Enforce)
        .expect("generated vertical rewards meet the assumption")
}

/// Non-additive vertical instance with a small supermodular coefficient; falls back to
/// the additive case when the draw breaks the assumption.
pub fn vertical_nonadditive_instance(g: &mut Gen, alpha: f64, beta: f64) -> MatchingInstance {
    let m = g.int(2, 3) as usize;
    let n = g.int(2, 3) as usize;
    let (horizon, max) = shape(g, m, n, true);
    for _ in 0..50 {
        let v = vertical_rewards(g, horizon, m, n);
        let gamma = g.grid(0.0, 0.25);
        let arrivals = g.arrivals(horizon, m, n, max);
        if let Ok(inst) = models::vertical_nonadditive(&v.r_d, &v.r_s, gamma, alpha.into(), beta.into(), arrivals, AssumptionCheck::Enforce) {
            return inst;
        }
    }
    vertical_instance(g, alpha, beta)
}

/// Any model family whose dominance graph is strong-valid, with rates in {0, 1}.
pub fn strong_valid_instance(g: &mut Gen) -> MatchingInstance {
    loop {
        let (alpha, beta) = (g.rate(), g.rate());
        let m = g.int(2, 3) as usize;
        let n = g.int(2, 3) as usize;
        let colocate = g.coin();
        let inst = match g.int(0, 3) {
            0 => horizontal_instance(g, alpha, alpha),
            1 => line_instance(g, m, n, colocate, alpha, beta),
            2 => vertical_instance(g, alpha, beta),
            _ => euclidean(g, m, n, colocate, alpha, beta),
        };
        if build_dominance_graph(&inst).strong_valid {
            return inst;
        }
    }
}

/// Instance with at least one detected perfect pair, and the pairs found.
pub fn perfect_pair_instance(g: &mut Gen) -> (MatchingInstance, Vec<Pair>) {
    loop {
        let (alpha, beta) = (g.rate(), g.rate());
        let m = g.int(2, 3) as usize;
        let n = g.int(2, 3) as usize;
        let inst = match g.int(0, 2) {
            0 => horizontal_instance(g, alpha, alpha),
            1 => line_instance(g, m, n, true, alpha, beta),
            _ => euclidean(g, m, n, true, alpha, beta),
        };
        let graph = build_dominance_graph(&inst);
        if !graph.strong_valid {
            continue;
        }
        let pairs: Vec<Pair> =
            graph.pairs().filter(|p| is_perfect_pair(&inst, &graph, p.i, p.j).unwrap_or(false)).collect();
        if !pairs.is_empty() {
            return (inst, pairs);
        }
    }
}

/// One-level upgrading with intended margins that do not grow over time and fares that
/// do not increase with the class index.
pub fn one_level_upgrading(g: &mut Gen) -> MatchingInstance {
    let k = g.int(2, 3) as usize;
    let (alpha, beta) = (g.rate(), g.rate());
    let (horizon, max) = shape(g, k, k, alpha > 0.0 || beta > 0.0);
    let mut costs = Vec::with_capacity(k);
    let mut c = g.grid(4.0, 6.0);
    for _ in 0..k {
        costs.push(c);
        c -= g.grid(0.5, 2.0);
    }
    let mut margins: Vec<Vec<f64>> =
        (0..k).map(|_| g.nonincreasing(horizon, 1.0, 4.0, 0.75).into_iter().map(|v| v.max(0.25)).collect()).collect();
    for i in 1..k {
        for t in 0..horizon {
            margins[i][t] = margins[i][t].min(margins[i - 1][t] + costs[i - 1] - costs[i]);
        }
    }
    let fares = (0..horizon).map(|t| (0..k).map(|i| costs[i] + margins[i][t]).collect()).collect();
    let params = UpgradeParams { fares, costs, one_level: true };
    models::upgrading_instance(&params, alpha.into(), beta.into(), g.arrivals(horizon, k, k, max)).expect("upgrading instance")
}

/// Unstructured instance with rates in {0, 1} and random waiting costs attached.
pub fn waiting_cost_instance(g: &mut Gen) -> (MatchingInstance, WaitingCosts) {
    let m = g.int(2, 3) as usize;
    let n = g.int(2, 3) as usize;
    let (alpha, beta) = (g.rate(), g.rate());
    let (horizon, max) = shape(g, m, n, alpha > 0.0 || beta > 0.0);
    let rewards: Vec<Vec<Vec<f64>>> =
        (0..horizon).map(|_| (0..m).map(|_| (0..n).map(|_| g.grid(-1.0, 5.0)).collect()).collect()).collect();
    let arrivals = g.arrivals(horizon, m, n, max);
    let inst = MatchingInstance::new(m, n, horizon, &rewards, alpha.into(), beta.into(), arrivals.demand, arrivals.supply)
        .expect("valid instance");
    let costs = WaitingCosts {
        c: (0..horizon).map(|_| (0..m).map(|_| g.grid(0.0, 2.0)).collect()).collect(),
        h: (0..horizon).map(|_| (0..n).map(|_| g.grid(0.0, 2.0)).collect()).collect(),
    };
    (inst, costs)
}

/// Which dominance clause a counterexample breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clause {
    /// Same-period reward order.
    Current,
    /// Next-period difference bound.
    Future,
    /// Both weak relations hold but the square inequality fails.
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Supply,
    Demand,
}

/// A deterministic instance together with the relation it would need and the audit mode
/// under which its unique optimal trace breaks that relation.
#[derive(Debug, Clone)]
pub struct Counterexample {
    pub label: String,
    pub instance: MatchingInstance,
    pub relation: RelationSet,
    pub mode: AuditMode,
}

fn det(q: u32) -> ArrivalModel {
    ArrivalModel::deterministic(q)
}

fn transpose(r: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..r[0].len()).map(|j| r.iter().map(|row| row[j]).collect()).collect()
}

/// Builds the construction with random magnitudes. The supply-side variants compete two
/// supply types for one demand type; the demand-side ones are their transposes.
pub fn counterexample(g: &mut Gen, clause: Clause, side: Side) -> Counterexample {
    let (rewards, alpha, beta, demand, supply, relation, mode) = match clause {
        Clause::Current => {
            let a = g.grid(1.0, 4.0);
            let r = vec![vec![a, a + g.grid(0.25, 2.0)]];
            (vec![r], 0.0, 0.0, vec![vec![det(1)]], vec![vec![det(1), det(1)]], (Pair::new(0, 0), Pair::new(0, 1)), AuditMode::Weak)
        }
        Clause::Future => {
            let p = g.grid(2.0, 5.0);
            let d = g.grid(0.25, 1.0);
            let e = d + g.grid(0.5, 2.0);
            let w = e + g.grid(0.5, 3.0);
            let r0 = vec![vec![p, p - d], vec![0.0, 0.0]];
            let r1 = vec![vec![p, p - d], vec![w, w - e]];
            (
                vec![r0, r1],
                0.0,
                1.0,
                vec![vec![det(1), det(0)], vec![det(0), det(1)]],
                vec![vec![det(1), det(1)], vec![det(0), det(0)]],
                (Pair::new(0, 0), Pair::new(0, 1)),
                AuditMode::Weak,
            )
        }
        Clause::Square => {
            let a = g.grid(3.0, 5.0);
            let b = a - g.grid(0.25, 1.0);
            let c = 2.0 * b - a - g.grid(0.25, 1.0);
            let r = vec![vec![a, b], vec![b, c]];
            (vec![r], 0.0, 0.0, vec![vec![det(1), det(1)]], vec![vec![det(1), det(1)]], (Pair::new(0, 0), Pair::new(0, 1)), AuditMode::Strong)
        }
    };
    let horizon = rewards.len();
    let (rewards, alpha, beta, demand, supply, relation) = match side {
        Side::Supply => (rewards, alpha, beta, demand, supply, relation),
        Side::Demand => (
            rewards.iter().map(|r| transpose(r)).collect(),
            beta,
            alpha,
            supply,
            demand,
            (Pair::new(relation.0.j, relation.0.i), Pair::new(relation.1.j, relation.1.i)),
        ),
    };
    let (m, n) = (demand[0].len(), supply[0].len());
    let instance = MatchingInstance::new(m, n, horizon, &rewards, alpha.into(), beta.into(), demand, supply)
        .expect("valid counterexample");
    let mut set: RelationSet = [relation].into_iter().collect();
    if clause == Clause::Square {
        let other = match side {
            Side::Supply => (Pair::new(0, 0), Pair::new(1, 0)),
            Side::Demand => (Pair::new(0, 0), Pair::new(0, 1)),
        };
        set.insert(other);
    }
    let label = format!("{clause:?}/{side:?}").to_lowercase();
    Counterexample { label, instance, relation: set, mode }
}
