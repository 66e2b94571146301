//! Problem data, state arithmetic and transitions.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;

const PROB_TOL: f64 = 1e-12;

/// Finite pmf over nonnegative integer quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalModel {
    support: Vec<u32>,
    probs: Vec<f64>,
}

impl ArrivalModel {
    pub fn new(support: Vec<u32>, probs: Vec<f64>) -> Result<Self, Error> {
        if support.is_empty() || support.len() != probs.len() {
            return Err(Error::BadDistribution(format!(
                "support has {} entries, probs has {}",
                support.len(),
                probs.len()
            )));
        }
        for (k, a) in support.iter().enumerate() {
            if support[..k].contains(a) {
                return Err(Error::BadDistribution(format!("support value {a} repeated")));
            }
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::BadDistribution("negative or non-finite probability".into()));
        }
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() > PROB_TOL {
            return Err(Error::BadDistribution(format!("probabilities sum to {mass}")));
        }
        Ok(Self { support, probs })
    }

    pub fn deterministic(quantity: u32) -> Self {
        Self { support: vec![quantity], probs: vec![1.0] }
    }

    /// Uniform pmf over `0..=max`.
    pub fn uniform_upto(max: u32) -> Self {
        let k = max as usize + 1;
        Self { support: (0..=max).collect(), probs: vec![1.0 / k as f64; k] }
    }

    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.probs).map(|(a, p)| *a as f64 * p).sum()
    }

    /// Largest quantity with positive probability.
    pub fn max_value(&self) -> u32 {
        self.support
            .iter()
            .zip(&self.probs)
            .filter(|(_, p)| **p > 0.0)
            .map(|(a, _)| *a)
            .max()
            .unwrap_or(0)
    }

    /// Inverse CDF walking the support in stored order.
    pub fn quantile(&self, u: f64) -> u32 {
        let mut acc = 0.0;
        let mut last = self.support[0];
        for (a, p) in self.support.iter().zip(&self.probs) {
            if *p <= 0.0 {
                continue;
            }
            acc += p;
            last = *a;
            if u < acc {
                return *a;
            }
        }
        last
    }

    pub(crate) fn atoms(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied()).filter(|(_, p)| *p > 0.0)
    }
}

/// Carry-over rate given once for all periods or per period.
#[derive(Debug, Clone, PartialEq)]
pub enum CarryOver {
    Scalar(f64),
    PerPeriod(Vec<f64>),
}

impl CarryOver {
    fn expand(&self, horizon: usize, name: &str) -> Result<Vec<f64>, Error> {
        let rates = match self {
            CarryOver::Scalar(a) => vec![*a; horizon],
            CarryOver::PerPeriod(v) => {
                if v.len() != horizon {
                    return Err(Error::DimensionMismatch(format!(
                        "{name} has {} periods, expected {horizon}",
                        v.len()
                    )));
                }
                v.clone()
            }
        };
        if let Some(a) = rates.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::RangeError(format!("{name} = {a} outside [0,1]")));
        }
        Ok(rates)
    }
}

impl From<f64> for CarryOver {
    fn from(a: f64) -> Self {
        CarryOver::Scalar(a)
    }
}

/// Dense row-major `rows x cols` matrix of per-unit rewards for one period.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RewardMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, Error> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, Error> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged reward rows".into()));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, r: f64) {
        self.data[i * self.cols + j] = r;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols.max(1)).map(<[f64]>::to_vec).take(self.rows).collect()
    }
}

/// Pre-matching quantities of one period.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SystemState {
    pub x: Vec<u32>,
    pub y: Vec<u32>,
}

impl SystemState {
    pub fn new(x: Vec<u32>, y: Vec<u32>) -> Self {
        Self { x, y }
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self { x: vec![0; m], y: vec![0; n] }
    }

    pub fn total_demand(&self) -> u32 {
        self.x.iter().sum()
    }

    pub fn total_supply(&self) -> u32 {
        self.y.iter().sum()
    }
}

/// Leftover quantities after matching.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PostMatchState {
    pub u: Vec<u32>,
    pub v: Vec<u32>,
}

/// Matrix `q[i][j]` of matched units, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatchingDecision {
    m: usize,
    n: usize,
    q: Vec<u32>,
}

impl MatchingDecision {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self { m, n, q: vec![0; m * n] }
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self, Error> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("ragged decision rows".into()));
        }
        Ok(Self { m: rows.len(), n, q: rows.concat() })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.q[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, q: u32) {
        self.q[i * self.n + j] = q;
    }

    pub fn row_sum(&self, i: usize) -> u32 {
        self.q[i * self.n..(i + 1) * self.n].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u32 {
        (0..self.m).map(|i| self.get(i, j)).sum()
    }

    pub fn total(&self) -> u32 {
        self.q.iter().sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.q
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.m).map(|i| self.q[i * self.n..(i + 1) * self.n].to_vec()).collect()
    }

    pub fn is_feasible_for(&self, state: &SystemState) -> bool {
        self.m == state.x.len()
            && self.n == state.y.len()
            && (0..self.m).all(|i| self.row_sum(i) <= state.x[i])
            && (0..self.n).all(|j| self.col_sum(j) <= state.y[j])
    }
}

/// Per-unit waiting costs `c[t][i]` for demand and holding costs `h[t][j]` for supply.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitingCosts {
    pub c: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
}

impl WaitingCosts {
    fn validate(&self, horizon: usize, m: usize, n: usize) -> Result<(), Error> {
        let ok = |mat: &Vec<Vec<f64>>, k: usize| {
            mat.len() == horizon && mat.iter().all(|r| r.len() == k && r.iter().all(|v| v.is_finite()))
        };
        if !ok(&self.c, m) || !ok(&self.h, n) {
            return Err(Error::DimensionMismatch(format!(
                "waiting costs must be finite {horizon}x{m} and {horizon}x{n}"
            )));
        }
        Ok(())
    }
}

/// Which builder produced an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelTag {
    General,
    Horizontal2x2,
    DirectedLine,
    Euclidean,
    Upgrading { one_level: bool },
    Vertical,
    VerticalNonAdditive,
}

/// One joint realization of all arrivals in a period.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalOutcome {
    pub demand: Vec<u32>,
    pub supply: Vec<u32>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchingInstance {
    m: usize,
    n: usize,
    horizon: usize,
    rewards: Vec<RewardMatrix>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    demand: Vec<Vec<ArrivalModel>>,
    supply: Vec<Vec<ArrivalModel>>,
    waiting_costs: Option<WaitingCosts>,
    costs_folded: bool,
    tag: ModelTag,
    warnings: Vec<String>,
}

impl MatchingInstance {
    /// `rewards[t][i][j]`, `demand_arrivals[t][i]`, `supply_arrivals[t][j]`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        m: usize,
        n: usize,
        horizon: usize,
        rewards: &[Vec<Vec<f64>>],
        alpha: CarryOver,
        beta: CarryOver,
        demand_arrivals: Vec<Vec<ArrivalModel>>,
        supply_arrivals: Vec<Vec<ArrivalModel>>,
    ) -> Result<Self, Error> {
        if m == 0 || n == 0 || horizon == 0 {
            return Err(Error::DimensionMismatch("m, n and T must be positive".into()));
        }
        if rewards.len() != horizon {
            return Err(Error::DimensionMismatch(format!(
                "rewards has {} periods, expected {horizon}",
                rewards.len()
            )));
        }
        let mut mats = Vec::with_capacity(horizon);
        for (t, r) in rewards.iter().enumerate() {
            if r.len() != m || r.iter().any(|row| row.len() != n) {
                return Err(Error::DimensionMismatch(format!("rewards[{t}] is not {m}x{n}")));
            }
            if r.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::RangeError(format!("non-finite reward in period {t}")));
            }
            mats.push(RewardMatrix::from_rows(r)?);
        }
        let check_arrivals = |a: &Vec<Vec<ArrivalModel>>, k: usize, side: &str| {
            if a.len() != horizon || a.iter().any(|p| p.len() != k) {
                return Err(Error::DimensionMismatch(format!(
                    "{side} arrivals must be {horizon} periods of {k} types"
                )));
            }
            Ok(())
        };
        check_arrivals(&demand_arrivals, m, "demand")?;
        check_arrivals(&supply_arrivals, n, "supply")?;
        Ok(Self {
            m,
            n,
            horizon,
            rewards: mats,
            alpha: alpha.expand(horizon, "alpha")?,
            beta: beta.expand(horizon, "beta")?,
            demand: demand_arrivals,
            supply: supply_arrivals,
            waiting_costs: None,
            costs_folded: false,
            tag: ModelTag::General,
            warnings: Vec::new(),
        })
    }

    /// Attaches waiting costs charged on post-match leftovers (the unfolded objective).
    pub fn with_waiting_costs(mut self, costs: WaitingCosts) -> Result<Self, Error> {
        costs.validate(self.horizon, self.m, self.n)?;
        self.waiting_costs = Some(costs);
        self.costs_folded = false;
        Ok(self)
    }

    pub fn with_tag(mut self, tag: ModelTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn with_warnings(mut self, warnings: Vec<String>) -> Self {
        self.warnings = warnings;
        self
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn reward(&self, t: usize, i: usize, j: usize) -> f64 {
        self.rewards[t].get(i, j)
    }

    pub fn rewards(&self, t: usize) -> &RewardMatrix {
        &self.rewards[t]
    }

    pub fn reward_tensor(&self) -> Vec<Vec<Vec<f64>>> {
        self.rewards.iter().map(RewardMatrix::to_rows).collect()
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t]
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    pub fn demand_arrival(&self, t: usize, i: usize) -> &ArrivalModel {
        &self.demand[t][i]
    }

    pub fn supply_arrival(&self, t: usize, j: usize) -> &ArrivalModel {
        &self.supply[t][j]
    }

    pub fn demand_arrivals(&self) -> &[Vec<ArrivalModel>] {
        &self.demand
    }

    pub fn supply_arrivals(&self) -> &[Vec<ArrivalModel>] {
        &self.supply
    }

    pub fn waiting_costs(&self) -> Option<&WaitingCosts> {
        self.waiting_costs.as_ref()
    }

    pub fn costs_folded(&self) -> bool {
        self.costs_folded
    }

    pub fn tag(&self) -> ModelTag {
        self.tag
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Fails unless every carry-over rate is exactly 0 or 1.
    pub fn require_integer_carry_over(&self) -> Result<(), Error> {
        for t in 0..self.horizon {
            for (name, a) in [("alpha", self.alpha[t]), ("beta", self.beta[t])] {
                if a != 0.0 && a != 1.0 {
                    return Err(Error::NonIntegerCarryOver(format!("{name}[{t}] = {a}")));
                }
            }
        }
        Ok(())
    }

    /// Largest quantity of each type that can be present in any period.
    pub fn lattice_bounds(&self) -> (Vec<u32>, Vec<u32>) {
        let side = |arr: &Vec<Vec<ArrivalModel>>, rate: &Vec<f64>, k: usize| {
            let mut best = vec![0u32; k];
            let mut cur = vec![0u32; k];
            for t in 0..self.horizon {
                for (idx, c) in cur.iter_mut().enumerate() {
                    let carried = if t > 0 && rate[t - 1] > 0.0 { *c } else { 0 };
                    *c = carried + arr[t][idx].max_value();
                    best[idx] = best[idx].max(*c);
                }
            }
            best
        };
        (side(&self.demand, &self.alpha, self.m), side(&self.supply, &self.beta, self.n))
    }

    /// Joint arrival pmf of period `t`, the product of the per-type pmfs.
    pub fn arrival_outcomes(&self, t: usize) -> Vec<ArrivalOutcome> {
        let mut out = vec![ArrivalOutcome { demand: Vec::new(), supply: Vec::new(), prob: 1.0 }];
        for model in &self.demand[t] {
            out = out
                .into_iter()
                .flat_map(|o| {
                    model.atoms().map(move |(a, p)| {
                        let mut d = o.demand.clone();
                        d.push(a);
                        ArrivalOutcome { demand: d, supply: Vec::new(), prob: o.prob * p }
                    })
                })
                .collect();
        }
        for model in &self.supply[t] {
            out = out
                .into_iter()
                .flat_map(|o| {
                    model.atoms().map(move |(a, p)| {
                        let mut s = o.supply.clone();
                        s.push(a);
                        ArrivalOutcome { demand: o.demand.clone(), supply: s, prob: o.prob * p }
                    })
                })
                .collect();
        }
        out
    }

    pub fn mean_demand(&self, t: usize, i: usize) -> f64 {
        self.demand[t][i].mean()
    }

    pub fn mean_supply(&self, t: usize, j: usize) -> f64 {
        self.supply[t][j].mean()
    }

    /// Period-`t` objective: matching reward, minus leftover waiting costs unless folded.
    pub fn stage_value(&self, t: usize, decision: &MatchingDecision, post: &PostMatchState) -> f64 {
        let r = &self.rewards[t];
        let mut value = 0.0;
        for i in 0..self.m {
            for j in 0..self.n {
                let q = decision.get(i, j);
                if q > 0 {
                    value += r.get(i, j) * q as f64;
                }
            }
        }
        if let (Some(w), false) = (&self.waiting_costs, self.costs_folded) {
            for i in 0..self.m {
                value -= w.c[t][i] * post.u[i] as f64;
            }
            for j in 0..self.n {
                value -= w.h[t][j] * post.v[j] as f64;
            }
        }
        value
    }

    pub(crate) fn replace_rewards(&self, rewards: Vec<RewardMatrix>) -> Self {
        Self { rewards, ..self.clone() }
    }
}

pub fn apply_decision(state: &SystemState, decision: &MatchingDecision) -> Result<PostMatchState, Error> {
    if decision.m() != state.x.len() || decision.n() != state.y.len() {
        return Err(Error::DimensionMismatch(format!(
            "decision {}x{} against state {}x{}",
            decision.m(),
            decision.n(),
            state.x.len(),
            state.y.len()
        )));
    }
    let mut u = state.x.clone();
    let mut v = state.y.clone();
    for (i, ui) in u.iter_mut().enumerate() {
        let r = decision.row_sum(i);
        *ui = ui
            .checked_sub(r)
            .ok_or_else(|| Error::Infeasible(format!("row {i} matches {r} > {}", state.x[i])))?;
    }
    for (j, vj) in v.iter_mut().enumerate() {
        let c = decision.col_sum(j);
        *vj = vj
            .checked_sub(c)
            .ok_or_else(|| Error::Infeasible(format!("column {j} matches {c} > {}", state.y[j])))?;
    }
    Ok(PostMatchState { u, v })
}

fn integer_rate(a: f64, name: &str) -> Result<bool, Error> {
    if a == 0.0 {
        Ok(false)
    } else if a == 1.0 {
        Ok(true)
    } else {
        Err(Error::NonIntegerCarryOver(format!("{name} = {a}")))
    }
}

pub fn transition(
    post: &PostMatchState,
    arrivals_d: &[u32],
    arrivals_s: &[u32],
    alpha_t: f64,
    beta_t: f64,
) -> Result<SystemState, Error> {
    if arrivals_d.len() != post.u.len() || arrivals_s.len() != post.v.len() {
        return Err(Error::DimensionMismatch("arrival vectors do not match the state".into()));
    }
    let keep_u = integer_rate(alpha_t, "alpha")?;
    let keep_v = integer_rate(beta_t, "beta")?;
    let x = post.u.iter().zip(arrivals_d).map(|(u, d)| if keep_u { u + d } else { *d }).collect();
    let y = post.v.iter().zip(arrivals_s).map(|(v, s)| if keep_v { v + s } else { *s }).collect();
    Ok(SystemState { x, y })
}

pub fn reward_of(rewards_t: &RewardMatrix, decision: &MatchingDecision) -> Result<f64, Error> {
    if rewards_t.rows() != decision.m() || rewards_t.cols() != decision.n() {
        return Err(Error::DimensionMismatch(format!(
            "rewards {}x{} against decision {}x{}",
            rewards_t.rows(),
            rewards_t.cols(),
            decision.m(),
            decision.n()
        )));
    }
    Ok(rewards_t
        .as_slice()
        .iter()
        .zip(decision.as_slice())
        .map(|(r, q)| r * *q as f64)
        .sum())
}

/// Discounted tail sums `A[t][k] = sum_{tau >= t} prod_{t <= s < tau} rate[s] * cost[tau][k]`.
fn discounted_tails(cost: &[Vec<f64>], rate: &[f64]) -> Vec<Vec<f64>> {
    let horizon = cost.len();
    let k = cost.first().map_or(0, Vec::len);
    let mut tails = vec![vec![0.0; k]; horizon];
    for t in (0..horizon).rev() {
        for idx in 0..k {
            let next = if t + 1 < horizon { rate[t] * tails[t + 1][idx] } else { 0.0 };
            tails[t][idx] = cost[t][idx] + next;
        }
    }
    tails
}

/// Instance whose rewards absorb the waiting costs; the costs stay attached for reporting.
pub fn fold_waiting_costs(instance: &MatchingInstance, costs: &WaitingCosts) -> Result<MatchingInstance, Error> {
    costs.validate(instance.horizon, instance.m, instance.n)?;
    let a = discounted_tails(&costs.c, &instance.alpha);
    let b = discounted_tails(&costs.h, &instance.beta);
    let rewards = (0..instance.horizon)
        .map(|t| {
            let mut r = instance.rewards[t].clone();
            for i in 0..instance.m {
                for j in 0..instance.n {
                    r.set(i, j, r.get(i, j) + a[t][i] + b[t][j]);
                }
            }
            r
        })
        .collect();
    let mut folded = instance.replace_rewards(rewards);
    folded.waiting_costs = Some(costs.clone());
    folded.costs_folded = true;
    Ok(folded)
}

/// Gap between the folded objective and the reward-minus-costs objective, for any policy.
pub fn waiting_cost_constant(instance: &MatchingInstance, costs: &WaitingCosts) -> Result<f64, Error> {
    costs.validate(instance.horizon, instance.m, instance.n)?;
    let a = discounted_tails(&costs.c, &instance.alpha);
    let b = discounted_tails(&costs.h, &instance.beta);
    let mut total = 0.0;
    for t in 0..instance.horizon {
        for i in 0..instance.m {
            total += instance.mean_demand(t, i) * a[t][i];
        }
        for j in 0..instance.n {
            total += instance.mean_supply(t, j) * b[t][j];
        }
    }
    Ok(total)
}
