//! Vertical model: top-down matching, total-quantity rules and the one-step-ahead policy.

use alloc::string::String;
use alloc::vec::Vec;

use hashbrown::HashMap;
use spin::Mutex;

use crate::dp::ExactSolver;
use crate::error::Error;
use crate::instance::{apply_decision, ArrivalOutcome, MatchingDecision, MatchingInstance, ModelTag, PostMatchState, SystemState};
use crate::policies::Policy;
use crate::rng;
use crate::TOL;

/// Cumulative quantities `x~_i = x_1 + ... + x_i`, `y~_j = y_1 + ... + y_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformedState {
    pub xt: Vec<u32>,
    pub yt: Vec<u32>,
}

impl TransformedState {
    pub fn from_state(state: &SystemState) -> Self {
        let cum = |v: &[u32]| {
            v.iter()
                .scan(0u32, |acc, a| {
                    *acc += a;
                    Some(*acc)
                })
                .collect()
        };
        Self { xt: cum(&state.x), yt: cum(&state.y) }
    }

    pub fn max_quantity(&self) -> u32 {
        self.xt.last().copied().unwrap_or(0).min(self.yt.last().copied().unwrap_or(0))
    }
}

/// Additive components `r[t][i][j] = r_d[t][i] + r_s[t][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalRewards {
    pub r_d: Vec<Vec<f64>>,
    pub r_s: Vec<Vec<f64>>,
}

fn consumed(cum: &[u32], q: u32) -> Vec<u32> {
    let mut prev = 0;
    cum.iter()
        .map(|c| {
            let cur = (*c).min(q);
            let k = cur - prev;
            prev = cur;
            k
        })
        .collect()
}

/// Consumes the `q_total` best units on each side and pairs them in quality order.
pub fn topdown_decision(state: &SystemState, q_total: u32) -> Result<MatchingDecision, Error> {
    let ts = TransformedState::from_state(state);
    let max = ts.max_quantity();
    if q_total > max {
        return Err(Error::QuantityOutOfRange { q: q_total, max });
    }
    let mut d = consumed(&ts.xt, q_total);
    let mut s = consumed(&ts.yt, q_total);
    let mut q = MatchingDecision::zeros(d.len(), s.len());
    let (mut i, mut j) = (0, 0);
    while i < d.len() && j < s.len() {
        if d[i] == 0 {
            i += 1;
            continue;
        }
        if s[j] == 0 {
            j += 1;
            continue;
        }
        let k = d[i].min(s[j]);
        q.set(i, j, q.get(i, j) + k);
        d[i] -= k;
        s[j] -= k;
    }
    Ok(q)
}

fn require_vertical(instance: &MatchingInstance) -> Result<bool, Error> {
    match instance.tag() {
        ModelTag::Vertical => Ok(true),
        ModelTag::VerticalNonAdditive => Ok(false),
        _ => Err(Error::NotVertical),
    }
}

/// Top-down matching with the total quantity chosen by `rule`.
pub struct TopDownPolicy<F> {
    name: String,
    rule: F,
}

impl<F> Policy for TopDownPolicy<F>
where
    F: Fn(usize, &SystemState) -> Result<u32, Error> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&self, t: usize, state: &SystemState) -> Result<MatchingDecision, Error> {
        topdown_decision(state, (self.rule)(t, state)?)
    }
}

pub fn topdown_policy<F>(instance: &MatchingInstance, name: impl Into<String>, quantity_rule: F) -> Result<TopDownPolicy<F>, Error>
where
    F: Fn(usize, &SystemState) -> Result<u32, Error> + Send + Sync,
{
    require_vertical(instance)?;
    Ok(TopDownPolicy { name: name.into(), rule: quantity_rule })
}

/// Smallest total quantity whose top-down decision is optimal, if any.
pub fn optimal_total_quantity(solver: &mut ExactSolver, t: usize, state: &SystemState) -> Result<Option<u32>, Error> {
    let value = solver.value(t, state)?;
    let max = TransformedState::from_state(state).max_quantity();
    for q in 0..=max {
        let decision = topdown_decision(state, q)?;
        if solver.h_value(t, state, &decision)? >= value - TOL {
            return Ok(Some(q));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OsaMode {
    /// Exact expected value of greedy top-down matching from the next period on.
    Exact,
    /// Average over seeded greedy rollouts, shared by all candidate quantities.
    Sampled { samples: usize, seed: u64 },
}

pub const DEFAULT_OSA_SAMPLES: usize = 1000;

/// One-step-ahead policy: chooses this period's total quantity assuming greedy top-down
/// matching afterwards.
pub struct OsaPolicy {
    inst: MatchingInstance,
    mode: OsaMode,
    additive: bool,
    outcomes: Vec<Vec<ArrivalOutcome>>,
    greedy: Mutex<HashMap<(usize, SystemState), f64>>,
}

pub fn osa_policy(instance: &MatchingInstance, mode: OsaMode) -> Result<OsaPolicy, Error> {
    let additive = require_vertical(instance)?;
    if mode == OsaMode::Exact {
        instance.require_integer_carry_over()?;
    }
    let outcomes = match mode {
        OsaMode::Exact => (0..instance.horizon()).map(|t| instance.arrival_outcomes(t)).collect(),
        OsaMode::Sampled { .. } => Vec::new(),
    };
    Ok(OsaPolicy { inst: instance.clone(), mode, additive, outcomes, greedy: Mutex::new(HashMap::new()) })
}

fn greedy_decision(state: &SystemState) -> MatchingDecision {
    let max = TransformedState::from_state(state).max_quantity();
    topdown_decision(state, max).expect("maximum quantity is in range")
}

impl OsaPolicy {
    /// Exact value of greedy top-down matching from period `t` on.
    pub fn greedy_value(&self, t: usize, state: &SystemState) -> Result<f64, Error> {
        if t >= self.inst.horizon() {
            return Ok(0.0);
        }
        let key = (t, state.clone());
        if let Some(v) = self.greedy.lock().get(&key) {
            return Ok(*v);
        }
        let q = greedy_decision(state);
        let post = apply_decision(state, &q)?;
        let value = self.inst.stage_value(t, &q, &post) + self.exact_continuation(t, &post)?;
        self.greedy.lock().insert(key, value);
        Ok(value)
    }

    fn exact_continuation(&self, t: usize, post: &PostMatchState) -> Result<f64, Error> {
        if t + 1 >= self.inst.horizon() {
            return Ok(0.0);
        }
        let keep_u = self.inst.alpha(t) == 1.0;
        let keep_v = self.inst.beta(t) == 1.0;
        let mut total = 0.0;
        for o in &self.outcomes[t + 1] {
            let next = SystemState {
                x: post.u.iter().zip(&o.demand).map(|(u, d)| if keep_u { u + d } else { *d }).collect(),
                y: post.v.iter().zip(&o.supply).map(|(v, s)| if keep_v { v + s } else { *s }).collect(),
            };
            total += o.prob * self.greedy_value(t + 1, &next)?;
        }
        Ok(total)
    }

    fn sampled_continuation(&self, t: usize, post: &PostMatchState, seed: u64, samples: usize) -> Result<f64, Error> {
        let horizon = self.inst.horizon();
        if t + 1 >= horizon || samples == 0 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for k in 0..samples as u64 {
            let mut u = post.u.clone();
            let mut v = post.v.clone();
            let mut value = 0.0;
            for tau in t + 1..horizon {
                let x: Vec<u32> = (0..self.inst.m())
                    .map(|i| {
                        rng::carry(seed, k, tau - 1, rng::SIDE_CARRY_DEMAND, i, u[i], self.inst.alpha(tau - 1))
                            + rng::draw_arrival(self.inst.demand_arrival(tau, i), seed, k, tau, rng::SIDE_DEMAND, i)
                    })
                    .collect();
                let y: Vec<u32> = (0..self.inst.n())
                    .map(|j| {
                        rng::carry(seed, k, tau - 1, rng::SIDE_CARRY_SUPPLY, j, v[j], self.inst.beta(tau - 1))
                            + rng::draw_arrival(self.inst.supply_arrival(tau, j), seed, k, tau, rng::SIDE_SUPPLY, j)
                    })
                    .collect();
                let state = SystemState { x, y };
                let q = greedy_decision(&state);
                let next = apply_decision(&state, &q)?;
                value += self.inst.stage_value(tau, &q, &next);
                u = next.u;
                v = next.v;
            }
            total += value;
        }
        Ok(total / samples as f64)
    }

    /// `F_t(Q)`: top-down reward now plus the greedy continuation.
    pub fn objective(&self, t: usize, state: &SystemState, q_total: u32) -> Result<f64, Error> {
        let q = topdown_decision(state, q_total)?;
        let post = apply_decision(state, &q)?;
        let cont = match self.mode {
            OsaMode::Exact => self.exact_continuation(t, &post)?,
            OsaMode::Sampled { samples, seed } => {
                self.sampled_continuation(t, &post, rng::derive_seed(seed, rng::hash_state(t, state)), samples)?
            }
        };
        Ok(self.inst.stage_value(t, &q, &post) + cont)
    }

    /// First maximizer of `F_t`; with additive rewards the scan stops at the first decrease.
    pub fn total_quantity(&self, t: usize, state: &SystemState) -> Result<u32, Error> {
        let max = TransformedState::from_state(state).max_quantity();
        let mut best = (0, self.objective(t, state, 0)?);
        for q in 1..=max {
            let f = self.objective(t, state, q)?;
            if f > best.1 + TOL {
                best = (q, f);
            } else if self.additive && f < best.1 - TOL {
                break;
            }
        }
        Ok(best.0)
    }
}

impl Policy for OsaPolicy {
    fn name(&self) -> &str {
        match self.mode {
            OsaMode::Exact => "osa-exact",
            OsaMode::Sampled { .. } => "osa-sampled",
        }
    }

    fn decide(&self, t: usize, state: &SystemState) -> Result<MatchingDecision, Error> {
        topdown_decision(state, self.total_quantity(t, state)?)
    }
}
