//! The 2x2 horizontal model: collapsed DP, protection levels and the two-round policy.

use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::dp::DEFAULT_BUDGET;
use crate::error::Error;
use crate::instance::{MatchingDecision, MatchingInstance, SystemState};
use crate::policies::Policy;
use crate::TOL;

/// `z1 = x1 - y1`, `z2 = y2 - x2`, `ib = z1 - z2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollapsedState {
    pub z1: i64,
    pub z2: i64,
    pub ib: i64,
}

impl CollapsedState {
    pub fn from_state(state: &SystemState) -> Self {
        let z1 = state.x[0] as i64 - state.y[0] as i64;
        let z2 = state.y[1] as i64 - state.x[1] as i64;
        Self { z1, z2, ib: z1 - z2 }
    }
}

/// Match-down-to targets for one `(t, ib)`. The `plus` regime matches type-1 demand with
/// type-2 supply, the `minus` regime type-2 demand with type-1 supply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtectionEntry {
    pub p_d_plus: u32,
    pub p_s_plus: u32,
    pub p_d_minus: u32,
    pub p_s_minus: u32,
    /// Whether the scanned range for the regime was nonempty.
    pub plus_feasible: bool,
    pub minus_feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectionTable {
    pub ib_min: i64,
    /// `entries[t][ib - ib_min]`.
    pub entries: Vec<Vec<ProtectionEntry>>,
}

impl ProtectionTable {
    pub fn horizon(&self) -> usize {
        self.entries.len()
    }

    pub fn ib_max(&self) -> i64 {
        self.ib_min + self.entries.first().map_or(0, Vec::len) as i64 - 1
    }

    pub fn get(&self, t: usize, ib: i64) -> Option<&ProtectionEntry> {
        if ib < self.ib_min {
            return None;
        }
        self.entries.get(t)?.get((ib - self.ib_min) as usize)
    }

    fn nearest(&self, t: usize, ib: i64) -> &ProtectionEntry {
        let row = &self.entries[t];
        let k = (ib - self.ib_min).clamp(0, row.len() as i64 - 1) as usize;
        &row[k]
    }

    /// Type-1 demand target in the plus regime. Outside the stored range the supply level
    /// of the nearest entry is held fixed.
    pub fn demand_target_plus(&self, t: usize, ib: i64) -> u32 {
        match self.get(t, ib) {
            Some(e) => e.p_d_plus,
            None => {
                let p_s = (self.nearest(t, ib).p_s_plus as i64).max(-ib).max(0);
                (p_s + ib).max(0) as u32
            }
        }
    }

    /// Type-2 demand target in the minus regime.
    pub fn demand_target_minus(&self, t: usize, ib: i64) -> u32 {
        match self.get(t, ib) {
            Some(e) => e.p_d_minus,
            None => {
                let p_s = (self.nearest(t, ib).p_s_minus as i64).max(-ib).max(0);
                (p_s + ib).max(0) as u32
            }
        }
    }
}

/// Period data of the collapsed formulation.
struct Collapsed {
    horizon: usize,
    /// `[r11, r12, r21, r22]` per period.
    r: Vec<[f64; 4]>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// `([d1, d2, s1, s2], prob)` per period.
    outcomes: Vec<Vec<([i64; 4], f64)>>,
    u_memo: HashMap<(usize, i64, i64), f64>,
    c_memo: HashMap<(usize, i64, i64), f64>,
    budget: usize,
}

impl Collapsed {
    fn new(instance: &MatchingInstance) -> Self {
        let horizon = instance.horizon();
        let r = (0..horizon)
            .map(|t| {
                [instance.reward(t, 0, 0), instance.reward(t, 0, 1), instance.reward(t, 1, 0), instance.reward(t, 1, 1)]
            })
            .collect();
        let outcomes = (0..horizon)
            .map(|t| {
                instance
                    .arrival_outcomes(t)
                    .into_iter()
                    .map(|o| {
                        ([o.demand[0] as i64, o.demand[1] as i64, o.supply[0] as i64, o.supply[1] as i64], o.prob)
                    })
                    .collect()
            })
            .collect();
        Self {
            horizon,
            r,
            alpha: instance.alphas().to_vec(),
            beta: instance.betas().to_vec(),
            outcomes,
            u_memo: HashMap::new(),
            c_memo: HashMap::new(),
            budget: DEFAULT_BUDGET,
        }
    }

    fn charge(&self) -> Result<(), Error> {
        if self.u_memo.len() + self.c_memo.len() >= self.budget {
            return Err(Error::BudgetExceeded { limit: self.budget });
        }
        Ok(())
    }

    /// `U_t(z)`: round-2 optimum given the collapsed state.
    fn u(&mut self, t: usize, z1: i64, z2: i64) -> Result<f64, Error> {
        if t >= self.horizon {
            return Ok(0.0);
        }
        if let Some(v) = self.u_memo.get(&(t, z1, z2)) {
            return Ok(*v);
        }
        let (lo, hi) = if z1 > 0 && z2 > 0 {
            (0, z1.min(z2))
        } else if z1 < 0 && z2 < 0 {
            (z1.max(z2), 0)
        } else {
            (0, 0)
        };
        let mut best = f64::NEG_INFINITY;
        for q in lo..=hi {
            let immediate = if q >= 0 { self.r[t][1] * q as f64 } else { self.r[t][2] * (-q) as f64 };
            let j = immediate + self.c(t, z1 - q, z2 - q)?;
            if j > best {
                best = j;
            }
        }
        self.charge()?;
        self.u_memo.insert((t, z1, z2), best);
        Ok(best)
    }

    /// Expected value from period `t + 1` on, given post-match levels `a = z1 - q`
    /// (type-1 demand if positive, type-1 supply if negative) and `b = z2 - q`
    /// (type-2 supply if positive, type-2 demand if negative).
    fn c(&mut self, t: usize, a: i64, b: i64) -> Result<f64, Error> {
        if t + 1 >= self.horizon {
            return Ok(0.0);
        }
        let (alpha, beta) = (self.alpha[t], self.beta[t]);
        let a = if alpha == 0.0 { a.min(0) } else { a };
        let a = if beta == 0.0 { a.max(0) } else { a };
        let b = if beta == 0.0 { b.min(0) } else { b };
        let b = if alpha == 0.0 { b.max(0) } else { b };
        if let Some(v) = self.c_memo.get(&(t, a, b)) {
            return Ok(*v);
        }
        let (ka, kb) = (alpha as i64, beta as i64);
        let r = self.r[t + 1];
        let mut total = 0.0;
        for k in 0..self.outcomes[t + 1].len() {
            let ([d1, d2, s1, s2], p) = self.outcomes[t + 1][k];
            let x1 = ka * a.max(0) + d1;
            let y1 = kb * (-a).max(0) + s1;
            let x2 = ka * (-b).max(0) + d2;
            let y2 = kb * b.max(0) + s2;
            let round1 = r[0] * x1.min(y1) as f64 + r[3] * x2.min(y2) as f64;
            total += p * (round1 + self.u(t + 1, x1 - y1, y2 - x2)?);
        }
        self.charge()?;
        self.c_memo.insert((t, a, b), total);
        Ok(total)
    }
}

fn check_assumptions(instance: &MatchingInstance) -> Result<(), Error> {
    match crate::models::horizontal_assumption_failure(instance) {
        Some(msg) => Err(Error::AssumptionViolated(msg)),
        None => Ok(()),
    }
}

/// Protection levels after checking the reward assumptions of the 2x2 model.
pub fn compute_protection_levels_2x2(instance: &MatchingInstance) -> Result<ProtectionTable, Error> {
    if instance.m() != 2 || instance.n() != 2 {
        return Err(Error::DimensionMismatch("the collapsed formulation needs a 2x2 instance".into()));
    }
    check_assumptions(instance)?;
    protection_levels_unchecked(instance)
}

/// Protection levels from the collapsed DP, skipping the assumption checks.
pub fn protection_levels_unchecked(instance: &MatchingInstance) -> Result<ProtectionTable, Error> {
    if instance.m() != 2 || instance.n() != 2 {
        return Err(Error::DimensionMismatch("the collapsed formulation needs a 2x2 instance".into()));
    }
    instance.require_integer_carry_over()?;
    if instance.waiting_costs().is_some() && !instance.costs_folded() {
        return Err(Error::AssumptionViolated("waiting costs must be folded into the rewards".into()));
    }
    let (bd, bs) = instance.lattice_bounds();
    let (bd, bs) = ([bd[0] as i64, bd[1] as i64], [bs[0] as i64, bs[1] as i64]);
    let ib_min = -(bs[0] + bs[1]);
    let ib_max = bd[0] + bd[1];
    let mut dp = Collapsed::new(instance);
    let mut entries = Vec::with_capacity(dp.horizon);
    for t in 0..dp.horizon {
        let alpha = dp.alpha[t];
        let mut row = Vec::with_capacity((ib_max - ib_min + 1) as usize);
        for ib in ib_min..=ib_max {
            let lo = ib.max(0) - ib;
            let cap_d = |bound: i64| if alpha > 0.0 { bound - ib } else { i64::MAX };
            let (r12, r21) = (dp.r[t][1], dp.r[t][2]);
            let (p_s_plus, plus_feasible) = scan(lo, bs[1].min(cap_d(bd[0])), |p| {
                Ok(-r12 * p as f64 + dp.c(t, p + ib, p)?)
            })?;
            let (p_s_minus, minus_feasible) = scan(lo, bs[0].min(cap_d(bd[1])), |p| {
                Ok(-r21 * p as f64 + dp.c(t, -p, -(p + ib))?)
            })?;
            row.push(ProtectionEntry {
                p_d_plus: (p_s_plus + ib) as u32,
                p_s_plus: p_s_plus as u32,
                p_d_minus: (p_s_minus + ib) as u32,
                p_s_minus: p_s_minus as u32,
                plus_feasible,
                minus_feasible,
            });
        }
        entries.push(row);
    }
    Ok(ProtectionTable { ib_min, entries })
}

/// First maximizer of `f` over `lo..=hi`; an empty range yields `lo`.
fn scan(lo: i64, hi: i64, mut f: impl FnMut(i64) -> Result<f64, Error>) -> Result<(i64, bool), Error> {
    if hi < lo {
        return Ok((lo, false));
    }
    let mut best = (lo, f(lo)?);
    for p in lo + 1..=hi {
        let v = f(p)?;
        if v > best.1 + TOL {
            best = (p, v);
        }
    }
    Ok((best.0, true))
}

/// Round 1 clears the perfect pairs, round 2 matches the imperfect pair down to the
/// stored target.
pub struct TwoRoundPolicy {
    table: ProtectionTable,
}

impl TwoRoundPolicy {
    pub fn table(&self) -> &ProtectionTable {
        &self.table
    }
}

pub fn two_round_policy_2x2(instance: &MatchingInstance, table: ProtectionTable) -> Result<TwoRoundPolicy, Error> {
    if instance.m() != 2 || instance.n() != 2 {
        return Err(Error::DimensionMismatch("two-round policy needs a 2x2 instance".into()));
    }
    if table.horizon() != instance.horizon() {
        return Err(Error::DimensionMismatch("protection table horizon differs from the instance".into()));
    }
    Ok(TwoRoundPolicy { table })
}

impl Policy for TwoRoundPolicy {
    fn name(&self) -> &str {
        "two-round"
    }

    fn decide(&self, t: usize, state: &SystemState) -> Result<MatchingDecision, Error> {
        if state.x.len() != 2 || state.y.len() != 2 {
            return Err(Error::DimensionMismatch("two-round policy needs a 2x2 state".into()));
        }
        let mut q = MatchingDecision::zeros(2, 2);
        q.set(0, 0, state.x[0].min(state.y[0]));
        q.set(1, 1, state.x[1].min(state.y[1]));
        let z = CollapsedState::from_state(state);
        if z.z1 > 0 && z.z2 > 0 {
            let target = self.table.demand_target_plus(t, z.ib) as i64;
            q.set(0, 1, (z.z1 - target).clamp(0, z.z1.min(z.z2)) as u32);
        } else if z.z1 < 0 && z.z2 < 0 {
            let target = self.table.demand_target_minus(t, z.ib) as i64;
            let (need, have) = (-z.z2, -z.z1);
            q.set(1, 0, (need - target).clamp(0, need.min(have)) as u32);
        }
        Ok(q)
    }
}
