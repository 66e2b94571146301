//! Exact finite-horizon oracle on the integer state lattice.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use hashbrown::HashMap;

use crate::error::Error;
use crate::instance::{
    apply_decision, ArrivalOutcome, MatchingDecision, MatchingInstance, PostMatchState, SystemState,
};
use crate::monge::{decision_violations, AuditMode, DominanceGraph, Pair, RelationSet};
use crate::policies::Policy;
use crate::TOL;

pub const DEFAULT_BUDGET: usize = 5_000_000;
pub const DEFAULT_ACTION_CAP: usize = 10_000;
const TRANSFER_STEP_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverOptions {
    /// Maximum number of memoized (period, state) and (period, post-state) entries.
    pub budget: usize,
    /// Maximum size of an [`ActionSet`].
    pub action_cap: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { budget: DEFAULT_BUDGET, action_cap: DEFAULT_ACTION_CAP }
    }
}

/// Restricts the admissible decisions at a state.
pub type ActionFilter = fn(&SystemState, &MatchingDecision) -> bool;

/// One visited (period, state, decision) triple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TraceStep {
    pub t: usize,
    pub state: SystemState,
    pub decision: MatchingDecision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    pub decisions: Vec<MatchingDecision>,
    pub value: f64,
    /// Set when more than the configured cap of maximizers exist.
    pub truncated: bool,
}

/// Calls `f` on every feasible integer decision, cells filled in row-major order.
pub fn for_each_decision<F>(state: &SystemState, f: &mut F) -> Result<(), Error>
where
    F: FnMut(&MatchingDecision, &PostMatchState) -> Result<(), Error>,
{
    let (m, n) = (state.x.len(), state.y.len());
    let mut q = MatchingDecision::zeros(m, n);
    let mut post = PostMatchState { u: state.x.clone(), v: state.y.clone() };
    fill(0, m, n, &mut q, &mut post, f)
}

fn fill<F>(cell: usize, m: usize, n: usize, q: &mut MatchingDecision, post: &mut PostMatchState, f: &mut F) -> Result<(), Error>
where
    F: FnMut(&MatchingDecision, &PostMatchState) -> Result<(), Error>,
{
    if cell == m * n {
        return f(q, post);
    }
    let (i, j) = (cell / n, cell % n);
    let cap = post.u[i].min(post.v[j]);
    for k in 0..=cap {
        q.set(i, j, k);
        post.u[i] -= k;
        post.v[j] -= k;
        let res = fill(cell + 1, m, n, q, post, f);
        post.u[i] += k;
        post.v[j] += k;
        res?;
    }
    q.set(i, j, 0);
    Ok(())
}

fn next_state(inst: &MatchingInstance, t: usize, post: &PostMatchState, o: &ArrivalOutcome) -> SystemState {
    let keep_u = inst.alpha(t) == 1.0;
    let keep_v = inst.beta(t) == 1.0;
    SystemState {
        x: post.u.iter().zip(&o.demand).map(|(u, d)| if keep_u { u + d } else { *d }).collect(),
        y: post.v.iter().zip(&o.supply).map(|(v, s)| if keep_v { v + s } else { *s }).collect(),
    }
}

/// Lazily memoized Bellman recursion. States are explored on demand, so any state of the
/// lattice can be queried, not only those reachable from the initial distribution.
#[derive(Debug, Clone)]
pub struct ExactSolver {
    inst: MatchingInstance,
    outcomes: Vec<Vec<ArrivalOutcome>>,
    values: Vec<HashMap<SystemState, f64>>,
    cont: Vec<HashMap<PostMatchState, f64>>,
    filter: Option<ActionFilter>,
    options: SolverOptions,
    entries: usize,
}

impl ExactSolver {
    pub fn new(instance: &MatchingInstance) -> Result<Self, Error> {
        instance.require_integer_carry_over()?;
        let horizon = instance.horizon();
        Ok(Self {
            inst: instance.clone(),
            outcomes: (0..horizon).map(|t| instance.arrival_outcomes(t)).collect(),
            values: vec![HashMap::new(); horizon],
            cont: vec![HashMap::new(); horizon],
            filter: None,
            options: SolverOptions::default(),
            entries: 0,
        })
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_filter(mut self, filter: ActionFilter) -> Self {
        self.filter = Some(filter);
        self
    }

    pub fn instance(&self) -> &MatchingInstance {
        &self.inst
    }

    fn count_entry(&mut self) -> Result<(), Error> {
        self.entries += 1;
        if self.entries > self.options.budget {
            return Err(Error::BudgetExceeded { limit: self.options.budget });
        }
        Ok(())
    }

    fn check_state(&self, t: usize, state: &SystemState) -> Result<(), Error> {
        if t >= self.inst.horizon() {
            return Err(Error::RangeError(format!("period {t} beyond horizon")));
        }
        if state.x.len() != self.inst.m() || state.y.len() != self.inst.n() {
            return Err(Error::DimensionMismatch("state does not match the instance".into()));
        }
        Ok(())
    }

    /// `V_t(x, y)`.
    pub fn value(&mut self, t: usize, state: &SystemState) -> Result<f64, Error> {
        self.check_state(t, state)?;
        self.value_inner(t, state)
    }

    fn value_inner(&mut self, t: usize, state: &SystemState) -> Result<f64, Error> {
        if let Some(v) = self.values[t].get(state) {
            return Ok(*v);
        }
        let filter = self.filter;
        let mut best = f64::NEG_INFINITY;
        for_each_decision(state, &mut |q, post| {
            if filter.map_or(true, |f| f(state, q)) {
                let h = self.inst.stage_value(t, q, post) + self.continuation(t, post)?;
                if h > best {
                    best = h;
                }
            }
            Ok(())
        })?;
        self.count_entry()?;
        self.values[t].insert(state.clone(), best);
        Ok(best)
    }

    /// `E V_{t+1}(alpha u + D, beta v + S)`.
    pub fn continuation(&mut self, t: usize, post: &PostMatchState) -> Result<f64, Error> {
        if t + 1 >= self.inst.horizon() {
            return Ok(0.0);
        }
        if let Some(v) = self.cont[t].get(post) {
            return Ok(*v);
        }
        let mut total = 0.0;
        for k in 0..self.outcomes[t + 1].len() {
            let o = &self.outcomes[t + 1][k];
            let p = o.prob;
            let next = next_state(&self.inst, t, post, o);
            total += p * self.value_inner(t + 1, &next)?;
        }
        self.count_entry()?;
        self.cont[t].insert(post.clone(), total);
        Ok(total)
    }

    /// `H_t(Q, x, y)`.
    pub fn h_value(&mut self, t: usize, state: &SystemState, decision: &MatchingDecision) -> Result<f64, Error> {
        self.check_state(t, state)?;
        let post = apply_decision(state, decision)?;
        Ok(self.inst.stage_value(t, decision, &post) + self.continuation(t, &post)?)
    }

    /// `E V_1(D^1, S^1)`.
    pub fn expected_value(&mut self) -> Result<f64, Error> {
        let mut total = 0.0;
        for k in 0..self.outcomes[0].len() {
            let o = &self.outcomes[0][k];
            let p = o.prob;
            let s = SystemState { x: o.demand.clone(), y: o.supply.clone() };
            total += p * self.value_inner(0, &s)?;
        }
        Ok(total)
    }

    pub fn optimal_actions(&mut self, t: usize, state: &SystemState) -> Result<ActionSet, Error> {
        let value = self.value(t, state)?;
        let filter = self.filter;
        let cap = self.options.action_cap;
        let mut decisions = Vec::new();
        let mut truncated = false;
        for_each_decision(state, &mut |q, post| {
            if filter.map_or(true, |f| f(state, q)) {
                let h = self.inst.stage_value(t, q, post) + self.continuation(t, post)?;
                if h >= value - TOL {
                    if decisions.len() < cap {
                        decisions.push(q.clone());
                    } else {
                        truncated = true;
                    }
                }
            }
            Ok(())
        })?;
        Ok(ActionSet { decisions, value, truncated })
    }

    /// First maximizer in enumeration order.
    pub fn best_action(&mut self, t: usize, state: &SystemState) -> Result<MatchingDecision, Error> {
        let value = self.value(t, state)?;
        let filter = self.filter;
        let mut found = None;
        for_each_decision(state, &mut |q, post| {
            if found.is_none() && filter.map_or(true, |f| f(state, q)) {
                let h = self.inst.stage_value(t, q, post) + self.continuation(t, post)?;
                if h >= value - TOL {
                    found = Some(q.clone());
                }
            }
            Ok(())
        })?;
        found.ok_or(Error::StateNotCovered { t })
    }

    /// Priority transfers starting from `start`, evaluated against this solver.
    pub fn make_compatible(
        &mut self,
        graph: &DominanceGraph,
        t: usize,
        state: &SystemState,
        start: &MatchingDecision,
    ) -> Result<MatchingDecision, Error> {
        if !graph.strong_valid {
            return Err(Error::StrongConditionFails);
        }
        let optimum = self.value(t, state)?;
        transfer_to_compatible(&graph.strong_oriented, AuditMode::Strong, state, start, optimum, &mut |q| {
            self.h_value(t, state, q)
        })
    }

    /// Two-way transfers toward the weak relation's dominant pairs.
    pub fn make_weakly_compatible(
        &mut self,
        graph: &DominanceGraph,
        t: usize,
        state: &SystemState,
        start: &MatchingDecision,
    ) -> Result<MatchingDecision, Error> {
        let optimum = self.value(t, state)?;
        transfer_to_compatible(&graph.weak_oriented, AuditMode::Weak, state, start, optimum, &mut |q| {
            self.h_value(t, state, q)
        })
    }

    pub fn entries(&self) -> usize {
        self.entries
    }

    pub fn freeze(self) -> ValueTable {
        let bounds = self.inst.lattice_bounds();
        ValueTable { solver: self, bounds }
    }
}

/// Read-only value table over every state explored from the initial distribution.
#[derive(Debug, Clone)]
pub struct ValueTable {
    solver: ExactSolver,
    pub bounds: (Vec<u32>, Vec<u32>),
}

impl ValueTable {
    pub fn instance(&self) -> &MatchingInstance {
        &self.solver.inst
    }

    pub fn value(&self, t: usize, state: &SystemState) -> Option<f64> {
        self.solver.values.get(t)?.get(state).copied()
    }

    /// Covered states of period `t`, sorted.
    pub fn states(&self, t: usize) -> Vec<(SystemState, f64)> {
        let mut out: Vec<_> = self.solver.values[t].iter().map(|(s, v)| (s.clone(), *v)).collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    pub fn len(&self) -> usize {
        self.solver.values.iter().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn expected_value(&self) -> f64 {
        self.solver
            .outcomes[0]
            .iter()
            .map(|o| o.prob * self.value(0, &SystemState { x: o.demand.clone(), y: o.supply.clone() }).unwrap_or(0.0))
            .sum()
    }

    fn lookup_cont(&self, t: usize, post: &PostMatchState) -> Result<f64, Error> {
        if t + 1 >= self.solver.inst.horizon() {
            return Ok(0.0);
        }
        self.solver.cont[t].get(post).copied().ok_or(Error::StateNotCovered { t })
    }

    pub fn h_value(&self, t: usize, state: &SystemState, decision: &MatchingDecision) -> Result<f64, Error> {
        let post = apply_decision(state, decision)?;
        Ok(self.solver.inst.stage_value(t, decision, &post) + self.lookup_cont(t, &post)?)
    }

    fn admissible(&self, state: &SystemState, q: &MatchingDecision) -> bool {
        self.solver.filter.map_or(true, |f| f(state, q))
    }

    pub fn optimal_actions(&self, t: usize, state: &SystemState) -> Result<ActionSet, Error> {
        let value = self.value(t, state).ok_or(Error::StateNotCovered { t })?;
        let cap = self.solver.options.action_cap;
        let mut decisions = Vec::new();
        let mut truncated = false;
        for_each_decision(state, &mut |q, post| {
            if self.admissible(state, q) {
                let h = self.solver.inst.stage_value(t, q, post) + self.lookup_cont(t, post)?;
                if h >= value - TOL {
                    if decisions.len() < cap {
                        decisions.push(q.clone());
                    } else {
                        truncated = true;
                    }
                }
            }
            Ok(())
        })?;
        Ok(ActionSet { decisions, value, truncated })
    }

    pub fn best_action(&self, t: usize, state: &SystemState) -> Result<MatchingDecision, Error> {
        let value = self.value(t, state).ok_or(Error::StateNotCovered { t })?;
        let mut found = None;
        for_each_decision(state, &mut |q, post| {
            if found.is_none() && self.admissible(state, q) {
                let h = self.solver.inst.stage_value(t, q, post) + self.lookup_cont(t, post)?;
                if h >= value - TOL {
                    found = Some(q.clone());
                }
            }
            Ok(())
        })?;
        found.ok_or(Error::StateNotCovered { t })
    }

    /// Priority transfers applied to the first member of `actions`.
    pub fn make_compatible(
        &self,
        actions: &ActionSet,
        graph: &DominanceGraph,
        t: usize,
        state: &SystemState,
    ) -> Result<MatchingDecision, Error> {
        let start = actions.decisions.first().ok_or(Error::StateNotCovered { t })?;
        self.make_compatible_from(graph, t, state, start)
    }

    pub fn make_compatible_from(
        &self,
        graph: &DominanceGraph,
        t: usize,
        state: &SystemState,
        start: &MatchingDecision,
    ) -> Result<MatchingDecision, Error> {
        if !graph.strong_valid {
            return Err(Error::StrongConditionFails);
        }
        let optimum = self.value(t, state).ok_or(Error::StateNotCovered { t })?;
        transfer_to_compatible(&graph.strong_oriented, AuditMode::Strong, state, start, optimum, &mut |q| {
            self.h_value(t, state, q)
        })
    }

    /// Back to a mutable solver, e.g. to query states outside the covered set.
    pub fn into_solver(self) -> ExactSolver {
        self.solver
    }
}

pub fn solve_exact(instance: &MatchingInstance) -> Result<ValueTable, Error> {
    solve_exact_with(instance, SolverOptions::default(), None)
}

pub fn solve_exact_with(
    instance: &MatchingInstance,
    options: SolverOptions,
    filter: Option<ActionFilter>,
) -> Result<ValueTable, Error> {
    let mut solver = ExactSolver::new(instance)?.with_options(options);
    solver.filter = filter;
    solver.expected_value()?;
    Ok(solver.freeze())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum TransferKind {
    TwoWay,
    ThreeWay,
}

/// Applies the largest available transfer until no relation in `relation` is violated.
/// Two-way transfers move units from a dominated pair to its dominant pair using the
/// dominant pair's leftover; three-way transfers (strong mode) swap a dominated row and
/// column pair for the dominant pair and the opposite corner.
pub fn transfer_to_compatible(
    relation: &RelationSet,
    mode: AuditMode,
    state: &SystemState,
    start: &MatchingDecision,
    optimum: f64,
    h: &mut dyn FnMut(&MatchingDecision) -> Result<f64, Error>,
) -> Result<MatchingDecision, Error> {
    let mut q = start.clone();
    for _ in 0..TRANSFER_STEP_CAP {
        let post = apply_decision(state, &q)?;
        if decision_violations(relation, state, &q, &post, mode).is_empty() {
            return Ok(q);
        }
        let mut best: Option<(Reverse<u32>, Pair, Pair, Pair, TransferKind)> = None;
        let mut consider = |cand: (Reverse<u32>, Pair, Pair, Pair, TransferKind)| {
            if best.as_ref().map_or(true, |b| cand < *b) {
                best = Some(cand);
            }
        };
        for (a, b) in relation {
            let qb = q.get(b.i, b.j);
            if qb == 0 {
                continue;
            }
            let slack = if b.j == a.j { post.u[a.i] } else { post.v[a.j] };
            if slack > 0 {
                consider((Reverse(qb.min(slack)), *a, *b, *b, TransferKind::TwoWay));
            }
            if mode == AuditMode::Strong && b.j == a.j {
                for (a2, c) in relation.range((*a, Pair::new(0, 0))..) {
                    if a2 != a {
                        break;
                    }
                    if c.i == a.i && c.j != a.j && q.get(c.i, c.j) > 0 {
                        consider((Reverse(qb.min(q.get(c.i, c.j))), *a, *b, *c, TransferKind::ThreeWay));
                    }
                }
            }
        }
        let Some((Reverse(eps), a, b, c, kind)) = best else {
            return Err(Error::TransferDidNotConverge { steps: 0 });
        };
        q.set(a.i, a.j, q.get(a.i, a.j) + eps);
        q.set(b.i, b.j, q.get(b.i, b.j) - eps);
        if kind == TransferKind::ThreeWay {
            q.set(c.i, c.j, q.get(c.i, c.j) - eps);
            q.set(b.i, c.j, q.get(b.i, c.j) + eps);
        }
        let value = h(&q)?;
        if value < optimum - TOL {
            return Err(Error::NotOptimalAfterTransfer { value, optimum });
        }
    }
    Err(Error::TransferDidNotConverge { steps: TRANSFER_STEP_CAP })
}

fn checked_decision(policy: &dyn Policy, t: usize, state: &SystemState) -> Result<(MatchingDecision, PostMatchState), Error> {
    let q = policy.decide(t, state)?;
    let post = apply_decision(state, &q).map_err(|e| Error::PolicyInfeasibleDecision {
        policy: policy.name().to_string(),
        t,
        detail: e.to_string(),
    })?;
    Ok((q, post))
}

/// Exact expected total objective of a state-feedback policy.
pub fn evaluate_policy_exact(instance: &MatchingInstance, policy: &dyn Policy) -> Result<f64, Error> {
    evaluate_policy_exact_with(instance, policy, SolverOptions::default())
}

pub fn evaluate_policy_exact_with(
    instance: &MatchingInstance,
    policy: &dyn Policy,
    options: SolverOptions,
) -> Result<f64, Error> {
    instance.require_integer_carry_over()?;
    let horizon = instance.horizon();
    let outcomes: Vec<_> = (0..horizon).map(|t| instance.arrival_outcomes(t)).collect();
    let mut memo: Vec<HashMap<SystemState, f64>> = vec![HashMap::new(); horizon];
    let mut entries = 0usize;

    struct Ctx<'a> {
        inst: &'a MatchingInstance,
        policy: &'a dyn Policy,
        outcomes: &'a [Vec<ArrivalOutcome>],
        memo: &'a mut Vec<HashMap<SystemState, f64>>,
        entries: &'a mut usize,
        budget: usize,
    }

    fn go(ctx: &mut Ctx<'_>, t: usize, state: &SystemState) -> Result<f64, Error> {
        if let Some(v) = ctx.memo[t].get(state) {
            return Ok(*v);
        }
        let (q, post) = checked_decision(ctx.policy, t, state)?;
        let mut value = ctx.inst.stage_value(t, &q, &post);
        if t + 1 < ctx.inst.horizon() {
            for o in &ctx.outcomes[t + 1] {
                let next = next_state(ctx.inst, t, &post, o);
                value += o.prob * go(ctx, t + 1, &next)?;
            }
        }
        *ctx.entries += 1;
        if *ctx.entries > ctx.budget {
            return Err(Error::BudgetExceeded { limit: ctx.budget });
        }
        ctx.memo[t].insert(state.clone(), value);
        Ok(value)
    }

    let mut ctx = Ctx { inst: instance, policy, outcomes: &outcomes, memo: &mut memo, entries: &mut entries, budget: options.budget };
    let mut total = 0.0;
    for o in &outcomes[0] {
        let s = SystemState { x: o.demand.clone(), y: o.supply.clone() };
        total += o.prob * go(&mut ctx, 0, &s)?;
    }
    Ok(total)
}

/// Every (period, state, decision) reachable under `policy`, sorted by period then state.
pub fn policy_trace(instance: &MatchingInstance, policy: &dyn Policy) -> Result<Vec<TraceStep>, Error> {
    instance.require_integer_carry_over()?;
    let horizon = instance.horizon();
    let mut frontier: BTreeSet<SystemState> = instance
        .arrival_outcomes(0)
        .into_iter()
        .map(|o| SystemState { x: o.demand, y: o.supply })
        .collect();
    let mut trace = Vec::new();
    for t in 0..horizon {
        let outcomes = if t + 1 < horizon { instance.arrival_outcomes(t + 1) } else { Vec::new() };
        let mut next = BTreeSet::new();
        for state in &frontier {
            let (q, post) = checked_decision(policy, t, state)?;
            for o in &outcomes {
                next.insert(next_state(instance, t, &post, o));
            }
            trace.push(TraceStep { t, state: state.clone(), decision: q });
            if trace.len() > DEFAULT_BUDGET {
                return Err(Error::BudgetExceeded { limit: DEFAULT_BUDGET });
            }
        }
        frontier = next;
    }
    Ok(trace)
}
