//! Verification suites: random instances from each premise class checked against the
//! exact oracle.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use typematch_core::dp::{for_each_decision, ExactSolver};
use typematch_core::monge::audit_relations;
use typematch_core::policies::horizontal::{compute_protection_levels_2x2, two_round_policy_2x2, ProtectionTable};
use typematch_core::policies::iou::best_iou_policy;
use typematch_core::policies::vertical::{optimal_total_quantity, osa_policy, topdown_policy, OsaMode};
use typematch_core::policies::{greedy_policy, CompatibleOptimalPolicy, OptimalPolicy, Policy};
use typematch_core::rng::derive_seed;
use typematch_core::{
    audit_compatibility, build_dominance_graph, evaluate_policy_exact, fold_waiting_costs, max_weight_transport, policy_trace,
    solve_exact, weak_dominates, AuditMode, Error, MatchingDecision, MatchingInstance, RewardMatrix, SystemState, TraceStep,
    WaitingCosts, TOL,
};

use crate::config::InstanceDoc;
use crate::generate::{self, Clause, Gen, Side};
use crate::HarnessError;

pub const SUITES: [&str; 12] = [
    "compatibility",
    "perfect_pairs",
    "protection_2x2",
    "protection_monotone",
    "lost_demand",
    "iou_bound",
    "topdown",
    "osa_dominance",
    "q_monotone",
    "waiting_costs",
    "transport_oracle",
    "robust_necessity",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub detail: String,
    pub instance: Option<InstanceDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub trials: usize,
    pub seed: u64,
    pub passed: bool,
    pub failures: Vec<TrialFailure>,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy)]
enum Agg {
    Min,
    Max,
    Sum,
}

#[derive(Default)]
struct Trial {
    failure: Option<String>,
    instance: Option<MatchingInstance>,
    metrics: Vec<(&'static str, Agg, f64)>,
}

impl Trial {
    fn on(instance: &MatchingInstance) -> Self {
        Self { instance: Some(instance.clone()), ..Self::default() }
    }

    fn fail(&mut self, detail: String) {
        if self.failure.is_none() {
            self.failure = Some(detail);
        }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        if !ok {
            self.fail(detail());
        }
    }

    fn metric(&mut self, name: &'static str, agg: Agg, v: f64) {
        self.metrics.push((name, agg, v));
    }
}

type TrialFn = fn(&mut Trial, usize, u64) -> Result<(), Error>;

fn suite_fn(name: &str) -> Option<TrialFn> {
    Some(match name {
        "compatibility" => compatibility,
        "perfect_pairs" => perfect_pairs,
        "protection_2x2" => protection_2x2,
        "protection_monotone" => protection_monotone,
        "lost_demand" => lost_demand,
        "iou_bound" => iou_bound,
        "topdown" => topdown,
        "osa_dominance" => osa_dominance,
        "q_monotone" => q_monotone,
        "waiting_costs" => waiting_costs,
        "transport_oracle" => transport_oracle,
        "robust_necessity" => robust_necessity,
        _ => return None,
    })
}

/// Runs `trials` independent trials of `suite`; trial `k` draws from `derive_seed(seed, k)`.
pub fn verify_suite(suite: &str, trials: usize, seed: u64) -> Result<SuiteReport, HarnessError> {
    let run = suite_fn(suite).ok_or_else(|| HarnessError::UnknownSuite(suite.to_string()))?;
    let results: Vec<(usize, u64, Trial)> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let s = derive_seed(seed, k as u64);
            let mut trial = Trial::default();
            if let Err(e) = run(&mut trial, k, s) {
                trial.fail(format!("oracle error: {e}"));
            }
            (k, s, trial)
        })
        .collect();
    let mut failures = Vec::new();
    let mut metrics: BTreeMap<String, f64> = BTreeMap::new();
    for (k, s, trial) in results {
        for (name, agg, v) in trial.metrics {
            metrics
                .entry(name.to_string())
                .and_modify(|cur| {
                    *cur = match agg {
                        Agg::Min => cur.min(v),
                        Agg::Max => cur.max(v),
                        Agg::Sum => *cur + v,
                    }
                })
                .or_insert(v);
        }
        if let Some(detail) = trial.failure {
            failures.push(TrialFailure { trial: k, seed: s, detail, instance: trial.instance.as_ref().map(InstanceDoc::from_instance) });
        }
    }
    Ok(SuiteReport { suite: suite.to_string(), trials, seed, passed: failures.is_empty(), failures, metrics })
}

fn all_states(table: &typematch_core::ValueTable) -> Vec<(usize, SystemState)> {
    (0..table.instance().horizon()).flat_map(|t| table.states(t).into_iter().map(move |(s, _)| (t, s))).collect()
}

fn compatibility(out: &mut Trial, _k: usize, seed: u64) -> Result<(), Error> {
    let inst = generate::strong_valid_instance(&mut Gen::new(seed));
    *out = Trial::on(&inst);
    let table = Arc::new(solve_exact(&inst)?);
    let graph = build_dominance_graph(&inst);
    let policy = CompatibleOptimalPolicy::new(table.clone(), graph.clone())?;
    let optimum = table.expected_value();
    let value = evaluate_policy_exact(&inst, &policy)?;
    out.check((value - optimum).abs() <= TOL, || format!("compatible policy value {value} differs from optimum {optimum}"));
    let mut steps = Vec::new();
    for (t, state) in all_states(&table) {
        let decision = policy.decide(t, &state)?;
        let h = table.h_value(t, &state, &decision)?;
        let v = table.value(t, &state).unwrap_or(f64::NAN);
        out.check(h >= v - TOL, || format!("compatible decision at t={t} {state:?} is not optimal ({h} < {v})"));
        steps.push(TraceStep { t, state, decision });
    }
    let report = audit_compatibility(&inst, &graph, &steps, AuditMode::Strong)?;
    out.check(report.is_compatible(), || format!("{} priority violations, first {:?}", report.violations.len(), report.violations[0]));
    out.metric("states_audited", Agg::Sum, steps.len() as f64);
    Ok(())
}

/// Best continuation value over the decisions that fix `q_ij = min(x_i, y_j)`.
fn best_with_pair_full(table: &typematch_core::ValueTable, t: usize, s: &SystemState, i: usize, j: usize) -> Result<f64, Error> {
    let full = s.x[i].min(s.y[j]);
    let mut best = f64::NEG_INFINITY;
    for_each_decision(s, &mut |q, _| {
        if q.get(i, j) == full {
            best = best.max(table.h_value(t, s, q)?);
        }
        Ok(())
    })?;
    Ok(best)
}

fn perfect_pairs(out: &mut Trial, _k: usize, seed: u64) -> Result<(), Error> {
    let (inst, pairs) = generate::perfect_pair_instance(&mut Gen::new(seed));
    *out = Trial::on(&inst);
    let table = solve_exact(&inst)?;
    for (t, s) in all_states(&table) {
        let v = table.value(t, &s).unwrap_or(f64::NAN);
        for p in &pairs {
            let best = best_with_pair_full(&table, t, &s, p.i, p.j)?;
            out.check(best >= v - TOL, || format!("perfect pair ({},{}) not fully matched by any optimum at t={t} {s:?}", p.i, p.j));
        }
    }
    out.metric("perfect_pairs", Agg::Sum, pairs.len() as f64);
    Ok(())
}

fn check_table_identity(out: &mut Trial, table: &ProtectionTable) {
    for (t, row) in table.entries.iter().enumerate() {
        for (k, e) in row.iter().enumerate() {
            let ib = table.ib_min + k as i64;
            out.check(
                i64::from(e.p_d_plus) - i64::from(e.p_s_plus) == ib && i64::from(e.p_d_minus) - i64::from(e.p_s_minus) == ib,
                || format!("p_d - p_s != ib at t={t}, ib={ib}: {e:?}"),
            );
        }
    }
}

fn two_round_matches_optimum(out: &mut Trial, inst: &MatchingInstance) -> Result<ProtectionTable, Error> {
    let table = compute_protection_levels_2x2(inst)?;
    check_table_identity(out, &table);
    let policy = two_round_policy_2x2(inst, table.clone())?;
    let value = evaluate_policy_exact(inst, &policy)?;
    let optimum = solve_exact(inst)?.expected_value();
    out.check((value - optimum).abs() <= TOL, || format!("two-round value {value} differs from optimum {optimum}"));
    Ok(table)
}

fn protection_2x2(out: &mut Trial, k: usize, seed: u64) -> Result<(), Error> {
    let rate = (k % 2) as f64;
    let inst = generate::horizontal_instance(&mut Gen::new(seed), rate, rate);
    *out = Trial::on(&inst);
    two_round_matches_optimum(out, &inst)?;
    Ok(())
}

fn protection_monotone(out: &mut Trial, k: usize, seed: u64) -> Result<(), Error> {
    let rate = (k % 2) as f64;
    let inst = generate::horizontal_instance(&mut Gen::new(seed), rate, rate);
    *out = Trial::on(&inst);
    let table = compute_protection_levels_2x2(&inst)?;
    check_table_identity(out, &table);
    for (t, row) in table.entries.iter().enumerate() {
        for (w, pair) in row.windows(2).enumerate() {
            let ib = table.ib_min + w as i64;
            let (a, b) = (pair[0], pair[1]);
            let step = |lo: u32, hi: u32| i64::from(hi) - i64::from(lo);
            if a.plus_feasible && b.plus_feasible {
                let (dd, ds) = (step(a.p_d_plus, b.p_d_plus), step(a.p_s_plus, b.p_s_plus));
                out.check((0..=1).contains(&dd) && (-1..=0).contains(&ds), || {
                    format!("plus levels not monotone at t={t}, ib={ib}->{}: {a:?} -> {b:?}", ib + 1)
                });
            }
            if a.minus_feasible && b.minus_feasible {
                let (dd, ds) = (step(a.p_d_minus, b.p_d_minus), step(a.p_s_minus, b.p_s_minus));
                out.check((0..=1).contains(&dd) && (-1..=0).contains(&ds), || {
                    format!("minus levels not monotone at t={t}, ib={ib}->{}: {a:?} -> {b:?}", ib + 1)
                });
            }
        }
    }
    Ok(())
}

/// Supply levels of the feasible entries read as `max(p, -ib)` for one `p` per period.
fn lost_demand(out: &mut Trial, _k: usize, seed: u64) -> Result<(), Error> {
    let inst = generate::horizontal_instance(&mut Gen::new(seed), 0.0, 1.0);
    *out = Trial::on(&inst);
    let table = two_round_matches_optimum(out, &inst)?;
    for (t, row) in table.entries.iter().enumerate() {
        let ib_of = |k: usize| table.ib_min + k as i64;
        for (regime, level, feasible) in [
            ("plus", row.iter().map(|e| e.p_s_plus).collect::<Vec<_>>(), row.iter().map(|e| e.plus_feasible).collect::<Vec<_>>()),
            ("minus", row.iter().map(|e| e.p_s_minus).collect(), row.iter().map(|e| e.minus_feasible).collect()),
        ] {
            let Some(top) = (0..row.len()).rev().find(|&k| feasible[k]) else { continue };
            let base = i64::from(level[top]).max(0);
            for k in (0..row.len()).filter(|&k| feasible[k]) {
                let expected = base.max(-ib_of(k));
                out.check(i64::from(level[k]) == expected, || {
                    format!("{regime} supply level at t={t}, ib={} is {}, expected {expected}", ib_of(k), level[k])
                });
            }
        }
    }
    Ok(())
}

fn iou_bound(out: &mut Trial, _k: usize, seed: u64) -> Result<(), Error> {
    let inst = generate::one_level_upgrading(&mut Gen::new(seed));
    *out = Trial::on(&inst);
    let (_, restricted) = best_iou_policy(&inst)?;
    let optimum = solve_exact(&inst)?.expected_value();
    out.check(restricted >= 0.5 * optimum - TOL, || format!("restricted value {restricted} below half of {optimum}"));
    out.check(restricted <= optimum + TOL, || format!("restricted value {restricted} above optimum {optimum}"));
    let ratio = if optimum > TOL { restricted / optimum } else { 1.0 };
    out.metric("min_ratio", Agg::Min, ratio);
    Ok(())
}

/// Vertical instance for trial `k`: even trials are fully patient, odd ones lose demand.
fn vertical_for(k: usize, seed: u64) -> MatchingInstance {
    let mut g = Gen::new(seed);
    let (alpha, beta) = if k % 2 == 0 { (1.0, 1.0) } else { (0.0, 1.0) };
    if g.coin() {
        generate::vertical_instance(&mut g, alpha, beta)
    } else {
        generate::vertical_nonadditive_instance(&mut g, alpha, beta)
    }
}

fn topdown(out: &mut Trial, k: usize, seed: u64) -> Result<(), Error> {
    let inst = vertical_for(k, seed);
    *out = Trial::on(&inst);
    let table = solve_exact(&inst)?;
    let optimum = table.expected_value();
    let states = all_states(&table);
    let mut solver = table.into_solver();
    for (t, s) in &states {
        out.check(optimal_total_quantity(&mut solver, *t, s)?.is_some(), || format!("no optimal top-down decision at t={t} {s:?}"));
    }
    let solver = std::sync::Mutex::new(solver);
    let policy = topdown_policy(&inst, "topdown-optimal", move |t: usize, s: &SystemState| {
        let mut solver = solver.lock().expect("solver lock");
        optimal_total_quantity(&mut solver, t, s)?.ok_or(Error::StateNotCovered { t })
    })?;
    let value = evaluate_policy_exact(&inst, &policy)?;
    out.check((value - optimum).abs() <= TOL, || format!("top-down value {value} differs from optimum {optimum}"));
    Ok(())
}

fn osa_dominance(out: &mut Trial, k: usize, seed: u64) -> Result<(), Error> {
    let inst = vertical_for(k, seed);
    *out = Trial::on(&inst);
    let osa = evaluate_policy_exact(&inst, &osa_policy(&inst, OsaMode::Exact)?)?;
    let greedy = evaluate_policy_exact(&inst, &greedy_policy(&inst, None))?;
    let optimum = solve_exact(&inst)?.expected_value();
    out.check(osa >= greedy - TOL, || format!("one-step-ahead {osa} below greedy {greedy}"));
    out.check(osa <= optimum + TOL, || format!("one-step-ahead {osa} above optimum {optimum}"));
    out.metric("min_gain_over_greedy", Agg::Min, osa - greedy);
    out.metric("max_gap_to_optimum", Agg::Max, optimum - osa);
    Ok(())
}

fn plus(v: &[u32], k: usize) -> Vec<u32> {
    let mut v = v.to_vec();
    v[k] += 1;
    v
}

fn q_monotone(out: &mut Trial, k: usize, seed: u64) -> Result<(), Error> {
    let inst = vertical_for(k, seed);
    *out = Trial::on(&inst);
    let table = solve_exact(&inst)?;
    let states = all_states(&table);
    let mut solver = table.into_solver();
    let q_star = |solver: &mut ExactSolver, t: usize, s: &SystemState| -> Result<i64, Error> {
        Ok(i64::from(optimal_total_quantity(solver, t, s)?.ok_or(Error::StateNotCovered { t })?))
    };
    for (t, s) in &states {
        let base = q_star(&mut solver, *t, s)?;
        for (side, len) in [("demand", s.x.len()), ("supply", s.y.len())] {
            let mut prev: Option<i64> = None;
            for i in 0..len {
                let bumped = if side == "demand" {
                    SystemState::new(plus(&s.x, i), s.y.clone())
                } else {
                    SystemState::new(s.x.clone(), plus(&s.y, i))
                };
                let d = q_star(&mut solver, *t, &bumped)? - base;
                out.check((0..=1).contains(&d), || format!("Q* response {d} to one more {side} unit of type {i} at t={t} {s:?}"));
                if let Some(p) = prev {
                    out.check(p >= d, || format!("Q* response of {side} type {i} exceeds type {} at t={t} {s:?}", i - 1));
                }
                prev = Some(d);
            }
        }
    }
    out.metric("states_checked", Agg::Sum, states.len() as f64);
    Ok(())
}

/// Closed-form gap between the folded and the cost-charged objectives.
fn cost_constant(inst: &MatchingInstance, costs: &WaitingCosts) -> f64 {
    let horizon = inst.horizon();
    let mut total = 0.0;
    for t in 0..horizon {
        for tau in t..horizon {
            let (mut da, mut db) = (1.0, 1.0);
            for s in t..tau {
                da *= inst.alpha(s);
                db *= inst.beta(s);
            }
            total += (0..inst.m()).map(|i| inst.mean_demand(t, i) * da * costs.c[tau][i]).sum::<f64>();
            total += (0..inst.n()).map(|j| inst.mean_supply(t, j) * db * costs.h[tau][j]).sum::<f64>();
        }
    }
    total
}

fn sorted(mut d: Vec<MatchingDecision>) -> Vec<MatchingDecision> {
    d.sort();
    d
}

fn waiting_costs(out: &mut Trial, _k: usize, seed: u64) -> Result<(), Error> {
    let mut g = Gen::new(seed);
    let (inst, costs) = generate::waiting_cost_instance(&mut g);
    let raw = inst.clone().with_waiting_costs(costs.clone())?;
    *out = Trial::on(&raw);
    let folded = fold_waiting_costs(&inst, &costs)?;
    let constant = cost_constant(&inst, &costs);
    let raw_table = solve_exact(&raw)?;
    let folded_table = solve_exact(&folded)?;
    let gap = folded_table.expected_value() - raw_table.expected_value();
    out.check((gap - constant).abs() <= TOL, || format!("optimal values differ by {gap}, closed form gives {constant}"));
    let greedy = greedy_policy(&inst, None);
    let gap = evaluate_policy_exact(&folded, &greedy)? - evaluate_policy_exact(&raw, &greedy)?;
    out.check((gap - constant).abs() <= TOL, || format!("greedy values differ by {gap}, closed form gives {constant}"));
    let states = all_states(&raw_table);
    for _ in 0..20 {
        let (t, s) = &states[g.int(0, states.len() as u32 - 1) as usize];
        let a = raw_table.optimal_actions(*t, s)?;
        let b = folded_table.optimal_actions(*t, s)?;
        out.check(!a.truncated && !b.truncated, || format!("argmax set truncated at t={t} {s:?}"));
        out.check(sorted(a.decisions) == sorted(b.decisions), || format!("argmax sets differ at t={t} {s:?}"));
    }
    Ok(())
}

/// Exhaustive search over integer matrices within the row and column capacities.
pub fn enumerate_transport(r: &[Vec<f64>], x: &[u32], y: &[u32]) -> f64 {
    fn go(r: &[Vec<f64>], cell: usize, rows: &mut [u32], cols: &mut [u32], acc: f64, best: &mut f64) {
        let n = cols.len();
        if cell == rows.len() * n {
            *best = best.max(acc);
            return;
        }
        let (i, j) = (cell / n, cell % n);
        for q in 0..=rows[i].min(cols[j]) {
            rows[i] -= q;
            cols[j] -= q;
            go(r, cell + 1, rows, cols, acc + r[i][j] * f64::from(q), best);
            rows[i] += q;
            cols[j] += q;
        }
    }
    let mut best = f64::NEG_INFINITY;
    go(r, 0, &mut x.to_vec(), &mut y.to_vec(), 0.0, &mut best);
    best
}

fn transport_oracle(out: &mut Trial, _k: usize, seed: u64) -> Result<(), Error> {
    let (r, s) = generate::transport_case(&mut Gen::new(seed));
    let matrix = RewardMatrix::from_rows(&r)?;
    let result = max_weight_transport(&matrix, &s);
    let brute = enumerate_transport(&r, &s.x, &s.y);
    out.check((result.value - brute).abs() <= TOL, || format!("transport value {} vs enumeration {brute} on {r:?} {s:?}", result.value));
    out.check(result.q.is_feasible_for(&s), || "transport decision infeasible".into());
    Ok(())
}

fn robust_necessity(out: &mut Trial, _k: usize, seed: u64) -> Result<(), Error> {
    let mut g = Gen::new(seed);
    for (clause, side) in [
        (Clause::Current, Side::Supply),
        (Clause::Current, Side::Demand),
        (Clause::Future, Side::Supply),
        (Clause::Future, Side::Demand),
        (Clause::Square, Side::Supply),
        (Clause::Square, Side::Demand),
    ] {
        let cx = generate::counterexample(&mut g, clause, side);
        let inst = &cx.instance;
        let graph = build_dominance_graph(inst);
        for (a, b) in &cx.relation {
            let holds = weak_dominates(inst, *a, *b)?;
            let expect = clause == Clause::Square;
            out.check(holds == expect, || format!("{}: weak relation {a:?} over {b:?} is {holds}", cx.label));
        }
        if clause == Clause::Square {
            out.check(!graph.strong_valid, || format!("{}: square inequality unexpectedly holds", cx.label));
        }
        let table = Arc::new(solve_exact(inst)?);
        let trace = policy_trace(inst, &OptimalPolicy::new(table.clone()))?;
        for step in &trace {
            let actions = table.optimal_actions(step.t, &step.state)?;
            out.check(actions.decisions.len() == 1 && !actions.truncated, || {
                format!("{}: optimum not unique at t={} {:?}", cx.label, step.t, step.state)
            });
        }
        let report = audit_relations(&cx.relation, &trace, cx.mode)?;
        out.check(!report.is_compatible(), || format!("{}: optimal trace respects the relation", cx.label));
        if out.failure.is_some() && out.instance.is_none() {
            out.instance = Some(inst.clone());
        }
    }
    out.metric("constructions", Agg::Sum, 6.0);
    Ok(())
}
