//! Tiered protection-level heuristic for horizontal models with more than two types.
//!
//! Each pair `(i, j)` gets its own 2x2 model: demand `i` against the consolidated supply
//! `j^c` of intermediate supply types, and the consolidated demand `i^c` against supply
//! `j`. Intermediate types are those forming a pair that dominates `(i, j)`. Their
//! effective arrivals are what remains after greedily matching the higher-tier pairs
//! among them, estimated from seeded samples.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::instance::{ArrivalModel, CarryOver, MatchingDecision, MatchingInstance, SystemState};
use crate::monge::{priority_tiers, DominanceGraph, Pair, PriorityTiers};
use crate::policies::horizontal::{protection_levels_unchecked, ProtectionTable};
use crate::policies::Policy;
use crate::rng;

/// Sampled residual arrivals of one period.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSample {
    /// Residual demand of each intermediate demand type, in `demand_types` order.
    pub demand: Vec<u32>,
    /// Residual supply of each intermediate supply type, in `supply_types` order.
    pub supply: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Consolidation {
    pub demand_types: Vec<usize>,
    pub supply_types: Vec<usize>,
    /// Higher-tier pairs greedily matched among the intermediate types.
    pub prematched: Vec<Pair>,
    /// `samples[t][k]`, empty when the exact sub-instance was used.
    pub samples: Vec<Vec<ResidualSample>>,
    /// `r~_{i j^c}` per period.
    pub r_i_jc: Vec<f64>,
    /// `r~_{i^c j}` per period.
    pub r_ic_j: Vec<f64>,
    /// True when the pair's neighborhood already is a 2x2 model and no sampling was needed.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairPlan {
    pub pair: Pair,
    pub table: ProtectionTable,
    pub consolidation: Consolidation,
}

pub struct ConsolidatedPolicy {
    tiers: PriorityTiers,
    plans: BTreeMap<Pair, PairPlan>,
}

impl ConsolidatedPolicy {
    pub fn plan(&self, pair: Pair) -> Option<&PairPlan> {
        self.plans.get(&pair)
    }

    pub fn tiers(&self) -> &PriorityTiers {
        &self.tiers
    }
}

impl Policy for ConsolidatedPolicy {
    fn name(&self) -> &str {
        "consolidated-protection"
    }

    fn decide(&self, t: usize, state: &SystemState) -> Result<MatchingDecision, Error> {
        let mut x = state.x.clone();
        let mut y = state.y.clone();
        let mut q = MatchingDecision::zeros(x.len(), y.len());
        for tier in &self.tiers.tiers {
            for p in tier {
                let Some(plan) = self.plans.get(p) else { continue };
                let ib = x[p.i] as i64 - y[p.j] as i64;
                let target = plan.table.demand_target_plus(t, ib);
                let k = x[p.i].min(y[p.j]).min(x[p.i].saturating_sub(target));
                if k > 0 {
                    q.set(p.i, p.j, q.get(p.i, p.j) + k);
                    x[p.i] -= k;
                    y[p.j] -= k;
                }
            }
        }
        Ok(q)
    }
}

fn empirical(values: impl Iterator<Item = u32>, count: usize) -> ArrivalModel {
    let mut hist: BTreeMap<u32, usize> = BTreeMap::new();
    for v in values {
        *hist.entry(v).or_default() += 1;
    }
    let (support, counts): (Vec<u32>, Vec<usize>) = hist.into_iter().unzip();
    let mut probs: Vec<f64> = counts.iter().map(|c| *c as f64 / count as f64).collect();
    let drift: f64 = 1.0 - probs.iter().sum::<f64>();
    if let Some(last) = probs.last_mut() {
        *last += drift;
    }
    ArrivalModel::new(support, probs).unwrap_or_else(|_| ArrivalModel::deterministic(0))
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn sub_instance(
    instance: &MatchingInstance,
    rewards: Vec<Vec<Vec<f64>>>,
    demand: Vec<Vec<ArrivalModel>>,
    supply: Vec<Vec<ArrivalModel>>,
) -> Result<MatchingInstance, Error> {
    MatchingInstance::new(
        2,
        2,
        instance.horizon(),
        &rewards,
        CarryOver::PerPeriod(instance.alphas().to_vec()),
        CarryOver::PerPeriod(instance.betas().to_vec()),
        demand,
        supply,
    )
}

fn plan_pair(
    instance: &MatchingInstance,
    graph: &DominanceGraph,
    tiers: &PriorityTiers,
    p: Pair,
    pair_index: u64,
    sample_count: usize,
    seed: u64,
) -> Result<PairPlan, Error> {
    let horizon = instance.horizon();
    let demand_types: Vec<usize> = (0..instance.m()).filter(|&k| k != p.i && graph.dominates(Pair::new(k, p.j), p)).collect();
    let supply_types: Vec<usize> = (0..instance.n()).filter(|&k| k != p.j && graph.dominates(Pair::new(p.i, k), p)).collect();
    let own_tier = tiers.tier_of(p).unwrap_or(usize::MAX);
    let mut prematched: Vec<Pair> = demand_types
        .iter()
        .flat_map(|&a| supply_types.iter().map(move |&b| Pair::new(a, b)))
        .filter(|q| tiers.tier_of(*q).unwrap_or(usize::MAX) < own_tier)
        .filter(|q| (0..horizon).any(|t| instance.reward(t, q.i, q.j) > 0.0))
        .collect();
    prematched.sort_by_key(|q| (tiers.tier_of(*q), *q));

    let raw_d = |t: usize| instance.demand_arrival(t, p.i).clone();
    let raw_s = |t: usize| instance.supply_arrival(t, p.j).clone();

    if prematched.is_empty() && demand_types.len() == 1 && supply_types.len() == 1 {
        let (a, b) = (demand_types[0], supply_types[0]);
        let rewards = (0..horizon)
            .map(|t| {
                let r = |i: usize, j: usize| instance.reward(t, i, j);
                vec![vec![r(p.i, b), r(p.i, p.j)], vec![r(a, b), r(a, p.j)]]
            })
            .collect();
        let demand = (0..horizon).map(|t| vec![raw_d(t), instance.demand_arrival(t, a).clone()]).collect();
        let supply = (0..horizon).map(|t| vec![instance.supply_arrival(t, b).clone(), raw_s(t)]).collect();
        let sub = sub_instance(instance, rewards, demand, supply)?;
        let table = protection_levels_unchecked(&sub)?;
        return Ok(PairPlan {
            pair: p,
            table,
            consolidation: Consolidation {
                r_i_jc: (0..horizon).map(|t| instance.reward(t, p.i, b)).collect(),
                r_ic_j: (0..horizon).map(|t| instance.reward(t, a, p.j)).collect(),
                demand_types,
                supply_types,
                prematched,
                samples: Vec::new(),
                exact: true,
            },
        });
    }

    let pair_seed = rng::derive_seed(seed, pair_index);
    let mut samples = Vec::with_capacity(horizon);
    let mut r_i_jc = Vec::with_capacity(horizon);
    let mut r_ic_j = Vec::with_capacity(horizon);
    let mut demand = Vec::with_capacity(horizon);
    let mut supply = Vec::with_capacity(horizon);
    let n_samples = if demand_types.is_empty() && supply_types.is_empty() { 1 } else { sample_count.max(1) };
    for t in 0..horizon {
        let mut period = Vec::with_capacity(n_samples);
        for k in 0..n_samples {
            let mut d: Vec<u32> = demand_types
                .iter()
                .map(|&a| rng::draw_arrival(instance.demand_arrival(t, a), pair_seed, k as u64, t, rng::SIDE_DEMAND, a))
                .collect();
            let mut s: Vec<u32> = supply_types
                .iter()
                .map(|&b| rng::draw_arrival(instance.supply_arrival(t, b), pair_seed, k as u64, t, rng::SIDE_SUPPLY, b))
                .collect();
            for q in &prematched {
                let ia = demand_types.iter().position(|&a| a == q.i).expect("intermediate demand");
                let jb = supply_types.iter().position(|&b| b == q.j).expect("intermediate supply");
                let take = d[ia].min(s[jb]);
                d[ia] -= take;
                s[jb] -= take;
            }
            period.push(ResidualSample { demand: d, supply: s });
        }
        let mean = |f: &dyn Fn(&ResidualSample) -> u32| period.iter().map(|r| f(r) as f64).sum::<f64>() / n_samples as f64;
        let mean_s: Vec<f64> = (0..supply_types.len()).map(|b| mean(&|r| r.supply[b])).collect();
        let mean_d: Vec<f64> = (0..demand_types.len()).map(|a| mean(&|r| r.demand[a])).collect();
        let weighted_s: f64 = supply_types.iter().zip(&mean_s).map(|(&b, m)| instance.reward(t, p.i, b) * m).sum();
        let weighted_d: f64 = demand_types.iter().zip(&mean_d).map(|(&a, m)| instance.reward(t, a, p.j) * m).sum();
        let total_s: f64 = mean_s.iter().sum();
        let total_d: f64 = mean_d.iter().sum();
        r_i_jc.push(ratio(weighted_s, total_s));
        r_ic_j.push(ratio(weighted_d, total_d));
        demand.push(vec![raw_d(t), empirical(period.iter().map(|r| r.demand.iter().sum()), n_samples)]);
        supply.push(vec![empirical(period.iter().map(|r| r.supply.iter().sum()), n_samples), raw_s(t)]);
        samples.push(period);
    }
    let rewards = (0..horizon)
        .map(|t| vec![vec![r_i_jc[t], instance.reward(t, p.i, p.j)], vec![0.0, r_ic_j[t]]])
        .collect();
    let sub = sub_instance(instance, rewards, demand, supply)?;
    let table = protection_levels_unchecked(&sub)?;
    Ok(PairPlan {
        pair: p,
        table,
        consolidation: Consolidation { demand_types, supply_types, prematched, samples, r_i_jc, r_ic_j, exact: false },
    })
}

/// Builds one protection table per positive-reward pair and walks the tiers at run time.
pub fn consolidated_protection_policy(
    instance: &MatchingInstance,
    graph: &DominanceGraph,
    sample_count: usize,
    seed: u64,
) -> Result<ConsolidatedPolicy, Error> {
    let tiers = priority_tiers(graph)?;
    instance.require_integer_carry_over()?;
    let mut plans = BTreeMap::new();
    for (index, p) in graph.pairs().enumerate() {
        if !(0..instance.horizon()).any(|t| instance.reward(t, p.i, p.j) > 0.0) {
            continue;
        }
        plans.insert(p, plan_pair(instance, graph, &tiers, p, index as u64, sample_count, seed)?);
    }
    Ok(ConsolidatedPolicy { tiers, plans })
}
