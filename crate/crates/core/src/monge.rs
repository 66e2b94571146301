//! Dominance between neighboring pairs, priority tiers, perfect pairs and
//! compatibility audits.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::dp::TraceStep;
use crate::error::Error;
use crate::instance::{apply_decision, MatchingInstance};
use crate::TOL;

/// A demand type `i` together with a supply type `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
}

impl Pair {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }

    pub fn is_neighbor(&self, other: &Pair) -> bool {
        (self.i == other.i) != (self.j == other.j)
    }
}

/// Ordered relation `(dominant, dominated)`.
pub type RelationSet = BTreeSet<(Pair, Pair)>;

/// Checks the weak relation `a > b` for neighbors `a`, `b`.
pub fn weak_dominates(instance: &MatchingInstance, a: Pair, b: Pair) -> Result<bool, Error> {
    if !a.is_neighbor(&b) {
        return Err(Error::NotNeighbors(a, b));
    }
    let horizon = instance.horizon();
    for t in 0..horizon {
        let gap = instance.reward(t, a.i, a.j) - instance.reward(t, b.i, b.j);
        if gap < -TOL {
            return Ok(false);
        }
        if t + 1 == horizon {
            continue;
        }
        if a.j == b.j {
            let rate = instance.alpha(t);
            for j2 in 0..instance.n() {
                let next = instance.reward(t + 1, a.i, j2) - instance.reward(t + 1, b.i, j2);
                if gap < rate * next - TOL {
                    return Ok(false);
                }
            }
        } else {
            let rate = instance.beta(t);
            for i2 in 0..instance.m() {
                let next = instance.reward(t + 1, i2, a.j) - instance.reward(t + 1, i2, b.j);
                if gap < rate * next - TOL {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Keeps one direction of every mutual relation, the lexicographically smaller pair
/// being the dominant one.
pub fn orient(relation: &RelationSet) -> RelationSet {
    relation
        .iter()
        .filter(|(a, b)| !relation.contains(&(*b, *a)) || a < b)
        .copied()
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceGraph {
    pub m: usize,
    pub n: usize,
    pub weak: RelationSet,
    /// `r_ij + r_i'j' >= r_ij' + r_i'j` holds for every pair and every weakly dominated neighbor configuration.
    pub strong_valid: bool,
    /// Equal to `weak` when `strong_valid`, else empty.
    pub strong: RelationSet,
    /// Relations out of pairs whose own configurations satisfy the square inequality.
    pub strong_per_pair: RelationSet,
    /// `strong` with ties oriented lexicographically.
    pub strong_oriented: RelationSet,
    /// `weak` with ties oriented lexicographically.
    pub weak_oriented: RelationSet,
    /// Dominated neighbors sharing the demand type, `{(i,j') : (i,j) > (i,j')}`.
    pub b_left: BTreeMap<Pair, Vec<Pair>>,
    /// Dominated neighbors sharing the supply type, `{(i',j) : (i,j) > (i',j)}`.
    pub b_right: BTreeMap<Pair, Vec<Pair>>,
}

impl DominanceGraph {
    /// Oriented strong dominance of neighbor `b` by `a`.
    pub fn dominates(&self, a: Pair, b: Pair) -> bool {
        self.strong_oriented.contains(&(a, b))
    }

    pub fn pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        (0..self.m).flat_map(move |i| (0..self.n).map(move |j| Pair::new(i, j)))
    }
}

fn b_sets(m: usize, n: usize, rel: &RelationSet) -> (BTreeMap<Pair, Vec<Pair>>, BTreeMap<Pair, Vec<Pair>>) {
    let mut left = BTreeMap::new();
    let mut right = BTreeMap::new();
    for i in 0..m {
        for j in 0..n {
            let p = Pair::new(i, j);
            left.insert(p, (0..n).filter(|&k| rel.contains(&(p, Pair::new(i, k)))).map(|k| Pair::new(i, k)).collect());
            right.insert(p, (0..m).filter(|&k| rel.contains(&(p, Pair::new(k, j)))).map(|k| Pair::new(k, j)).collect());
        }
    }
    (left, right)
}

/// The square inequality for pair `p` against all its weakly dominated neighbor configurations.
fn square_condition(instance: &MatchingInstance, weak: &RelationSet, p: Pair) -> bool {
    let (m, n) = (instance.m(), instance.n());
    for i2 in (0..m).filter(|&k| weak.contains(&(p, Pair::new(k, p.j)))) {
        for j2 in (0..n).filter(|&k| weak.contains(&(p, Pair::new(p.i, k)))) {
            for t in 0..instance.horizon() {
                let lhs = instance.reward(t, p.i, p.j) + instance.reward(t, i2, j2);
                let rhs = instance.reward(t, p.i, j2) + instance.reward(t, i2, p.j);
                if lhs < rhs - TOL {
                    return false;
                }
            }
        }
    }
    true
}

pub fn build_dominance_graph(instance: &MatchingInstance) -> DominanceGraph {
    let (m, n) = (instance.m(), instance.n());
    let mut weak = RelationSet::new();
    for i in 0..m {
        for j in 0..n {
            let a = Pair::new(i, j);
            let neighbors = (0..m).filter(|&k| k != i).map(|k| Pair::new(k, j));
            let neighbors = neighbors.chain((0..n).filter(|&k| k != j).map(|k| Pair::new(i, k)));
            for b in neighbors {
                if weak_dominates(instance, a, b) == Ok(true) {
                    weak.insert((a, b));
                }
            }
        }
    }
    let mut strong_valid = true;
    let mut strong_per_pair = RelationSet::new();
    for i in 0..m {
        for j in 0..n {
            let p = Pair::new(i, j);
            if square_condition(instance, &weak, p) {
                strong_per_pair.extend(weak.iter().filter(|(a, _)| *a == p).copied());
            } else {
                strong_valid = false;
            }
        }
    }
    let strong = if strong_valid { weak.clone() } else { RelationSet::new() };
    let strong_oriented = orient(&strong);
    let weak_oriented = orient(&weak);
    let (b_left, b_right) = b_sets(m, n, &strong_oriented);
    DominanceGraph { m, n, weak, strong_valid, strong, strong_per_pair, strong_oriented, weak_oriented, b_left, b_right }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorityTiers {
    pub tiers: Vec<Vec<Pair>>,
}

impl PriorityTiers {
    pub fn tier_of(&self, p: Pair) -> Option<usize> {
        self.tiers.iter().position(|tier| tier.contains(&p))
    }
}

/// Recursive peeling of pairs not dominated by any residual neighbor.
/// A round where every residual pair is dominated (a dominance cycle) releases the
/// lexicographically smallest residual pair.
pub fn priority_tiers(graph: &DominanceGraph) -> Result<PriorityTiers, Error> {
    if !graph.strong_valid {
        return Err(Error::StrongConditionFails);
    }
    let mut residual: BTreeSet<Pair> = graph.pairs().collect();
    let mut tiers = Vec::new();
    while !residual.is_empty() {
        let mut tier: Vec<Pair> = residual
            .iter()
            .filter(|p| !residual.iter().any(|q| q.is_neighbor(p) && graph.dominates(*q, **p)))
            .copied()
            .collect();
        if tier.is_empty() {
            tier.push(*residual.iter().next().expect("nonempty"));
        }
        for p in &tier {
            residual.remove(p);
        }
        tiers.push(tier);
    }
    Ok(PriorityTiers { tiers })
}

/// Dominates every neighbor strongly and its own reward does not grow faster than the
/// carry-over discount.
pub fn is_perfect_pair(instance: &MatchingInstance, graph: &DominanceGraph, i: usize, j: usize) -> Result<bool, Error> {
    if !graph.strong_valid {
        return Err(Error::StrongConditionFails);
    }
    let p = Pair::new(i, j);
    let column = (0..instance.m()).filter(|&k| k != i).map(|k| Pair::new(k, j));
    let row = (0..instance.n()).filter(|&k| k != j).map(|k| Pair::new(i, k));
    if !column.chain(row).all(|b| graph.strong.contains(&(p, b))) {
        return Ok(false);
    }
    for t in 0..instance.horizon().saturating_sub(1) {
        let rate = instance.alpha(t).max(instance.beta(t));
        if instance.reward(t, i, j) < rate * instance.reward(t + 1, i, j) - TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditMode {
    /// Residuals `a_i`, `b_j` against the strong relation.
    Strong,
    /// Leftovers `u_i`, `v_j` against the weak relation.
    Weak,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub step: usize,
    pub t: usize,
    pub dominant: Pair,
    pub dominated: Pair,
    /// Quantity matched on the dominated pair.
    pub quantity: u32,
    /// Residual of the dominant pair's shared type (`a_i`/`b_j` or `u_i`/`v_j`).
    pub witness: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompatibilityReport {
    pub mode: AuditMode,
    pub violations: Vec<Violation>,
}

impl CompatibilityReport {
    pub fn is_compatible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Audits a trace against the graph's oriented strong (or weak) relation.
pub fn audit_compatibility(
    instance: &MatchingInstance,
    graph: &DominanceGraph,
    trace: &[TraceStep],
    mode: AuditMode,
) -> Result<CompatibilityReport, Error> {
    let rel = match mode {
        AuditMode::Strong => &graph.strong_oriented,
        AuditMode::Weak => &graph.weak_oriented,
    };
    for step in trace {
        if step.state.x.len() != instance.m() || step.state.y.len() != instance.n() {
            return Err(Error::DimensionMismatch("trace state does not match the instance".into()));
        }
    }
    audit_relations(rel, trace, mode)
}

/// Audits a trace against an explicit relation set.
pub fn audit_relations(relation: &RelationSet, trace: &[TraceStep], mode: AuditMode) -> Result<CompatibilityReport, Error> {
    let mut violations = Vec::new();
    for (step, ts) in trace.iter().enumerate() {
        let post = apply_decision(&ts.state, &ts.decision).map_err(|_| Error::InfeasibleTrace { step })?;
        violations.extend(
            decision_violations(relation, &ts.state, &ts.decision, &post, mode)
                .into_iter()
                .map(|(dominant, dominated, quantity, witness)| Violation { step, t: ts.t, dominant, dominated, quantity, witness }),
        );
    }
    Ok(CompatibilityReport { mode, violations })
}

pub(crate) fn decision_violations(
    relation: &RelationSet,
    state: &crate::instance::SystemState,
    q: &crate::instance::MatchingDecision,
    post: &crate::instance::PostMatchState,
    mode: AuditMode,
) -> Vec<(Pair, Pair, u32, u32)> {
    let mut out = Vec::new();
    let (m, n) = (state.x.len(), state.y.len());
    for (a, b) in relation {
        let (i, j) = (a.i, a.j);
        let quantity = q.get(b.i, b.j);
        if quantity == 0 {
            continue;
        }
        let witness = if b.j == j {
            match mode {
                AuditMode::Weak => post.u[i],
                AuditMode::Strong => {
                    let used: u32 = (0..n).filter(|&k| !relation.contains(&(*a, Pair::new(i, k)))).map(|k| q.get(i, k)).sum();
                    state.x[i] - used
                }
            }
        } else {
            match mode {
                AuditMode::Weak => post.v[j],
                AuditMode::Strong => {
                    let used: u32 = (0..m).filter(|&k| !relation.contains(&(*a, Pair::new(k, j)))).map(|k| q.get(k, j)).sum();
                    state.y[j] - used
                }
            }
        };
        if witness > 0 {
            out.push((*a, *b, quantity, witness));
        }
    }
    out
}
