//! Serializable views of value tables, protection tables, audits and dominance graphs.

use serde::{Deserialize, Serialize};

use typematch_core::monge::Violation;
use typematch_core::policies::horizontal::{ProtectionEntry, ProtectionTable};
use typematch_core::{
    is_perfect_pair, priority_tiers, AuditMode, CompatibilityReport, DominanceGraph, MatchingInstance, Pair, ValueTable,
};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateValue {
    pub t: usize,
    pub x: Vec<u32>,
    pub y: Vec<u32>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTableDoc {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub expected_value: f64,
    pub states: Vec<StateValue>,
}

impl ValueTableDoc {
    pub fn from_table(table: &ValueTable) -> Self {
        let horizon = table.instance().horizon();
        let states = (0..horizon)
            .flat_map(|t| table.states(t).into_iter().map(move |(s, value)| StateValue { t, x: s.x, y: s.y, value }))
            .collect();
        Self { horizon, expected_value: table.expected_value(), states }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtectionRow {
    pub t: usize,
    pub ib: i64,
    pub p_d_plus: u32,
    pub p_s_plus: u32,
    pub p_d_minus: u32,
    pub p_s_minus: u32,
    pub plus_feasible: bool,
    pub minus_feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtectionTableDoc {
    pub ib_min: i64,
    pub ib_max: i64,
    pub entries: Vec<ProtectionRow>,
}

impl ProtectionTableDoc {
    pub fn from_table(table: &ProtectionTable) -> Self {
        let mut entries = Vec::new();
        for (t, row) in table.entries.iter().enumerate() {
            for (k, e) in row.iter().enumerate() {
                entries.push(ProtectionRow {
                    t,
                    ib: table.ib_min + k as i64,
                    p_d_plus: e.p_d_plus,
                    p_s_plus: e.p_s_plus,
                    p_d_minus: e.p_d_minus,
                    p_s_minus: e.p_s_minus,
                    plus_feasible: e.plus_feasible,
                    minus_feasible: e.minus_feasible,
                });
            }
        }
        Self { ib_min: table.ib_min, ib_max: table.ib_max(), entries }
    }

    /// Rebuilds the table; every `(t, ib)` of the stated range must appear exactly once.
    pub fn to_table(&self) -> Result<ProtectionTable, HarnessError> {
        if self.ib_max < self.ib_min {
            return Err(HarnessError::Config("protection table: ib_max < ib_min".into()));
        }
        let width = (self.ib_max - self.ib_min + 1) as usize;
        let horizon = self.entries.iter().map(|e| e.t + 1).max().unwrap_or(0);
        let mut slots: Vec<Vec<Option<ProtectionEntry>>> = vec![vec![None; width]; horizon];
        for e in &self.entries {
            if e.ib < self.ib_min || e.ib > self.ib_max {
                return Err(HarnessError::Config(format!("protection table: ib {} outside the stated range", e.ib)));
            }
            let slot = &mut slots[e.t][(e.ib - self.ib_min) as usize];
            if slot.is_some() {
                return Err(HarnessError::Config(format!("protection table: duplicate entry t={} ib={}", e.t, e.ib)));
            }
            *slot = Some(ProtectionEntry {
                p_d_plus: e.p_d_plus,
                p_s_plus: e.p_s_plus,
                p_d_minus: e.p_d_minus,
                p_s_minus: e.p_s_minus,
                plus_feasible: e.plus_feasible,
                minus_feasible: e.minus_feasible,
            });
        }
        let entries = slots
            .into_iter()
            .enumerate()
            .map(|(t, row)| {
                row.into_iter()
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| HarnessError::Config(format!("protection table: period {t} has gaps")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ProtectionTable { ib_min: self.ib_min, entries })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationDoc {
    pub step: usize,
    pub t: usize,
    pub dominant: [usize; 2],
    pub dominated: [usize; 2],
    pub quantity: u32,
    pub witness: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompatibilityDoc {
    pub mode: String,
    pub compatible: bool,
    pub violations: Vec<ViolationDoc>,
}

fn pair(p: Pair) -> [usize; 2] {
    [p.i, p.j]
}

impl CompatibilityDoc {
    pub fn from_report(report: &CompatibilityReport) -> Self {
        let violation = |v: &Violation| ViolationDoc {
            step: v.step,
            t: v.t,
            dominant: pair(v.dominant),
            dominated: pair(v.dominated),
            quantity: v.quantity,
            witness: v.witness,
        };
        Self {
            mode: match report.mode {
                AuditMode::Strong => "strong".into(),
                AuditMode::Weak => "weak".into(),
            },
            compatible: report.is_compatible(),
            violations: report.violations.iter().map(violation).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub dominant: [usize; 2],
    pub dominated: [usize; 2],
    /// `weak` or `strong`.
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub m: usize,
    pub n: usize,
    pub strong_valid: bool,
    pub edges: Vec<Edge>,
    pub tiers: Option<Vec<Vec<[usize; 2]>>>,
    pub perfect_pairs: Vec<[usize; 2]>,
}

impl GraphDoc {
    pub fn from_graph(inst: &MatchingInstance, graph: &DominanceGraph) -> Self {
        let mut edges: Vec<Edge> = graph
            .weak
            .iter()
            .map(|(a, b)| Edge { dominant: pair(*a), dominated: pair(*b), relation: "weak".into() })
            .collect();
        edges.extend(
            graph.strong.iter().map(|(a, b)| Edge { dominant: pair(*a), dominated: pair(*b), relation: "strong".into() }),
        );
        let tiers = priority_tiers(graph).ok().map(|t| t.tiers.iter().map(|tier| tier.iter().map(|p| pair(*p)).collect()).collect());
        let perfect_pairs = graph
            .pairs()
            .filter(|p| is_perfect_pair(inst, graph, p.i, p.j).unwrap_or(false))
            .map(pair)
            .collect();
        Self { m: graph.m, n: graph.n, strong_valid: graph.strong_valid, edges, tiers, perfect_pairs }
    }

    /// `dominant_i,dominant_j,dominated_i,dominated_j,relation` rows.
    pub fn edge_list_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["dominant_i", "dominant_j", "dominated_i", "dominated_j", "relation"])?;
        for e in &self.edges {
            w.write_record([
                e.dominant[0].to_string(),
                e.dominant[1].to_string(),
                e.dominated[0].to_string(),
                e.dominated[1].to_string(),
                e.relation.clone(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
