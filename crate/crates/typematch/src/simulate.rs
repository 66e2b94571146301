//! Replicated simulation with common random numbers across policies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use typematch_core::policies::PolicyHandle;
use typematch_core::rng::sample_path_for;
use typematch_core::sim::run_path;
use typematch_core::MatchingInstance;

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub replication: u64,
    pub total_reward: f64,
    pub abandoned_demand: u32,
    pub abandoned_supply: u32,
    pub matched: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub mean: f64,
    pub std_error: f64,
    pub mean_abandoned_demand: f64,
    pub mean_abandoned_supply: f64,
    pub mean_matched: Vec<f64>,
    #[serde(skip)]
    pub paths: Vec<PathRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub replications: u64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub policies: Vec<PolicySummary>,
}

/// Runs every policy on the same `replications` sample paths. Replication `k` uses the
/// path and carry-over streams keyed by `(seed, k)`, so the result does not depend on
/// `workers`.
pub fn simulate(
    inst: &MatchingInstance,
    policies: &[PolicyHandle],
    replications: u64,
    seed: u64,
    workers: usize,
) -> Result<SimulationReport, HarnessError> {
    if replications == 0 {
        return Err(HarnessError::Config("replications must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let rows: Vec<Vec<PathRecord>> = pool.install(|| {
        (0..replications)
            .into_par_iter()
            .map(|rep| {
                let path = sample_path_for(inst, seed, rep);
                policies
                    .iter()
                    .map(|p| {
                        let out = run_path(inst, p.as_ref(), &path, seed, rep)?;
                        Ok(PathRecord {
                            replication: rep,
                            total_reward: out.total_reward,
                            abandoned_demand: out.abandoned_demand,
                            abandoned_supply: out.abandoned_supply,
                            matched: out.matched,
                        })
                    })
                    .collect::<Result<Vec<_>, HarnessError>>()
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?;

    let horizon = inst.horizon();
    let n = replications as f64;
    let summaries = policies
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let paths: Vec<PathRecord> = rows.iter().map(|r| r[k].clone()).collect();
            let mean = paths.iter().map(|r| r.total_reward).sum::<f64>() / n;
            let var = if replications > 1 {
                paths.iter().map(|r| (r.total_reward - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let mean_matched = (0..horizon).map(|t| paths.iter().map(|r| f64::from(r.matched[t])).sum::<f64>() / n).collect();
            PolicySummary {
                policy: p.name().to_string(),
                mean,
                std_error: (var / n).sqrt(),
                mean_abandoned_demand: paths.iter().map(|r| f64::from(r.abandoned_demand)).sum::<f64>() / n,
                mean_abandoned_supply: paths.iter().map(|r| f64::from(r.abandoned_supply)).sum::<f64>() / n,
                mean_matched,
                paths,
            }
        })
        .collect();
    Ok(SimulationReport { seed, replications, horizon, policies: summaries })
}

impl SimulationReport {
    pub fn summary(&self, policy: &str) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.policy == policy)
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["record", "policy", "replication", "total_reward", "abandoned_demand", "abandoned_supply", "std_error"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend((0..self.horizon).map(|t| format!("matched_t{t}")));
        h
    }

    /// One `path` row per policy and replication followed by one `summary` row per policy.
    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.csv_header())?;
        for p in &self.policies {
            for r in &p.paths {
                let mut row = vec![
                    "path".to_string(),
                    p.policy.clone(),
                    r.replication.to_string(),
                    r.total_reward.to_string(),
                    r.abandoned_demand.to_string(),
                    r.abandoned_supply.to_string(),
                    String::new(),
                ];
                row.extend(r.matched.iter().map(u32::to_string));
                w.write_record(&row)?;
            }
        }
        for p in &self.policies {
            let mut row = vec![
                "summary".to_string(),
                p.policy.clone(),
                String::new(),
                p.mean.to_string(),
                p.mean_abandoned_demand.to_string(),
                p.mean_abandoned_supply.to_string(),
                p.std_error.to_string(),
            ];
            row.extend(p.mean_matched.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
