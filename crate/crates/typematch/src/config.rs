//! JSON documents for instances and experiments.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use typematch_core::models::{self, Arrivals, AssumptionCheck, LineLayout, PremierRegular, Prize, UpgradeParams};
use typematch_core::policies::VerticalRewards;
use typematch_core::{ArrivalModel, CarryOver, MatchingInstance, WaitingCosts};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmfDoc {
    pub support: Vec<u32>,
    pub probs: Vec<f64>,
}

impl PmfDoc {
    fn to_model(&self) -> Result<ArrivalModel, HarnessError> {
        Ok(ArrivalModel::new(self.support.clone(), self.probs.clone())?)
    }

    fn from_model(model: &ArrivalModel) -> Self {
        Self { support: model.support().to_vec(), probs: model.probs().to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IidDoc {
    /// One pmf per type, reused in every period.
    pub iid: Vec<PmfDoc>,
}

/// Arrivals as `[t][type]`, or the `{"iid": [...]}` shorthand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArrivalsDoc {
    Iid(IidDoc),
    PerPeriod(Vec<Vec<PmfDoc>>),
}

impl ArrivalsDoc {
    fn expand(&self, horizon: usize) -> Result<Vec<Vec<ArrivalModel>>, HarnessError> {
        match self {
            ArrivalsDoc::Iid(doc) => {
                let row = doc.iid.iter().map(PmfDoc::to_model).collect::<Result<Vec<_>, _>>()?;
                Ok(vec![row; horizon])
            }
            ArrivalsDoc::PerPeriod(rows) => rows
                .iter()
                .map(|row| row.iter().map(PmfDoc::to_model).collect::<Result<Vec<_>, _>>())
                .collect(),
        }
    }

    fn from_models(rows: &[Vec<ArrivalModel>]) -> Self {
        if rows.windows(2).all(|w| w[0] == w[1]) && !rows.is_empty() {
            ArrivalsDoc::Iid(IidDoc { iid: rows[0].iter().map(PmfDoc::from_model).collect() })
        } else {
            ArrivalsDoc::PerPeriod(rows.iter().map(|row| row.iter().map(PmfDoc::from_model).collect()).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateDoc {
    Scalar(f64),
    PerPeriod(Vec<f64>),
}

impl From<&RateDoc> for CarryOver {
    fn from(doc: &RateDoc) -> Self {
        match doc {
            RateDoc::Scalar(a) => CarryOver::Scalar(*a),
            RateDoc::PerPeriod(a) => CarryOver::PerPeriod(a.clone()),
        }
    }
}

impl RateDoc {
    fn from_rates(rates: &[f64]) -> Self {
        match rates.first() {
            Some(first) if rates.iter().all(|a| a == first) => RateDoc::Scalar(*first),
            _ => RateDoc::PerPeriod(rates.to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostsDoc {
    /// `c[t][i]`.
    pub c: Vec<Vec<f64>>,
    /// `h[t][j]`.
    pub h: Vec<Vec<f64>>,
}

/// A full instance; `rewards` is `[t][i][j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub m: usize,
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub rewards: Vec<Vec<Vec<f64>>>,
    pub alpha: RateDoc,
    pub beta: RateDoc,
    pub demand_arrivals: ArrivalsDoc,
    pub supply_arrivals: ArrivalsDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waiting_costs: Option<CostsDoc>,
}

impl InstanceDoc {
    pub fn build(&self) -> Result<MatchingInstance, HarnessError> {
        let inst = MatchingInstance::new(
            self.m,
            self.n,
            self.horizon,
            &self.rewards,
            (&self.alpha).into(),
            (&self.beta).into(),
            self.demand_arrivals.expand(self.horizon)?,
            self.supply_arrivals.expand(self.horizon)?,
        )?;
        Ok(match &self.waiting_costs {
            Some(c) => inst.with_waiting_costs(WaitingCosts { c: c.c.clone(), h: c.h.clone() })?,
            None => inst,
        })
    }

    pub fn from_instance(inst: &MatchingInstance) -> Self {
        Self {
            m: inst.m(),
            n: inst.n(),
            horizon: inst.horizon(),
            rewards: inst.reward_tensor(),
            alpha: RateDoc::from_rates(inst.alphas()),
            beta: RateDoc::from_rates(inst.betas()),
            demand_arrivals: ArrivalsDoc::from_models(inst.demand_arrivals()),
            supply_arrivals: ArrivalsDoc::from_models(inst.supply_arrivals()),
            waiting_costs: inst.waiting_costs().filter(|_| !inst.costs_folded()).map(|w| CostsDoc { c: w.c.clone(), h: w.h.clone() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckDoc {
    #[default]
    Enforce,
    Warn,
}

/// A builder name, its parameters and the data shared by every builder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub builder: String,
    pub params: Value,
    pub alpha: RateDoc,
    pub beta: RateDoc,
    pub demand_arrivals: ArrivalsDoc,
    pub supply_arrivals: ArrivalsDoc,
    #[serde(default)]
    pub check: CheckDoc,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Horizontal2x2Params {
    rewards: Vec<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PremierRegularParams {
    #[serde(rename = "T")]
    horizon: usize,
    fare_premier: f64,
    fare_regular: f64,
    wage_premier: f64,
    wage_regular: f64,
    penalty: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectedLineParams {
    demand_pos: Vec<f64>,
    supply_pos: Vec<f64>,
    #[serde(rename = "R", default)]
    prize: Option<Vec<f64>>,
    #[serde(rename = "R_i", default)]
    prize_per_demand: Option<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EuclideanParams {
    demand_points: Vec<Vec<f64>>,
    supply_points: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    prize: Vec<f64>,
    gamma: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UpgradingParams {
    f: Vec<Vec<f64>>,
    c: Vec<f64>,
    #[serde(default)]
    one_level: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VerticalParams {
    r_d: Vec<Vec<f64>>,
    r_s: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NonAdditiveParams {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    gamma: f64,
}

fn params<T: serde::de::DeserializeOwned>(builder: &str, value: &Value) -> Result<T, HarnessError> {
    serde_json::from_value(value.clone()).map_err(|e| HarnessError::Config(format!("model `{builder}`: {e}")))
}

impl ModelDoc {
    fn horizon(&self) -> Result<usize, HarnessError> {
        let p = &self.params;
        let len = |key: &str| p.get(key).and_then(Value::as_array).map(Vec::len);
        let horizon = match self.builder.as_str() {
            "horizontal_2x2" => len("rewards"),
            "premier_regular" => p.get("T").and_then(Value::as_u64).map(|t| t as usize),
            "directed_line" => len("R").or_else(|| len("R_i")),
            "euclidean" => len("R"),
            "upgrading" => len("f"),
            "vertical" => len("r_d"),
            "vertical_nonadditive" => len("a"),
            other => return Err(HarnessError::Config(format!("unknown model builder `{other}`"))),
        };
        horizon.ok_or_else(|| HarnessError::Config(format!("model `{}`: cannot determine the horizon", self.builder)))
    }

    pub fn build(&self) -> Result<MatchingInstance, HarnessError> {
        let horizon = self.horizon()?;
        let arrivals =
            Arrivals { demand: self.demand_arrivals.expand(horizon)?, supply: self.supply_arrivals.expand(horizon)? };
        let (alpha, beta) = (CarryOver::from(&self.alpha), CarryOver::from(&self.beta));
        let check = match self.check {
            CheckDoc::Enforce => AssumptionCheck::Enforce,
            CheckDoc::Warn => AssumptionCheck::Warn,
        };
        let b = self.builder.as_str();
        let inst = match b {
            "horizontal_2x2" => {
                let p: Horizontal2x2Params = params(b, &self.params)?;
                models::horizontal_2x2(&p.rewards, alpha, beta, arrivals, check)?
            }
            "premier_regular" => {
                let p: PremierRegularParams = params(b, &self.params)?;
                let pr = PremierRegular {
                    fare_premier: p.fare_premier,
                    fare_regular: p.fare_regular,
                    wage_premier: p.wage_premier,
                    wage_regular: p.wage_regular,
                    penalty: p.penalty,
                };
                models::horizontal_2x2(&pr.rewards(p.horizon), alpha, beta, arrivals, check)?
            }
            "directed_line" => {
                let p: DirectedLineParams = params(b, &self.params)?;
                let prize = match (p.prize, p.prize_per_demand) {
                    (Some(r), None) => Prize::Common(r),
                    (None, Some(r)) => Prize::PerDemand(r),
                    _ => return Err(HarnessError::Config("directed_line needs exactly one of `R` and `R_i`".into())),
                };
                let layout = LineLayout { demand_pos: p.demand_pos, supply_pos: p.supply_pos, prize };
                models::directed_line(&layout, alpha, beta, arrivals)?
            }
            "euclidean" => {
                let p: EuclideanParams = params(b, &self.params)?;
                models::euclidean_instance(&p.demand_points, &p.supply_points, &p.prize, &p.gamma, alpha, beta, arrivals)?
            }
            "upgrading" => {
                let p: UpgradingParams = params(b, &self.params)?;
                let up = UpgradeParams { fares: p.f, costs: p.c, one_level: p.one_level };
                models::upgrading_instance(&up, alpha, beta, arrivals)?
            }
            "vertical" => {
                let p: VerticalParams = params(b, &self.params)?;
                models::vertical_instance(&VerticalRewards { r_d: p.r_d, r_s: p.r_s }, alpha, beta, arrivals, check)?
            }
            "vertical_nonadditive" => {
                let p: NonAdditiveParams = params(b, &self.params)?;
                models::vertical_nonadditive(&p.a, &p.b, p.gamma, alpha, beta, arrivals, check)?
            }
            other => return Err(HarnessError::Config(format!("unknown model builder `{other}`"))),
        };
        Ok(inst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Exact,
    #[default]
    Simulate,
}

/// An instance (literal or built from a model block) plus what to run on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelDoc>,
    #[serde(default = "default_policies")]
    pub policies: Vec<String>,
    #[serde(default)]
    pub mode: EvalMode,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default = "default_samples")]
    pub sample_count: usize,
}

fn default_policies() -> Vec<String> {
    vec!["greedy".into()]
}

fn default_replications() -> usize {
    1000
}

fn default_samples() -> usize {
    typematch_core::policies::vertical::DEFAULT_OSA_SAMPLES
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        if cfg.instance.is_some() == cfg.model.is_some() {
            return Err(HarnessError::Config("exactly one of `instance` and `model` is required".into()));
        }
        Ok(cfg)
    }

    pub fn build_instance(&self) -> Result<MatchingInstance, HarnessError> {
        match (&self.instance, &self.model) {
            (Some(doc), None) => doc.build(),
            (None, Some(model)) => model.build(),
            _ => Err(HarnessError::Config("exactly one of `instance` and `model` is required".into())),
        }
    }

    pub fn from_instance(inst: &MatchingInstance) -> Self {
        Self {
            instance: Some(InstanceDoc::from_instance(inst)),
            model: None,
            policies: default_policies(),
            mode: EvalMode::Simulate,
            replications: default_replications(),
            seed: 0,
            output: None,
            sample_count: default_samples(),
        }
    }
}
