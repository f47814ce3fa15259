//! Experiment configuration: one JSON file, validated before anything runs.

use std::path::PathBuf;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Decompose,
    ShearIntervals,
    Solovay,
    Commutation,
    Timechange,
    Hproperty,
    Blocks,
    Nonshifting,
}

impl Experiment {
    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            Experiment::Solovay
                | Experiment::Timechange
                | Experiment::Hproperty
                | Experiment::Blocks
                | Experiment::Nonshifting
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeParams {
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShearIntervalsParams {
    /// Upper-right entry of the perturbation `h = a^ω ū^b`.
    pub b: f64,
    pub omega: f64,
    pub eps: f64,
    pub kappa: f64,
    pub r0: f64,
    pub c: f64,
    pub s_max: f64,
    pub grid: usize,
}

impl Default for ShearIntervalsParams {
    fn default() -> Self {
        Self {
            b: 1e-4,
            omega: 0.0,
            eps: 0.1,
            kappa: 0.5,
            r0: 1.0,
            c: 1.0,
            s_max: 1e6,
            grid: 2000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolovayParams {
    pub trials: usize,
    pub zeta: f64,
    pub eta: f64,
    pub c: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Default for SolovayParams {
    fn default() -> Self {
        Self {
            trials: 100,
            zeta: 0.4,
            eta: 0.3,
            c: 1.0,
            lambda_min: 1e3,
            lambda_max: 1e5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grid {
    Coarse,
    Fine,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommutationParams {
    pub grid: Grid,
    pub t_max: f64,
    pub rt_max: f64,
}

impl Default for CommutationParams {
    fn default() -> Self {
        Self {
            grid: Grid::Coarse,
            t_max: 1e3,
            rt_max: 0.9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimechangeParams {
    pub amplitude: f64,
    pub samples: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub rt_max: f64,
    pub eps_target: f64,
}

impl Default for TimechangeParams {
    fn default() -> Self {
        Self {
            amplitude: 0.05,
            samples: 50,
            t_min: 1e2,
            t_max: 1e3,
            rt_max: 0.1,
            eps_target: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HpropertyParams {
    pub n: usize,
    pub samples: usize,
    /// Size of the random initial displacement.
    pub scale: f64,
    /// Target norm of the fastest relative motion.
    pub lambda: f64,
}

impl Default for HpropertyParams {
    fn default() -> Self {
        Self {
            n: 3,
            samples: 100,
            scale: 1e-3,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlocksParams {
    pub eps: f64,
    pub lambda: f64,
    pub b: f64,
    pub eta: f64,
    pub r0: f64,
    pub big_r0: f64,
    pub word_cap: usize,
}

impl Default for BlocksParams {
    fn default() -> Self {
        Self {
            eps: 0.1,
            lambda: 200.0,
            b: 1e-4,
            eta: 0.3,
            r0: 1.0,
            big_r0: 1.0,
            word_cap: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonshiftingParamsCfg {
    pub n: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub eta: f64,
    pub c: f64,
    pub instances: usize,
}

impl Default for NonshiftingParamsCfg {
    fn default() -> Self {
        Self {
            n: 2,
            lambda: 1e4,
            sigma: 0.001,
            eta: 0.3,
            c: 1e-3,
            instances: 20,
        }
    }
}

/// Typed parameters, one variant per experiment.
#[derive(Debug, Clone)]
pub enum Params {
    Decompose(DecomposeParams),
    ShearIntervals(ShearIntervalsParams),
    Solovay(SolovayParams),
    Commutation(CommutationParams),
    Timechange(TimechangeParams),
    Hproperty(HpropertyParams),
    Blocks(BlocksParams),
    Nonshifting(NonshiftingParamsCfg),
}

/// A config that passed schema and range checks.
#[derive(Debug, Clone)]
pub struct Validated {
    pub raw: ExperimentConfig,
    pub params: Params,
    pub seed: u64,
}

fn typed<T: DeserializeOwned>(map: &Map<String, Value>) -> Result<T, String> {
    serde_json::from_value(Value::Object(map.clone())).map_err(|e| format!("params: {e}"))
}

fn check(ok: bool, msg: &str) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.to_string())
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

fn unit(x: f64) -> bool {
    x.is_finite() && x > 0.0 && x < 1.0
}

pub fn parse(text: &str) -> Result<ExperimentConfig, String> {
    serde_json::from_str(text).map_err(|e| format!("config: {e}"))
}

pub fn validate(raw: ExperimentConfig) -> Result<Validated, String> {
    if raw.experiment.is_stochastic() && raw.seed.is_none() {
        return Err(format!("{:?} is stochastic and needs a seed", raw.experiment));
    }
    let p = &raw.params;
    let params = match raw.experiment {
        Experiment::Decompose => {
            let q: DecomposeParams = typed(p)?;
            check((2..=12).contains(&q.n), "n must lie in 2..=12")?;
            Params::Decompose(q)
        }
        Experiment::ShearIntervals => {
            let q: ShearIntervalsParams = typed(p)?;
            check(q.b.is_finite() && q.omega.is_finite(), "b and omega must be finite")?;
            check(positive(q.eps) && positive(q.r0) && positive(q.c), "eps, r0, c must be positive")?;
            check(q.kappa > 0.0 && q.kappa <= 1.0, "kappa must lie in (0,1]")?;
            check(positive(q.s_max) && q.grid >= 10, "s_max > 0 and grid >= 10 required")?;
            Params::ShearIntervals(q)
        }
        Experiment::Solovay => {
            let q: SolovayParams = typed(p)?;
            check(q.trials >= 1, "trials must be at least 1")?;
            check(unit(q.zeta) && unit(q.eta), "zeta and eta must lie in (0,1)")?;
            check(positive(q.c), "c must be positive")?;
            check(q.lambda_min >= 1.0 && q.lambda_max >= q.lambda_min && q.lambda_max.is_finite(), "need 1 <= lambda_min <= lambda_max")?;
            Params::Solovay(q)
        }
        Experiment::Commutation => {
            let q: CommutationParams = typed(p)?;
            check(positive(q.t_max), "t_max must be positive")?;
            check(unit(q.rt_max), "rt_max must lie in (0,1)")?;
            Params::Commutation(q)
        }
        Experiment::Timechange => {
            let q: TimechangeParams = typed(p)?;
            check(q.amplitude.is_finite() && q.amplitude >= -0.5, "amplitude must be at least -0.5")?;
            check(q.samples >= 1, "samples must be at least 1")?;
            check(positive(q.t_min) && q.t_max >= q.t_min && q.t_max <= 1e6, "need 0 < t_min <= t_max <= 1e6")?;
            check(unit(q.rt_max), "rt_max must lie in (0,1)")?;
            check(positive(q.eps_target), "eps_target must be positive")?;
            Params::Timechange(q)
        }
        Experiment::Hproperty => {
            let q: HpropertyParams = typed(p)?;
            check((2..=8).contains(&q.n), "n must lie in 2..=8")?;
            check(q.samples >= 1, "samples must be at least 1")?;
            check(positive(q.scale) && positive(q.lambda), "scale and lambda must be positive")?;
            Params::Hproperty(q)
        }
        Experiment::Blocks => {
            let q: BlocksParams = typed(p)?;
            check(positive(q.eps) && q.eps < 0.2, "eps must lie in (0, 0.2)")?;
            check(positive(q.lambda) && q.lambda <= 1e4, "lambda must lie in (0, 1e4]")?;
            check(q.b.is_finite(), "b must be finite")?;
            check(unit(q.eta), "eta must lie in (0,1)")?;
            check(q.r0.max(q.big_r0) >= 1.0, "max(r0, big_r0) must be at least 1")?;
            check((1..=8).contains(&q.word_cap), "word_cap must lie in 1..=8")?;
            Params::Blocks(q)
        }
        Experiment::Nonshifting => {
            let q: NonshiftingParamsCfg = typed(p)?;
            check((1..=6).contains(&q.n), "n must lie in 1..=6")?;
            check(q.lambda >= 10.0 && q.lambda.is_finite(), "lambda must be at least 10")?;
            check(q.sigma >= 0.0 && q.sigma < 0.5, "sigma must lie in [0, 0.5)")?;
            check(unit(q.eta) && positive(q.c), "eta in (0,1) and c > 0 required")?;
            check(q.instances >= 1, "instances must be at least 1")?;
            Params::Nonshifting(q)
        }
    };
    let seed = raw.seed.unwrap_or(0);
    Ok(Validated { raw, params, seed })
}
