//! Run configuration.
//!
//! A config file is flat TOML: scalar keys at the top level and the loss in
//! its own `[loss]` table.
//!
//! ```toml
//! seed = 7
//! optimizer = "mngp"          # tgp | mngp | nonprivate
//! schedule = "constant_hoelder" # one_over_l | constant_hoelder | decaying_pl | fixed
//! iterations = "log_n"        # log_n | hoelder_power | fixed
//! log_n_multiplier = 3.0
//! epsilon = 1.0
//! # delta defaults to 1/n
//!
//! [loss]
//! family = "q_norm_hinge"
//! q = 1.5
//! lambda = 0.05
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossFamily;
use crate::types::PrivacyBudget;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Gradient descent with Gaussian noise on every full gradient.
    Tgp,
    /// As `Tgp`, but a noisy gradient shorter than 1 is rescaled to unit norm.
    Mngp,
    /// Noise-free gradient descent.
    #[serde(rename = "nonprivate")]
    NonPrivate,
}

impl OptimizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Tgp => "tgp",
            OptimizerKind::Mngp => "mngp",
            OptimizerKind::NonPrivate => "nonprivate",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tgp" => Ok(Self::Tgp),
            "mngp" | "m-ngp" => Ok(Self::Mngp),
            "nonprivate" | "gd" => Ok(Self::NonPrivate),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// Step-size rule, before constants are bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `η = 1/L`.
    OneOverL,
    /// `η = (1/H)^{1/α}`.
    ConstantHoelder,
    /// `η_t = 2/(μ(t + κ))`; `κ` defaults to `2 H^{1/α} / μ`.
    DecayingPl { kappa: Option<f64> },
    /// A fixed step size, for ablations.
    Fixed { eta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IterationsPolicy {
    Fixed { t: usize },
    /// `T = ceil(a ln n)`.
    LogN { multiplier: f64 },
    /// `T = ceil(n^{2/(1+2α)})`.
    HoelderPower,
}

impl Default for IterationsPolicy {
    fn default() -> Self {
        IterationsPolicy::LogN {
            multiplier: DEFAULT_LOG_N_MULTIPLIER,
        }
    }
}

pub const DEFAULT_LOG_N_MULTIPLIER: f64 = 3.0;
pub const DEFAULT_SIGMA_CONSTANT: f64 = 2.0;
pub const DEFAULT_DOMAIN_RADIUS: f64 = 10.0;
pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RunConfigFile", into = "RunConfigFile")]
pub struct RunConfig {
    pub seed: u64,
    /// Keys the per-iteration noise streams. Runs that must see independent
    /// noise on the same seed use different keys.
    pub noise_key: u64,
    pub optimizer: OptimizerKind,
    pub schedule: ScheduleKind,
    pub iterations: IterationsPolicy,
    /// The constant `c` in `σ² = c G² T ln(1/δ) / (n² ε²)`.
    pub sigma_constant_c: f64,
    /// Radius `M_C` of the parameter domain.
    pub domain_radius: f64,
    /// Project every iterate onto the `M_C` ball.
    pub project: bool,
    pub epsilon: f64,
    /// `None` means `1/n`.
    pub delta: Option<f64>,
    pub loss: LossFamily,
    pub oracle_tolerance: f64,
    pub oracle_max_iters: usize,
    pub divergence_threshold: f64,
    /// Keep noise vectors and iterates in the trace.
    pub record_vectors: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            noise_key: 0,
            optimizer: OptimizerKind::Tgp,
            schedule: ScheduleKind::OneOverL,
            iterations: IterationsPolicy::default(),
            sigma_constant_c: DEFAULT_SIGMA_CONSTANT,
            domain_radius: DEFAULT_DOMAIN_RADIUS,
            project: true,
            epsilon: 1.0,
            delta: None,
            loss: LossFamily::RegLogistic { lambda: 0.01 },
            oracle_tolerance: 1e-10,
            oracle_max_iters: 200_000,
            divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
            record_vectors: false,
        }
    }
}

impl RunConfig {
    /// Smooth losses: TGP, `η = 1/L`, `T = ceil(3 ln n)`.
    pub fn smooth_regime(loss: LossFamily) -> Self {
        Self {
            optimizer: OptimizerKind::Tgp,
            schedule: ScheduleKind::OneOverL,
            iterations: IterationsPolicy::default(),
            loss,
            ..Self::default()
        }
    }

    /// Hölder-smooth losses under TGP: decaying steps, `T = ceil(n^{2/(1+2α)})`.
    pub fn hoelder_regime(loss: LossFamily) -> Self {
        Self {
            optimizer: OptimizerKind::Tgp,
            schedule: ScheduleKind::DecayingPl { kappa: None },
            iterations: IterationsPolicy::HoelderPower,
            loss,
            ..Self::default()
        }
    }

    /// Hölder-smooth losses under m-NGP: `η = (1/H)^{1/α}`, `T = ceil(3 ln n)`.
    pub fn normalized_regime(loss: LossFamily) -> Self {
        Self {
            optimizer: OptimizerKind::Mngp,
            schedule: ScheduleKind::ConstantHoelder,
            iterations: IterationsPolicy::default(),
            loss,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn budget(&self, n: usize) -> Result<PrivacyBudget> {
        let delta = self.delta.unwrap_or(1.0 / n as f64);
        PrivacyBudget::new(self.epsilon, delta)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must be positive and finite")))
            }
        };
        positive("sigma_constant_c", self.sigma_constant_c)?;
        positive("domain_radius", self.domain_radius)?;
        positive("epsilon", self.epsilon)?;
        positive("oracle_tolerance", self.oracle_tolerance)?;
        positive("divergence_threshold", self.divergence_threshold)?;
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::Config(format!("delta = {d} must lie in (0, 1)")));
            }
        }
        match self.schedule {
            ScheduleKind::DecayingPl { kappa: Some(k) } => positive("kappa", k)?,
            ScheduleKind::Fixed { eta } => positive("eta", eta)?,
            _ => {}
        }
        match self.iterations {
            IterationsPolicy::Fixed { t: 0 } => {
                return Err(Error::Config("fixed iteration count must be ≥ 1".into()))
            }
            IterationsPolicy::LogN { multiplier } => positive("log_n_multiplier", multiplier)?,
            _ => {}
        }
        crate::losses::LossModel::new(self.loss)?;
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// The on-disk layout of [`RunConfig`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    noise_key: u64,
    #[serde(default = "default_optimizer")]
    optimizer: OptimizerKind,
    #[serde(default = "default_schedule")]
    schedule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(default = "default_iterations")]
    iterations: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    log_n_multiplier: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fixed_t: Option<usize>,
    #[serde(default = "default_c")]
    sigma_constant_c: f64,
    #[serde(default = "default_radius")]
    domain_radius: f64,
    #[serde(default = "default_true")]
    project: bool,
    #[serde(default = "default_epsilon")]
    epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(default = "default_oracle_tol")]
    oracle_tolerance: f64,
    #[serde(default = "default_oracle_iters")]
    oracle_max_iters: usize,
    #[serde(default = "default_divergence")]
    divergence_threshold: f64,
    #[serde(default)]
    record_vectors: bool,
    loss: LossFamily,
}

fn default_optimizer() -> OptimizerKind {
    OptimizerKind::Tgp
}
fn default_schedule() -> String {
    "one_over_l".into()
}
fn default_iterations() -> String {
    "log_n".into()
}
fn default_c() -> f64 {
    DEFAULT_SIGMA_CONSTANT
}
fn default_radius() -> f64 {
    DEFAULT_DOMAIN_RADIUS
}
fn default_true() -> bool {
    true
}
fn default_epsilon() -> f64 {
    1.0
}
fn default_oracle_tol() -> f64 {
    RunConfig::default().oracle_tolerance
}
fn default_oracle_iters() -> usize {
    RunConfig::default().oracle_max_iters
}
fn default_divergence() -> f64 {
    DEFAULT_DIVERGENCE_THRESHOLD
}

impl TryFrom<RunConfigFile> for RunConfig {
    type Error = Error;

    fn try_from(f: RunConfigFile) -> Result<Self> {
        let schedule = match f.schedule.as_str() {
            "one_over_l" => ScheduleKind::OneOverL,
            "constant_hoelder" => ScheduleKind::ConstantHoelder,
            "decaying_pl" => ScheduleKind::DecayingPl { kappa: f.kappa },
            "fixed" => ScheduleKind::Fixed {
                eta: f
                    .eta
                    .ok_or_else(|| Error::Config("schedule `fixed` needs `eta`".into()))?,
            },
            other => return Err(Error::Config(format!("unknown schedule `{other}`"))),
        };
        let iterations = match f.iterations.as_str() {
            "log_n" => IterationsPolicy::LogN {
                multiplier: f.log_n_multiplier.unwrap_or(DEFAULT_LOG_N_MULTIPLIER),
            },
            "hoelder_power" => IterationsPolicy::HoelderPower,
            "fixed" => IterationsPolicy::Fixed {
                t: f.fixed_t
                    .ok_or_else(|| Error::Config("iterations `fixed` needs `fixed_t`".into()))?,
            },
            other => return Err(Error::Config(format!("unknown iterations policy `{other}`"))),
        };
        let config = RunConfig {
            seed: f.seed,
            noise_key: f.noise_key,
            optimizer: f.optimizer,
            schedule,
            iterations,
            sigma_constant_c: f.sigma_constant_c,
            domain_radius: f.domain_radius,
            project: f.project,
            epsilon: f.epsilon,
            delta: f.delta,
            loss: f.loss,
            oracle_tolerance: f.oracle_tolerance,
            oracle_max_iters: f.oracle_max_iters,
            divergence_threshold: f.divergence_threshold,
            record_vectors: f.record_vectors,
        };
        config.validate()?;
        Ok(config)
    }
}

impl From<RunConfig> for RunConfigFile {
    fn from(c: RunConfig) -> Self {
        let (schedule, kappa, eta) = match c.schedule {
            ScheduleKind::OneOverL => ("one_over_l", None, None),
            ScheduleKind::ConstantHoelder => ("constant_hoelder", None, None),
            ScheduleKind::DecayingPl { kappa } => ("decaying_pl", kappa, None),
            ScheduleKind::Fixed { eta } => ("fixed", None, Some(eta)),
        };
        let (iterations, log_n_multiplier, fixed_t) = match c.iterations {
            IterationsPolicy::LogN { multiplier } => ("log_n", Some(multiplier), None),
            IterationsPolicy::HoelderPower => ("hoelder_power", None, None),
            IterationsPolicy::Fixed { t } => ("fixed", None, Some(t)),
        };
        RunConfigFile {
            seed: c.seed,
            noise_key: c.noise_key,
            optimizer: c.optimizer,
            schedule: schedule.into(),
            kappa,
            eta,
            iterations: iterations.into(),
            log_n_multiplier,
            fixed_t,
            sigma_constant_c: c.sigma_constant_c,
            domain_radius: c.domain_radius,
            project: c.project,
            epsilon: c.epsilon,
            delta: c.delta,
            oracle_tolerance: c.oracle_tolerance,
            oracle_max_iters: c.oracle_max_iters,
            divergence_threshold: c.divergence_threshold,
            record_vectors: c.record_vectors,
            loss: c.loss,
        }
    }
}
