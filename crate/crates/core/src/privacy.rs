//! Noise calibration, iteration counts and step sizes.
//!
//! The Gaussian mechanism on `T` full gradients of a `G`-Lipschitz loss is
//! `(ε, δ)`-private with `σ² = c G² T ln(1/δ) / (n² ε²)`. Losses that are only
//! Hölder smooth use `G′ = max{2 H M_C, H}` in place of `G`.
//!
//! Rescaling the noisy gradient (m-NGP) reads only the already-noised vector,
//! so it is post-processing and keeps the same calibration.

use serde::{Deserialize, Serialize};

use crate::config::{IterationsPolicy, RunConfig, ScheduleKind};
use crate::error::{Error, Result};
use crate::losses::AssumptionConstants;
use crate::types::PrivacyBudget;

/// `σ = sqrt(c G² T ln(1/δ) / (n² ε²))`.
pub fn calibrate_sigma(budget: &PrivacyBudget, lipschitz: f64, iterations: usize, n: usize, c: f64) -> Result<f64> {
    Ok(sigma_squared(budget, lipschitz, iterations, n, c)?.sqrt())
}

fn sigma_squared(budget: &PrivacyBudget, g: f64, t: usize, n: usize, c: f64) -> Result<f64> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::InvalidParameter(format!("Lipschitz constant {g} must be positive")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma constant {c} must be positive")));
    }
    if t == 0 || n == 0 {
        return Err(Error::InvalidParameter("T and n must be positive".into()));
    }
    let n = n as f64;
    let eps = budget.epsilon();
    Ok(c * g * g * t as f64 * (1.0 / budget.delta()).ln() / (n * n * eps * eps))
}

/// `ceil(x)`, treating values within a few ulps of an integer as that integer.
fn ceil_guarded(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 4.0 * f64::EPSILON * r.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

pub fn choose_iterations(policy: IterationsPolicy, n: usize, alpha: f64) -> Result<usize> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n = {n} must be ≥ 2")));
    }
    let t = match policy {
        IterationsPolicy::Fixed { t } => t,
        IterationsPolicy::LogN { multiplier } => ceil_guarded(multiplier * (n as f64).ln()),
        IterationsPolicy::HoelderPower => {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1]")));
            }
            ceil_guarded((n as f64).powf(2.0 / (1.0 + 2.0 * alpha)))
        }
    };
    Ok(t.max(1))
}

/// Step-size rule with its constants bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant { eta: f64 },
    DecayingPl { mu: f64, kappa: f64 },
}

impl Schedule {
    pub fn bind(kind: ScheduleKind, constants: &AssumptionConstants) -> Result<Self> {
        match kind {
            ScheduleKind::OneOverL => Ok(Schedule::Constant {
                eta: 1.0 / constants.smoothness()?,
            }),
            ScheduleKind::ConstantHoelder => Ok(Schedule::Constant {
                eta: hoelder_step(constants),
            }),
            ScheduleKind::DecayingPl { kappa } => {
                let mu = constants.mu()?;
                let least = 2.0 * constants.h.powf(1.0 / constants.alpha) / mu;
                let kappa = match kappa {
                    None => least,
                    Some(k) if k >= least => k,
                    Some(k) => {
                        return Err(Error::InvalidParameter(format!(
                            "kappa = {k} is below the admissible minimum {least}"
                        )))
                    }
                };
                Ok(Schedule::DecayingPl { mu, kappa })
            }
            ScheduleKind::Fixed { eta } => Ok(Schedule::Constant { eta }),
        }
    }

    /// Step size at iteration `t` (counting from 0).
    pub fn eta(&self, t: usize) -> f64 {
        match *self {
            Schedule::Constant { eta } => eta,
            Schedule::DecayingPl { mu, kappa } => 2.0 / (mu * (t as f64 + kappa)),
        }
    }
}

/// `(1/H)^{1/α}`.
fn hoelder_step(constants: &AssumptionConstants) -> f64 {
    (1.0 / constants.h).powf(1.0 / constants.alpha)
}

pub fn learning_rate(kind: ScheduleKind, t: usize, constants: &AssumptionConstants) -> Result<f64> {
    Ok(Schedule::bind(kind, constants)?.eta(t))
}

/// Everything the optimizer needs to meet a privacy budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisePlan {
    pub sigma: f64,
    pub iterations: usize,
    pub schedule: Schedule,
    pub budget: PrivacyBudget,
    /// `G` or `G′`, whichever calibrated `σ`.
    pub lipschitz_used: f64,
    pub sigma_constant_c: f64,
    pub n: usize,
}

impl NoisePlan {
    pub fn new(
        budget: PrivacyBudget,
        constants: &AssumptionConstants,
        n: usize,
        iterations: usize,
        schedule: ScheduleKind,
        c: f64,
    ) -> Result<Self> {
        let lipschitz_used = constants.effective_lipschitz();
        let sigma = calibrate_sigma(&budget, lipschitz_used, iterations, n, c)?;
        Ok(Self {
            sigma,
            iterations,
            schedule: Schedule::bind(schedule, constants)?,
            budget,
            lipschitz_used,
            sigma_constant_c: c,
            n,
        })
    }

    /// The plan a [`RunConfig`] prescribes for `n` examples.
    pub fn from_config(config: &RunConfig, constants: &AssumptionConstants, n: usize) -> Result<Self> {
        let iterations = choose_iterations(config.iterations, n, constants.alpha)?;
        Self::new(
            config.budget(n)?,
            constants,
            n,
            iterations,
            config.schedule,
            config.sigma_constant_c,
        )
    }

    /// `σ²` recomputed from the stored fields.
    pub fn implied_sigma_squared(&self) -> f64 {
        sigma_squared(
            &self.budget,
            self.lipschitz_used,
            self.iterations,
            self.n,
            self.sigma_constant_c,
        )
        .expect("fields were validated at construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constants(h: f64, alpha: f64, mu: Option<f64>, l: Option<f64>) -> AssumptionConstants {
        AssumptionConstants {
            g: 1.0,
            l,
            h,
            alpha,
            mu,
            m_loss: 1.0,
            m_c: 10.0,
            g_prime: (20.0 * h).max(h),
        }
    }

    #[test]
    fn sigma_example() {
        let b = PrivacyBudget::new(1.0, 0.001).unwrap();
        let s = calibrate_sigma(&b, 1.0, 16, 1000, 1.0).unwrap();
        let oracle = 16.0 * 1000f64.ln() / 1e6;
        assert!((s * s - oracle).abs() <= 1e-18);
        assert!((s - 0.010_513_1).abs() < 1e-7);
        assert!((oracle - 1.105_24e-4).abs() < 1e-9);
    }

    #[test]
    fn sigma_scaling() {
        let b = PrivacyBudget::new(0.7, 0.01).unwrap();
        let s = |g: f64, n: usize| calibrate_sigma(&b, g, 9, n, 2.0).unwrap().powi(2);
        assert!((s(1.0, 2000) * 4.0 / s(1.0, 1000) - 1.0).abs() < 1e-12);
        assert!((s(2.0, 1000) / (4.0 * s(1.0, 1000)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iteration_examples() {
        assert_eq!(choose_iterations(IterationsPolicy::LogN { multiplier: 1.0 }, 1000, 1.0).unwrap(), 7);
        assert_eq!(choose_iterations(IterationsPolicy::HoelderPower, 1024, 0.5).unwrap(), 1024);
        assert_eq!(choose_iterations(IterationsPolicy::HoelderPower, 1024, 1.0).unwrap(), 102);
        assert_eq!(choose_iterations(IterationsPolicy::HoelderPower, 4096, 0.5).unwrap(), 4096);
        assert_eq!(choose_iterations(IterationsPolicy::Fixed { t: 13 }, 10, 1.0).unwrap(), 13);
        assert_eq!(choose_iterations(IterationsPolicy::default(), 4096, 1.0).unwrap(), 25);
    }

    #[test]
    fn step_examples() {
        let pl = constants(1.0, 1.0, Some(2.0), None);
        let eta = learning_rate(ScheduleKind::DecayingPl { kappa: Some(10.0) }, 0, &pl).unwrap();
        assert!((eta - 0.1).abs() < 1e-15);
        let c = constants(4.0, 0.5, Some(2.0), None);
        assert_eq!(learning_rate(ScheduleKind::ConstantHoelder, 5, &c).unwrap(), 0.0625);
        assert!(matches!(
            learning_rate(ScheduleKind::OneOverL, 0, &c),
            Err(Error::MissingConstant("L"))
        ));
        let smooth = constants(0.26, 1.0, Some(0.01), Some(0.26));
        let eta = learning_rate(ScheduleKind::OneOverL, 0, &smooth).unwrap();
        assert!((eta - 3.846_15).abs() < 1e-5);
        let flat = constants(1.0, 1.0, None, Some(1.0));
        assert!(matches!(
            learning_rate(ScheduleKind::DecayingPl { kappa: None }, 0, &flat),
            Err(Error::PlConstantUnavailable)
        ));
        assert!(learning_rate(ScheduleKind::DecayingPl { kappa: Some(1.0) }, 0, &c).is_err());
    }

    #[test]
    fn plan_invariant_is_exact() {
        let c = constants(0.26, 1.0, Some(0.01), Some(0.26));
        let b = PrivacyBudget::new(0.3, 1e-4).unwrap();
        let plan = NoisePlan::new(b, &c, 777, 20, ScheduleKind::OneOverL, 2.0).unwrap();
        let rel = (plan.sigma * plan.sigma - plan.implied_sigma_squared()).abs() / plan.implied_sigma_squared();
        assert!(rel <= 1e-15, "{rel}");
        assert_eq!(plan.lipschitz_used, 1.0);

        let holder = constants(2.0, 0.5, Some(0.05), None);
        let plan = NoisePlan::new(b, &holder, 100, 20, ScheduleKind::ConstantHoelder, 2.0).unwrap();
        assert_eq!(plan.lipschitz_used, 40.0);
    }

    proptest! {
        #[test]
        fn decaying_steps_stay_below_hoelder_step(
            h in 0.1f64..20.0, alpha in 0.05f64..=1.0, mu in 0.001f64..5.0,
            extra in 0.0f64..10.0, t in 0usize..100_000,
        ) {
            let c = constants(h, alpha, Some(mu), None);
            let least = 2.0 * h.powf(1.0 / alpha) / mu;
            let eta = learning_rate(ScheduleKind::DecayingPl { kappa: Some(least + extra) }, t, &c).unwrap();
            prop_assert!(eta <= hoelder_step(&c) * (1.0 + 1e-12));
        }

        #[test]
        fn sigma_is_homogeneous_in_epsilon(eps in 0.01f64..10.0, k in 0.1f64..10.0, t in 1usize..1000) {
            let b = PrivacyBudget::new(eps, 1e-3).unwrap();
            let bk = PrivacyBudget::new(k * eps, 1e-3).unwrap();
            let s = calibrate_sigma(&b, 1.3, t, 500, 2.0).unwrap();
            let sk = calibrate_sigma(&bk, 1.3, t, 500, 2.0).unwrap();
            prop_assert!((sk - s / k).abs() <= 1e-12 * s / k);
        }
    }
}
