//! Gaussian noise and the high-probability bound on its norm.
//!
//! For `b ~ N(0, σ² I_p)` and `ζ ∈ [exp(−p/8), 1)`,
//! `‖b‖ ≤ σ √p (1 + (8 ln(1/ζ) / p)^{1/4})` with probability at least `1 − ζ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::RngState;
use crate::types::ParamVector;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    sigma: f64,
    dim: usize,
}

impl GaussianSpec {
    pub fn new(sigma: f64, dim: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma = {sigma} must be positive")));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("noise dimension must be ≥ 1".into()));
        }
        Ok(Self { sigma, dim })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Overwrites `out` with independent `N(0, σ²)` draws.
pub fn fill_gaussian(sigma: f64, out: &mut [f64], rng: &mut RngState) {
    for v in out {
        *v = sigma * rng.standard_normal();
    }
}

pub fn sample_gaussian(spec: &GaussianSpec, rng: &mut RngState) -> ParamVector {
    let mut v = vec![0.0; spec.dim];
    fill_gaussian(spec.sigma, &mut v, rng);
    ParamVector::new(v)
}

/// Smallest `ζ` for which the norm bound is stated: `exp(−p/8)`.
pub fn zeta_lower_limit(p: usize) -> f64 {
    (-(p as f64) / 8.0).exp()
}

/// Validates `ζ ∈ [exp(−p/8), 1)`.
pub fn check_zeta(zeta: f64, p: usize) -> Result<()> {
    let lower = zeta_lower_limit(p);
    if !(zeta >= lower && zeta < 1.0) {
        return Err(Error::ConcentrationRegime { zeta, p, lower });
    }
    Ok(())
}

/// The bound formula without the regime check. Outside the regime the value
/// is still well defined but carries no probability guarantee.
pub fn noise_norm_bound_formula(sigma: f64, p: usize, zeta: f64) -> f64 {
    let p = p as f64;
    sigma * p.sqrt() * (1.0 + (-8.0 * zeta.ln() / p).powf(0.25))
}

/// `σ √p (1 + (8 ln(1/ζ)/p)^{1/4})`, rejecting `ζ` outside `[exp(−p/8), 1)`.
pub fn noise_norm_bound(sigma: f64, p: usize, zeta: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma = {sigma} must be positive")));
    }
    if p == 0 {
        return Err(Error::InvalidParameter("p must be ≥ 1".into()));
    }
    check_zeta(zeta, p)?;
    Ok(noise_norm_bound_formula(sigma, p, zeta))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationCheck {
    pub sigma: f64,
    pub p: usize,
    pub zeta: f64,
    pub samples: usize,
    pub bound_value: f64,
    pub exceed_fraction: f64,
    pub mean_norm: f64,
}

impl ConcentrationCheck {
    /// The empirical exceedance is at most `ζ`.
    pub fn holds(&self) -> bool {
        self.exceed_fraction <= self.zeta
    }

    /// `exceed_fraction ≤ ζ + k·sqrt(ζ(1−ζ)/samples)`.
    pub fn holds_within(&self, std_devs: f64) -> bool {
        let sd = (self.zeta * (1.0 - self.zeta) / self.samples as f64).sqrt();
        self.exceed_fraction <= self.zeta + std_devs * sd
    }
}

/// Fraction of `trials` draws whose norm exceeds `threshold`, and the mean norm.
pub fn monte_carlo_exceedance(
    spec: &GaussianSpec,
    threshold: f64,
    trials: usize,
    rng: &mut RngState,
) -> (f64, f64) {
    let mut buf = vec![0.0; spec.dim];
    let mut exceed = 0usize;
    let mut norm_sum = 0.0;
    for _ in 0..trials {
        fill_gaussian(spec.sigma, &mut buf, rng);
        let norm = linalg::norm(&buf);
        norm_sum += norm;
        if norm > threshold {
            exceed += 1;
        }
    }
    (exceed as f64 / trials as f64, norm_sum / trials as f64)
}

pub const MIN_CONCENTRATION_TRIALS: usize = 1000;

pub fn run_concentration_check(
    spec: &GaussianSpec,
    zeta: f64,
    trials: usize,
    rng: &mut RngState,
) -> Result<ConcentrationCheck> {
    if trials < MIN_CONCENTRATION_TRIALS {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_CONCENTRATION_TRIALS} trials, got {trials}"
        )));
    }
    let bound_value = noise_norm_bound(spec.sigma, spec.dim, zeta)?;
    let (exceed_fraction, mean_norm) = monte_carlo_exceedance(spec, bound_value, trials, rng);
    Ok(ConcentrationCheck {
        sigma: spec.sigma,
        p: spec.dim,
        zeta,
        samples: trials,
        bound_value,
        exceed_fraction,
        mean_norm,
    })
}
