//! Closed-form optimization-error and excess-risk bounds.
//!
//! All bounds share the noise factor `ν = 1 + (8 ln(T/ζ)/p)^{1/4}`. The
//! unspecified constants default to 1; the values are order-of-magnitude
//! guides rather than sharp thresholds.
//!
//! | bound | value |
//! |---|---|
//! | smooth optimization error | `c · G² p ln n ln(1/δ) / (n² ε²) · ν²` |
//! | Hölder optimization error | `c · G′² sqrt(p ln(1/δ)) / (n^{2α/(1+2α)} ε) · ν` |
//! | excess risk, smooth TGP | `c₁ G ln^{1.5} n sqrt(p ln(1/δ)) / (nε) · ν + c₂ G² p ln n ln(1/δ) / (n²ε²) · ν² + c₃ ln n / n` |
//! | excess risk, Hölder TGP | `c₁ G′ ln n (p ln(1/δ))^{1/4} / (n^{α/(1+2α)} ε^{1/2}) · ν^{1/2} + c₂ G′² sqrt(p ln(1/δ)) / (n^{2α/(1+2α)} ε) · ν + c₃ ln n / n` |
//! | excess risk, m-NGP | the smooth TGP form with `G′` for `G` |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::AssumptionConstants;
use crate::noise::check_zeta;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInput {
    pub n: usize,
    pub p: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub zeta: f64,
    pub iterations: usize,
    pub constants: AssumptionConstants,
    /// Multiplier of the optimization-error bounds.
    pub c_opt: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl BoundInput {
    /// Checked constructor; `ζ` must lie in `[exp(−p/8), 1)`.
    pub fn new(
        n: usize,
        p: usize,
        epsilon: f64,
        delta: f64,
        zeta: f64,
        iterations: usize,
        constants: AssumptionConstants,
    ) -> Result<Self> {
        let input = Self::new_unchecked(n, p, epsilon, delta, zeta, iterations, constants);
        input.validate()?;
        Ok(input)
    }

    /// Skips the `ζ` regime check (other arguments are still assumed sane).
    /// Outside the regime the formulas are evaluated but carry no guarantee.
    pub fn new_unchecked(
        n: usize,
        p: usize,
        epsilon: f64,
        delta: f64,
        zeta: f64,
        iterations: usize,
        constants: AssumptionConstants,
    ) -> Self {
        Self {
            n,
            p,
            epsilon,
            delta,
            zeta,
            iterations,
            constants,
            c_opt: 1.0,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
        }
    }

    pub fn with_multipliers(mut self, c1: f64, c2: f64, c3: f64) -> Self {
        self.c1 = c1;
        self.c2 = c2;
        self.c3 = c3;
        self
    }

    pub fn with_opt_multiplier(mut self, c: f64) -> Self {
        self.c_opt = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p == 0 || self.iterations == 0 {
            return Err(Error::InvalidParameter("need n ≥ 2, p ≥ 1, T ≥ 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidBudget(format!("epsilon = {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidBudget(format!("delta = {}", self.delta)));
        }
        for c in [self.c_opt, self.c1, self.c2, self.c3] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter(format!("multiplier {c} must be positive")));
            }
        }
        check_zeta(self.zeta, self.p)
    }

    /// `1 + (8 ln(T/ζ)/p)^{1/4}`.
    pub fn noise_factor(&self) -> f64 {
        1.0 + (8.0 * (self.iterations as f64 / self.zeta).ln() / self.p as f64).powf(0.25)
    }

    fn ln_n(&self) -> f64 {
        (self.n as f64).ln()
    }

    fn ln_inv_delta(&self) -> f64 {
        (1.0 / self.delta).ln()
    }

    /// `2α/(1+2α)`.
    fn hoelder_rate(&self) -> f64 {
        let a = self.constants.alpha;
        2.0 * a / (1.0 + 2.0 * a)
    }

    /// `G² p ln n ln(1/δ)/(n²ε²) ν²` without multiplier, for a given `G`.
    fn smooth_core(&self, g: f64) -> f64 {
        let n = self.n as f64;
        let nu = self.noise_factor();
        g * g * self.p as f64 * self.ln_n() * self.ln_inv_delta() / (n * n * self.epsilon * self.epsilon) * nu * nu
    }

    /// `G′² sqrt(p ln(1/δ)) / (n^{2α/(1+2α)} ε) ν` without multiplier.
    fn hoelder_core(&self) -> f64 {
        let gp = self.constants.g_prime;
        gp * gp * (self.p as f64 * self.ln_inv_delta()).sqrt()
            / ((self.n as f64).powf(self.hoelder_rate()) * self.epsilon)
            * self.noise_factor()
    }

    /// `G ln^{1.5} n sqrt(p ln(1/δ)) / (nε) ν` without multiplier.
    fn smooth_leading(&self, g: f64) -> f64 {
        g * self.ln_n().powf(1.5) * (self.p as f64 * self.ln_inv_delta()).sqrt() / (self.n as f64 * self.epsilon)
            * self.noise_factor()
    }

    fn tail(&self) -> f64 {
        self.c3 * self.ln_n() / self.n as f64
    }
}

/// Optimization error of TGP on a smooth PL loss.
pub fn opt_error_bound_smooth(input: &BoundInput) -> Result<f64> {
    input.constants.smoothness()?;
    Ok(input.c_opt * input.smooth_core(input.constants.g))
}

/// Optimization error of TGP with decaying steps on a Hölder-smooth PL loss.
pub fn opt_error_bound_hoelder(input: &BoundInput) -> Result<f64> {
    Ok(input.c_opt * input.hoelder_core())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Smooth loss, TGP, constant `1/L` steps, `O(log n)` iterations.
    SmoothTgp,
    /// Hölder loss, TGP, decaying steps, `O(n^{2/(1+2α)})` iterations.
    HoelderTgp,
    /// Hölder loss, m-NGP, constant `(1/H)^{1/α}` steps, `O(log n)` iterations.
    HoelderMngp,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::SmoothTgp => "smooth_tgp",
            Regime::HoelderTgp => "hoelder_tgp",
            Regime::HoelderMngp => "hoelder_mngp",
        }
    }
}

pub fn excess_risk_bound(regime: Regime, input: &BoundInput) -> Result<f64> {
    match regime {
        Regime::SmoothTgp => {
            input.constants.smoothness()?;
            let g = input.constants.g;
            Ok(input.c1 * input.smooth_leading(g) + input.c2 * input.smooth_core(g) + input.tail())
        }
        Regime::HoelderTgp => {
            let gp = input.constants.g_prime;
            let leading = gp * input.ln_n() * (input.p as f64 * input.ln_inv_delta()).powf(0.25)
                / ((input.n as f64).powf(input.hoelder_rate() / 2.0) * input.epsilon.sqrt())
                * input.noise_factor().sqrt();
            Ok(input.c1 * leading + input.c2 * input.hoelder_core() + input.tail())
        }
        Regime::HoelderMngp => {
            let gp = input.constants.g_prime;
            Ok(input.c1 * input.smooth_leading(gp) + input.c2 * input.smooth_core(gp) + input.tail())
        }
    }
}

/// The smallest `n` of an ascending grid from which on the m-NGP bound never
/// exceeds the Hölder TGP bound. `template.n` is ignored.
pub fn mngp_crossover(template: &BoundInput, n_grid: &[usize]) -> Result<Option<usize>> {
    let mut crossover = None;
    for &n in n_grid.iter().rev() {
        let input = BoundInput { n, ..*template };
        let better = excess_risk_bound(Regime::HoelderMngp, &input)? <= excess_risk_bound(Regime::HoelderTgp, &input)?;
        if better {
            crossover = Some(n);
        } else {
            break;
        }
    }
    Ok(crossover)
}
