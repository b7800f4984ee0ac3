//! Loss families and their assumption constants.
//!
//! Every family carries an optional ridge term `(λ/2)‖θ‖²` inside the
//! per-example loss, so `R_n(θ) = (1/n) Σ ℓ(z_i, θ)` already includes it.
//! The constants below are analytic and assume rows with `‖x‖ ≤ 1` and a
//! parameter domain `‖θ‖ ≤ M_C`.
//!
//! | family | `G` | `H`, `α` | `μ` |
//! |---|---|---|---|
//! | logistic | `1 + λ M_C` | `1/4 + λ`, 1 | `λ` |
//! | least squares | `2(Y + M_C) + λ M_C` | `2 + λ`, 1 | `λ` |
//! | q-norm hinge | `q (1 + M_C)^{q-1} + λ M_C` | `q + λ (2 M_C)^{2-q}`, `q - 1` | `λ` |
//! | q-power absolute | `q (Y + M_C)^{q-1} + λ M_C` | `q 2^{2-q} + λ (2 M_C)^{2-q}`, `q - 1` | `λ` |
//!
//! `Y` is the largest absolute label in the data. For the q-families the
//! Hölder constant follows from `|a₊^β − b₊^β| ≤ |a − b|^β` (hinge) and
//! `|sgn(a)|a|^β − sgn(b)|b|^β| ≤ 2^{1−β} |a − b|^β` (absolute distance), with
//! `β = q − 1`; the ridge part is Lipschitz, hence `β`-Hölder on a ball of
//! diameter `2 M_C` with constant `λ (2 M_C)^{1−β}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::types::{Dataset, Example, ParamVector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LossFamily {
    /// `log(1 + exp(-y⟨θ,x⟩)) + (λ/2)‖θ‖²`
    RegLogistic { lambda: f64 },
    /// `(y − ⟨θ,x⟩)² + (λ/2)‖θ‖²`
    LeastSquares { lambda: f64 },
    /// `max(0, 1 − y⟨θ,x⟩)^q + (λ/2)‖θ‖²`
    QNormHinge {
        q: f64,
        #[serde(default)]
        lambda: f64,
    },
    /// `|y − ⟨θ,x⟩|^q + (λ/2)‖θ‖²`
    QPowerAbsolute {
        q: f64,
        #[serde(default)]
        lambda: f64,
    },
}

impl LossFamily {
    pub fn lambda(&self) -> f64 {
        match *self {
            LossFamily::RegLogistic { lambda }
            | LossFamily::LeastSquares { lambda }
            | LossFamily::QNormHinge { lambda, .. }
            | LossFamily::QPowerAbsolute { lambda, .. } => lambda,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossFamily::RegLogistic { .. } => "reg_logistic",
            LossFamily::LeastSquares { .. } => "least_squares",
            LossFamily::QNormHinge { .. } => "q_norm_hinge",
            LossFamily::QPowerAbsolute { .. } => "q_power_absolute",
        }
    }
}

/// Constants of the standing assumptions for one loss on one domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    /// Lipschitz constant of `θ ↦ ℓ(z, θ)` on the domain.
    pub g: f64,
    /// Smoothness constant, when the gradient is Lipschitz.
    pub l: Option<f64>,
    /// Hölder constant of the gradient.
    pub h: f64,
    /// Hölder exponent in `(0, 1]`.
    pub alpha: f64,
    /// PL constant; present iff the ridge weight is positive.
    pub mu: Option<f64>,
    /// Upper bound on the loss over the domain.
    pub m_loss: f64,
    /// Domain radius `M_C`.
    pub m_c: f64,
    /// `max{2 H M_C, H}`.
    pub g_prime: f64,
}

impl AssumptionConstants {
    pub fn mu(&self) -> Result<f64> {
        self.mu.ok_or(Error::PlConstantUnavailable)
    }

    pub fn smoothness(&self) -> Result<f64> {
        self.l.ok_or(Error::MissingConstant("L"))
    }

    /// Generalized Bernstein constant `B = 2G²/μ` implied by Lipschitz + PL.
    pub fn bernstein_b(&self) -> Result<f64> {
        Ok(2.0 * self.g * self.g / self.mu()?)
    }

    /// The Lipschitz constant used for noise calibration: `G` for smooth
    /// losses, `G′ = max{2HM_C, H}` for Hölder-smooth ones.
    pub fn effective_lipschitz(&self) -> f64 {
        if self.l.is_some() {
            self.g
        } else {
            self.g_prime
        }
    }

    /// Elementwise worst case of two constant sets on the same domain.
    pub fn join(&self, other: &AssumptionConstants) -> AssumptionConstants {
        AssumptionConstants {
            g: self.g.max(other.g),
            l: self.l.zip(other.l).map(|(a, b)| a.max(b)),
            h: self.h.max(other.h),
            alpha: self.alpha.min(other.alpha),
            mu: self.mu.zip(other.mu).map(|(a, b)| a.min(b)),
            m_loss: self.m_loss.max(other.m_loss),
            m_c: self.m_c.max(other.m_c),
            g_prime: self.g_prime.max(other.g_prime),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossModel {
    family: LossFamily,
}

impl LossModel {
    pub fn new(family: LossFamily) -> Result<Self> {
        let lambda = family.lambda();
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} must be ≥ 0")));
        }
        if let LossFamily::QNormHinge { q, .. } | LossFamily::QPowerAbsolute { q, .. } = family {
            if !(q > 1.0 && q <= 2.0) {
                return Err(Error::InvalidParameter(format!("q = {q} must lie in (1, 2]")));
            }
        }
        Ok(Self { family })
    }

    pub fn reg_logistic(lambda: f64) -> Result<Self> {
        Self::new(LossFamily::RegLogistic { lambda })
    }

    pub fn least_squares(lambda: f64) -> Result<Self> {
        Self::new(LossFamily::LeastSquares { lambda })
    }

    pub fn q_norm_hinge(q: f64, lambda: f64) -> Result<Self> {
        Self::new(LossFamily::QNormHinge { q, lambda })
    }

    pub fn q_power_absolute(q: f64, lambda: f64) -> Result<Self> {
        Self::new(LossFamily::QPowerAbsolute { q, lambda })
    }

    pub fn family(&self) -> LossFamily {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.family.lambda()
    }

    /// Data term as a function of the margin `m = ⟨θ, x⟩`: value and
    /// derivative with respect to `m`.
    #[inline]
    fn margin_loss(&self, m: f64, y: f64) -> (f64, f64) {
        match self.family {
            LossFamily::RegLogistic { .. } => {
                let z = y * m;
                // log(1 + e^{-z}) and its derivative -y σ(-z), both overflow-safe.
                let value = if z > 0.0 {
                    (-z).exp().ln_1p()
                } else {
                    -z + z.exp().ln_1p()
                };
                let sig_neg = if z > 0.0 {
                    let e = (-z).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + z.exp())
                };
                (value, -y * sig_neg)
            }
            LossFamily::LeastSquares { .. } => {
                let r = y - m;
                (r * r, -2.0 * r)
            }
            LossFamily::QNormHinge { q, .. } => {
                let u = 1.0 - y * m;
                if u > 0.0 {
                    (u.powf(q), -q * u.powf(q - 1.0) * y)
                } else {
                    // Inactive side, including the kink u = 0.
                    (0.0, 0.0)
                }
            }
            LossFamily::QPowerAbsolute { q, .. } => {
                let r = y - m;
                let a = r.abs();
                if a == 0.0 {
                    (0.0, 0.0)
                } else {
                    (a.powf(q), -q * a.powf(q - 1.0) * r.signum())
                }
            }
        }
    }

    fn check_dim(theta: &[f64], x: &[f64]) -> Result<()> {
        if theta.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: theta.len(),
            });
        }
        Ok(())
    }

    /// `ℓ(z, θ)`.
    pub fn loss_value(&self, theta: &ParamVector, example: Example<'_>) -> Result<f64> {
        let theta = theta.as_slice();
        Self::check_dim(theta, example.x)?;
        let (value, _) = self.margin_loss(linalg::dot(theta, example.x), example.y);
        Ok(value + 0.5 * self.lambda() * linalg::dot(theta, theta))
    }

    /// `∇_θ ℓ(z, θ)`.
    pub fn loss_gradient(&self, theta: &ParamVector, example: Example<'_>) -> Result<ParamVector> {
        let t = theta.as_slice();
        Self::check_dim(t, example.x)?;
        let (_, dm) = self.margin_loss(linalg::dot(t, example.x), example.y);
        let lambda = self.lambda();
        Ok(t.iter()
            .zip(example.x)
            .map(|(ti, xi)| dm * xi + lambda * ti)
            .collect::<Vec<_>>()
            .into())
    }

    /// `R_n(θ)`.
    pub fn empirical_risk(&self, theta: &ParamVector, data: &Dataset) -> Result<f64> {
        let t = theta.as_slice();
        Self::check_dim(t, &vec![0.0; data.p()])?;
        if data.n() == 0 {
            return Err(Error::EmptyDataset);
        }
        let sum: f64 = data
            .examples()
            .map(|ex| self.margin_loss(linalg::dot(t, ex.x), ex.y).0)
            .sum();
        Ok(sum / data.n() as f64 + 0.5 * self.lambda() * linalg::dot(t, t))
    }

    /// `(R_n(θ), ∇R_n(θ))` in one pass over the data.
    pub fn risk_and_gradient(&self, theta: &ParamVector, data: &Dataset) -> Result<(f64, ParamVector)> {
        let t = theta.as_slice();
        if t.len() != data.p() {
            return Err(Error::DimensionMismatch {
                expected: data.p(),
                found: t.len(),
            });
        }
        let mut grad = vec![0.0; data.p()];
        let mut sum = 0.0;
        for ex in data.examples() {
            let (v, dm) = self.margin_loss(linalg::dot(t, ex.x), ex.y);
            sum += v;
            if dm != 0.0 {
                linalg::axpy(dm, ex.x, &mut grad);
            }
        }
        let inv_n = 1.0 / data.n() as f64;
        let lambda = self.lambda();
        for (g, ti) in grad.iter_mut().zip(t) {
            *g = *g * inv_n + lambda * ti;
        }
        let risk = sum * inv_n + 0.5 * lambda * linalg::dot(t, t);
        Ok((risk, grad.into()))
    }

    pub fn risk_gradient(&self, theta: &ParamVector, data: &Dataset) -> Result<ParamVector> {
        Ok(self.risk_and_gradient(theta, data)?.1)
    }

    /// Analytic constants on the ball of radius `m_c` for rows of `data`.
    pub fn derive_constants(&self, data: &Dataset, m_c: f64) -> Result<AssumptionConstants> {
        if !(m_c > 0.0 && m_c.is_finite()) {
            return Err(Error::InvalidParameter(format!("M_C = {m_c} must be positive")));
        }
        let max_row = data
            .features()
            .chunks_exact(data.p())
            .map(linalg::norm)
            .fold(0.0, f64::max);
        if max_row > 1.0 + crate::types::ROW_NORM_SLACK {
            return Err(Error::InvalidDataset(format!(
                "constants need unit-norm rows, found norm {max_row}"
            )));
        }
        Ok(self.constants_for(data.max_abs_label(), m_c))
    }

    /// Constants for labels bounded by `max_abs_label` in absolute value.
    pub fn constants_for(&self, max_abs_label: f64, m_c: f64) -> AssumptionConstants {
        let lambda = self.lambda();
        let ridge_bound = 0.5 * lambda * m_c * m_c;
        let y = max_abs_label;
        let (g, l, h, alpha, m_loss) = match self.family {
            LossFamily::RegLogistic { .. } => {
                let l = 0.25 + lambda;
                // log(1 + e^{M_C}) computed without overflow.
                let m_loss = m_c + (-m_c).exp().ln_1p() + ridge_bound;
                (1.0 + lambda * m_c, Some(l), l, 1.0, m_loss)
            }
            LossFamily::LeastSquares { .. } => {
                let l = 2.0 + lambda;
                let r = y + m_c;
                (2.0 * r + lambda * m_c, Some(l), l, 1.0, r * r + ridge_bound)
            }
            LossFamily::QNormHinge { q, .. } => {
                let alpha = q - 1.0;
                let h = q + lambda * (2.0 * m_c).powf(1.0 - alpha);
                let r = 1.0 + m_c;
                let l = (q == 2.0).then_some(h);
                (q * r.powf(alpha) + lambda * m_c, l, h, alpha, r.powf(q) + ridge_bound)
            }
            LossFamily::QPowerAbsolute { q, .. } => {
                let alpha = q - 1.0;
                let h = q * 2f64.powf(1.0 - alpha) + lambda * (2.0 * m_c).powf(1.0 - alpha);
                let r = y + m_c;
                let l = (q == 2.0).then_some(h);
                (q * r.powf(alpha) + lambda * m_c, l, h, alpha, r.powf(q) + ridge_bound)
            }
        };
        AssumptionConstants {
            g,
            l,
            h,
            alpha,
            mu: (lambda > 0.0).then_some(lambda),
            m_loss,
            m_c,
            g_prime: (2.0 * h * m_c).max(h),
        }
    }
}
