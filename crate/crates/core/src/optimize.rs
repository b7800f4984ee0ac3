//! Noisy gradient descent (TGP), its normalized variant (m-NGP) and a
//! non-private reference solver.
//!
//! One TGP step is `θ ← Π(θ − η (∇R_n(θ) + b))` with `b ~ N(0, σ² I_p)` and
//! `Π` the projection onto the `M_C` ball. m-NGP replaces the noisy gradient
//! `g = ∇R_n(θ) + b` by `g / ‖g‖` whenever `‖g‖ < 1`, so every step has length
//! at least `η` before projection.
//!
//! The noise for iteration `t` is drawn from its own stream, keyed by the run
//! seed, the state's noise key and `t`. Two runs with equal seeds and keys
//! therefore see the same noise regardless of anything else they compute.

use crate::config::{OptimizerKind, RunConfig};
use crate::error::{Error, Result};
use crate::linalg;
use crate::losses::{AssumptionConstants, LossModel};
use crate::noise::fill_gaussian;
use crate::privacy::NoisePlan;
use crate::rng::{derive_stream, make_rng, tags, RngState};
use crate::trace::{TraceEntry, TrainTrace};
use crate::types::{project_in_place, Dataset, ParamVector};

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub theta: ParamVector,
    pub t: usize,
    pub seed: u64,
    pub noise_key: u64,
}

impl OptimizerState {
    pub fn new(theta: ParamVector, seed: u64, noise_key: u64) -> Self {
        Self {
            theta,
            t: 0,
            seed,
            noise_key,
        }
    }

    /// The noise stream of the current iteration.
    pub fn noise_rng(&self) -> RngState {
        make_rng(self.seed, derive_stream(tags::NOISE, self.noise_key, self.t as u64))
    }
}

/// Per-step settings that do not change across a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOptions {
    /// Radius of the projection ball, if projecting.
    pub projection: Option<f64>,
    /// Abort when an iterate's norm exceeds this.
    pub divergence_threshold: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            projection: None,
            divergence_threshold: crate::config::DEFAULT_DIVERGENCE_THRESHOLD,
        }
    }
}

impl StepOptions {
    pub fn from_config(config: &RunConfig) -> Self {
        Self {
            projection: config.project.then_some(config.domain_radius),
            divergence_threshold: config.divergence_threshold,
        }
    }
}

/// Result of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub state: OptimizerState,
    pub entry: TraceEntry,
    /// The noise vector `b` that was added.
    pub noise: ParamVector,
}

/// Direction after the m-NGP rescaling rule.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedDirection {
    pub direction: Vec<f64>,
    pub noisy_norm: f64,
    pub direction_norm: f64,
    /// The noisy gradient was exactly zero; the direction is zero.
    pub degenerate: bool,
}

/// Rescales `noisy` to unit norm when its norm is strictly below 1.
///
/// The argument is the already-noised gradient; nothing else is consulted.
pub fn normalize_direction(mut noisy: Vec<f64>) -> NormalizedDirection {
    let noisy_norm = linalg::norm(&noisy);
    if noisy_norm == 0.0 {
        return NormalizedDirection {
            direction: noisy,
            noisy_norm,
            direction_norm: 0.0,
            degenerate: true,
        };
    }
    if noisy_norm < 1.0 {
        linalg::scale(1.0 / noisy_norm, &mut noisy);
    }
    let direction_norm = linalg::norm(&noisy);
    NormalizedDirection {
        direction: noisy,
        noisy_norm,
        direction_norm,
        degenerate: false,
    }
}

fn divergence(state: &OptimizerState, reason: String) -> Error {
    Error::Divergence {
        iteration: state.t,
        reason,
        partial: Box::new(TrainTrace {
            entries: Vec::new(),
            final_params: state.theta.clone(),
            final_risk: f64::NAN,
            noise: Vec::new(),
            iterates: Vec::new(),
        }),
    }
}

fn noisy_step(
    normalize: bool,
    state: &OptimizerState,
    model: &LossModel,
    data: &Dataset,
    eta: f64,
    sigma: f64,
    options: &StepOptions,
) -> Result<Step> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("step size {eta} must be positive")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma = {sigma} must be ≥ 0")));
    }
    let (risk, grad) = model.risk_and_gradient(&state.theta, data)?;
    if !risk.is_finite() || !grad.is_finite() {
        return Err(divergence(state, "non-finite risk or gradient".into()));
    }
    let grad_norm = grad.norm();

    let mut noise = vec![0.0; data.p()];
    if sigma > 0.0 {
        fill_gaussian(sigma, &mut noise, &mut state.noise_rng());
    }
    let noise_norm = linalg::norm(&noise);

    let mut noisy = grad.into_inner();
    linalg::axpy(1.0, &noise, &mut noisy);

    let (direction, noisy_grad_norm, direction_norm, degenerate) = if normalize {
        let d = normalize_direction(noisy);
        (d.direction, d.noisy_norm, d.direction_norm, d.degenerate)
    } else {
        let norm = linalg::norm(&noisy);
        (noisy, norm, norm, false)
    };

    let mut theta = state.theta.clone().into_inner();
    linalg::axpy(-eta, &direction, &mut theta);
    if let Some(radius) = options.projection {
        project_in_place(&mut theta, radius);
    }
    if !linalg::all_finite(&theta) {
        return Err(divergence(state, "non-finite iterate".into()));
    }
    let theta_norm = linalg::norm(&theta);
    if theta_norm > options.divergence_threshold {
        return Err(divergence(
            state,
            format!("iterate norm {theta_norm:e} exceeds {:e}", options.divergence_threshold),
        ));
    }
    let step_norm = linalg::distance(&theta, state.theta.as_slice());

    Ok(Step {
        entry: TraceEntry {
            t: state.t,
            empirical_risk: risk,
            grad_norm,
            noise_norm,
            step_norm,
            noisy_grad_norm,
            direction_norm,
            degenerate,
            eta,
        },
        state: OptimizerState {
            theta: theta.into(),
            t: state.t + 1,
            seed: state.seed,
            noise_key: state.noise_key,
        },
        noise: noise.into(),
    })
}

/// One step of noisy gradient descent.
pub fn tgp_step(
    state: &OptimizerState,
    model: &LossModel,
    data: &Dataset,
    eta: f64,
    sigma: f64,
    options: &StepOptions,
) -> Result<Step> {
    noisy_step(false, state, model, data, eta, sigma, options)
}

/// One step of normalized noisy gradient descent.
pub fn mngp_step(
    state: &OptimizerState,
    model: &LossModel,
    data: &Dataset,
    eta: f64,
    sigma: f64,
    options: &StepOptions,
) -> Result<Step> {
    noisy_step(true, state, model, data, eta, sigma, options)
}

/// Runs `plan.iterations` steps of the configured optimizer from `theta0`.
///
/// On divergence the error carries every completed entry.
pub fn train(
    config: &RunConfig,
    plan: &NoisePlan,
    model: &LossModel,
    data: &Dataset,
    theta0: ParamVector,
) -> Result<TrainTrace> {
    if theta0.dim() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: theta0.dim(),
        });
    }
    let options = StepOptions::from_config(config);
    let sigma = match config.optimizer {
        OptimizerKind::NonPrivate => 0.0,
        _ => plan.sigma,
    };
    let normalize = config.optimizer == OptimizerKind::Mngp;

    let mut theta0 = theta0;
    if let Some(radius) = options.projection {
        project_in_place(theta0.as_mut_slice(), radius);
    }
    let mut state = OptimizerState::new(theta0, config.seed, config.noise_key);
    let mut entries = Vec::with_capacity(plan.iterations);
    let mut noise = Vec::new();
    let mut iterates = Vec::new();
    if config.record_vectors {
        iterates.push(state.theta.clone());
    }

    for t in 0..plan.iterations {
        let eta = plan.schedule.eta(t);
        match noisy_step(normalize, &state, model, data, eta, sigma, &options) {
            Ok(step) => {
                entries.push(step.entry);
                state = step.state;
                if config.record_vectors {
                    noise.push(step.noise);
                    iterates.push(state.theta.clone());
                }
            }
            Err(Error::Divergence {
                iteration,
                reason,
                mut partial,
            }) => {
                partial.entries = entries;
                partial.noise = noise;
                partial.iterates = iterates;
                return Err(Error::Divergence {
                    iteration,
                    reason,
                    partial,
                });
            }
            Err(e) => return Err(e),
        }
    }

    let final_risk = model.empirical_risk(&state.theta, data)?;
    Ok(TrainTrace {
        entries,
        final_params: state.theta,
        final_risk,
        noise,
        iterates,
    })
}

/// Constants, plan and trace for `config` on `data`, starting from zero.
pub fn run_config(config: &RunConfig, data: &Dataset) -> Result<(AssumptionConstants, NoisePlan, TrainTrace)> {
    config.validate()?;
    let model = LossModel::new(config.loss)?;
    let constants = model.derive_constants(data, config.domain_radius)?;
    let plan = NoisePlan::from_config(config, &constants, data.n())?;
    let trace = train(config, &plan, &model, data, ParamVector::zeros(data.p()))?;
    Ok((constants, plan, trace))
}

/// Minimizes `R_n` without noise or projection: gradient descent with
/// Armijo backtracking and step growth, stopped at `‖∇R_n‖ ≤ tol`.
///
/// Returns `(θ*_n, R_n(θ*_n))`.
pub fn solve_nonprivate(model: &LossModel, data: &Dataset, tol: f64, max_iters: usize) -> Result<(ParamVector, f64)> {
    solve_nonprivate_from(model, data, ParamVector::zeros(data.p()), tol, max_iters)
}

pub fn solve_nonprivate_from(
    model: &LossModel,
    data: &Dataset,
    start: ParamVector,
    tol: f64,
    max_iters: usize,
) -> Result<(ParamVector, f64)> {
    const MIN_STEP: f64 = 1e-30;
    const MAX_STEP: f64 = 1e6;
    let mut theta = start;
    let (mut risk, mut grad) = model.risk_and_gradient(&theta, data)?;
    let mut eta = 1.0;
    for _ in 0..max_iters {
        let gn2 = linalg::dot(grad.as_slice(), grad.as_slice());
        let gn = gn2.sqrt();
        if !gn.is_finite() {
            return Err(Error::OracleNotConverged { iterations: 0, grad_norm: gn });
        }
        if gn <= tol {
            return Ok((theta, risk));
        }
        loop {
            let mut cand = theta.clone();
            linalg::axpy(-eta, grad.as_slice(), cand.as_mut_slice());
            let (r, g) = model.risk_and_gradient(&cand, data)?;
            let sufficient = r <= risk - 0.25 * eta * gn2;
            // Near the optimum risk differences drown in rounding. The
            // trapezoid estimate −(η/2)(‖g‖² + ⟨g′, g⟩) of the decrease is
            // exact for quadratics and stays accurate there.
            let resolved = (risk - r).abs() > 1e3 * f64::EPSILON * risk.abs().max(1e-300);
            let trapezoid = 0.5 * (gn2 + linalg::dot(g.as_slice(), grad.as_slice()));
            let sufficient_by_gradient = !resolved && trapezoid >= 0.25 * gn2;
            if sufficient || sufficient_by_gradient {
                theta = cand;
                risk = r;
                grad = g;
                eta = (eta * 2.0).min(MAX_STEP);
                break;
            }
            eta *= 0.5;
            if eta < MIN_STEP {
                return Err(Error::OracleNotConverged {
                    iterations: max_iters,
                    grad_norm: gn,
                });
            }
        }
    }
    let grad_norm = grad.norm();
    if grad_norm <= tol {
        return Ok((theta, risk));
    }
    Err(Error::OracleNotConverged {
        iterations: max_iters,
        grad_norm,
    })
}
