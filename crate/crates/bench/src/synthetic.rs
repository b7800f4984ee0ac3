//! Synthetic problems with a known population.
//!
//! Every generator draws a signal `w` with `‖w‖ = signal_norm` and rows `x`
//! uniform on the unit sphere, so `E[x xᵀ] = I/p`. Training rows are a prefix
//! of one fixed stream: the problem with `n` examples extends the one with
//! fewer examples under the same seed.
//!
//! * `StronglyConvexQuadratic`: `y = ⟨w, x⟩ + u`, `u ~ U(−s, s)`, meant for
//!   least squares. Its population risk is known in closed form,
//!   `R(θ) = ‖θ − w‖²/p + s²/3 + (λ/2)‖θ‖²`, with minimizer
//!   `θ* = (2/p) / (2/p + λ) · w`.
//! * `LogisticSeparable`: `y = sign⟨w, x⟩`, each label flipped with
//!   probability `s`.
//! * `HoelderRegression`: as the quadratic, meant for the q-power absolute
//!   loss.
//!
//! The last two estimate population quantities on an independent sample of
//! `population_size` examples.

use anyhow::{bail, Result};
use mngp::optimize::solve_nonprivate;
use mngp::rng::{derive_stream, make_rng, tags, RngState};
use mngp::{linalg, Dataset, LossFamily, LossModel, ParamVector, Task};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    StronglyConvexQuadratic,
    LogisticSeparable,
    HoelderRegression,
}

pub const MIN_POPULATION: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    pub p: usize,
    /// Seeds `w`, the training rows and the population sample.
    pub seed: u64,
    /// Label noise: half-width `s` for regression, flip rate for classification.
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_signal")]
    pub signal_norm: f64,
    #[serde(default = "default_population")]
    pub population_size: usize,
}

fn default_noise() -> f64 {
    0.5
}
fn default_signal() -> f64 {
    1.0
}
fn default_population() -> usize {
    MIN_POPULATION
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, n: usize, p: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            p,
            seed,
            noise: match kind {
                SyntheticKind::LogisticSeparable => 0.05,
                _ => default_noise(),
            },
            signal_norm: default_signal(),
            population_size: MIN_POPULATION,
        }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_signal_norm(mut self, norm: f64) -> Self {
        self.signal_norm = norm;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Population {
    /// Closed-form least-squares population.
    Quadratic { w: Vec<f64>, half_width: f64 },
    /// A large independent sample standing in for the population.
    Sample(Dataset),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticProblem {
    pub spec: SyntheticSpec,
    pub train: Dataset,
    pub w: Vec<f64>,
    pub population: Population,
}

fn unit_sphere(p: usize, rng: &mut RngState) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..p).map(|_| rng.standard_normal()).collect();
        let norm = linalg::norm(&x);
        if norm > 0.0 {
            linalg::scale(1.0 / norm, &mut x);
            // One rescale can leave the norm an ulp above 1.
            let after = linalg::norm(&x);
            if after > 1.0 {
                linalg::scale(1.0 / after, &mut x);
            }
            return x;
        }
    }
}

fn draw_rows(spec: &SyntheticSpec, w: &[f64], n: usize, stream: u64, name: &str) -> Result<Dataset> {
    let mut rng = make_rng(spec.seed, derive_stream(tags::SYNTHETIC, stream, 0));
    let mut features = Vec::with_capacity(n * spec.p);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x = unit_sphere(spec.p, &mut rng);
        let m = linalg::dot(w, &x);
        let u = rng.uniform();
        let y = match spec.kind {
            SyntheticKind::StronglyConvexQuadratic | SyntheticKind::HoelderRegression => {
                m + spec.noise * (2.0 * u - 1.0)
            }
            SyntheticKind::LogisticSeparable => {
                let y = if m >= 0.0 { 1.0 } else { -1.0 };
                if u < spec.noise {
                    -y
                } else {
                    y
                }
            }
        };
        features.extend(x);
        labels.push(y);
    }
    let task = match spec.kind {
        SyntheticKind::LogisticSeparable => Task::Classification,
        _ => Task::Regression,
    };
    Ok(Dataset::new(name, task, spec.p, features, labels, mngp::FeatureScale::identity(spec.p))?)
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticProblem> {
    if spec.p == 0 || spec.n < 2 {
        bail!("synthetic problems need p ≥ 1 and n ≥ 2");
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        bail!("noise level {} must be ≥ 0", spec.noise);
    }
    let mut rng = make_rng(spec.seed, derive_stream(tags::SYNTHETIC, 0, 0));
    let mut w = unit_sphere(spec.p, &mut rng);
    linalg::scale(spec.signal_norm, &mut w);

    let name = format!("{:?}-n{}-p{}-s{}", spec.kind, spec.n, spec.p, spec.seed).to_lowercase();
    let train = draw_rows(spec, &w, spec.n, 1, &name)?;
    let population = match spec.kind {
        SyntheticKind::StronglyConvexQuadratic => Population::Quadratic {
            w: w.clone(),
            half_width: spec.noise,
        },
        _ => {
            if spec.population_size < MIN_POPULATION {
                bail!("population sample needs at least {MIN_POPULATION} examples");
            }
            Population::Sample(draw_rows(spec, &w, spec.population_size, 2, "population")?)
        }
    };
    Ok(SyntheticProblem {
        spec: spec.clone(),
        train,
        w,
        population,
    })
}

impl SyntheticProblem {
    /// `R(θ)` under `model`. A `θ` longer than `p` is read as a zero-padded
    /// run: the extra coordinates meet zero features and only the ridge
    /// term sees them.
    /// Whether the population risk of `family` can be evaluated. The
    /// quadratic population is closed-form for least squares only.
    pub fn has_population_risk(&self, family: LossFamily) -> bool {
        match self.population {
            Population::Quadratic { .. } => matches!(family, LossFamily::LeastSquares { .. }),
            Population::Sample(_) => true,
        }
    }

    pub fn population_risk(&self, model: &LossModel, theta: &ParamVector) -> Result<f64> {
        let p = self.spec.p;
        if theta.dim() < p {
            bail!("parameter dimension {} is below p = {p}", theta.dim());
        }
        let (head, tail) = theta.as_slice().split_at(p);
        let tail_ridge = 0.5 * model.lambda() * linalg::dot(tail, tail);
        let head_risk = match &self.population {
            Population::Quadratic { w, half_width } => {
                let LossFamily::LeastSquares { lambda } = model.family() else {
                    bail!("the closed-form population only supports least squares");
                };
                linalg::distance(head, w).powi(2) / p as f64
                    + half_width * half_width / 3.0
                    + 0.5 * lambda * linalg::dot(head, head)
            }
            Population::Sample(sample) => model.empirical_risk(&ParamVector::new(head.to_vec()), sample)?,
        };
        Ok(head_risk + tail_ridge)
    }

    /// `(θ*, R(θ*))` in dimension `p`; padded coordinates of `θ*` are zero.
    pub fn population_minimizer(&self, model: &LossModel, tol: f64, max_iters: usize) -> Result<(ParamVector, f64)> {
        match &self.population {
            Population::Quadratic { w, .. } => {
                let LossFamily::LeastSquares { lambda } = model.family() else {
                    bail!("the closed-form population only supports least squares");
                };
                let p = w.len() as f64;
                let shrink = (2.0 / p) / (2.0 / p + lambda);
                let theta = ParamVector::new(w.iter().map(|wi| shrink * wi).collect());
                let risk = self.population_risk(model, &theta)?;
                Ok((theta, risk))
            }
            Population::Sample(sample) => Ok(solve_nonprivate(model, sample, tol, max_iters)?),
        }
    }

    /// Classification accuracy on the population sample, if there is one.
    pub fn population_accuracy(&self, theta: &ParamVector) -> Result<Option<f64>> {
        match &self.population {
            Population::Sample(sample) if sample.task() == Task::Classification => {
                let head = ParamVector::new(theta.as_slice()[..self.spec.p].to_vec());
                Ok(Some(crate::preprocess::accuracy(&head, sample)?))
            }
            _ => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_nested() {
        let small = generate(&SyntheticSpec::new(SyntheticKind::StronglyConvexQuadratic, 50, 5, 3)).unwrap();
        let large = generate(&SyntheticSpec::new(SyntheticKind::StronglyConvexQuadratic, 80, 5, 3)).unwrap();
        assert_eq!(small.w, large.w);
        assert_eq!(small.train.features(), &large.train.features()[..250]);
        let again = generate(&small.spec).unwrap();
        assert_eq!(again, small);
    }

    #[test]
    fn closed_form_minimizer_is_stationary() {
        let prob = generate(&SyntheticSpec::new(SyntheticKind::StronglyConvexQuadratic, 10, 4, 1)).unwrap();
        let model = LossModel::least_squares(0.3).unwrap();
        let (theta, risk) = prob.population_minimizer(&model, 1e-10, 10).unwrap();
        let h = 1e-5;
        for j in 0..4 {
            let mut plus = theta.clone();
            plus.as_mut_slice()[j] += h;
            let mut minus = theta.clone();
            minus.as_mut_slice()[j] -= h;
            let d = (prob.population_risk(&model, &plus).unwrap() - prob.population_risk(&model, &minus).unwrap()) / (2.0 * h);
            assert!(d.abs() < 1e-9, "{d}");
        }
        assert!(risk >= 0.25 / 3.0);
    }

    #[test]
    fn closed_form_matches_large_sample() {
        let mut spec = SyntheticSpec::new(SyntheticKind::StronglyConvexQuadratic, 2, 3, 9);
        spec.population_size = MIN_POPULATION;
        let prob = generate(&spec).unwrap();
        let sample = draw_rows(&spec, &prob.w, 200_000, 2, "check").unwrap();
        let model = LossModel::least_squares(0.1).unwrap();
        let theta = ParamVector::new(vec![0.4, -0.3, 0.2]);
        let exact = prob.population_risk(&model, &theta).unwrap();
        let mc = model.empirical_risk(&theta, &sample).unwrap();
        assert!((exact - mc).abs() < 0.01 * exact, "{exact} vs {mc}");
    }

    #[test]
    fn classification_population() {
        let prob = generate(&SyntheticSpec::new(SyntheticKind::LogisticSeparable, 100, 3, 2)).unwrap();
        assert_eq!(prob.train.task(), Task::Classification);
        let Population::Sample(pop) = &prob.population else { panic!() };
        assert_eq!(pop.n(), MIN_POPULATION);
        let model = LossModel::reg_logistic(0.1).unwrap();
        assert!(prob.population_risk(&model, &ParamVector::zeros(3)).unwrap() > 0.69);
        let acc = prob.population_accuracy(&ParamVector::new(prob.w.clone())).unwrap().unwrap();
        assert!((acc - 0.95).abs() < 0.01, "{acc}");
    }

    #[test]
    fn padded_parameters_only_pay_the_ridge() {
        let prob = generate(&SyntheticSpec::new(SyntheticKind::StronglyConvexQuadratic, 10, 2, 4)).unwrap();
        let model = LossModel::least_squares(0.5).unwrap();
        let theta = ParamVector::new(vec![0.1, 0.2]);
        let padded = ParamVector::new(vec![0.1, 0.2, 0.0, 0.3]);
        let base = prob.population_risk(&model, &theta).unwrap();
        let with_tail = prob.population_risk(&model, &padded).unwrap();
        assert!((with_tail - base - 0.25 * 0.09).abs() < 1e-15);
    }
}
