//! Argument stability on adjacent datasets.
//!
//! For a `G`-Lipschitz loss whose empirical risk is `μ`-PL, models trained on
//! datasets differing in one example satisfy
//!
//! ```text
//! ‖θ̂ − θ̂′‖ ≤ 2√2 · sqrt(gap / μ) + 4G / (μ n)
//! ```
//!
//! where `gap` is the excess empirical risk of the trained models. The second
//! term alone bounds the distance between the two exact minimizers.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::linalg;
use crate::losses::{AssumptionConstants, LossModel};
use crate::optimize::{solve_nonprivate, train};
use crate::privacy::NoisePlan;
use crate::rng::{derive_stream, make_rng, tags};
use crate::types::{Dataset, ParamVector, ROW_NORM_SLACK};

#[derive(Clone, Debug, PartialEq)]
pub struct AdjacentPair {
    pub base: Dataset,
    pub variant: Dataset,
    pub replaced_index: usize,
    pub replacement_x: Vec<f64>,
    pub replacement_y: f64,
}

/// Replaces example `index` of `data`. With `preprocess`, the replacement row
/// first goes through the dataset's feature scaling.
pub fn make_adjacent(data: &Dataset, index: usize, x: &[f64], y: f64, preprocess: bool) -> Result<AdjacentPair> {
    if index >= data.n() {
        return Err(Error::IndexOutOfRange { index, n: data.n() });
    }
    if x.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: x.len(),
        });
    }
    let row = if preprocess {
        data.feature_scale().apply(x)
    } else {
        x.to_vec()
    };
    let norm = linalg::norm(&row);
    if norm.is_nan() || norm > 1.0 + ROW_NORM_SLACK {
        return Err(Error::ReplacementNorm { norm });
    }
    let variant = data.with_replaced(index, &row, y)?;
    Ok(AdjacentPair {
        base: data.clone(),
        variant,
        replaced_index: index,
        replacement_x: row,
        replacement_y: y,
    })
}

/// Picks an index of `data` and a replacement example from `pool`, both by
/// seed. The `k`-th draw for a seed is always the same pair.
pub fn random_adjacent(data: &Dataset, pool: &Dataset, seed: u64, k: u64) -> Result<AdjacentPair> {
    let mut rng = make_rng(seed, derive_stream(tags::REPLACEMENT, data.content_hash(), k));
    let index = rng.below(data.n() as u64) as usize;
    let source = rng.below(pool.n() as u64) as usize;
    let ex = pool.example(source);
    make_adjacent(data, index, ex.x, ex.y, false)
}

/// How the noise of the variant run relates to the noise of the base run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseStreamPolicy {
    /// Both runs see the same noise.
    Shared,
    /// The runs use distinct noise streams.
    #[default]
    Independent,
    /// Each run's stream is keyed by its dataset's content hash.
    DatasetHash,
}

impl NoiseStreamPolicy {
    /// Noise keys for the base and the variant run.
    pub fn keys(&self, base_key: u64, pair: &AdjacentPair) -> (u64, u64) {
        match self {
            NoiseStreamPolicy::Shared => (base_key, base_key),
            NoiseStreamPolicy::Independent => (base_key, derive_stream(tags::NOISE, base_key, u64::MAX)),
            NoiseStreamPolicy::DatasetHash => (pair.base.content_hash(), pair.variant.content_hash()),
        }
    }
}

/// `2√2 · sqrt(gap/μ) + 4G/(μn)` from explicit constants.
pub fn stability_bound_value(mu: f64, g: f64, n: usize, empirical_gap: f64) -> f64 {
    let gap = empirical_gap.max(0.0);
    2.0 * std::f64::consts::SQRT_2 * (gap / mu).sqrt() + 4.0 * g / (mu * n as f64)
}

/// The stability bound for a loss with the given constants. Tiny negative
/// gaps from oracle tolerance are clamped to zero.
pub fn stability_bound(constants: &AssumptionConstants, n: usize, empirical_gap: f64) -> Result<f64> {
    let mu = constants.mu()?;
    Ok(stability_bound_value(mu, constants.g, n, empirical_gap))
}

/// `4G/(μn)`, the bound on the distance between exact minimizers.
pub fn minimizer_shift_bound(constants: &AssumptionConstants, n: usize) -> Result<f64> {
    Ok(4.0 * constants.g / (constants.mu()? * n as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub replaced_index: usize,
    pub policy: NoiseStreamPolicy,
    /// `‖θ̂ − θ̂′‖`
    pub argument_gap: f64,
    pub bound_value: f64,
    pub empirical_risk_gap_base: f64,
    pub empirical_risk_gap_variant: f64,
    pub satisfied: bool,
    /// `‖θ*_n(S) − θ*_n(S′)‖`
    pub minimizer_shift: f64,
    pub minimizer_shift_bound: f64,
    /// `G · argument_gap`, the implied uniform stability of loss values.
    pub uniform_stability: f64,
    pub sigma: f64,
    pub iterations: usize,
}

/// Constants valid for both datasets of a pair.
pub fn pair_constants(model: &LossModel, pair: &AdjacentPair, m_c: f64) -> Result<AssumptionConstants> {
    let a = model.derive_constants(&pair.base, m_c)?;
    let b = model.derive_constants(&pair.variant, m_c)?;
    Ok(a.join(&b))
}

/// Trains on both datasets of `pair` with the same plan, solves both exact
/// problems and checks the stability bound with the larger of the two gaps.
pub fn measure_argument_stability(
    pair: &AdjacentPair,
    config: &RunConfig,
    plan: &NoisePlan,
    model: &LossModel,
    policy: NoiseStreamPolicy,
) -> Result<StabilityReport> {
    let constants = pair_constants(model, pair, config.domain_radius)?;
    let (key_base, key_variant) = policy.keys(config.noise_key, pair);
    let n = pair.base.n();
    let theta0 = ParamVector::zeros(pair.base.p());

    let base_cfg = RunConfig {
        noise_key: key_base,
        ..config.clone()
    };
    let variant_cfg = RunConfig {
        noise_key: key_variant,
        ..config.clone()
    };
    let base_trace = train(&base_cfg, plan, model, &pair.base, theta0.clone())?;
    let variant_trace = train(&variant_cfg, plan, model, &pair.variant, theta0)?;

    let (star_base, risk_base) = solve_nonprivate(model, &pair.base, config.oracle_tolerance, config.oracle_max_iters)?;
    let (star_variant, risk_variant) =
        solve_nonprivate(model, &pair.variant, config.oracle_tolerance, config.oracle_max_iters)?;

    let gap_base = base_trace.final_risk - risk_base;
    let gap_variant = variant_trace.final_risk - risk_variant;
    let bound_value = stability_bound(&constants, n, gap_base.max(gap_variant))?;
    let argument_gap = base_trace.final_params.distance(&variant_trace.final_params);

    Ok(StabilityReport {
        replaced_index: pair.replaced_index,
        policy,
        argument_gap,
        bound_value,
        empirical_risk_gap_base: gap_base,
        empirical_risk_gap_variant: gap_variant,
        satisfied: argument_gap <= bound_value,
        minimizer_shift: star_base.distance(&star_variant),
        minimizer_shift_bound: minimizer_shift_bound(&constants, n)?,
        uniform_stability: constants.g * argument_gap,
        sigma: plan.sigma,
        iterations: plan.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{OptimizerKind, IterationsPolicy};
    use crate::losses::LossFamily;
    use crate::types::Task;
    use proptest::prelude::*;

    fn data(n: usize, seed: u64) -> Dataset {
        let mut rng = make_rng(seed, 1);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut x: Vec<f64> = (0..3).map(|_| rng.standard_normal()).collect();
                let norm = linalg::norm(&x);
                linalg::scale(rng.uniform() / norm, &mut x);
                x
            })
            .collect();
        let labels = rows.iter().map(|r| if r[0] + 0.3 * r[1] >= 0.0 { 1.0 } else { -1.0 }).collect();
        Dataset::from_rows("s", Task::Classification, &rows, labels).unwrap()
    }

    #[test]
    fn adjacency_construction() {
        let d = data(3, 0);
        let pair = make_adjacent(&d, 1, &[0.0, 0.5, 0.0], -1.0, false).unwrap();
        assert_eq!(pair.variant.row(0), d.row(0));
        assert_eq!(pair.variant.row(2), d.row(2));
        assert_ne!(pair.variant.row(1), d.row(1));

        let same = make_adjacent(&d, 2, d.row(2), d.labels()[2], false).unwrap();
        assert_eq!(same.base, same.variant);

        assert!(matches!(
            make_adjacent(&d, 3, &[0.0; 3], 1.0, false),
            Err(Error::IndexOutOfRange { index: 3, n: 3 })
        ));
        assert!(matches!(
            make_adjacent(&d, 0, &[2.0, 0.0, 0.0], 1.0, false),
            Err(Error::ReplacementNorm { .. })
        ));
    }

    #[test]
    fn bound_examples() {
        assert!((stability_bound_value(1.0, 1.0, 100, 0.02) - 0.44).abs() <= 1e-12);
        assert_eq!(stability_bound_value(2.0, 3.0, 50, 0.0), 4.0 * 3.0 / 100.0);
        assert_eq!(stability_bound_value(2.0, 3.0, 50, -1e-14), stability_bound_value(2.0, 3.0, 50, 0.0));
        let limit = 2.0 * std::f64::consts::SQRT_2 * (0.5f64 / 2.0).sqrt();
        assert!((stability_bound_value(2.0, 3.0, usize::MAX, 0.5) - limit).abs() < 1e-12);
    }

    fn config() -> RunConfig {
        RunConfig {
            seed: 3,
            iterations: IterationsPolicy::Fixed { t: 30 },
            loss: LossFamily::RegLogistic { lambda: 0.1 },
            ..RunConfig::default()
        }
    }

    fn setup(cfg: &RunConfig, pair: &AdjacentPair) -> (LossModel, NoisePlan) {
        let model = LossModel::new(cfg.loss).unwrap();
        let constants = pair_constants(&model, pair, cfg.domain_radius).unwrap();
        let plan = NoisePlan::from_config(cfg, &constants, pair.base.n()).unwrap();
        (model, plan)
    }

    #[test]
    fn degenerate_pair_with_shared_noise_has_zero_gap() {
        let d = data(40, 1);
        let pair = make_adjacent(&d, 5, d.row(5), d.labels()[5], false).unwrap();
        let cfg = config();
        let (model, plan) = setup(&cfg, &pair);
        let r = measure_argument_stability(&pair, &cfg, &plan, &model, NoiseStreamPolicy::Shared).unwrap();
        assert_eq!(r.argument_gap, 0.0);
        assert!(r.satisfied);
        let r = measure_argument_stability(&pair, &cfg, &plan, &model, NoiseStreamPolicy::Independent).unwrap();
        assert!(r.argument_gap > 0.0);
    }

    #[test]
    fn noise_free_runs_satisfy_the_bound() {
        let d = data(60, 2);
        let pool = data(10, 99);
        let cfg = RunConfig {
            optimizer: OptimizerKind::NonPrivate,
            ..config()
        };
        for k in 0..5 {
            let pair = random_adjacent(&d, &pool, 8, k).unwrap();
            let (model, plan) = setup(&cfg, &pair);
            let a = measure_argument_stability(&pair, &cfg, &plan, &model, NoiseStreamPolicy::Independent).unwrap();
            let b = measure_argument_stability(&pair, &cfg, &plan, &model, NoiseStreamPolicy::Shared).unwrap();
            assert_eq!(a.argument_gap, b.argument_gap);
            assert!(a.satisfied);
            assert!(a.minimizer_shift <= a.minimizer_shift_bound + 1e-6);
        }
    }

    #[test]
    fn policies_give_expected_keys() {
        let d = data(10, 4);
        let pair = make_adjacent(&d, 0, &[0.1, 0.0, 0.0], 1.0, false).unwrap();
        let (a, b) = NoiseStreamPolicy::Shared.keys(7, &pair);
        assert_eq!(a, b);
        let (a, b) = NoiseStreamPolicy::Independent.keys(7, &pair);
        assert_ne!(a, b);
        let (a, b) = NoiseStreamPolicy::DatasetHash.keys(7, &pair);
        assert_eq!(a, d.content_hash());
        assert_ne!(a, b);
    }

    proptest! {
        #[test]
        fn bound_monotone(mu in 0.01f64..10.0, g in 0.1f64..10.0, n in 2usize..10_000, gap in 0.0f64..1.0, dg in 1e-6f64..1.0) {
            prop_assert!(stability_bound_value(mu, g, n, gap + dg) > stability_bound_value(mu, g, n, gap));
            prop_assert!(stability_bound_value(mu, g, n + 1, gap) < stability_bound_value(mu, g, n, gap));
        }
    }
}
