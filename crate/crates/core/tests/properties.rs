//! Properties of the loss constants, the normalized direction and training
//! that must hold for every input, not only the worked examples.

use mngp::noise::{noise_norm_bound, zeta_lower_limit};
use mngp::optimize::{normalize_direction, train};
use mngp::privacy::calibrate_sigma;
use mngp::{linalg, Dataset, LossFamily, LossModel, NoisePlan, ParamVector, PrivacyBudget, RunConfig, Task};
use proptest::prelude::*;

const M_C: f64 = 10.0;

fn in_ball(v: Vec<f64>, radius: f64) -> Vec<f64> {
    let norm = linalg::norm(&v);
    if norm > radius {
        v.iter().map(|x| x * radius / norm).collect()
    } else {
        v
    }
}

fn single(x: Vec<f64>, y: f64) -> Dataset {
    Dataset::from_rows("one", Task::Regression, &[x.clone(), x], vec![y, y]).unwrap()
}

fn families() -> impl Strategy<Value = LossFamily> {
    prop_oneof![
        (0.0..1.0f64).prop_map(|lambda| LossFamily::RegLogistic { lambda }),
        (0.0..1.0f64).prop_map(|lambda| LossFamily::LeastSquares { lambda }),
        (1.05..2.0f64, 0.0..1.0f64).prop_map(|(q, lambda)| LossFamily::QNormHinge { q, lambda }),
        (1.05..2.0f64, 0.0..1.0f64).prop_map(|(q, lambda)| LossFamily::QPowerAbsolute { q, lambda }),
    ]
}

fn label(family: LossFamily, raw: f64) -> f64 {
    match family {
        LossFamily::RegLogistic { .. } | LossFamily::QNormHinge { .. } => raw.signum(),
        _ => raw,
    }
}

fn point(p: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, p)
}

proptest! {
    #[test]
    fn gradient_norm_within_lipschitz_constant(
        family in families(),
        theta in point(4).prop_map(|v| in_ball(v.iter().map(|x| x * M_C).collect(), M_C)),
        x in point(4).prop_map(|v| in_ball(v, 1.0)),
        y in -2.0..2.0f64,
    ) {
        let y = label(family, y);
        let data = single(x, y);
        let model = LossModel::new(family).unwrap();
        let constants = model.derive_constants(&data, M_C).unwrap();
        let grad = model.loss_gradient(&ParamVector::new(theta), data.example(0)).unwrap();
        prop_assert!(grad.norm() <= constants.g * (1.0 + 1e-12), "{} > {}", grad.norm(), constants.g);
    }

    #[test]
    fn gradient_is_hoelder_continuous(
        family in families(),
        a in point(3).prop_map(|v| in_ball(v.iter().map(|x| x * M_C).collect(), M_C)),
        b in point(3).prop_map(|v| in_ball(v.iter().map(|x| x * M_C).collect(), M_C)),
        x in point(3).prop_map(|v| in_ball(v, 1.0)),
        y in -2.0..2.0f64,
    ) {
        let y = label(family, y);
        let data = single(x, y);
        let model = LossModel::new(family).unwrap();
        let c = model.derive_constants(&data, M_C).unwrap();
        let ga = model.loss_gradient(&ParamVector::new(a.clone()), data.example(0)).unwrap();
        let gb = model.loss_gradient(&ParamVector::new(b.clone()), data.example(0)).unwrap();
        let lhs = linalg::distance(ga.as_slice(), gb.as_slice());
        let rhs = c.h * linalg::distance(&a, &b).powf(c.alpha);
        prop_assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-12, "{lhs} > {rhs}");
    }

    #[test]
    fn regularized_risk_is_strongly_convex(
        family in families(),
        a in point(3).prop_map(|v| v.iter().map(|x| x * 3.0).collect::<Vec<_>>()),
        b in point(3).prop_map(|v| v.iter().map(|x| x * 3.0).collect::<Vec<_>>()),
        rows in prop::collection::vec((point(3).prop_map(|v| in_ball(v, 1.0)), -1.0..1.0f64), 2..8),
    ) {
        let labels = rows.iter().map(|(_, y)| label(family, *y)).collect();
        let xs: Vec<Vec<f64>> = rows.into_iter().map(|(x, _)| x).collect();
        let data = Dataset::from_rows("d", Task::Regression, &xs, labels).unwrap();
        let model = LossModel::new(family).unwrap();
        let mu = model.derive_constants(&data, M_C).unwrap().mu.unwrap_or(0.0);
        let (ra, ga) = model.risk_and_gradient(&ParamVector::new(a.clone()), &data).unwrap();
        let rb = model.empirical_risk(&ParamVector::new(b.clone()), &data).unwrap();
        let diff: Vec<f64> = b.iter().zip(&a).map(|(u, v)| u - v).collect();
        let lower = ra + linalg::dot(ga.as_slice(), &diff) + 0.5 * mu * linalg::dot(&diff, &diff);
        prop_assert!(rb >= lower - 1e-9 * (1.0 + rb.abs()), "{rb} < {lower}");
    }

    #[test]
    fn normalized_direction_never_shrinks(v in prop::collection::vec(-2.0..2.0f64, 1..20)) {
        let norm = linalg::norm(&v);
        let d = normalize_direction(v.clone());
        prop_assert!((d.direction_norm - linalg::norm(&d.direction)).abs() <= 1e-15);
        if d.degenerate {
            prop_assert_eq!(norm, 0.0);
        } else if norm >= 1.0 {
            prop_assert_eq!(&d.direction, &v);
        } else {
            prop_assert!((d.direction_norm - 1.0).abs() <= 1e-12);
            // Same direction as the input.
            prop_assert!((linalg::dot(&d.direction, &v) - norm).abs() <= 1e-12);
        }
    }

    #[test]
    fn sigma_scales_with_root_iterations_over_n_epsilon(
        t in 1usize..500,
        n in 10usize..100_000,
        eps in 0.05..5.0f64,
        g in 0.1..10.0f64,
    ) {
        let budget = PrivacyBudget::new(eps, 1e-5).unwrap();
        let s1 = calibrate_sigma(&budget, g, t, n, 2.0).unwrap();
        let s4 = calibrate_sigma(&budget, g, 4 * t, n, 2.0).unwrap();
        let double_n = calibrate_sigma(&budget, g, t, 2 * n, 2.0).unwrap();
        prop_assert!((s4 / s1 - 2.0).abs() < 1e-12);
        prop_assert!((double_n / s1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn noise_bound_grows_as_zeta_shrinks(p in 1usize..2000, sigma in 0.01..10.0f64, u in 0.0..1.0f64, w in 0.0..1.0f64) {
        let lo = zeta_lower_limit(p);
        let (z1, z2) = (lo + (1.0 - lo) * u.min(w) * 0.999, lo + (1.0 - lo) * u.max(w) * 0.999);
        let b1 = noise_norm_bound(sigma, p, z1).unwrap();
        let b2 = noise_norm_bound(sigma, p, z2).unwrap();
        prop_assert!(b1 >= b2);
        prop_assert!(b2 >= sigma * (p as f64).sqrt());
    }
}

fn toy_data(n: usize, p: usize) -> Dataset {
    let mut rng = mngp::make_rng(3, 0);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| in_ball((0..p).map(|_| rng.uniform() * 2.0 - 1.0).collect(), 1.0))
        .collect();
    let labels = rows.iter().map(|r| if r[0] + 0.2 * r[1] > 0.0 { 1.0 } else { -1.0 }).collect();
    Dataset::from_rows("toy", Task::Classification, &rows, labels).unwrap()
}

#[test]
fn projected_iterates_stay_in_the_domain() {
    let data = toy_data(50, 4);
    let loss = LossFamily::RegLogistic { lambda: 0.1 };
    // A tiny ε makes the noise huge, so projection is exercised every step.
    let config = RunConfig {
        epsilon: 0.01,
        domain_radius: 2.0,
        record_vectors: true,
        ..RunConfig::smooth_regime(loss)
    };
    let model = LossModel::new(loss).unwrap();
    let constants = model.derive_constants(&data, config.domain_radius).unwrap();
    let plan = NoisePlan::from_config(&config, &constants, data.n()).unwrap();
    let trace = train(&config, &plan, &model, &data, ParamVector::zeros(4)).unwrap();
    let iterates = &trace.iterates;
    assert_eq!(iterates.len(), trace.len() + 1, "theta0 plus one iterate per step");
    for theta in iterates {
        assert!(theta.norm() <= 2.0 * (1.0 + 1e-12));
    }
}

#[test]
fn optimizers_agree_when_every_noisy_gradient_is_long() {
    // At tiny ε every noisy gradient is far longer than one, so m-NGP never
    // rescales and must reproduce TGP with the same step sizes exactly.
    let data = toy_data(40, 3);
    let loss = LossFamily::RegLogistic { lambda: 0.1 };
    let tgp = RunConfig {
        epsilon: 0.01,
        ..RunConfig::smooth_regime(loss)
    };
    let mngp = RunConfig {
        optimizer: mngp::OptimizerKind::Mngp,
        ..tgp.clone()
    };
    let model = LossModel::new(loss).unwrap();
    let constants = model.derive_constants(&data, tgp.domain_radius).unwrap();
    let plan = NoisePlan::from_config(&tgp, &constants, data.n()).unwrap();
    let a = train(&tgp, &plan, &model, &data, ParamVector::zeros(3)).unwrap();
    let b = train(&mngp, &plan, &model, &data, ParamVector::zeros(3)).unwrap();
    assert!(b.entries.iter().all(|e| e.noisy_grad_norm >= 1.0));
    assert_eq!(a.to_csv_string(), b.to_csv_string());
}

#[test]
fn nonprivate_oracle_reaches_stationarity() {
    let data = toy_data(80, 5);
    for family in [
        LossFamily::RegLogistic { lambda: 0.05 },
        LossFamily::LeastSquares { lambda: 0.05 },
        LossFamily::QNormHinge { q: 1.5, lambda: 0.05 },
    ] {
        let model = LossModel::new(family).unwrap();
        let (theta, risk) = mngp::optimize::solve_nonprivate(&model, &data, 1e-10, 1_000_000).unwrap();
        let (r, g) = model.risk_and_gradient(&theta, &data).unwrap();
        assert_eq!(r, risk);
        assert!(g.norm() <= 1e-8, "{}: gradient norm {}", family.name(), g.norm());
    }
}
