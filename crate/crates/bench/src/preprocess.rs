//! Splits, subsamples and zero-padding.

use anyhow::{bail, Result};
use mngp::rng::{derive_stream, make_rng, tags};
use mngp::{linalg, Dataset, FeatureScale, ParamVector, Task};

/// Shuffled permutation of `0..n` for `seed`.
fn permutation(n: usize, seed: u64, tag: u64, key: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    make_rng(seed, derive_stream(tag, key, 0)).shuffle(&mut idx);
    idx
}

/// Random train/test split. The train part holds `round(train_fraction · n)`
/// examples and both parts keep at least two.
pub fn train_test_split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        bail!("train fraction {train_fraction} must lie in (0, 1)");
    }
    let n = data.n();
    if n < 4 {
        bail!("need at least 4 examples to split, found {n}");
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(2, n - 2);
    let idx = permutation(n, seed, tags::SHUFFLE, data.content_hash());
    let (train, test) = idx.split_at(n_train);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((
        data.select(format!("{}-train", data.name()), &train)?,
        data.select(format!("{}-test", data.name()), &test)?,
    ))
}

/// `n` examples drawn without replacement, in their original order.
pub fn subsample(data: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n > data.n() {
        bail!("cannot subsample {n} of {} examples", data.n());
    }
    if n == data.n() {
        return Ok(data.clone());
    }
    let mut idx = permutation(data.n(), seed, tags::SUBSAMPLE, data.content_hash());
    idx.truncate(n);
    idx.sort_unstable();
    Ok(data.select(data.name().to_owned(), &idx)?)
}

/// Appends zero feature columns up to `target_p`.
pub fn pad_dimensions(data: &Dataset, target_p: usize) -> Result<Dataset> {
    let p = data.p();
    if target_p < p {
        bail!("target dimension {target_p} is below the current {p}");
    }
    if target_p == p {
        return Ok(data.clone());
    }
    let mut features = Vec::with_capacity(data.n() * target_p);
    for i in 0..data.n() {
        features.extend_from_slice(data.row(i));
        features.extend(std::iter::repeat(0.0).take(target_p - p));
    }
    let old = data.feature_scale();
    let mut scale = FeatureScale {
        center: old.center.clone(),
        scale: old.scale.clone(),
        row_divisor: old.row_divisor,
    };
    scale.center.resize(target_p, 0.0);
    scale.scale.resize(target_p, 1.0);
    Ok(Dataset::new(
        data.name(),
        data.task(),
        target_p,
        features,
        data.labels().to_vec(),
        scale,
    )?)
}

/// Fraction of examples with `sign(⟨θ, x⟩) = y`; a zero margin counts as `+1`.
pub fn accuracy(theta: &ParamVector, data: &Dataset) -> Result<f64> {
    if data.task() != Task::Classification {
        bail!("accuracy needs a classification dataset");
    }
    if theta.dim() != data.p() {
        bail!("parameter dimension {} differs from p = {}", theta.dim(), data.p());
    }
    let correct = data
        .examples()
        .filter(|e| {
            let pred = if linalg::dot(theta.as_slice(), e.x) >= 0.0 { 1.0 } else { -1.0 };
            pred == e.y
        })
        .count();
    Ok(correct as f64 / data.n() as f64)
}
