//! Domain types shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Slack allowed on the unit-row-norm invariant for rounding in preprocessing.
pub const ROW_NORM_SLACK: f64 = 1e-12;

/// Model parameters `θ ∈ R^p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(p: usize) -> Self {
        Self(vec![0.0; p])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.0)
    }

    pub fn distance(&self, other: &ParamVector) -> f64 {
        linalg::distance(&self.0, &other.0)
    }

    pub fn is_finite(&self) -> bool {
        linalg::all_finite(&self.0)
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// Euclidean projection onto the ball of the given radius.
///
/// Points inside the ball are returned unchanged; points outside are
/// rescaled onto the sphere.
pub fn project_to_ball(theta: &ParamVector, radius: f64) -> ParamVector {
    let mut out = theta.clone();
    project_in_place(out.as_mut_slice(), radius);
    out
}

pub(crate) fn project_in_place(theta: &mut [f64], radius: f64) {
    debug_assert!(radius > 0.0);
    let norm = linalg::norm(theta);
    if norm > radius {
        linalg::scale(radius / norm, theta);
        // Rounding in the rescale can leave the norm a few ulps above `radius`.
        let after = linalg::norm(theta);
        if after > radius {
            linalg::scale(radius / after * (1.0 - f64::EPSILON), theta);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Labels are exactly `±1`.
    Classification,
    Regression,
}

/// Per-column affine map applied at ingestion, followed by a global row
/// divisor so that every row has L2 norm at most one.
///
/// A transformed row is `(x - center) / scale / row_divisor`, clipped to the
/// unit ball if it still exceeds it (only possible for rows that were not
/// part of the fitting set).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    pub row_divisor: f64,
}

impl FeatureScale {
    pub fn identity(p: usize) -> Self {
        Self {
            center: vec![0.0; p],
            scale: vec![1.0; p],
            row_divisor: 1.0,
        }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = row
            .iter()
            .zip(&self.center)
            .zip(&self.scale)
            .map(|((x, c), s)| (x - c) / s / self.row_divisor)
            .collect();
        project_in_place(&mut out, 1.0);
        out
    }
}

/// One labeled example, borrowed from a [`Dataset`].
#[derive(Clone, Copy, Debug)]
pub struct Example<'a> {
    pub x: &'a [f64],
    pub y: f64,
}

/// `n` labeled examples with `p` features, stored row-major.
///
/// Deserialization re-checks every invariant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetFile")]
pub struct Dataset {
    name: String,
    task: Task,
    n: usize,
    p: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    feature_scale: FeatureScale,
}

#[derive(Deserialize)]
struct DatasetFile {
    name: String,
    task: Task,
    n: usize,
    p: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    feature_scale: FeatureScale,
}

impl TryFrom<DatasetFile> for Dataset {
    type Error = Error;
    fn try_from(f: DatasetFile) -> Result<Self> {
        if f.n != f.labels.len() {
            return Err(Error::DimensionMismatch {
                expected: f.n,
                found: f.labels.len(),
            });
        }
        Dataset::new(f.name, f.task, f.p, f.features, f.labels, f.feature_scale)
    }
}

impl Dataset {
    /// Validates every invariant: `n ≥ 2`, `p ≥ 1`, finite entries, row norms
    /// at most one, and `±1` labels for classification.
    pub fn new(
        name: impl Into<String>,
        task: Task,
        p: usize,
        features: Vec<f64>,
        labels: Vec<f64>,
        feature_scale: FeatureScale,
    ) -> Result<Self> {
        let n = labels.len();
        if p == 0 {
            return Err(Error::InvalidDataset("p must be at least 1".into()));
        }
        if n < 2 {
            return Err(Error::InvalidDataset(format!("n = {n}, need at least 2 examples")));
        }
        if features.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: features.len(),
            });
        }
        if feature_scale.center.len() != p || feature_scale.scale.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: feature_scale.center.len(),
            });
        }
        if !linalg::all_finite(&features) || !linalg::all_finite(&labels) {
            return Err(Error::InvalidDataset("non-finite feature or label".into()));
        }
        for (i, row) in features.chunks_exact(p).enumerate() {
            let norm = linalg::norm(row);
            if norm > 1.0 + ROW_NORM_SLACK {
                return Err(Error::InvalidDataset(format!("row {i} has norm {norm} > 1")));
            }
        }
        if task == Task::Classification {
            if let Some(i) = labels.iter().position(|&y| y != 1.0 && y != -1.0) {
                return Err(Error::InvalidDataset(format!(
                    "row {i}: classification label {} is not ±1",
                    labels[i]
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            task,
            n,
            p,
            features,
            labels,
            feature_scale,
        })
    }

    /// Builds a dataset from rows that already satisfy the norm bound.
    pub fn from_rows(
        name: impl Into<String>,
        task: Task,
        rows: &[Vec<f64>],
        labels: Vec<f64>,
    ) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: bad.len(),
            });
        }
        let features = rows.concat();
        Self::new(name, task, p, features, labels, FeatureScale::identity(p))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn feature_scale(&self) -> &FeatureScale {
        &self.feature_scale
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn example(&self, i: usize) -> Example<'_> {
        Example {
            x: self.row(i),
            y: self.labels[i],
        }
    }

    pub fn examples(&self) -> impl Iterator<Item = Example<'_>> + '_ {
        self.features
            .chunks_exact(self.p)
            .zip(&self.labels)
            .map(|(x, &y)| Example { x, y })
    }

    pub fn max_abs_label(&self) -> f64 {
        self.labels.iter().fold(0.0, |m, y| m.max(y.abs()))
    }

    /// Subset by row indices, in the given order.
    pub fn select(&self, name: impl Into<String>, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.p);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n {
                return Err(Error::IndexOutOfRange { index: i, n: self.n });
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(
            name,
            self.task,
            self.p,
            features,
            labels,
            self.feature_scale.clone(),
        )
    }

    /// Copy with row `index` replaced.
    pub fn with_replaced(&self, index: usize, x: &[f64], y: f64) -> Result<Self> {
        if index >= self.n {
            return Err(Error::IndexOutOfRange { index, n: self.n });
        }
        if x.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: x.len(),
            });
        }
        let mut out = self.clone();
        out.features[index * self.p..(index + 1) * self.p].copy_from_slice(x);
        out.labels[index] = y;
        Self::new(
            out.name,
            out.task,
            out.p,
            out.features,
            out.labels,
            out.feature_scale,
        )
    }

    /// Stable 64-bit content hash (FNV-1a over the IEEE bits of every entry).
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(self.n as u64);
        feed(self.p as u64);
        for v in self.features.iter().chain(&self.labels) {
            feed(v.to_bits());
        }
        h
    }
}

/// An `(ε, δ)` differential-privacy budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidBudget(format!("epsilon = {epsilon} must be positive")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidBudget(format!("delta = {delta} must lie in (0, 1)")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}
