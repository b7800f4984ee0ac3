//! CSV ingestion.
//!
//! A CSV with a header row becomes a [`Dataset`]:
//!
//! 1. Numeric columns are parsed; the tokens `""`, `"?"` and `"NA"` count as
//!    missing and are replaced by the column mean.
//! 2. Categorical columns (declared, or with no numeric cell at all) are
//!    one-hot encoded, categories ordered by first appearance.
//! 3. Every column is standardized to zero mean and unit variance.
//! 4. All rows are divided by the largest row norm, so each row has norm ≤ 1.
//!
//! Classification labels must take two values, mapped to `+1` and `−1`, unless
//! the schema asks for one-vs-rest, in which case the first label seen (or the
//! declared positive label) is `+1` and every other label is `−1`.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use mngp::{linalg, Dataset, FeatureScale, Task};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Name of the label column.
    pub label: String,
    #[serde(default = "default_task")]
    pub task: Task,
    /// Columns to one-hot encode even if their cells look numeric.
    #[serde(default)]
    pub categorical: Vec<String>,
    /// Columns to ignore, e.g. identifiers.
    #[serde(default)]
    pub drop: Vec<String>,
    /// The label that maps to `+1`.
    #[serde(default)]
    pub positive_label: Option<String>,
    /// Accept more than two classes, reducing them to positive vs rest.
    #[serde(default)]
    pub one_vs_rest: bool,
}

fn default_task() -> Task {
    Task::Classification
}

impl CsvSchema {
    pub fn classification(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            task: Task::Classification,
            categorical: Vec::new(),
            drop: Vec::new(),
            positive_label: None,
            one_vs_rest: false,
        }
    }

    pub fn regression(label: impl Into<String>) -> Self {
        Self {
            task: Task::Regression,
            ..Self::classification(label)
        }
    }
}

const MISSING: [&str; 3] = ["", "?", "NA"];

fn is_missing(cell: &str) -> bool {
    MISSING.contains(&cell)
}

enum Column {
    Numeric(Vec<f64>),
    Categorical { levels: Vec<String>, codes: Vec<usize> },
}

/// Reads and preprocesses `path`. The dataset is named after the file stem.
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    ingest_reader(file, &name, schema).with_context(|| format!("ingesting {}", path.display()))
}

pub fn ingest_reader<R: std::io::Read>(reader: R, name: &str, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let label_idx = headers
        .iter()
        .position(|h| *h == schema.label)
        .ok_or_else(|| anyhow!("label column `{}` not found", schema.label))?;
    for c in schema.categorical.iter().chain(&schema.drop) {
        if !headers.contains(c) {
            bail!("column `{c}` not found");
        }
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("row {i}"))?;
        if rec.len() != headers.len() {
            bail!("row {i}: expected {} cells, found {}", headers.len(), rec.len());
        }
        rows.push(rec.iter().map(str::to_owned).collect());
    }
    if rows.is_empty() {
        bail!("no data rows");
    }

    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|&j| j != label_idx && !schema.drop.contains(&headers[j]))
        .collect();
    let mut columns = Vec::with_capacity(feature_idx.len());
    for &j in &feature_idx {
        let cells = rows.iter().map(|r| r[j].as_str());
        let declared = schema.categorical.contains(&headers[j]);
        let any_numeric = rows.iter().any(|r| !is_missing(&r[j]) && r[j].parse::<f64>().is_ok());
        if declared || !any_numeric {
            let mut levels: Vec<String> = Vec::new();
            let mut codes = Vec::with_capacity(rows.len());
            for cell in cells {
                let code = match levels.iter().position(|l| l == cell) {
                    Some(k) => k,
                    None => {
                        levels.push(cell.to_owned());
                        levels.len() - 1
                    }
                };
                codes.push(code);
            }
            columns.push(Column::Categorical { levels, codes });
        } else {
            let mut values = Vec::with_capacity(rows.len());
            for (i, cell) in cells.enumerate() {
                if is_missing(cell) {
                    values.push(f64::NAN);
                } else {
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| anyhow!("row {i}: column `{}` has non-numeric cell `{cell}`", headers[j]))?;
                    if !v.is_finite() {
                        bail!("row {i}: column `{}` has non-finite value", headers[j]);
                    }
                    values.push(v);
                }
            }
            let present: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
            let mean = present.iter().sum::<f64>() / present.len() as f64;
            for v in &mut values {
                if v.is_nan() {
                    *v = mean;
                }
            }
            columns.push(Column::Numeric(values));
        }
    }

    let n = rows.len();
    let mut encoded: Vec<Vec<f64>> = Vec::new();
    for col in &columns {
        match col {
            Column::Numeric(v) => encoded.push(v.clone()),
            Column::Categorical { levels, codes } => {
                for k in 0..levels.len() {
                    encoded.push(codes.iter().map(|&c| if c == k { 1.0 } else { 0.0 }).collect());
                }
            }
        }
    }
    let p = encoded.len();
    if p == 0 {
        bail!("no feature columns");
    }

    let mut center = Vec::with_capacity(p);
    let mut scale = Vec::with_capacity(p);
    for col in &encoded {
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        center.push(mean);
        scale.push(if var > 0.0 { var.sqrt() } else { 1.0 });
    }
    let mut features = vec![0.0; n * p];
    for (j, col) in encoded.iter().enumerate() {
        for (i, x) in col.iter().enumerate() {
            features[i * p + j] = (x - center[j]) / scale[j];
        }
    }
    let max_norm = features.chunks_exact(p).map(linalg::norm).fold(0.0, f64::max);
    let row_divisor = if max_norm > 0.0 { max_norm } else { 1.0 };
    linalg::scale(1.0 / row_divisor, &mut features);
    for row in features.chunks_exact_mut(p) {
        // Guard against the largest row landing an ulp above one.
        let norm = linalg::norm(row);
        if norm > 1.0 {
            linalg::scale(1.0 / norm, row);
        }
    }

    let raw_labels: Vec<&str> = rows.iter().map(|r| r[label_idx].as_str()).collect();
    let labels = match schema.task {
        Task::Regression => raw_labels
            .iter()
            .enumerate()
            .map(|(i, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| anyhow!("row {i}: label `{cell}` is not a number"))
            })
            .collect::<Result<Vec<f64>>>()?,
        Task::Classification => classification_labels(&raw_labels, schema)?,
    };

    let scale = FeatureScale {
        center,
        scale,
        row_divisor,
    };
    Ok(Dataset::new(name, schema.task, p, features, labels, scale)?)
}

fn classification_labels(raw: &[&str], schema: &CsvSchema) -> Result<Vec<f64>> {
    let mut classes: Vec<&str> = Vec::new();
    let mut first_row: HashMap<&str, usize> = HashMap::new();
    for (i, &c) in raw.iter().enumerate() {
        if is_missing(c) {
            bail!("row {i}: missing label");
        }
        if !classes.contains(&c) {
            classes.push(c);
            first_row.insert(c, i);
        }
    }
    let all_numeric = classes.iter().all(|c| c.parse::<f64>().is_ok());
    let numeric_binary = all_numeric
        && classes.len() <= 2
        && classes.iter().all(|c| {
            let v: f64 = c.parse().unwrap();
            v == 0.0 || v == 1.0 || v == -1.0
        });

    if !schema.one_vs_rest && classes.len() > 2 {
        // A numeric column with one stray token reports that token's row.
        let culprit = if classes.iter().filter(|c| c.parse::<f64>().is_ok()).count() >= 2 {
            classes.iter().find(|c| c.parse::<f64>().is_err()).copied()
        } else {
            None
        }
        .unwrap_or(classes[2]);
        bail!(
            "row {}: label `{culprit}` makes the label column non-binary ({} classes)",
            first_row[culprit],
            classes.len()
        );
    }
    if !schema.one_vs_rest && !all_numeric && classes.iter().any(|c| c.parse::<f64>().is_ok()) {
        let culprit = classes.iter().find(|c| c.parse::<f64>().is_err()).unwrap();
        bail!("row {}: label `{culprit}` is not numeric", first_row[culprit]);
    }

    let positive: String = match &schema.positive_label {
        Some(p) => {
            if !classes.contains(&p.as_str()) {
                bail!("positive label `{p}` never occurs");
            }
            p.clone()
        }
        None if numeric_binary => {
            // 1 is the positive class for {0,1} and {−1,1} labels.
            classes
                .iter()
                .find(|c| c.parse::<f64>().unwrap() == 1.0)
                .map(|c| c.to_string())
                .unwrap_or_else(|| "1".into())
        }
        None => classes[0].to_owned(),
    };
    let positive_value: Option<f64> = positive.parse().ok();
    Ok(raw
        .iter()
        .map(|c| {
            let hit = match (positive_value, c.parse::<f64>().ok()) {
                (Some(a), Some(b)) => a == b,
                _ => *c == positive,
            };
            if hit {
                1.0
            } else {
                -1.0
            }
        })
        .collect())
}
