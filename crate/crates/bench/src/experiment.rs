//! Experiment sweeps.
//!
//! An experiment is a TOML file naming a data source, a grid and one or more
//! arms (labelled run configs). Every arm runs on the Cartesian product of
//! the grid, each run with `δ = 1/n`.
//!
//! ```toml
//! name = "iris"
//! epsilons = [0.1, 0.5, 1.0]
//! seeds = 20                # or an explicit list
//! n_values = []             # empty: the full training split
//! p_values = [16, 64]       # empty: the native dimension
//! plots = ["accuracy_vs_epsilon"]
//!
//! [dataset.csv]
//! path = "iris.csv"
//! label = "species"
//! one_vs_rest = true
//!
//! [split]
//! train_fraction = 0.7
//! seed = 0
//!
//! [[arms]]
//! label = "tgp"
//! [arms.config]
//! optimizer = "tgp"
//! [arms.config.loss]
//! family = "reg_logistic"
//! lambda = 0.01
//! ```
//!
//! Results land in `output_dir`: `reports.jsonl` (one [`RunReport`] per
//! line), `aggregate.csv` and the requested plot files under `plots/`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use mngp::bounds::{excess_risk_bound, opt_error_bound_hoelder, opt_error_bound_smooth, BoundInput, Regime};
use mngp::config::{OptimizerKind, ScheduleKind};
use mngp::optimize::{solve_nonprivate, train};
use mngp::privacy::NoisePlan;
use mngp::report::{BoundOverlay, RunStatus, TraceSummary};
use mngp::stability::{measure_argument_stability, random_adjacent, NoiseStreamPolicy};
use mngp::{Dataset, LossFamily, LossModel, ParamVector, RunConfig, RunReport, Task, TrainTrace};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{ingest_csv, CsvSchema};
use crate::plot::{emit_plot_data, PlotKind};
use crate::preprocess::{accuracy, pad_dimensions, subsample, train_test_split};
use crate::synthetic::{generate, SyntheticKind, SyntheticProblem, SyntheticSpec};

/// Directory searched for relative dataset paths, after the spec's own.
pub const DATA_DIR_ENV: &str = "MNGP_DATA_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    /// Seeds `0..count`.
    Count(u64),
    List(Vec<u64>),
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::Count(k) => (0..*k).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(flatten)]
    pub schema: CsvSchema,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSource {
    pub kind: SyntheticKind,
    pub p: usize,
    #[serde(default)]
    pub seed: u64,
    /// Training examples to draw; defaults to the largest grid `n`.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub noise: Option<f64>,
    #[serde(default)]
    pub signal_norm: Option<f64>,
    #[serde(default)]
    pub population_size: Option<usize>,
}

impl SyntheticSource {
    pub fn spec(&self, n: usize) -> SyntheticSpec {
        let mut spec = SyntheticSpec::new(self.kind, n, self.p, self.seed);
        if let Some(s) = self.noise {
            spec.noise = s;
        }
        if let Some(s) = self.signal_norm {
            spec.signal_norm = s;
        }
        if let Some(s) = self.population_size {
            spec.population_size = s;
        }
        spec
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Csv(CsvSource),
    /// A dataset cached as JSON by `mngp ingest`.
    Cached { path: PathBuf },
    Synthetic(SyntheticSource),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_train_fraction() -> f64 {
    0.7
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: default_train_fraction(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arm {
    pub label: String,
    #[serde(default)]
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    /// Relative paths are taken from the spec file's directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub split: SplitSpec,
    pub epsilons: Vec<f64>,
    pub seeds: Seeds,
    #[serde(default)]
    pub n_values: Vec<usize>,
    #[serde(default)]
    pub p_values: Vec<usize>,
    pub arms: Vec<Arm>,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Keep the per-iteration risk path in every report.
    #[serde(default = "yes")]
    pub record_curves: bool,
    /// Attach bound overlays evaluated at this `ζ`.
    #[serde(default)]
    pub bound_zeta: Option<f64>,
    /// Measure argument stability on one random adjacent pair per run.
    #[serde(default)]
    pub stability: bool,
    #[serde(default)]
    pub plots: Vec<PlotKind>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

/// One cell of the grid. Reports are ordered by this key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridKey {
    pub arm: usize,
    pub n: usize,
    pub p: usize,
    /// Index into the sorted ε grid.
    pub epsilon: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: Self = toml::from_str(s).context("parsing experiment spec")?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut spec = Self::from_toml_str(&text)?;
        spec.base_dir = path.parent().map(Path::to_path_buf);
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() || self.seeds.to_vec().is_empty() || self.arms.is_empty() {
            bail!("the grid needs at least one ε, one seed and one arm");
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            bail!("ε = {e} must lie in (0, ∞)");
        }
        if self.n_values.iter().any(|&n| n < 2) {
            bail!("every n must be at least 2");
        }
        if self.p_values.contains(&0) {
            bail!("every p must be at least 1");
        }
        let mut labels = BTreeSet::new();
        for arm in &self.arms {
            if !labels.insert(arm.label.as_str()) {
                bail!("duplicate arm label `{}`", arm.label);
            }
            arm.config.validate().map_err(|e| anyhow!("arm `{}`: {e}", arm.label))?;
            if arm.config.delta.is_some() {
                bail!("arm `{}`: δ is fixed to 1/n in sweeps and cannot be set", arm.label);
            }
        }
        if let Some(z) = self.bound_zeta {
            if !(z > 0.0 && z < 1.0) {
                bail!("bound_zeta = {z} must lie in (0, 1)");
            }
        }
        if self.workers == Some(0) {
            bail!("workers must be at least 1");
        }
        let distinct = |v: &[usize]| v.iter().collect::<BTreeSet<_>>().len();
        for kind in &self.plots {
            let varying = match kind {
                PlotKind::AccuracyVsEpsilon | PlotKind::ConvergenceCurves => {
                    [distinct(&self.n_values), distinct(&self.p_values)]
                }
                PlotKind::RiskVsN => [self.epsilons.len(), distinct(&self.p_values)],
                PlotKind::RiskVsP => [distinct(&self.n_values), self.epsilons.len()],
            };
            if varying.iter().any(|&k| k > 1) {
                bail!("plot {kind:?} needs every grid axis but its own fixed");
            }
            if *kind == PlotKind::ConvergenceCurves && (self.epsilons.len() > 1 || !self.record_curves) {
                bail!("convergence curves need a single ε and record_curves = true");
            }
        }
        Ok(())
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        resolve_data_path(path, self.base_dir.as_deref())
    }

    pub fn output_dir(&self) -> PathBuf {
        let dir = self
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(&self.name));
        match &self.base_dir {
            Some(base) if dir.is_relative() => base.join(dir),
            _ => dir,
        }
    }

    fn dataset_label(&self) -> String {
        match &self.dataset {
            DatasetSource::Csv(c) => stem(&c.path),
            DatasetSource::Cached { path } => stem(path),
            DatasetSource::Synthetic(s) => serde_json::to_value(s.kind)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_else(|| "synthetic".into()),
        }
    }

    fn sorted_epsilons(&self) -> Vec<f64> {
        let mut e = self.epsilons.clone();
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    }
}

/// Finds a relative `path` under `base`, then under `$MNGP_DATA_DIR`, then
/// in the working directory. Missing files resolve to the first candidate.
pub fn resolve_data_path(path: &Path, base: Option<&Path>) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    let mut candidates = Vec::new();
    if let Some(base) = base {
        candidates.push(base.join(path));
    }
    if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
        candidates.push(PathBuf::from(dir).join(path));
    }
    candidates.push(path.to_path_buf());
    match candidates.iter().position(|c| c.exists()) {
        Some(i) => candidates.swap_remove(i),
        None => candidates.swap_remove(0),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned())
}

fn sorted_unique(v: &[usize]) -> Vec<usize> {
    v.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
}

/// The data one `(n, p)` cell trains and evaluates on.
struct Variant {
    n: usize,
    p: usize,
    train: Dataset,
    test: Option<Dataset>,
    problem: Option<Arc<SyntheticProblem>>,
}

fn prepare_variants(spec: &ExperimentSpec) -> Result<Vec<Variant>> {
    let n_values = sorted_unique(&spec.n_values);
    let p_values = sorted_unique(&spec.p_values);
    let (full_train, test, problem) = match &spec.dataset {
        DatasetSource::Synthetic(source) => {
            let n = source.n.or(n_values.last().copied()).ok_or_else(|| {
                anyhow!("a synthetic source needs `n` or a non-empty n_values grid")
            })?;
            let problem = generate(&source.spec(n))?;
            (problem.train.clone(), None, Some(Arc::new(problem)))
        }
        DatasetSource::Csv(c) => {
            let data = ingest_csv(&spec.resolve(&c.path), &c.schema)?;
            let (train, test) = train_test_split(&data, spec.split.train_fraction, spec.split.seed)?;
            (train, Some(test), None)
        }
        DatasetSource::Cached { path } => {
            let path = spec.resolve(path);
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let data: Dataset = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let (train, test) = train_test_split(&data, spec.split.train_fraction, spec.split.seed)?;
            (train, Some(test), None)
        }
    };
    let n_values = if n_values.is_empty() { vec![full_train.n()] } else { n_values };
    let p_values = if p_values.is_empty() { vec![full_train.p()] } else { p_values };

    let mut variants = Vec::new();
    for &n in &n_values {
        let base = match &problem {
            // Synthetic rows are drawn in a fixed order, so a prefix is the
            // sample the generator would give for `n`.
            Some(_) => {
                if n > full_train.n() {
                    bail!("n = {n} exceeds the {} generated examples", full_train.n());
                }
                full_train.select(full_train.name(), &(0..n).collect::<Vec<_>>())?
            }
            None => subsample(&full_train, n, spec.split.seed)?,
        };
        for &p in &p_values {
            variants.push(Variant {
                n,
                p,
                train: pad_dimensions(&base, p)?,
                test: test.as_ref().map(|t| pad_dimensions(t, p)).transpose()?,
                problem: problem.clone(),
            });
        }
    }
    Ok(variants)
}

/// Distinct losses across arms, with the tightest oracle settings any arm
/// sharing that loss asks for.
struct OracleSettings {
    loss: LossFamily,
    tol: f64,
    max_iters: usize,
}

fn oracle_settings(arms: &[Arm]) -> (Vec<OracleSettings>, Vec<usize>) {
    let mut settings: Vec<OracleSettings> = Vec::new();
    let mut index = Vec::with_capacity(arms.len());
    for arm in arms {
        let c = &arm.config;
        match settings.iter().position(|s| s.loss == c.loss) {
            Some(i) => {
                settings[i].tol = settings[i].tol.min(c.oracle_tolerance);
                settings[i].max_iters = settings[i].max_iters.max(c.oracle_max_iters);
                index.push(i);
            }
            None => {
                index.push(settings.len());
                settings.push(OracleSettings {
                    loss: c.loss,
                    tol: c.oracle_tolerance,
                    max_iters: c.oracle_max_iters,
                });
            }
        }
    }
    (settings, index)
}

/// An oracle value, or why the oracle failed.
pub type Optimum = std::result::Result<f64, String>;

/// Everything one run trains and evaluates on.
#[derive(Clone, Copy)]
pub struct RunData<'a> {
    pub train: &'a Dataset,
    /// Held-out split for test accuracy.
    pub test: Option<&'a Dataset>,
    /// Synthetic population for excess population risk.
    pub problem: Option<&'a SyntheticProblem>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub record_curves: bool,
    pub bound_zeta: Option<f64>,
    pub stability: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            record_curves: true,
            bound_zeta: None,
            stability: false,
        }
    }
}

/// Oracle values a caller may have computed already.
#[derive(Clone, Debug, Default)]
pub struct KnownOptima {
    pub empirical: Option<Optimum>,
    pub population: Option<Optimum>,
}

fn regime_for(config: &RunConfig) -> Option<Regime> {
    match (config.optimizer, config.schedule) {
        (OptimizerKind::Tgp, ScheduleKind::OneOverL) => Some(Regime::SmoothTgp),
        (OptimizerKind::Tgp, ScheduleKind::DecayingPl { .. }) => Some(Regime::HoelderTgp),
        (OptimizerKind::Mngp, _) => Some(Regime::HoelderMngp),
        _ => None,
    }
}

fn bound_overlays(config: &RunConfig, plan: &NoisePlan, model: &LossModel, data: &Dataset, zeta: f64) -> Vec<BoundOverlay> {
    let Ok(constants) = model.derive_constants(data, config.domain_radius) else {
        return Vec::new();
    };
    let Ok(input) = BoundInput::new(
        data.n(),
        data.p(),
        plan.budget.epsilon(),
        plan.budget.delta(),
        zeta,
        plan.iterations,
        constants,
    ) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    if let Ok(v) = opt_error_bound_smooth(&input) {
        out.push(BoundOverlay {
            name: "opt_error_smooth".into(),
            value: v,
        });
    }
    if let Ok(v) = opt_error_bound_hoelder(&input) {
        out.push(BoundOverlay {
            name: "opt_error_hoelder".into(),
            value: v,
        });
    }
    if let Some(regime) = regime_for(config) {
        if let Ok(v) = excess_risk_bound(regime, &input) {
            out.push(BoundOverlay {
                name: format!("excess_risk_{}", regime.name()),
                value: v,
            });
        }
    }
    out
}

/// Trains `config` on `data.train` and fills a report. Missing oracle
/// values are computed here. Failures end up in the report, and the trace
/// comes back only for completed runs.
pub fn execute_run(
    label: &str,
    dataset: &str,
    config: &RunConfig,
    data: RunData<'_>,
    known: KnownOptima,
    options: RunOptions,
) -> (RunReport, Option<TrainTrace>) {
    let started = Instant::now();
    let train_set = data.train;
    let (n, p) = (train_set.n(), train_set.p());
    let mut report = RunReport::new(dataset, n, p, config.clone());
    report.label = label.to_owned();
    let mut kept = None;
    let outcome = (|| -> Result<()> {
        config.validate()?;
        let model = LossModel::new(config.loss)?;
        let constants = model.derive_constants(train_set, config.domain_radius)?;
        let plan = NoisePlan::from_config(config, &constants, n)?;
        report.plan = Some(plan.clone());
        let trace = match train(config, &plan, &model, train_set, ParamVector::zeros(p)) {
            Ok(t) => t,
            Err(mngp::Error::Divergence { iteration, reason, partial }) => {
                report.trace_summary = Some(TraceSummary::of(&partial));
                if options.record_curves {
                    report.risk_curve = partial.entries.iter().map(|e| e.empirical_risk).collect();
                }
                bail!("diverged at iteration {iteration}: {reason}");
            }
            Err(e) => return Err(e.into()),
        };
        report.final_empirical_risk = Some(trace.final_risk);
        let optimum = known.empirical.unwrap_or_else(|| {
            solve_nonprivate(&model, train_set, config.oracle_tolerance, config.oracle_max_iters)
                .map(|(_, r)| r)
                .map_err(|e| e.to_string())
        });
        let optimum = optimum.map_err(|e| anyhow!("empirical risk oracle: {e}"))?;
        report.optimal_empirical_risk = Some(optimum);
        report.excess_empirical_risk = Some(trace.final_risk - optimum);
        // Other losses on the quadratic problem get no population metrics.
        if let Some(problem) = data.problem.filter(|p| p.has_population_risk(model.family())) {
            let pop = known.population.unwrap_or_else(|| {
                problem
                    .population_minimizer(&model, config.oracle_tolerance, config.oracle_max_iters)
                    .map(|(_, r)| r)
                    .map_err(|e| format!("{e:#}"))
            });
            let pop = pop.map_err(|e| anyhow!("population oracle: {e}"))?;
            report.excess_population_risk = Some(problem.population_risk(&model, &trace.final_params)? - pop);
            report.test_accuracy = problem.population_accuracy(&trace.final_params)?;
        } else if let Some(test) = data.test {
            if test.task() == Task::Classification {
                report.test_accuracy = Some(accuracy(&trace.final_params, test)?);
            }
        }
        if let Some(zeta) = options.bound_zeta {
            report.bounds = bound_overlays(config, &plan, &model, train_set, zeta);
        }
        if options.stability {
            let pool = data.test.unwrap_or(train_set);
            let pair = random_adjacent(train_set, pool, config.seed, 0)?;
            report.stability = Some(measure_argument_stability(
                &pair,
                config,
                &plan,
                &model,
                NoiseStreamPolicy::Independent,
            )?);
        }
        report.trace_summary = Some(TraceSummary::of(&trace));
        if options.record_curves {
            report.risk_curve = trace.risk_path();
        }
        report.final_params = Some(trace.final_params.clone());
        kept = Some(trace);
        Ok(())
    })();
    if let Err(e) = outcome {
        report = report.failed(format!("{e:#}"));
        kept = None;
    }
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    (report, kept)
}

/// Runs the whole grid and returns the reports in grid-key order. Nothing
/// is written; see [`run_and_persist`].
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<RunReport>> {
    spec.validate()?;
    let variants = prepare_variants(spec)?;
    let (oracles, oracle_of_arm) = oracle_settings(&spec.arms);
    let epsilons = spec.sorted_epsilons();
    let mut seeds = spec.seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let dataset = spec.dataset_label();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = spec.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().context("building the worker pool")?;

    pool.install(|| {
        let optima: Vec<Vec<Optimum>> = variants
            .par_iter()
            .map(|v| {
                oracles
                    .par_iter()
                    .map(|o| {
                        let model = LossModel::new(o.loss).map_err(|e| e.to_string())?;
                        solve_nonprivate(&model, &v.train, o.tol, o.max_iters)
                            .map(|(_, r)| r)
                            .map_err(|e| e.to_string())
                    })
                    .collect()
            })
            .collect();
        let population_optima: Vec<Option<Optimum>> = match variants.first().and_then(|v| v.problem.as_ref()) {
            Some(problem) => oracles
                .par_iter()
                .map(|o| {
                    let optimum = LossModel::new(o.loss)
                        .map_err(anyhow::Error::from)
                        .and_then(|model| problem.population_minimizer(&model, o.tol, o.max_iters))
                        .map(|(_, r)| r)
                        .map_err(|e| format!("{e:#}"));
                    Some(optimum)
                })
                .collect(),
            None => oracles.iter().map(|_| None).collect(),
        };

        let mut jobs = Vec::new();
        for (a, arm) in spec.arms.iter().enumerate() {
            for (vi, v) in variants.iter().enumerate() {
                for (ei, &eps) in epsilons.iter().enumerate() {
                    for &seed in &seeds {
                        let key = GridKey {
                            arm: a,
                            n: v.n,
                            p: v.p,
                            epsilon: ei,
                            seed,
                        };
                        jobs.push((key, arm, eps, vi, oracle_of_arm[a]));
                    }
                }
            }
        }
        jobs.sort_by_key(|j| j.0);
        let options = RunOptions {
            record_curves: spec.record_curves,
            bound_zeta: spec.bound_zeta,
            stability: spec.stability,
        };
        Ok(jobs
            .par_iter()
            .map(|&(key, arm, epsilon, vi, oi)| {
                let v = &variants[vi];
                let config = RunConfig {
                    seed: key.seed,
                    epsilon,
                    delta: None,
                    ..arm.config.clone()
                };
                let data = RunData {
                    train: &v.train,
                    test: v.test.as_ref(),
                    problem: v.problem.as_deref(),
                };
                let known = KnownOptima {
                    empirical: Some(optima[vi][oi].clone()),
                    population: population_optima[oi].clone(),
                };
                execute_run(&arm.label, &dataset, &config, data, known, options).0
            })
            .collect())
    })
}

pub const AGGREGATE_HEADER: [&str; 16] = [
    "label",
    "optimizer",
    "dataset",
    "n",
    "p",
    "epsilon",
    "delta",
    "seed",
    "status",
    "sigma",
    "iterations",
    "final_empirical_risk",
    "excess_empirical_risk",
    "excess_population_risk",
    "test_accuracy",
    "error",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// The aggregate table. Wall-clock time is left out, so equal sweeps give
/// equal bytes.
pub fn aggregate_csv(reports: &[RunReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(AGGREGATE_HEADER)?;
    for r in reports {
        let status = match r.status {
            RunStatus::Completed => "completed",
            RunStatus::Failed => "failed",
        };
        w.write_record([
            r.label.clone(),
            r.config.optimizer.name().to_owned(),
            r.dataset.clone(),
            r.n.to_string(),
            r.p.to_string(),
            format!("{:?}", r.config.epsilon),
            opt(r.plan.as_ref().map(|p| p.budget.delta())),
            r.config.seed.to_string(),
            status.to_owned(),
            opt(r.plan.as_ref().map(|p| p.sigma)),
            r.plan.as_ref().map(|p| p.iterations.to_string()).unwrap_or_default(),
            opt(r.final_empirical_risk),
            opt(r.excess_empirical_risk),
            opt(r.excess_population_risk),
            opt(r.test_accuracy),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?)
}

pub fn reports_jsonl(reports: &[RunReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(out, "{}", r.to_json());
    }
    out
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().ok_or_else(|| anyhow!("{} has no file name", path.display()))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

/// Where a persisted sweep went.
#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub reports: Vec<RunReport>,
    pub reports_path: PathBuf,
    pub aggregate_path: PathBuf,
    pub plot_paths: Vec<PathBuf>,
}

impl SweepOutput {
    pub fn failed(&self) -> usize {
        self.reports.iter().filter(|r| r.status == RunStatus::Failed).count()
    }
}

/// [`run_experiment`], then writes reports, the aggregate table and plots
/// under `out_dir` (the spec's `output_dir` when `None`).
pub fn run_and_persist(spec: &ExperimentSpec, out_dir: Option<&Path>) -> Result<SweepOutput> {
    let reports = run_experiment(spec)?;
    let dir = out_dir.map_or_else(|| spec.output_dir(), Path::to_path_buf);
    let reports_path = dir.join("reports.jsonl");
    let aggregate_path = dir.join("aggregate.csv");
    write_atomic(&reports_path, reports_jsonl(&reports).as_bytes())?;
    write_atomic(&aggregate_path, aggregate_csv(&reports)?.as_bytes())?;
    let mut plot_paths = Vec::new();
    for kind in &spec.plots {
        plot_paths.extend(emit_plot_data(&reports, *kind, &dir.join("plots"))?);
    }
    Ok(SweepOutput {
        reports,
        reports_path,
        aggregate_path,
        plot_paths,
    })
}
