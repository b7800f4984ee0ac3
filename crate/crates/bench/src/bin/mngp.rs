//! `mngp`: private ERM runs, sweeps and checks from the command line.
//!
//! Exit status is 0 when the command completed (a sweep with failed runs
//! still completes), 1 on configuration, data or IO errors and 2 on usage
//! errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mngp::bounds::{
    excess_risk_bound, mngp_crossover, opt_error_bound_hoelder, opt_error_bound_smooth, BoundInput, Regime,
};
use mngp::noise::{noise_norm_bound_formula, run_concentration_check, GaussianSpec};
use mngp::privacy::NoisePlan;
use mngp::report::RunStatus;
use mngp::rng::{derive_stream, make_rng, tags};
use mngp::stability::{measure_argument_stability, random_adjacent, NoiseStreamPolicy};
use mngp::{Dataset, LossModel, OptimizerKind, RunConfig};
use mngp_bench::experiment::{
    execute_run, resolve_data_path, run_and_persist, write_atomic, ExperimentSpec, KnownOptima, RunData,
    RunOptions, DATA_DIR_ENV,
};
use mngp_bench::ingest::{ingest_csv, CsvSchema};
use mngp_bench::preprocess::train_test_split;
use mngp_bench::synthetic::{generate, SyntheticKind, SyntheticProblem, SyntheticSpec};

#[derive(Parser)]
#[command(name = "mngp", version, about = "Differentially private ERM with normalized gradient perturbation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a CSV and cache the preprocessed dataset as JSON.
    Ingest {
        csv: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        /// Output file; defaults to `<stem>.json` in the data directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train once and print the report.
    Run {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Write the per-iteration trace here as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Attach bound overlays evaluated at this ζ.
        #[arg(long)]
        bound_zeta: Option<f64>,
    },
    /// Run every cell of an experiment spec.
    Sweep {
        spec: PathBuf,
        /// Overrides the spec's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Measure argument stability on random adjacent pairs.
    Stability {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 100)]
        pairs: u64,
        /// shared | independent | dataset_hash
        #[arg(long, default_value = "independent")]
        policy: String,
    },
    /// Monte-Carlo check of the Gaussian norm concentration bound.
    NoiseCheck {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        zeta: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Evaluate the bound even when ζ is outside its regime.
        #[arg(long)]
        unchecked: bool,
    },
    /// Evaluate the excess-risk bounds for a config and dataset.
    Bounds {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.05)]
        zeta: f64,
        #[arg(long)]
        unchecked: bool,
        /// Also report where the m-NGP bound overtakes Hölder TGP.
        #[arg(long)]
        crossover: bool,
    },
}

#[derive(Args, Clone)]
struct SchemaArgs {
    /// Label column.
    #[arg(long)]
    label: Option<String>,
    /// Treat the label as a real-valued target.
    #[arg(long)]
    regression: bool,
    /// Comma-separated categorical columns.
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
    /// Comma-separated columns to ignore.
    #[arg(long, value_delimiter = ',')]
    drop: Vec<String>,
    #[arg(long)]
    positive_label: Option<String>,
    /// Reduce a multiclass label to "positive class vs the rest".
    #[arg(long)]
    one_vs_rest: bool,
}

impl SchemaArgs {
    fn schema(&self) -> Result<CsvSchema> {
        let Some(label) = &self.label else {
            bail!("--label is required for CSV input");
        };
        let mut schema = if self.regression {
            CsvSchema::regression(label.clone())
        } else {
            CsvSchema::classification(label.clone())
        };
        schema.categorical = self.categorical.clone();
        schema.drop = self.drop.clone();
        schema.positive_label = self.positive_label.clone();
        schema.one_vs_rest = self.one_vs_rest;
        Ok(schema)
    }
}

#[derive(Args, Clone)]
struct DataArgs {
    /// A CSV file or a dataset cached by `ingest`.
    #[arg(long, conflicts_with = "synthetic")]
    data: Option<PathBuf>,
    #[command(flatten)]
    schema: SchemaArgs,
    /// Hold out this fraction for test accuracy (real data only).
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// strongly_convex_quadratic | logistic_separable | hoelder_regression
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    p: usize,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

struct Loaded {
    name: String,
    train: Dataset,
    test: Option<Dataset>,
    problem: Option<SyntheticProblem>,
}

impl DataArgs {
    fn load(&self) -> Result<Loaded> {
        if let Some(kind) = &self.synthetic {
            let kind: SyntheticKind = serde_json::from_value(serde_json::Value::String(kind.clone()))
                .with_context(|| format!("unknown synthetic kind `{kind}`"))?;
            let problem = generate(&SyntheticSpec::new(kind, self.n, self.p, self.data_seed))?;
            return Ok(Loaded {
                name: problem.train.name().to_owned(),
                train: problem.train.clone(),
                test: None,
                problem: Some(problem),
            });
        }
        let Some(path) = &self.data else {
            bail!("pass --data or --synthetic");
        };
        let data = load_dataset(&resolve_data_path(path, None), &self.schema)?;
        let name = data.name().to_owned();
        let (train, test) = match self.test_fraction {
            Some(f) => {
                let (train, test) = train_test_split(&data, 1.0 - f, self.split_seed)?;
                (train, Some(test))
            }
            None => (data, None),
        };
        Ok(Loaded {
            name,
            train,
            test,
            problem: None,
        })
    }
}

fn load_dataset(path: &Path, schema: &SchemaArgs) -> Result<Dataset> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()));
    }
    ingest_csv(path, &schema.schema()?)
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Run config (TOML). Flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                RunConfig::from_toml_str(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(o) = self.optimizer {
            config.optimizer = o;
        }
        if let Some(e) = self.epsilon {
            config.epsilon = e;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        config.validate()?;
        Ok(config)
    }
}

fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

fn ingest(csv: &Path, schema: &SchemaArgs, out: Option<PathBuf>) -> Result<()> {
    let path = resolve_data_path(csv, None);
    let data = ingest_csv(&path, &schema.schema()?)?;
    let out = out.unwrap_or_else(|| data_dir().join(format!("{}.json", data.name())));
    write_atomic(&out, serde_json::to_string(&data)?.as_bytes())?;
    println!(
        "{}: n = {}, p = {}, task = {:?} -> {}",
        data.name(),
        data.n(),
        data.p(),
        data.task(),
        out.display()
    );
    Ok(())
}

fn run(run: &RunArgs, data: &DataArgs, trace: Option<PathBuf>, report: Option<PathBuf>, bound_zeta: Option<f64>) -> Result<()> {
    let config = run.config()?;
    let loaded = data.load()?;
    let options = RunOptions {
        bound_zeta,
        ..RunOptions::default()
    };
    let run_data = RunData {
        train: &loaded.train,
        test: loaded.test.as_ref(),
        problem: loaded.problem.as_ref(),
    };
    let label = config.optimizer.name();
    let (rep, kept) = execute_run(label, &loaded.name, &config, run_data, KnownOptima::default(), options);
    if let (Some(path), Some(t)) = (&trace, &kept) {
        write_atomic(path, t.to_csv_string().as_bytes())?;
    }
    let json = serde_json::to_string_pretty(&rep)?;
    match report {
        Some(path) => write_atomic(&path, json.as_bytes())?,
        None => println!("{json}"),
    }
    // The report (with the partial trace) is written either way.
    if rep.status == RunStatus::Failed {
        bail!("run failed: {}", rep.error.as_deref().unwrap_or("unknown error"));
    }
    Ok(())
}

fn sweep(spec: &Path, output_dir: Option<PathBuf>) -> Result<()> {
    let spec = ExperimentSpec::load(spec)?;
    let out = run_and_persist(&spec, output_dir.as_deref())?;
    println!(
        "{}: {} runs, {} failed -> {}",
        spec.name,
        out.reports.len(),
        out.failed(),
        out.aggregate_path.display()
    );
    for p in &out.plot_paths {
        println!("  {}", p.display());
    }
    Ok(())
}

fn stability(run: &RunArgs, data: &DataArgs, pairs: u64, policy: &str) -> Result<()> {
    let config = run.config()?;
    let policy: NoiseStreamPolicy = serde_json::from_value(serde_json::Value::String(policy.to_owned()))
        .with_context(|| format!("unknown noise policy `{policy}`"))?;
    let loaded = data.load()?;
    let model = LossModel::new(config.loss)?;
    let constants = model.derive_constants(&loaded.train, config.domain_radius)?;
    let plan = NoisePlan::from_config(&config, &constants, loaded.train.n())?;
    let pool = loaded.test.as_ref().unwrap_or(&loaded.train);
    println!("pair,replaced_index,argument_gap,bound,satisfied,minimizer_shift,minimizer_shift_bound");
    let mut satisfied = 0;
    for k in 0..pairs {
        let pair = random_adjacent(&loaded.train, pool, config.seed, k)?;
        let cfg = RunConfig {
            noise_key: derive_stream(tags::NOISE, config.noise_key, k),
            ..config.clone()
        };
        let r = measure_argument_stability(&pair, &cfg, &plan, &model, policy)?;
        satisfied += usize::from(r.satisfied);
        println!(
            "{k},{},{:?},{:?},{},{:?},{:?}",
            r.replaced_index, r.argument_gap, r.bound_value, r.satisfied, r.minimizer_shift, r.minimizer_shift_bound
        );
    }
    eprintln!("bound held on {satisfied}/{pairs} pairs");
    Ok(())
}

fn noise_check(sigma: f64, p: usize, zeta: f64, trials: usize, seed: u64, unchecked: bool) -> Result<()> {
    let spec = GaussianSpec::new(sigma, p)?;
    let mut rng = make_rng(seed, derive_stream(tags::MONTE_CARLO, p as u64, 0));
    let check = if unchecked {
        let bound = noise_norm_bound_formula(sigma, p, zeta);
        let (frac, mean) = mngp::noise::monte_carlo_exceedance(&spec, bound, trials, &mut rng);
        mngp::noise::ConcentrationCheck {
            sigma,
            p,
            zeta,
            samples: trials,
            bound_value: bound,
            exceed_fraction: frac,
            mean_norm: mean,
        }
    } else {
        run_concentration_check(&spec, zeta, trials, &mut rng)?
    };
    println!("{}", serde_json::to_string_pretty(&check)?);
    println!("holds within 3 sd: {}", check.holds_within(3.0));
    Ok(())
}

fn bounds(run: &RunArgs, data: &DataArgs, zeta: f64, unchecked: bool, crossover: bool) -> Result<()> {
    let config = run.config()?;
    let loaded = data.load()?;
    let model = LossModel::new(config.loss)?;
    let constants = model.derive_constants(&loaded.train, config.domain_radius)?;
    let plan = NoisePlan::from_config(&config, &constants, loaded.train.n())?;
    let (n, p) = (loaded.train.n(), loaded.train.p());
    let (eps, delta) = (plan.budget.epsilon(), plan.budget.delta());
    let input = if unchecked {
        BoundInput::new_unchecked(n, p, eps, delta, zeta, plan.iterations, constants)
    } else {
        BoundInput::new(n, p, eps, delta, zeta, plan.iterations, constants)?
    };
    let mut out = serde_json::Map::new();
    out.insert("constants".into(), serde_json::to_value(constants)?);
    out.insert("plan".into(), serde_json::to_value(&plan)?);
    let mut put = |name: &str, v: mngp::Result<f64>| {
        let value = match v {
            Ok(x) => serde_json::json!(x),
            Err(e) => serde_json::json!({ "unavailable": e.to_string() }),
        };
        out.insert(name.to_owned(), value);
    };
    put("opt_error_smooth", opt_error_bound_smooth(&input));
    put("opt_error_hoelder", opt_error_bound_hoelder(&input));
    for regime in [Regime::SmoothTgp, Regime::HoelderTgp, Regime::HoelderMngp] {
        put(&format!("excess_risk_{}", regime.name()), excess_risk_bound(regime, &input));
    }
    if crossover {
        let grid: Vec<usize> = (4..=30).map(|k| 1usize << k).collect();
        let n0 = mngp_crossover(&input, &grid)?;
        out.insert("mngp_crossover_n".into(), serde_json::to_value(n0)?);
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { csv, schema, out } => ingest(&csv, &schema, out),
        Command::Run {
            run: r,
            data,
            trace,
            report,
            bound_zeta,
        } => run(&r, &data, trace, report, bound_zeta),
        Command::Sweep { spec, output_dir } => sweep(&spec, output_dir),
        Command::Stability {
            run: r,
            data,
            pairs,
            policy,
        } => stability(&r, &data, pairs, &policy),
        Command::NoiseCheck {
            sigma,
            p,
            zeta,
            trials,
            seed,
            unchecked,
        } => noise_check(sigma, p, zeta, trials, seed, unchecked),
        Command::Bounds {
            run: r,
            data,
            zeta,
            unchecked,
            crossover,
        } => bounds(&r, &data, zeta, unchecked, crossover),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
