//! Differentially private empirical risk minimization by noisy gradient
//! descent.
//!
//! The crate covers gradient perturbation (TGP) and its normalized variant
//! (m-NGP), the calibration of their noise, the concentration of that noise,
//! argument stability on adjacent datasets and closed-form risk bounds.
//!
//! ```
//! use mngp::{optimize, Dataset, LossFamily, RunConfig, Task};
//!
//! let rows = vec![vec![0.6, 0.8], vec![-0.6, -0.8], vec![0.8, -0.6], vec![-0.5, 0.1]];
//! let data = Dataset::from_rows("toy", Task::Classification, &rows, vec![1.0, -1.0, 1.0, -1.0])?;
//! let config = RunConfig::smooth_regime(LossFamily::RegLogistic { lambda: 0.1 }).with_seed(1);
//! let (_, plan, trace) = optimize::run_config(&config, &data)?;
//! assert_eq!(trace.len(), plan.iterations);
//! # Ok::<(), mngp::Error>(())
//! ```

pub mod bounds;
pub mod config;
pub mod error;
pub mod linalg;
pub mod losses;
pub mod noise;
pub mod optimize;
pub mod privacy;
pub mod report;
pub mod rng;
pub mod stability;
pub mod trace;
pub mod types;

pub use config::{IterationsPolicy, OptimizerKind, RunConfig, ScheduleKind};
pub use error::{Error, Result};
pub use losses::{AssumptionConstants, LossFamily, LossModel};
pub use privacy::NoisePlan;
pub use report::RunReport;
pub use rng::{make_rng, RngState};
pub use trace::{TraceEntry, TrainTrace};
pub use types::{project_to_ball, Dataset, Example, FeatureScale, ParamVector, PrivacyBudget, Task};
