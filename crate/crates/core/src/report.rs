//! The persisted unit of an experiment.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::privacy::NoisePlan;
use crate::stability::StabilityReport;
use crate::trace::TrainTrace;
use crate::types::ParamVector;

/// Bumped whenever a field changes meaning or disappears.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed,
}

/// Compact description of a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub iterations: usize,
    pub initial_risk: f64,
    pub final_risk: f64,
    pub final_grad_norm: f64,
    pub mean_noise_norm: f64,
    pub degenerate_steps: usize,
    pub normalized_steps: usize,
}

impl TraceSummary {
    pub fn of(trace: &TrainTrace) -> Self {
        let n = trace.entries.len().max(1) as f64;
        Self {
            iterations: trace.entries.len(),
            initial_risk: trace.entries.first().map_or(trace.final_risk, |e| e.empirical_risk),
            final_risk: trace.final_risk,
            final_grad_norm: trace.entries.last().map_or(f64::NAN, |e| e.grad_norm),
            mean_noise_norm: trace.entries.iter().map(|e| e.noise_norm).sum::<f64>() / n,
            degenerate_steps: trace.entries.iter().filter(|e| e.degenerate).count(),
            normalized_steps: trace
                .entries
                .iter()
                .filter(|e| !e.degenerate && e.direction_norm != e.noisy_grad_norm)
                .count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundOverlay {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Name of the experiment arm that produced the run.
    #[serde(default)]
    pub label: String,
    pub dataset: String,
    pub n: usize,
    pub p: usize,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<NoisePlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_params: Option<ParamVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_empirical_risk: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimal_empirical_risk: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excess_empirical_risk: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excess_population_risk: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_summary: Option<TraceSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bounds: Vec<BoundOverlay>,
    /// `R_n(θ_0), …, R_n(θ_T)`, kept when convergence curves are wanted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub risk_curve: Vec<f64>,
    /// Excluded from every determinism comparison.
    pub wall_clock_seconds: f64,
}

impl RunReport {
    /// A report with only the identifying fields set.
    pub fn new(dataset: impl Into<String>, n: usize, p: usize, config: RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            status: RunStatus::Completed,
            error: None,
            label: String::new(),
            dataset: dataset.into(),
            n,
            p,
            config,
            plan: None,
            final_params: None,
            final_empirical_risk: None,
            optimal_empirical_risk: None,
            excess_empirical_risk: None,
            excess_population_risk: None,
            test_accuracy: None,
            trace_summary: None,
            stability: None,
            bounds: Vec::new(),
            risk_curve: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn failed(mut self, error: impl std::fmt::Display) -> Self {
        self.status = RunStatus::Failed;
        self.error = Some(error.to_string());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}
