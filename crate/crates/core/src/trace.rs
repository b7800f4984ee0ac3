//! Per-iteration training records.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::types::ParamVector;

/// One iteration. Risk and gradient norm are evaluated at the iterate the
/// step starts from, so entry `t` describes `θ_t` and the move to `θ_{t+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub t: usize,
    pub empirical_risk: f64,
    /// `‖∇R_n(θ_t)‖`
    pub grad_norm: f64,
    /// `‖b_t‖`
    pub noise_norm: f64,
    /// `‖θ_{t+1} − θ_t‖` after projection.
    pub step_norm: f64,
    /// `‖∇R_n(θ_t) + b_t‖` before any normalization.
    pub noisy_grad_norm: f64,
    /// Norm of the direction actually used.
    pub direction_norm: f64,
    /// Zero-norm noisy gradient under normalization; the step was skipped.
    pub degenerate: bool,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub entries: Vec<TraceEntry>,
    pub final_params: ParamVector,
    pub final_risk: f64,
    /// Noise vectors `b_t`, kept when vector recording is enabled.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub noise: Vec<ParamVector>,
    /// Iterates `θ_0 … θ_T`, kept when vector recording is enabled.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterates: Vec<ParamVector>,
}

pub const TRACE_CSV_HEADER: &str = "t,risk,grad_norm,noise_norm,step_norm";

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Risk sequence `R_n(θ_0), …, R_n(θ_{T-1}), R_n(θ_T)`.
    pub fn risk_path(&self) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| e.empirical_risk)
            .chain(std::iter::once(self.final_risk))
            .collect()
    }

    /// Writes the trace as CSV. Floats use Rust's shortest round-trip
    /// formatting, so equal traces give equal bytes.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TRACE_CSV_HEADER}")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{:?},{:?},{:?},{:?}",
                e.t, e.empirical_risk, e.grad_norm, e.noise_norm, e.step_norm
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}
