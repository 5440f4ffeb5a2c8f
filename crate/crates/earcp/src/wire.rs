//! On-disk formats: the snapshot JSON schema and the float rendering shared
//! by every text output.
//!
//! All reals are rendered with 17 significant digits in exponent form, which
//! is enough for any IEEE-754 double to survive a write/parse round trip bit
//! for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{EarcpConfig, TaskMode};

/// Version stamp embedded in every snapshot.
pub const SCHEMA_VERSION: u32 = 1;

/// Renders a finite double with 17 significant digits, e.g. `0.1` as
/// `1.0000000000000001e-1`. Parsing the result yields the same bits.
pub fn render_f64(x: f64) -> String {
    debug_assert!(x.is_finite());
    format!("{x:.16e}")
}

/// A session frozen to plain data. Field names match the JSON keys; `m` is
/// the expert count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SerializedState {
    pub schema_version: u32,
    pub mode: TaskMode,
    pub config: EarcpConfig,
    #[serde(rename = "m")]
    pub expert_count: usize,
    pub t: u64,
    pub weights: Vec<f64>,
    pub perf: Vec<f64>,
    pub coh: Vec<f64>,
    /// Rolling perf snapshots, oldest first.
    pub perf_history: Vec<Vec<f64>>,
    /// Rolling coherence snapshots, oldest first.
    pub coh_history: Vec<Vec<f64>>,
    pub cum_loss: Vec<f64>,
    pub cum_ensemble_loss: f64,
}

fn render_array(values: &[f64], out: &mut String) {
    out.push('[');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&render_f64(*v));
    }
    out.push(']');
}

fn render_matrix(rows: &[Vec<f64>], out: &mut String) {
    out.push('[');
    for (i, row) in rows.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        render_array(row, out);
    }
    out.push(']');
}

impl SerializedState {
    /// Renders the snapshot as JSON with fixed key order and 17-digit reals.
    pub fn to_json(&self) -> String {
        let mut s = String::with_capacity(512);
        s.push('{');
        s.push_str(&format!("\"schema_version\":{},", self.schema_version));
        s.push_str(&format!(
            "\"mode\":\"{}\",",
            match self.mode {
                TaskMode::Classification => "classification",
                TaskMode::Regression => "regression",
            }
        ));
        s.push_str("\"config\":{");
        let c = &self.config;
        s.push_str(&format!("\"alpha_p\":{},", render_f64(c.alpha_p)));
        s.push_str(&format!("\"alpha_c\":{},", render_f64(c.alpha_c)));
        s.push_str(&format!("\"beta\":{},", render_f64(c.beta)));
        s.push_str(&format!("\"eta_s\":{},", render_f64(c.eta_s)));
        s.push_str(&format!("\"w_min\":{},", render_f64(c.w_min)));
        s.push_str(&format!("\"s_max\":{},", render_f64(c.s_max)));
        s.push_str(&format!("\"gamma\":{},", render_f64(c.gamma)));
        s.push_str(&format!("\"epsilon\":{},", render_f64(c.epsilon)));
        s.push_str(&format!("\"norm_window\":{},", c.norm_window));
        match c.coherence_sample_k {
            Some(k) => s.push_str(&format!("\"coherence_sample_k\":{k},")),
            None => s.push_str("\"coherence_sample_k\":null,"),
        }
        s.push_str(&format!("\"hedge_compat\":{},", c.hedge_compat));
        s.push_str(&format!("\"hedge_eta\":{}", render_f64(c.hedge_eta)));
        s.push_str("},");
        s.push_str(&format!("\"m\":{},", self.expert_count));
        s.push_str(&format!("\"t\":{},", self.t));
        s.push_str("\"weights\":");
        render_array(&self.weights, &mut s);
        s.push_str(",\"perf\":");
        render_array(&self.perf, &mut s);
        s.push_str(",\"coh\":");
        render_array(&self.coh, &mut s);
        s.push_str(",\"perf_history\":");
        render_matrix(&self.perf_history, &mut s);
        s.push_str(",\"coh_history\":");
        render_matrix(&self.coh_history, &mut s);
        s.push_str(",\"cum_loss\":");
        render_array(&self.cum_loss, &mut s);
        s.push_str(&format!(
            ",\"cum_ensemble_loss\":{}",
            render_f64(self.cum_ensemble_loss)
        ));
        s.push('}');
        s
    }

    /// Parses and version-checks a snapshot. Structural consistency against a
    /// session is checked on restore.
    pub fn from_json(text: &str) -> Result<Self> {
        // Peek at the version first so a version mismatch is reported as such
        // even when the rest of the payload has drifted.
        if let Ok(probe) = serde_json::from_str::<serde_json::Value>(text) {
            if let Some(v) = probe.get("schema_version").and_then(|v| v.as_u64()) {
                if v != SCHEMA_VERSION as u64 {
                    return Err(Error::SchemaVersion {
                        expected: SCHEMA_VERSION,
                        got: v as u32,
                    });
                }
            }
        }
        let state: SerializedState = serde_json::from_str(text)
            .map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
        if state.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: SCHEMA_VERSION,
                got: state.schema_version,
            });
        }
        Ok(state)
    }
}
