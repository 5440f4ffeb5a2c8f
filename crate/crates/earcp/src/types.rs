//! Shared value types: prediction vectors, task modes, session configuration,
//! aggregator state, and per-step outcomes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that a vector lies on the probability simplex.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// What kind of prediction target the session handles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskMode {
    /// Predictions are distributions over classes; targets are distributions
    /// (usually one-hot) of the same dimension.
    Classification,
    /// Predictions and targets are arbitrary real vectors.
    Regression,
}

/// A single expert's output for one step: a dense real vector.
///
/// In classification mode the entries must be non-negative and sum to one
/// within [`SIMPLEX_TOLERANCE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PredictionVector {
    pub values: Vec<f64>,
}

impl PredictionVector {
    pub fn new(values: Vec<f64>) -> Self {
        PredictionVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the largest entry, ties broken toward the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate().skip(1) {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// One-hot vector of dimension `d` with a one at `class`.
    pub fn one_hot(d: usize, class: usize) -> Self {
        let mut values = vec![0.0; d];
        values[class] = 1.0;
        PredictionVector { values }
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("prediction contains a non-finite value"));
        }
        Ok(())
    }

    pub(crate) fn check_simplex(&self, tolerance: f64) -> Result<()> {
        self.check_finite()?;
        if self.values.iter().any(|&v| v < -tolerance) {
            return Err(Error::contract(
                "classification prediction has a negative entry",
            ));
        }
        let sum: f64 = self.values.iter().sum();
        if (sum - 1.0).abs() > tolerance {
            return Err(Error::contract(format!(
                "classification prediction sums to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

impl From<Vec<f64>> for PredictionVector {
    fn from(values: Vec<f64>) -> Self {
        PredictionVector { values }
    }
}

/// Configuration of the scored weight update.
///
/// `norm_window = 0` means the rolling min/max statistics run over the whole
/// history instead of a bounded window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarcpConfig {
    /// Smoothing factor of the performance EMA, in (0, 1).
    pub alpha_p: f64,
    /// Smoothing factor of the coherence EMA, in (0, 1).
    pub alpha_c: f64,
    /// Mixing weight between normalized performance and coherence, in [0, 1].
    pub beta: f64,
    /// Softmax temperature applied to scores, > 0.
    pub eta_s: f64,
    /// Weight floor, in [0, 1); additionally `w_min * m < 1` per session.
    pub w_min: f64,
    /// Score clip bound, > 0.
    pub s_max: f64,
    /// RBF width of regression coherence, > 0.
    pub gamma: f64,
    /// Guard added to min-max denominators, > 0.
    pub epsilon: f64,
    /// Snapshot count for rolling min-max normalization; 0 = unbounded.
    pub norm_window: usize,
    /// Peers sampled per expert for coherence; absent = exact pairwise.
    pub coherence_sample_k: Option<usize>,
    /// When true the session runs the cumulative-loss multiplicative update
    /// instead of the scored update.
    pub hedge_compat: bool,
    /// Learning rate of the multiplicative update; used only when
    /// `hedge_compat` is true.
    pub hedge_eta: f64,
}

impl Default for EarcpConfig {
    fn default() -> Self {
        EarcpConfig {
            alpha_p: 0.9,
            alpha_c: 0.85,
            beta: 0.7,
            eta_s: 5.0,
            w_min: 0.05,
            s_max: 10.0,
            gamma: 1.0,
            epsilon: 1e-8,
            norm_window: 50,
            coherence_sample_k: None,
            hedge_compat: false,
            hedge_eta: 1.0,
        }
    }
}

impl EarcpConfig {
    /// Collects every range violation, one message per offending field.
    pub fn validation_errors(&self) -> Vec<(&'static str, String)> {
        let mut errors = Vec::new();
        let mut open_unit = |field: &'static str, v: f64| {
            if !(v > 0.0 && v < 1.0) || !v.is_finite() {
                errors.push((field, format!("must be in (0, 1), got {v}")));
            }
        };
        open_unit("alpha_p", self.alpha_p);
        open_unit("alpha_c", self.alpha_c);
        if !(self.beta >= 0.0 && self.beta <= 1.0) {
            errors.push(("beta", format!("must be in [0, 1], got {}", self.beta)));
        }
        if !(self.eta_s > 0.0) || !self.eta_s.is_finite() {
            errors.push(("eta_s", format!("must be > 0, got {}", self.eta_s)));
        }
        if !(self.w_min >= 0.0 && self.w_min < 1.0) {
            errors.push(("w_min", format!("must be in [0, 1), got {}", self.w_min)));
        }
        if !(self.s_max > 0.0) || !self.s_max.is_finite() {
            errors.push(("s_max", format!("must be > 0, got {}", self.s_max)));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            errors.push(("gamma", format!("must be > 0, got {}", self.gamma)));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            errors.push(("epsilon", format!("must be > 0, got {}", self.epsilon)));
        }
        if self.coherence_sample_k == Some(0) {
            errors.push(("coherence_sample_k", "must be >= 1 when set".to_string()));
        }
        if !(self.hedge_eta > 0.0) || !self.hedge_eta.is_finite() {
            errors.push(("hedge_eta", format!("must be > 0, got {}", self.hedge_eta)));
        }
        errors
    }

    /// Fails with the first range violation, if any.
    pub fn validate(&self) -> Result<()> {
        match self.validation_errors().into_iter().next() {
            None => Ok(()),
            Some((field, message)) => Err(Error::Config { field, message }),
        }
    }
}

/// Mutable statistics of a running session.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatorState {
    /// Number of experts.
    pub expert_count: usize,
    /// Completed update count.
    pub t: u64,
    /// Current mixture weights (simplex).
    pub weights: Vec<f64>,
    /// Smoothed performance per expert (EMA of negated losses).
    pub perf: Vec<f64>,
    /// Smoothed coherence per expert.
    pub coh: Vec<f64>,
    /// Recent `perf` snapshots, oldest first, used for rolling min-max.
    pub perf_history: VecDeque<Vec<f64>>,
    /// Recent `coh` snapshots, oldest first.
    pub coh_history: VecDeque<Vec<f64>>,
    /// Cumulative loss per expert.
    pub cum_loss: Vec<f64>,
    /// Cumulative loss of the emitted ensemble predictions.
    pub cum_ensemble_loss: f64,
}

impl AggregatorState {
    /// Fresh state: uniform weights, zero performance, coherence at 0.5.
    pub fn fresh(expert_count: usize) -> Self {
        AggregatorState {
            expert_count,
            t: 0,
            weights: vec![1.0 / expert_count as f64; expert_count],
            perf: vec![0.0; expert_count],
            coh: vec![0.5; expert_count],
            perf_history: VecDeque::new(),
            coh_history: VecDeque::new(),
            cum_loss: vec![0.0; expert_count],
            cum_ensemble_loss: 0.0,
        }
    }
}

/// Everything produced by one completed update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// The ensemble prediction that was emitted for this step.
    pub ensemble_prediction: PredictionVector,
    /// Loss of the emitted ensemble prediction against the target.
    pub ensemble_loss: f64,
    /// Loss of each expert against the target.
    pub per_expert_losses: Vec<f64>,
    /// Weights after the update.
    pub new_weights: Vec<f64>,
    /// Clipped scores that produced the new weights.
    pub scores: Vec<f64>,
    /// Shannon entropy of the new weights.
    pub entropy: f64,
    /// Per-expert argmax classes (classification mode only).
    pub predicted_classes: Option<Vec<usize>>,
}

/// Weighted sum of the expert predictions.
///
/// The weights must lie on the simplex within [`SIMPLEX_TOLERANCE`] and all
/// predictions must share one dimension.
pub fn combine_predictions(
    weights: &[f64],
    predictions: &[PredictionVector],
) -> Result<PredictionVector> {
    if weights.len() != predictions.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            got: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::contract("no predictions to combine"));
    }
    check_weight_simplex(weights)?;
    let d = predictions[0].len();
    for p in predictions {
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
    }
    let mut combined = vec![0.0; d];
    for (w, p) in weights.iter().zip(predictions) {
        for (c, v) in combined.iter_mut().zip(&p.values) {
            *c += w * v;
        }
    }
    Ok(PredictionVector::new(combined))
}

/// Shannon entropy `-sum w ln w` of a weight vector on the simplex, with the
/// `0 ln 0 = 0` convention. Always in `[0, ln m]`.
pub fn weight_entropy(weights: &[f64]) -> Result<f64> {
    check_weight_simplex(weights)?;
    let h: f64 = weights
        .iter()
        .map(|&w| if w > 0.0 { -w * w.ln() } else { 0.0 })
        .sum();
    Ok(h.max(0.0))
}

pub(crate) fn check_weight_simplex(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::contract("empty weight vector"));
    }
    if weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("weight vector contains a non-finite value"));
    }
    if weights.iter().any(|&w| w < -SIMPLEX_TOLERANCE) {
        return Err(Error::contract("weight vector has a negative entry"));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::contract(format!(
            "weights sum to {sum}, expected 1 within {SIMPLEX_TOLERANCE}"
        )));
    }
    Ok(())
}

/// Checks one round of expert predictions: the expert count, a shared
/// dimension (fixed on first use), and per-vector validity for the mode.
pub(crate) fn validate_prediction_round(
    mode: TaskMode,
    expert_count: usize,
    dimension: &mut Option<usize>,
    predictions: &[PredictionVector],
) -> Result<()> {
    if predictions.len() != expert_count {
        return Err(Error::ExpertCountMismatch {
            expected: expert_count,
            got: predictions.len(),
        });
    }
    let d = predictions[0].len();
    match *dimension {
        None => {
            if d == 0 {
                return Err(Error::contract("predictions must be non-empty"));
            }
            *dimension = Some(d);
        }
        Some(expected) if expected != d => {
            return Err(Error::DimensionMismatch { expected, got: d });
        }
        Some(_) => {}
    }
    for p in predictions {
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
        match mode {
            TaskMode::Classification => p.check_simplex(SIMPLEX_TOLERANCE)?,
            TaskMode::Regression => p.check_finite()?,
        }
    }
    Ok(())
}

/// Checks a feedback target against the dimension fixed by prediction rounds.
pub(crate) fn validate_target(
    mode: TaskMode,
    dimension: Option<usize>,
    target: &PredictionVector,
) -> Result<()> {
    let d = dimension.expect("dimension fixed by a prior predict");
    if target.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: target.len(),
        });
    }
    match mode {
        TaskMode::Classification => target.check_simplex(SIMPLEX_TOLERANCE),
        TaskMode::Regression => target.check_finite(),
    }
}
