//! The online weighting session.
//!
//! `EarcpSession` keeps per-expert statistics and a simplex weight vector,
//! and exposes a predict/update cycle:
//!
//! 1. `predict` combines the expert predictions with the current weights and
//!    queues them in the replay buffer; it never touches the statistics.
//! 2. `update` consumes the queued predictions for a step once its target is
//!    known, in five stages: per-expert losses; EMA of negated losses
//!    (performance); EMA of raw coherence; rolling min-max normalization of
//!    both EMAs over the last `norm_window` snapshots; and a clipped convex
//!    score `beta * perf + (1 - beta) * coherence` fed through a softmax with
//!    temperature `eta_s`, followed by the weight floor and renormalization.
//!
//! Feedback may arrive late and out of order: the replay buffer keys pending
//! predictions by step, EMAs advance in arrival order, and cumulative losses
//! are plain sums, so any arrival order yields the same totals up to
//! floating-point reassociation (bitwise equal when updates stay in step
//! order, as with a fixed delay).
//!
//! With `alpha_p = 0` the performance EMA would track only the latest loss,
//! and the rolling normalization rescales scores each step, so the scored
//! update never reduces exactly to the classical cumulative-loss
//! multiplicative rule. Sessions configured with `hedge_compat = true`
//! therefore run `update_hedge_compat`, which implements that rule directly:
//! `w_i` proportional to `exp(-hedge_eta * cum_loss_i)`, skipping coherence,
//! normalization, clipping and the floor.

use std::collections::BTreeMap;

use crate::coherence::{
    classification_coherence, regression_coherence, sampled_classification_coherence,
    sampled_regression_coherence, smooth_coherence,
};
use crate::error::{Error, Result};
use crate::losses::{evaluate_loss, LossKind};
use crate::types::{
    combine_predictions, validate_prediction_round, validate_target, weight_entropy,
    AggregatorState, EarcpConfig, PredictionVector, StepOutcome, TaskMode, SIMPLEX_TOLERANCE,
};
use crate::wire::{SerializedState, SCHEMA_VERSION};

/// Default capacity of the replay buffer.
pub const DEFAULT_MAX_PENDING: usize = 1024;

/// One queued prediction round awaiting its target.
#[derive(Debug, Clone)]
pub struct PendingRecord {
    pub step: u64,
    pub predictions: Vec<PredictionVector>,
    /// Argmax class per expert (classification mode only).
    pub predicted_classes: Option<Vec<usize>>,
    /// The combined prediction that was emitted, kept so delayed feedback
    /// scores the prediction that was actually made.
    pub ensemble_prediction: PredictionVector,
}

/// Replay buffer for delayed feedback, ordered by step and bounded by the
/// maximum tolerated delay.
#[derive(Debug, Clone)]
pub struct PendingFeedback {
    records: BTreeMap<u64, PendingRecord>,
    max_len: usize,
}

impl PendingFeedback {
    pub fn new(max_len: usize) -> Self {
        PendingFeedback {
            records: BTreeMap::new(),
            max_len,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Steps still waiting for feedback, ascending.
    pub fn pending_steps(&self) -> Vec<u64> {
        self.records.keys().copied().collect()
    }

    pub(crate) fn set_max_len(&mut self, max_len: usize) {
        self.max_len = max_len;
    }

    pub(crate) fn insert(&mut self, record: PendingRecord) -> Result<()> {
        if self.records.len() >= self.max_len {
            return Err(Error::FeedbackOverflow {
                len: self.records.len(),
                max: self.max_len,
            });
        }
        self.records.insert(record.step, record);
        Ok(())
    }

    pub(crate) fn take(&mut self, step: u64) -> Result<PendingRecord> {
        self.records
            .remove(&step)
            .ok_or(Error::MissingFeedback { step })
    }
}

/// Softmax with temperature `eta` over raw scores. The maximum score is
/// subtracted before exponentiation, which cannot change the result (shifting
/// every score rescales numerator and denominator alike) but keeps the
/// exponentials bounded for any temperature.
pub fn softmax_weights(scores: &[f64], eta: f64) -> Vec<f64> {
    let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = scores.iter().map(|&s| (eta * (s - top)).exp()).collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    weights
}

/// Lifts every weight to at least `w_min`, then renormalizes. The
/// renormalization can push a lifted weight slightly below `w_min` again;
/// the guaranteed lower bound is `w_min / (1 + m * w_min)`.
pub fn floor_and_renormalize(weights: &mut [f64], w_min: f64) {
    for w in weights.iter_mut() {
        *w = w.max(w_min);
    }
    let sum: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= sum;
    }
}

fn history_min_max(history: &std::collections::VecDeque<Vec<f64>>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for snapshot in history {
        for &v in snapshot {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

/// A running weighting session over a fixed set of experts.
#[derive(Debug, Clone)]
pub struct EarcpSession {
    mode: TaskMode,
    config: EarcpConfig,
    loss: LossKind,
    seed: u64,
    state: AggregatorState,
    dimension: Option<usize>,
    next_predict_step: u64,
    pending: PendingFeedback,
    renormalized_outputs: u64,
}

impl EarcpSession {
    /// Creates a fresh session. `seed` drives peer sampling when
    /// `coherence_sample_k` is set.
    pub fn new(
        expert_count: usize,
        mode: TaskMode,
        config: EarcpConfig,
        loss: LossKind,
        seed: u64,
    ) -> Result<Self> {
        if expert_count < 2 {
            return Err(Error::config(
                "expert_count",
                format!("need at least 2 experts, got {expert_count}"),
            ));
        }
        config.validate()?;
        loss.validate()?;
        if config.w_min * expert_count as f64 >= 1.0 {
            return Err(Error::config(
                "w_min",
                format!(
                    "w_min * m must be < 1, got {} * {expert_count}",
                    config.w_min
                ),
            ));
        }
        if let Some(k) = config.coherence_sample_k {
            if k < 1 || k > expert_count - 1 {
                return Err(Error::config(
                    "coherence_sample_k",
                    format!(
                        "must be in [1, {}] for {expert_count} experts, got {k}",
                        expert_count - 1
                    ),
                ));
            }
        }
        Ok(EarcpSession {
            mode,
            config,
            loss,
            seed,
            state: AggregatorState::fresh(expert_count),
            dimension: None,
            next_predict_step: 1,
            pending: PendingFeedback::new(DEFAULT_MAX_PENDING),
            renormalized_outputs: 0,
        })
    }

    /// Adjusts the replay-buffer capacity (the maximum tolerated delay).
    pub fn with_max_pending(mut self, max_len: usize) -> Self {
        self.pending.set_max_len(max_len);
        self
    }

    pub fn mode(&self) -> TaskMode {
        self.mode
    }

    pub fn config(&self) -> &EarcpConfig {
        &self.config
    }

    pub fn loss(&self) -> &LossKind {
        &self.loss
    }

    pub fn expert_count(&self) -> usize {
        self.state.expert_count
    }

    pub fn state(&self) -> &AggregatorState {
        &self.state
    }

    pub fn weights(&self) -> &[f64] {
        &self.state.weights
    }

    pub fn pending(&self) -> &PendingFeedback {
        &self.pending
    }

    /// How often a combined classification output drifted off the simplex by
    /// more than the tolerance and was renormalized.
    pub fn renormalized_outputs(&self) -> u64 {
        self.renormalized_outputs
    }

    /// Combines the expert predictions under the current weights and queues
    /// them for a later `update`. Statistics are untouched; the weight used
    /// here is the one produced by the most recent completed update.
    pub fn predict(&mut self, predictions: &[PredictionVector]) -> Result<PredictionVector> {
        validate_prediction_round(
            self.mode,
            self.state.expert_count,
            &mut self.dimension,
            predictions,
        )?;
        let mut combined = combine_predictions(&self.state.weights, predictions)?;
        if self.mode == TaskMode::Classification {
            let sum: f64 = combined.values.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                for v in &mut combined.values {
                    *v /= sum;
                }
                self.renormalized_outputs += 1;
            }
        }
        let predicted_classes = match self.mode {
            TaskMode::Classification => Some(predictions.iter().map(|p| p.argmax()).collect()),
            TaskMode::Regression => None,
        };
        let record = PendingRecord {
            step: self.next_predict_step,
            predictions: predictions.to_vec(),
            predicted_classes,
            ensemble_prediction: combined.clone(),
        };
        self.pending.insert(record)?;
        self.next_predict_step += 1;
        Ok(combined)
    }

    fn check_target(&self, target: &PredictionVector) -> Result<()> {
        validate_target(self.mode, self.dimension, target)
    }

    fn expert_losses(&self, record: &PendingRecord, target: &PredictionVector) -> Result<Vec<f64>> {
        let losses: Vec<f64> = record
            .predictions
            .iter()
            .map(|p| evaluate_loss(&self.loss, p, target))
            .collect::<Result<_>>()?;
        for &l in &losses {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::contract(format!("loss {l} outside [0, 1]")));
            }
        }
        Ok(losses)
    }

    fn raw_coherence(&self, record: &PendingRecord) -> Result<Vec<f64>> {
        let report = match (self.mode, self.config.coherence_sample_k) {
            (TaskMode::Classification, None) => {
                let classes = record.predicted_classes.as_ref().expect("classification");
                classification_coherence(classes)?
            }
            (TaskMode::Classification, Some(k)) => {
                let classes = record.predicted_classes.as_ref().expect("classification");
                sampled_classification_coherence(classes, k, self.seed, record.step)?
            }
            (TaskMode::Regression, None) => {
                regression_coherence(&record.predictions, self.config.gamma)?
            }
            (TaskMode::Regression, Some(k)) => sampled_regression_coherence(
                &record.predictions,
                self.config.gamma,
                k,
                self.seed,
                record.step,
            )?,
        };
        Ok(report.raw)
    }

    fn push_history(&mut self) {
        let window = self.config.norm_window;
        self.state.perf_history.push_back(self.state.perf.clone());
        self.state.coh_history.push_back(self.state.coh.clone());
        if window > 0 {
            while self.state.perf_history.len() > window {
                self.state.perf_history.pop_front();
            }
            while self.state.coh_history.len() > window {
                self.state.coh_history.pop_front();
            }
        }
    }

    fn finish_step(
        &mut self,
        record: PendingRecord,
        target: &PredictionVector,
        losses: Vec<f64>,
        scores: Vec<f64>,
    ) -> Result<StepOutcome> {
        for (cum, l) in self.state.cum_loss.iter_mut().zip(&losses) {
            *cum += l;
        }
        let ensemble_loss = evaluate_loss(&self.loss, &record.ensemble_prediction, target)?;
        self.state.cum_ensemble_loss += ensemble_loss;
        self.state.t += 1;
        let entropy = weight_entropy(&self.state.weights)?;
        Ok(StepOutcome {
            ensemble_prediction: record.ensemble_prediction,
            ensemble_loss,
            per_expert_losses: losses,
            new_weights: self.state.weights.clone(),
            scores,
            entropy,
            predicted_classes: record.predicted_classes,
        })
    }

    /// Scored update: consumes the pending predictions for `step` and moves
    /// the weights according to smoothed performance and coherence.
    pub fn update(&mut self, step: u64, target: &PredictionVector) -> Result<StepOutcome> {
        if self.config.hedge_compat {
            return Err(Error::ModeMismatch(
                "session is configured with hedge_compat = true; call update_hedge_compat"
                    .to_string(),
            ));
        }
        let record = self.pending.take(step)?;
        self.check_target(target)?;
        let losses = self.expert_losses(&record, target)?;

        let alpha_p = self.config.alpha_p;
        for (p, l) in self.state.perf.iter_mut().zip(&losses) {
            *p = alpha_p * *p + (1.0 - alpha_p) * (-l);
        }

        let raw = self.raw_coherence(&record)?;
        self.state.coh = smooth_coherence(&self.state.coh, &raw, self.config.alpha_c)?;

        self.push_history();
        let eps = self.config.epsilon;
        let (p_lo, p_hi) = history_min_max(&self.state.perf_history);
        let (c_lo, c_hi) = history_min_max(&self.state.coh_history);
        let beta = self.config.beta;
        let s_max = self.config.s_max;
        let scores: Vec<f64> = self
            .state
            .perf
            .iter()
            .zip(&self.state.coh)
            .map(|(&p, &c)| {
                let p_tilde = (p - p_lo) / (p_hi - p_lo + eps);
                let c_tilde = (c - c_lo) / (c_hi - c_lo + eps);
                (beta * p_tilde + (1.0 - beta) * c_tilde).clamp(-s_max, s_max)
            })
            .collect();

        self.state.weights = softmax_weights(&scores, self.config.eta_s);
        floor_and_renormalize(&mut self.state.weights, self.config.w_min);

        self.finish_step(record, target, losses, scores)
    }

    /// Cumulative-loss multiplicative update: weights proportional to
    /// `exp(-hedge_eta * cum_loss)`. Requires `hedge_compat = true`.
    pub fn update_hedge_compat(
        &mut self,
        step: u64,
        target: &PredictionVector,
    ) -> Result<StepOutcome> {
        if !self.config.hedge_compat {
            return Err(Error::ModeMismatch(
                "update_hedge_compat requires hedge_compat = true".to_string(),
            ));
        }
        let record = self.pending.take(step)?;
        self.check_target(target)?;
        let losses = self.expert_losses(&record, target)?;

        let alpha_p = self.config.alpha_p;
        for (p, l) in self.state.perf.iter_mut().zip(&losses) {
            *p = alpha_p * *p + (1.0 - alpha_p) * (-l);
        }

        // Scores here are the multiplicative-rule logits over losses
        // including this step.
        let eta = self.config.hedge_eta;
        let scores: Vec<f64> = self
            .state
            .cum_loss
            .iter()
            .zip(&losses)
            .map(|(cum, l)| -eta * (cum + l))
            .collect();
        self.state.weights = softmax_weights(&scores, 1.0);

        self.finish_step(record, target, losses, scores)
    }

    /// Runs whichever update variant the configuration selects.
    pub fn apply_update(&mut self, step: u64, target: &PredictionVector) -> Result<StepOutcome> {
        if self.config.hedge_compat {
            self.update_hedge_compat(step, target)
        } else {
            self.update(step, target)
        }
    }

    /// Freezes the statistics to plain data. Pending predictions are not part
    /// of the snapshot; take snapshots when the replay buffer is empty to
    /// resume seamlessly.
    pub fn snapshot(&self) -> SerializedState {
        SerializedState {
            schema_version: SCHEMA_VERSION,
            mode: self.mode,
            config: self.config.clone(),
            expert_count: self.state.expert_count,
            t: self.state.t,
            weights: self.state.weights.clone(),
            perf: self.state.perf.clone(),
            coh: self.state.coh.clone(),
            perf_history: self.state.perf_history.iter().cloned().collect(),
            coh_history: self.state.coh_history.iter().cloned().collect(),
            cum_loss: self.state.cum_loss.clone(),
            cum_ensemble_loss: self.state.cum_ensemble_loss,
        }
    }

    /// Rebuilds a session from a snapshot. The loss function and sampling
    /// seed are not part of the snapshot and must be supplied again.
    pub fn restore(serialized: &SerializedState, loss: LossKind, seed: u64) -> Result<Self> {
        let m = serialized.expert_count;
        let mut session = EarcpSession::new(
            m,
            serialized.mode,
            serialized.config.clone(),
            loss,
            seed,
        )?;
        let check_len = |name: &str, len: usize| -> Result<()> {
            if len != m {
                return Err(Error::CorruptSnapshot(format!(
                    "{name} has {len} entries, expected m = {m}"
                )));
            }
            Ok(())
        };
        check_len("weights", serialized.weights.len())?;
        check_len("perf", serialized.perf.len())?;
        check_len("coh", serialized.coh.len())?;
        check_len("cum_loss", serialized.cum_loss.len())?;
        for row in serialized
            .perf_history
            .iter()
            .chain(&serialized.coh_history)
        {
            check_len("history row", row.len())?;
        }
        let all_values = serialized
            .weights
            .iter()
            .chain(&serialized.perf)
            .chain(&serialized.coh)
            .chain(&serialized.cum_loss)
            .chain(serialized.perf_history.iter().flatten())
            .chain(serialized.coh_history.iter().flatten())
            .chain(std::iter::once(&serialized.cum_ensemble_loss));
        if all_values.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::CorruptSnapshot(
                "snapshot contains a non-finite value".to_string(),
            ));
        }
        crate::types::check_weight_simplex(&serialized.weights)
            .map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
        session.state = AggregatorState {
            expert_count: m,
            t: serialized.t,
            weights: serialized.weights.clone(),
            perf: serialized.perf.clone(),
            coh: serialized.coh.clone(),
            perf_history: serialized.perf_history.iter().cloned().collect(),
            coh_history: serialized.coh_history.iter().cloned().collect(),
            cum_loss: serialized.cum_loss.clone(),
            cum_ensemble_loss: serialized.cum_ensemble_loss,
        };
        session.next_predict_step = serialized.t + 1;
        Ok(session)
    }
}
