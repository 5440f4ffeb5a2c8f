//! Classical reference aggregators: multiplicative weights over cumulative
//! loss (Hedge), the static uniform mixture, and follow-the-leader.
//!
//! The weight rules are pure functions of the cumulative loss vector, exposed
//! as [`baseline_update`] for direct use in tests and analysis, plus a
//! [`BaselineSession`] wrapper with the same predict/update cycle and delayed
//! feedback handling as the scored session.

use serde::{Deserialize, Serialize};

use crate::aggregator::{softmax_weights, PendingFeedback, PendingRecord, DEFAULT_MAX_PENDING};
use crate::error::{Error, Result};
use crate::losses::{evaluate_loss, LossKind};
use crate::types::{
    combine_predictions, validate_prediction_round, validate_target, weight_entropy,
    PredictionVector, StepOutcome, TaskMode,
};

/// Which reference rule a [`BaselineSession`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Weights proportional to `exp(-eta * cum_loss)`.
    Hedge,
    /// Fixed uniform weights.
    Uniform,
    /// All weight on the expert with the smallest cumulative loss.
    FollowTheLeader,
}

/// How the Hedge learning rate is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HedgeSchedule {
    /// A constant learning rate.
    Fixed(f64),
    /// `sqrt(2 ln m / T)` for a known horizon `T`, which keeps the worst-case
    /// regret within `sqrt(2 T ln m)` for losses in `[0, 1]`.
    Horizon(u64),
    /// `sqrt(2 ln m / t)`, decaying with the current round `t`.
    Anytime,
}

impl HedgeSchedule {
    /// Learning rate for round `t` (1-based) with `m` experts.
    pub fn eta_at(&self, t: u64, m: usize) -> f64 {
        match *self {
            HedgeSchedule::Fixed(eta) => eta,
            HedgeSchedule::Horizon(horizon) => {
                (2.0 * (m as f64).ln() / horizon.max(1) as f64).sqrt()
            }
            HedgeSchedule::Anytime => (2.0 * (m as f64).ln() / t.max(1) as f64).sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            HedgeSchedule::Fixed(eta) => {
                if !eta.is_finite() || eta <= 0.0 {
                    return Err(Error::config(
                        "hedge_eta",
                        format!("must be finite and > 0, got {eta}"),
                    ));
                }
            }
            HedgeSchedule::Horizon(horizon) => {
                if horizon == 0 {
                    return Err(Error::config("horizon", "must be >= 1".to_string()));
                }
            }
            HedgeSchedule::Anytime => {}
        }
        Ok(())
    }
}

/// Weights after observing `cum_loss`, as a pure function of the rule.
///
/// `eta` is the Hedge learning rate and is ignored by the other rules. Hedge
/// goes through the shift-invariant softmax, so only loss differences matter;
/// follow-the-leader breaks ties toward the lowest index.
pub fn baseline_update(kind: BaselineKind, cum_loss: &[f64], eta: f64) -> Vec<f64> {
    let m = cum_loss.len();
    match kind {
        BaselineKind::Hedge => {
            let scores: Vec<f64> = cum_loss.iter().map(|&c| -eta * c).collect();
            softmax_weights(&scores, 1.0)
        }
        BaselineKind::Uniform => vec![1.0 / m as f64; m],
        BaselineKind::FollowTheLeader => {
            let mut leader = 0;
            for (i, &c) in cum_loss.iter().enumerate().skip(1) {
                if c < cum_loss[leader] {
                    leader = i;
                }
            }
            let mut w = vec![0.0; m];
            w[leader] = 1.0;
            w
        }
    }
}

/// A reference aggregator with the same session surface as the scored one:
/// predictions are queued per step and feedback may arrive late and out of
/// order.
#[derive(Debug, Clone)]
pub struct BaselineSession {
    kind: BaselineKind,
    schedule: HedgeSchedule,
    mode: TaskMode,
    loss: LossKind,
    expert_count: usize,
    t: u64,
    weights: Vec<f64>,
    cum_loss: Vec<f64>,
    cum_ensemble_loss: f64,
    dimension: Option<usize>,
    next_predict_step: u64,
    pending: PendingFeedback,
}

impl BaselineSession {
    pub fn new(
        expert_count: usize,
        mode: TaskMode,
        kind: BaselineKind,
        schedule: HedgeSchedule,
        loss: LossKind,
    ) -> Result<Self> {
        if expert_count < 2 {
            return Err(Error::config(
                "expert_count",
                format!("need at least 2 experts, got {expert_count}"),
            ));
        }
        loss.validate()?;
        if kind == BaselineKind::Hedge {
            schedule.validate()?;
        }
        Ok(BaselineSession {
            kind,
            schedule,
            mode,
            loss,
            expert_count,
            t: 0,
            weights: vec![1.0 / expert_count as f64; expert_count],
            cum_loss: vec![0.0; expert_count],
            cum_ensemble_loss: 0.0,
            dimension: None,
            next_predict_step: 1,
            pending: PendingFeedback::new(DEFAULT_MAX_PENDING),
        })
    }

    /// Adjusts the replay-buffer capacity (the maximum tolerated delay).
    pub fn with_max_pending(mut self, max_len: usize) -> Self {
        self.pending.set_max_len(max_len);
        self
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn mode(&self) -> TaskMode {
        self.mode
    }

    pub fn expert_count(&self) -> usize {
        self.expert_count
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cum_loss(&self) -> &[f64] {
        &self.cum_loss
    }

    pub fn cum_ensemble_loss(&self) -> f64 {
        self.cum_ensemble_loss
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn pending(&self) -> &PendingFeedback {
        &self.pending
    }

    /// Combines the expert predictions under the current weights and queues
    /// them for a later `update`.
    pub fn predict(&mut self, predictions: &[PredictionVector]) -> Result<PredictionVector> {
        validate_prediction_round(
            self.mode,
            self.expert_count,
            &mut self.dimension,
            predictions,
        )?;
        let combined = combine_predictions(&self.weights, predictions)?;
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

    /// Consumes the pending predictions for `step` and applies the rule to
    /// the cumulative losses including this step.
    pub fn update(&mut self, step: u64, target: &PredictionVector) -> Result<StepOutcome> {
        let record = self.pending.take(step)?;
        validate_target(self.mode, self.dimension, target)?;
        let losses: Vec<f64> = record
            .predictions
            .iter()
            .map(|p| evaluate_loss(&self.loss, p, target))
            .collect::<Result<_>>()?;
        for (cum, l) in self.cum_loss.iter_mut().zip(&losses) {
            *cum += l;
        }
        self.t += 1;

        let scores: Vec<f64> = match self.kind {
            BaselineKind::Hedge => {
                let eta = self.schedule.eta_at(self.t, self.expert_count);
                self.cum_loss.iter().map(|&c| -eta * c).collect()
            }
            BaselineKind::Uniform => vec![0.0; self.expert_count],
            BaselineKind::FollowTheLeader => self.cum_loss.iter().map(|&c| -c).collect(),
        };
        match self.kind {
            BaselineKind::Hedge => {
                self.weights = softmax_weights(&scores, 1.0);
            }
            BaselineKind::Uniform => {}
            BaselineKind::FollowTheLeader => {
                self.weights = baseline_update(self.kind, &self.cum_loss, 0.0);
            }
        }

        let ensemble_loss = evaluate_loss(&self.loss, &record.ensemble_prediction, target)?;
        self.cum_ensemble_loss += ensemble_loss;
        let entropy = weight_entropy(&self.weights)?;
        Ok(StepOutcome {
            ensemble_prediction: record.ensemble_prediction,
            ensemble_loss,
            per_expert_losses: losses,
            new_weights: self.weights.clone(),
            scores,
            entropy,
            predicted_classes: record.predicted_classes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregator::EarcpSession;
    use crate::rng::SplitMix64;
    use crate::types::EarcpConfig;

    #[test]
    fn hedge_matches_two_expert_example() {
        let w = baseline_update(BaselineKind::Hedge, &[1.0, 0.0], 0.5);
        assert!((w[0] - 0.377541).abs() < 1e-6, "got {}", w[0]);
        assert!((w[1] - 0.622459).abs() < 1e-6, "got {}", w[1]);
    }

    #[test]
    fn hedge_with_tiny_eta_stays_near_uniform() {
        // Bounded losses over 100 rounds, so cumulative losses within
        // [0, 100]; at eta = 1e-12 every weight is within 1e-9 of 1/m.
        let mut rng = SplitMix64::new(11);
        let cum: Vec<f64> = (0..8).map(|_| 100.0 * rng.next_f64()).collect();
        let w = baseline_update(BaselineKind::Hedge, &cum, 1e-12);
        for &x in &w {
            assert!((x - 0.125).abs() <= 1e-9, "got {x}");
        }
    }

    #[test]
    fn hedge_with_huge_eta_concentrates_on_the_leader() {
        let cum = [3.0, 1.0, 2.0, 5.0];
        let w = baseline_update(BaselineKind::Hedge, &cum, 1e6);
        assert!(w[1] > 1.0 - 1e-10, "got {}", w[1]);
    }

    #[test]
    fn hedge_is_invariant_to_loss_shifts() {
        let cum = [2.0, 0.5, 1.25];
        let shifted: Vec<f64> = cum.iter().map(|c| c + 17.0).collect();
        let a = baseline_update(BaselineKind::Hedge, &cum, 0.7);
        let b = baseline_update(BaselineKind::Hedge, &shifted, 0.7);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn uniform_is_exactly_uniform() {
        let w = baseline_update(BaselineKind::Uniform, &[9.0, 1.0, 4.0, 0.0], 1.0);
        assert_eq!(w, vec![0.25; 4]);
    }

    #[test]
    fn follow_the_leader_picks_the_smallest_loss() {
        let w = baseline_update(BaselineKind::FollowTheLeader, &[3.0, 1.0, 2.0], 1.0);
        assert_eq!(w, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn follow_the_leader_breaks_ties_toward_lowest_index() {
        let w = baseline_update(BaselineKind::FollowTheLeader, &[2.0, 1.0, 1.0], 1.0);
        assert_eq!(w, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn horizon_schedule_matches_closed_form() {
        let eta = HedgeSchedule::Horizon(10_000).eta_at(1, 10);
        let expected = (2.0 * 10f64.ln() / 1e4).sqrt();
        assert!((eta - expected).abs() < 1e-15);
        assert!((eta - 0.021459660262893473).abs() < 1e-15);
    }

    #[test]
    fn anytime_schedule_decays_with_the_round() {
        let m = 4;
        let early = HedgeSchedule::Anytime.eta_at(1, m);
        let late = HedgeSchedule::Anytime.eta_at(100, m);
        assert!((early - (2.0 * 4f64.ln()).sqrt()).abs() < 1e-15);
        assert!(late < early);
        assert!((late - (2.0 * 4f64.ln() / 100.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fixed_schedule_rejects_nonpositive_rates() {
        assert!(HedgeSchedule::Fixed(0.0).validate().is_err());
        assert!(HedgeSchedule::Fixed(-1.0).validate().is_err());
        assert!(HedgeSchedule::Fixed(f64::NAN).validate().is_err());
        assert!(HedgeSchedule::Fixed(0.1).validate().is_ok());
    }

    #[test]
    fn hedge_session_shifts_weight_away_from_the_lossy_expert() {
        let mut s = BaselineSession::new(
            2,
            TaskMode::Regression,
            BaselineKind::Hedge,
            HedgeSchedule::Fixed(0.5),
            LossKind::ScaledSquaredError { bound: 1.0 },
        )
        .unwrap();
        let target = PredictionVector::new(vec![0.0]);
        for step in 1..=10u64 {
            s.predict(&[
                PredictionVector::new(vec![1.0]),
                PredictionVector::new(vec![0.0]),
            ])
            .unwrap();
            let out = s.update(step, &target).unwrap();
            let sum: f64 = out.new_weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        assert!(s.weights()[1] > 0.98, "got {:?}", s.weights());
    }

    #[test]
    fn hedge_compat_session_matches_the_baseline_exactly() {
        let eta = 0.8;
        let config = EarcpConfig {
            hedge_compat: true,
            hedge_eta: eta,
            ..EarcpConfig::default()
        };
        let loss = LossKind::ScaledSquaredError { bound: 1.0 };
        let mut compat =
            EarcpSession::new(4, TaskMode::Regression, config, loss.clone(), 3).unwrap();
        let mut baseline = BaselineSession::new(
            4,
            TaskMode::Regression,
            BaselineKind::Hedge,
            HedgeSchedule::Fixed(eta),
            loss,
        )
        .unwrap();
        let mut rng = SplitMix64::new(99);
        let target = PredictionVector::new(vec![0.0]);
        for step in 1..=300u64 {
            let preds: Vec<PredictionVector> = (0..4)
                .map(|_| PredictionVector::new(vec![rng.next_f64()]))
                .collect();
            compat.predict(&preds).unwrap();
            baseline.predict(&preds).unwrap();
            let a = compat.update_hedge_compat(step, &target).unwrap();
            let b = baseline.update(step, &target).unwrap();
            for (x, y) in a.new_weights.iter().zip(&b.new_weights) {
                assert!((x - y).abs() <= 1e-12, "step {step}: {x} vs {y}");
            }
        }
    }
}
