//! Deterministic synthetic expert streams for desk-scale experiments.
//!
//! A [`ScenarioSpec`] fully determines a stream: [`generate_step`] is a pure
//! function of the spec and the step index, with every random draw taken from
//! a lane keyed by `(seed, step, lane)`. Expert `i` owns lane `i`, the target
//! owns lane `m`, and collusive group `g` owns lane `m + 1 + g`, so no
//! behavior's draws can perturb another's. Static regression phases live in
//! step 0, which real steps (numbered from 1) never touch.
//!
//! Change points rotate the behavior-to-expert assignment by one position
//! instead of resampling anything, so the identity of the best expert moves
//! deterministically at each switch.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::aggregator::{EarcpSession, DEFAULT_MAX_PENDING};
use crate::baselines::{BaselineKind, BaselineSession, HedgeSchedule};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::metrics::StepRecord;
use crate::rng::SplitMix64;
use crate::types::{EarcpConfig, PredictionVector, StepOutcome, TaskMode};

/// How one expert produces predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "behavior", rename_all = "snake_case")]
pub enum ExpertBehavior {
    /// Predicts the target; with probability `noise` a uniformly drawn wrong
    /// class instead (classification), or with per-component Gaussian noise
    /// of standard deviation `noise` (regression).
    Accurate {
        #[serde(default)]
        noise: f64,
    },
    /// Predicts the target shifted by a fixed offset: added to the one-hot
    /// and renormalized (classification) or added componentwise (regression).
    Biased { offset: Vec<f64> },
    /// Uniform over classes (classification) or uniform on `[-1, 1]^d`
    /// (regression).
    RandomGuess,
    /// With probability `agree_prob` emits its group's shared wrong answer,
    /// otherwise guesses like `RandomGuess`. All members of a group share one
    /// consensus draw per step.
    CollusiveWrong { group: u32, agree_prob: f64 },
}

impl ExpertBehavior {
    fn validate(&self, index: usize, dimension: usize) -> Result<()> {
        match self {
            ExpertBehavior::Accurate { noise } => {
                if !noise.is_finite() || *noise < 0.0 {
                    return Err(Error::config(
                        "experts",
                        format!("expert {index}: noise must be finite and >= 0, got {noise}"),
                    ));
                }
            }
            ExpertBehavior::Biased { offset } => {
                if offset.len() != dimension {
                    return Err(Error::config(
                        "experts",
                        format!(
                            "expert {index}: offset has {} components, expected {dimension}",
                            offset.len()
                        ),
                    ));
                }
                if offset.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config(
                        "experts",
                        format!("expert {index}: offset has a non-finite component"),
                    ));
                }
            }
            ExpertBehavior::RandomGuess => {}
            ExpertBehavior::CollusiveWrong { agree_prob, .. } => {
                if !agree_prob.is_finite() || !(0.0..=1.0).contains(agree_prob) {
                    return Err(Error::config(
                        "experts",
                        format!(
                            "expert {index}: agree_prob must be in [0, 1], got {agree_prob}"
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A complete synthetic stream description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub mode: TaskMode,
    pub expert_count: usize,
    pub dimension: usize,
    pub horizon: u64,
    pub experts: Vec<ExpertBehavior>,
    /// Steps at which the behavior assignment rotates by one position;
    /// strictly increasing, strictly inside `(1, horizon)`.
    #[serde(default)]
    pub change_points: Vec<u64>,
    /// Feedback for step `t` arrives after the prediction for `t + delay`.
    #[serde(default)]
    pub delay: u64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.expert_count < 2 {
            return Err(Error::config(
                "expert_count",
                format!("need at least 2 experts, got {}", self.expert_count),
            ));
        }
        if self.experts.len() != self.expert_count {
            return Err(Error::config(
                "experts",
                format!(
                    "{} behaviors listed for expert_count = {}",
                    self.experts.len(),
                    self.expert_count
                ),
            ));
        }
        let min_dimension = match self.mode {
            TaskMode::Classification => 2,
            TaskMode::Regression => 1,
        };
        if self.dimension < min_dimension {
            return Err(Error::config(
                "dimension",
                format!(
                    "must be >= {min_dimension} in this mode, got {}",
                    self.dimension
                ),
            ));
        }
        if self.horizon < 1 {
            return Err(Error::config("horizon", "must be >= 1".to_string()));
        }
        let mut prev = 1u64;
        for &cp in &self.change_points {
            if cp <= prev {
                return Err(Error::config(
                    "change_points",
                    format!("must be strictly increasing and > 1, got {cp} after {prev}"),
                ));
            }
            if cp >= self.horizon {
                return Err(Error::config(
                    "change_points",
                    format!("change point {cp} not inside (1, {})", self.horizon),
                ));
            }
            prev = cp;
        }
        if self.delay >= self.horizon {
            return Err(Error::config(
                "delay",
                format!("must be < horizon, got {} >= {}", self.delay, self.horizon),
            ));
        }
        for (i, behavior) in self.experts.iter().enumerate() {
            behavior.validate(i, self.dimension)?;
        }
        Ok(())
    }

    /// Behavior assigned to expert `i` at step `t`: the listed behaviors,
    /// rotated once per change point already reached.
    pub fn behavior_at(&self, t: u64, i: usize) -> &ExpertBehavior {
        let rotations = self.change_points.iter().filter(|&&cp| cp <= t).count();
        &self.experts[(i + rotations) % self.expert_count]
    }
}

const TARGET_LANE_OFFSET: u64 = 0;
const GROUP_LANE_OFFSET: u64 = 1;

fn target_lane(spec: &ScenarioSpec) -> u64 {
    spec.expert_count as u64 + TARGET_LANE_OFFSET
}

fn group_lane(spec: &ScenarioSpec, group: u32) -> u64 {
    spec.expert_count as u64 + GROUP_LANE_OFFSET + group as u64
}

/// A wrong class drawn as index `draw` of the `d - 1` classes that are not
/// `target`.
fn wrong_class(draw: u64, target: usize) -> usize {
    let c = draw as usize;
    if c < target {
        c
    } else {
        c + 1
    }
}

/// Per-dimension phases of the two regression sinusoids, from step-0 lanes.
fn regression_phases(seed: u64, dimension: usize) -> Vec<(f64, f64)> {
    (0..dimension)
        .map(|j| {
            let mut rng = SplitMix64::keyed(seed, 0, j as u64);
            (
                std::f64::consts::TAU * rng.next_f64(),
                std::f64::consts::TAU * rng.next_f64(),
            )
        })
        .collect()
}

fn classification_target(spec: &ScenarioSpec, t: u64) -> usize {
    let mut rng = SplitMix64::keyed(spec.seed, t, target_lane(spec));
    rng.next_below(spec.dimension as u64) as usize
}

fn regression_target(spec: &ScenarioSpec, t: u64) -> PredictionVector {
    let phases = regression_phases(spec.seed, spec.dimension);
    let mut rng = SplitMix64::keyed(spec.seed, t, target_lane(spec));
    let values = phases
        .iter()
        .map(|&(phi, psi)| {
            let slow = 0.35 * (std::f64::consts::TAU * t as f64 / 89.0 + phi).sin();
            let fast = 0.2 * (std::f64::consts::TAU * t as f64 / 23.0 + psi).sin();
            slow + fast + 0.05 * rng.next_normal()
        })
        .collect();
    PredictionVector::new(values)
}

fn uniform_box(rng: &mut SplitMix64, dimension: usize) -> PredictionVector {
    PredictionVector::new((0..dimension).map(|_| 2.0 * rng.next_f64() - 1.0).collect())
}

fn biased_classification(target_class: usize, offset: &[f64], d: usize) -> PredictionVector {
    let mut values: Vec<f64> = PredictionVector::one_hot(d, target_class)
        .values
        .iter()
        .zip(offset)
        .map(|(v, o)| (v + o).max(0.0))
        .collect();
    let sum: f64 = values.iter().sum();
    if sum <= 0.0 {
        return PredictionVector::new(vec![1.0 / d as f64; d]);
    }
    for v in &mut values {
        *v /= sum;
    }
    PredictionVector::new(values)
}

/// Generates the expert predictions and target for step `t`, purely from the
/// spec.
pub fn generate_step(
    spec: &ScenarioSpec,
    t: u64,
) -> Result<(Vec<PredictionVector>, PredictionVector)> {
    if t < 1 || t > spec.horizon {
        return Err(Error::contract(format!(
            "step {t} outside [1, {}]",
            spec.horizon
        )));
    }
    let d = spec.dimension;
    let (target, target_class) = match spec.mode {
        TaskMode::Classification => {
            let class = classification_target(spec, t);
            (PredictionVector::one_hot(d, class), Some(class))
        }
        TaskMode::Regression => (regression_target(spec, t), None),
    };

    // One consensus draw per collusive group per step, shared by members.
    let mut consensus_classes: BTreeMap<u32, usize> = BTreeMap::new();
    let mut consensus_class = |group: u32, target_class: usize| -> usize {
        *consensus_classes.entry(group).or_insert_with(|| {
            let mut rng = SplitMix64::keyed(spec.seed, t, group_lane(spec, group));
            wrong_class(rng.next_below(d as u64 - 1), target_class)
        })
    };

    let mut predictions = Vec::with_capacity(spec.expert_count);
    for i in 0..spec.expert_count {
        let mut rng = SplitMix64::keyed(spec.seed, t, i as u64);
        let p = match (spec.mode, spec.behavior_at(t, i)) {
            (TaskMode::Classification, ExpertBehavior::Accurate { noise }) => {
                let class = target_class.expect("classification");
                if *noise > 0.0 && rng.next_f64() < *noise {
                    PredictionVector::one_hot(
                        d,
                        wrong_class(rng.next_below(d as u64 - 1), class),
                    )
                } else {
                    PredictionVector::one_hot(d, class)
                }
            }
            (TaskMode::Regression, ExpertBehavior::Accurate { noise }) => {
                if *noise == 0.0 {
                    target.clone()
                } else {
                    PredictionVector::new(
                        target
                            .values
                            .iter()
                            .map(|y| y + noise * rng.next_normal())
                            .collect(),
                    )
                }
            }
            (TaskMode::Classification, ExpertBehavior::Biased { offset }) => {
                biased_classification(target_class.expect("classification"), offset, d)
            }
            (TaskMode::Regression, ExpertBehavior::Biased { offset }) => PredictionVector::new(
                target.values.iter().zip(offset).map(|(y, o)| y + o).collect(),
            ),
            (TaskMode::Classification, ExpertBehavior::RandomGuess) => {
                PredictionVector::one_hot(d, rng.next_below(d as u64) as usize)
            }
            (TaskMode::Regression, ExpertBehavior::RandomGuess) => uniform_box(&mut rng, d),
            (TaskMode::Classification, ExpertBehavior::CollusiveWrong { group, agree_prob }) => {
                let class = target_class.expect("classification");
                if rng.next_f64() < *agree_prob {
                    PredictionVector::one_hot(d, consensus_class(*group, class))
                } else {
                    PredictionVector::one_hot(d, rng.next_below(d as u64) as usize)
                }
            }
            (TaskMode::Regression, ExpertBehavior::CollusiveWrong { agree_prob, .. }) => {
                if rng.next_f64() < *agree_prob {
                    PredictionVector::new(target.values.iter().map(|y| y + 1.0).collect())
                } else {
                    uniform_box(&mut rng, d)
                }
            }
        };
        predictions.push(p);
    }
    Ok((predictions, target))
}

/// Which aggregation rule to run over a stream.
#[derive(Debug, Clone, PartialEq)]
pub enum AggregatorSpec {
    Earcp(EarcpConfig),
    Hedge(HedgeSchedule),
    Uniform,
    FollowTheLeader,
}

impl AggregatorSpec {
    /// Builds a ready session. `seed` drives coherence peer sampling and is
    /// ignored by the baselines.
    pub fn build(
        &self,
        expert_count: usize,
        mode: TaskMode,
        loss: LossKind,
        seed: u64,
    ) -> Result<Aggregator> {
        match self {
            AggregatorSpec::Earcp(config) => Ok(Aggregator::Earcp(EarcpSession::new(
                expert_count,
                mode,
                config.clone(),
                loss,
                seed,
            )?)),
            AggregatorSpec::Hedge(schedule) => Ok(Aggregator::Baseline(BaselineSession::new(
                expert_count,
                mode,
                BaselineKind::Hedge,
                *schedule,
                loss,
            )?)),
            AggregatorSpec::Uniform => Ok(Aggregator::Baseline(BaselineSession::new(
                expert_count,
                mode,
                BaselineKind::Uniform,
                HedgeSchedule::Anytime,
                loss,
            )?)),
            AggregatorSpec::FollowTheLeader => Ok(Aggregator::Baseline(BaselineSession::new(
                expert_count,
                mode,
                BaselineKind::FollowTheLeader,
                HedgeSchedule::Anytime,
                loss,
            )?)),
        }
    }
}

/// Either session type behind one predict/update surface.
#[derive(Debug, Clone)]
pub enum Aggregator {
    Earcp(EarcpSession),
    Baseline(BaselineSession),
}

impl Aggregator {
    pub fn with_max_pending(self, max_len: usize) -> Self {
        match self {
            Aggregator::Earcp(s) => Aggregator::Earcp(s.with_max_pending(max_len)),
            Aggregator::Baseline(s) => Aggregator::Baseline(s.with_max_pending(max_len)),
        }
    }

    pub fn predict(&mut self, predictions: &[PredictionVector]) -> Result<PredictionVector> {
        match self {
            Aggregator::Earcp(s) => s.predict(predictions),
            Aggregator::Baseline(s) => s.predict(predictions),
        }
    }

    pub fn update(&mut self, step: u64, target: &PredictionVector) -> Result<StepOutcome> {
        match self {
            Aggregator::Earcp(s) => s.apply_update(step, target),
            Aggregator::Baseline(s) => s.update(step, target),
        }
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            Aggregator::Earcp(s) => s.weights(),
            Aggregator::Baseline(s) => s.weights(),
        }
    }

    pub fn cum_loss(&self) -> &[f64] {
        match self {
            Aggregator::Earcp(s) => &s.state().cum_loss,
            Aggregator::Baseline(s) => s.cum_loss(),
        }
    }

    pub fn cum_ensemble_loss(&self) -> f64 {
        match self {
            Aggregator::Earcp(s) => s.state().cum_ensemble_loss,
            Aggregator::Baseline(s) => s.cum_ensemble_loss(),
        }
    }

    pub fn steps_completed(&self) -> u64 {
        match self {
            Aggregator::Earcp(s) => s.state().t,
            Aggregator::Baseline(s) => s.t(),
        }
    }

    pub fn as_earcp(&self) -> Option<&EarcpSession> {
        match self {
            Aggregator::Earcp(s) => Some(s),
            Aggregator::Baseline(_) => None,
        }
    }
}

/// Runs an aggregator over the full synthetic stream, honoring the scenario's
/// feedback delay, and returns one record per completed step in step order.
pub fn run_scenario(
    spec: &ScenarioSpec,
    aggregator: &AggregatorSpec,
    loss: &LossKind,
) -> Result<Vec<StepRecord>> {
    spec.validate()?;
    let mut session = aggregator
        .build(spec.expert_count, spec.mode, loss.clone(), spec.seed)?
        .with_max_pending(DEFAULT_MAX_PENDING.max(spec.delay as usize + 1));
    let mut records = Vec::with_capacity(spec.horizon as usize);
    let mut queued: VecDeque<(u64, PredictionVector)> = VecDeque::new();
    let mut complete = |session: &mut Aggregator,
                        queued: &mut VecDeque<(u64, PredictionVector)>|
     -> Result<()> {
        let (step, target) = queued.pop_front().expect("queued target");
        let outcome = session.update(step, &target)?;
        records.push(StepRecord {
            step,
            ensemble_loss: outcome.ensemble_loss,
            entropy: outcome.entropy,
            weights: outcome.new_weights,
            expert_losses: outcome.per_expert_losses,
            scores: outcome.scores,
        });
        Ok(())
    };
    for t in 1..=spec.horizon {
        let (predictions, target) = generate_step(spec, t)?;
        session.predict(&predictions)?;
        queued.push_back((t, target));
        if t > spec.delay {
            complete(&mut session, &mut queued)?;
        }
    }
    while !queued.is_empty() {
        complete(&mut session, &mut queued)?;
    }
    Ok(records)
}

/// Two-phase regime switch: one accurate expert among random guessers, with
/// the accurate role rotating to the last expert at the midpoint.
pub fn two_phase_scenario(seed: u64) -> ScenarioSpec {
    let mut experts = vec![ExpertBehavior::Accurate { noise: 0.0 }];
    experts.extend(std::iter::repeat(ExpertBehavior::RandomGuess).take(5));
    ScenarioSpec {
        mode: TaskMode::Classification,
        expert_count: 6,
        dimension: 10,
        horizon: 2000,
        experts,
        change_points: vec![1000],
        delay: 0,
        seed,
    }
}

/// A colluding majority: four experts that always agree on a shared wrong
/// class, against two mostly accurate experts.
pub fn adversarial_clique_scenario(seed: u64) -> ScenarioSpec {
    let mut experts = vec![
        ExpertBehavior::CollusiveWrong {
            group: 0,
            agree_prob: 1.0,
        };
        4
    ];
    experts.extend(vec![ExpertBehavior::Accurate { noise: 0.1 }; 2]);
    ScenarioSpec {
        mode: TaskMode::Classification,
        expert_count: 6,
        dimension: 10,
        horizon: 1000,
        experts,
        change_points: Vec::new(),
        delay: 0,
        seed,
    }
}

/// One clearly best expert among noise, the setting where weights collapse
/// onto a single expert unless a floor keeps some exploration alive.
pub fn collapse_prone_scenario(seed: u64) -> ScenarioSpec {
    let mut experts = vec![ExpertBehavior::Accurate { noise: 0.0 }];
    experts.extend(std::iter::repeat(ExpertBehavior::RandomGuess).take(5));
    ScenarioSpec {
        mode: TaskMode::Classification,
        expert_count: 6,
        dimension: 10,
        horizon: 400,
        experts,
        change_points: Vec::new(),
        delay: 0,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn guessers_spec(seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            mode: TaskMode::Classification,
            expert_count: 4,
            dimension: 10,
            horizon: 50,
            experts: vec![ExpertBehavior::RandomGuess; 4],
            change_points: Vec::new(),
            delay: 0,
            seed,
        }
    }

    #[test]
    fn streams_are_a_pure_function_of_the_spec() {
        let spec = two_phase_scenario(3);
        for t in [1u64, 500, 1000, 2000] {
            let a = generate_step(&spec, t).unwrap();
            let b = generate_step(&spec, t).unwrap();
            assert_eq!(a, b);
        }
        let agg = AggregatorSpec::Earcp(EarcpConfig::default());
        let loss = LossKind::ZeroOneArgmax;
        let small = collapse_prone_scenario(7);
        let first = run_scenario(&small, &agg, &loss).unwrap();
        let second = run_scenario(&small, &agg, &loss).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn noiseless_accurate_expert_matches_the_target_exactly() {
        let spec = two_phase_scenario(11);
        for t in 1..1000u64 {
            let (preds, target) = generate_step(&spec, t).unwrap();
            assert_eq!(preds[0], target, "step {t}");
        }
    }

    #[test]
    fn rotation_moves_the_accurate_role_at_the_change_point() {
        let spec = two_phase_scenario(5);
        for t in [1000u64, 1001, 1500, 2000] {
            let (preds, target) = generate_step(&spec, t).unwrap();
            assert_eq!(preds[5], target, "step {t}");
        }
        // Expert 0 is a random guesser after the switch: over a thousand
        // 10-class steps it cannot match the target every time.
        let mismatches = (1000..2000u64)
            .filter(|&t| {
                let (preds, target) = generate_step(&spec, t).unwrap();
                preds[0] != target
            })
            .count();
        assert!(mismatches > 800, "only {mismatches} mismatches");
    }

    #[test]
    fn random_guessing_over_ten_classes_loses_nine_times_in_ten() {
        let spec = ScenarioSpec {
            horizon: 10_000,
            ..guessers_spec(13)
        };
        let mut wrong = 0u32;
        for t in 1..=spec.horizon {
            let (preds, target) = generate_step(&spec, t).unwrap();
            if preds[0].argmax() != target.argmax() {
                wrong += 1;
            }
        }
        let mean = wrong as f64 / spec.horizon as f64;
        assert!((0.88..=0.92).contains(&mean), "mean zero-one loss {mean}");
    }

    #[test]
    fn collusive_group_agrees_on_a_shared_wrong_class() {
        let spec = adversarial_clique_scenario(17);
        for t in 1..=200u64 {
            let (preds, target) = generate_step(&spec, t).unwrap();
            let consensus = preds[0].argmax();
            assert_ne!(consensus, target.argmax(), "step {t}");
            for member in 1..4 {
                assert_eq!(preds[member], preds[0], "step {t}, expert {member}");
            }
        }
    }

    #[test]
    fn biased_expert_shifts_mass_without_leaving_the_simplex() {
        let mut offset = vec![0.0; 10];
        offset[3] = 0.25;
        let spec = ScenarioSpec {
            experts: vec![
                ExpertBehavior::Biased { offset },
                ExpertBehavior::RandomGuess,
            ],
            expert_count: 2,
            ..guessers_spec(19)
        };
        for t in 1..=50u64 {
            let (preds, target) = generate_step(&spec, t).unwrap();
            preds[0].check_simplex(1e-12).unwrap();
            let class = target.argmax();
            assert!(preds[0].values[class] > 0.5, "step {t}");
        }
    }

    #[test]
    fn regression_targets_stay_well_inside_the_unit_ball_per_component() {
        let spec = ScenarioSpec {
            mode: TaskMode::Regression,
            expert_count: 2,
            dimension: 3,
            horizon: 500,
            experts: vec![
                ExpertBehavior::Accurate { noise: 0.05 },
                ExpertBehavior::RandomGuess,
            ],
            change_points: Vec::new(),
            delay: 0,
            seed: 23,
        };
        for t in 1..=spec.horizon {
            let (preds, target) = generate_step(&spec, t).unwrap();
            for &y in &target.values {
                assert!(y.abs() < 0.9, "step {t}: target component {y}");
            }
            for &v in &preds[1].values {
                assert!((-1.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn steps_outside_the_horizon_are_rejected() {
        let spec = guessers_spec(1);
        assert!(generate_step(&spec, 0).is_err());
        assert!(generate_step(&spec, 51).is_err());
        assert!(generate_step(&spec, 50).is_ok());
    }

    #[test]
    fn spec_validation_names_the_offending_field() {
        let mut spec = guessers_spec(1);
        spec.change_points = vec![1];
        assert!(matches!(
            spec.validate().unwrap_err(),
            Error::Config {
                field: "change_points",
                ..
            }
        ));
        spec.change_points = vec![50];
        assert!(spec.validate().is_err());
        spec.change_points = vec![10, 10];
        assert!(spec.validate().is_err());
        spec.change_points = vec![10, 20];
        assert!(spec.validate().is_ok());

        let mut spec = guessers_spec(1);
        spec.delay = 50;
        assert!(matches!(
            spec.validate().unwrap_err(),
            Error::Config { field: "delay", .. }
        ));

        let mut spec = guessers_spec(1);
        spec.expert_count = 5;
        assert!(matches!(
            spec.validate().unwrap_err(),
            Error::Config {
                field: "experts",
                ..
            }
        ));

        let mut spec = guessers_spec(1);
        spec.experts[2] = ExpertBehavior::CollusiveWrong {
            group: 0,
            agree_prob: 1.5,
        };
        assert!(spec.validate().is_err());

        let mut spec = guessers_spec(1);
        spec.experts[0] = ExpertBehavior::Biased {
            offset: vec![0.1; 3],
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn uniform_aggregator_keeps_exactly_uniform_weights() {
        let spec = guessers_spec(29);
        let records =
            run_scenario(&spec, &AggregatorSpec::Uniform, &LossKind::ZeroOneArgmax).unwrap();
        assert_eq!(records.len(), 50);
        for record in &records {
            assert_eq!(record.weights, vec![0.25; 4]);
        }
    }

    #[test]
    fn default_weighting_locks_onto_the_only_accurate_expert() {
        let spec = ScenarioSpec {
            horizon: 2000,
            ..collapse_prone_scenario(31)
        };
        let records = run_scenario(
            &spec,
            &AggregatorSpec::Earcp(EarcpConfig::default()),
            &LossKind::ZeroOneArgmax,
        )
        .unwrap();
        let last = records.last().unwrap();
        let argmax = last
            .weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 0);
    }

    #[test]
    fn delay_changes_neither_expert_losses_nor_final_weights() {
        let base = ScenarioSpec {
            horizon: 120,
            ..guessers_spec(37)
        };
        let agg = AggregatorSpec::Earcp(EarcpConfig::default());
        let loss = LossKind::ZeroOneArgmax;
        let immediate = run_scenario(&base, &agg, &loss).unwrap();
        let delayed_spec = ScenarioSpec { delay: 7, ..base };
        let delayed = run_scenario(&delayed_spec, &agg, &loss).unwrap();
        assert_eq!(immediate.len(), delayed.len());
        for (a, b) in immediate.iter().zip(&delayed) {
            assert_eq!(a.step, b.step);
            assert_eq!(a.expert_losses, b.expert_losses);
            assert_eq!(a.weights, b.weights);
        }
    }

    #[test]
    fn canonical_scenarios_pass_their_own_validation() {
        two_phase_scenario(0).validate().unwrap();
        adversarial_clique_scenario(0).validate().unwrap();
        collapse_prone_scenario(0).validate().unwrap();
    }

    #[test]
    fn behavior_specs_round_trip_through_serde() {
        let experts = vec![
            ExpertBehavior::Accurate { noise: 0.1 },
            ExpertBehavior::Biased {
                offset: vec![0.0, 0.2],
            },
            ExpertBehavior::RandomGuess,
            ExpertBehavior::CollusiveWrong {
                group: 1,
                agree_prob: 0.9,
            },
        ];
        let json = serde_json::to_string(&experts).unwrap();
        assert!(json.contains("\"behavior\":\"collusive_wrong\""));
        let back: Vec<ExpertBehavior> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, experts);
    }
}
