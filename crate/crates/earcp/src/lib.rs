//! Streaming ensemble weighting driven by smoothed performance and
//! inter-expert coherence.
//!
//! The core is [`EarcpSession`]: it combines the predictions of a fixed set
//! of experts under simplex weights, and after each step's feedback moves the
//! weights by a softmax over per-expert scores. A score blends two
//! exponentially smoothed signals, recent performance (negated bounded loss)
//! and coherence (agreement with peers), both min-max normalized over a
//! rolling window; a weight floor keeps every expert alive for exploration.
//!
//! Around the core:
//!
//! - [`baselines`]: Hedge, uniform, and follow-the-leader references.
//! - [`losses`]: bounded loss functions shared by all aggregators.
//! - [`coherence`]: exact and sampled agreement measures.
//! - [`metrics`]: regret, per-segment regret, bootstrap summaries, traces.
//! - [`simulator`]: deterministic synthetic streams with regime switches,
//!   colluding experts, and delayed feedback.
//! - [`wire`]: snapshot serialization with exact float round-tripping.
//! - [`rng`]: the seeded generator that makes every run reproducible.
//!
//! Feedback may arrive delayed and out of order; sessions queue emitted
//! predictions per step and reconcile them when the target shows up.

pub mod aggregator;
pub mod baselines;
pub mod coherence;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod rng;
pub mod simulator;
pub mod types;
pub mod wire;

pub use aggregator::{EarcpSession, PendingFeedback, PendingRecord, DEFAULT_MAX_PENDING};
pub use baselines::{baseline_update, BaselineKind, BaselineSession, HedgeSchedule};
pub use error::{Error, Result};
pub use losses::{evaluate_loss, LossKind};
pub use metrics::{regret, segment_regret, summarize, StepRecord, SummaryStats};
pub use simulator::{
    adversarial_clique_scenario, collapse_prone_scenario, generate_step, run_scenario,
    two_phase_scenario, Aggregator, AggregatorSpec, ExpertBehavior, ScenarioSpec,
};
pub use types::{
    combine_predictions, weight_entropy, AggregatorState, EarcpConfig, PredictionVector,
    StepOutcome, TaskMode,
};
pub use wire::SerializedState;
