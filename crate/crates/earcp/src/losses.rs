//! Bounded loss functions mapping (prediction, target) pairs into [0, 1].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::PredictionVector;

/// The loss functions a session can be configured with.
///
/// Experiment configs refer to them by the string keys `"sq"`, `"zero_one"`
/// and `"xent"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    /// `min(1, ||p - y||^2 / bound^2)`; `bound` must be positive.
    ScaledSquaredError { bound: f64 },
    /// 0 when the argmaxes of prediction and target agree, 1 otherwise.
    /// Ties break toward the lowest index on both sides.
    ZeroOneArgmax,
    /// `-ln(clamp(p[argmax y], clip, 1)) / -ln(clip)`, mapping probabilities
    /// in `[clip, 1]` onto `[0, 1]`; `clip` must be in (0, 1).
    ClippedCrossEntropy { clip: f64 },
}

impl LossKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            LossKind::ScaledSquaredError { bound } => {
                if !(*bound > 0.0) || !bound.is_finite() {
                    return Err(Error::config("bound", format!("must be > 0, got {bound}")));
                }
            }
            LossKind::ZeroOneArgmax => {}
            LossKind::ClippedCrossEntropy { clip } => {
                if !(*clip > 0.0 && *clip < 1.0) {
                    return Err(Error::config(
                        "clip",
                        format!("must be in (0, 1), got {clip}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Evaluates `kind` on one (prediction, target) pair. The result is always
/// finite and in [0, 1].
pub fn evaluate_loss(
    kind: &LossKind,
    prediction: &PredictionVector,
    target: &PredictionVector,
) -> Result<f64> {
    if prediction.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            got: prediction.len(),
        });
    }
    if prediction.is_empty() {
        return Err(Error::contract("empty prediction"));
    }
    prediction.check_finite()?;
    target.check_finite()?;
    kind.validate()?;
    let loss = match kind {
        LossKind::ScaledSquaredError { bound } => {
            let sq: f64 = prediction
                .values
                .iter()
                .zip(&target.values)
                .map(|(p, y)| (p - y) * (p - y))
                .sum();
            (sq / (bound * bound)).min(1.0)
        }
        LossKind::ZeroOneArgmax => {
            if prediction.argmax() == target.argmax() {
                0.0
            } else {
                1.0
            }
        }
        LossKind::ClippedCrossEntropy { clip } => {
            let p = prediction.values[target.argmax()];
            -(p.clamp(*clip, 1.0)).ln() / -(clip.ln())
        }
    };
    debug_assert!((0.0..=1.0).contains(&loss));
    Ok(loss)
}
