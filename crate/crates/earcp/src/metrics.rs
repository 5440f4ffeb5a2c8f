//! Evaluation helpers: cumulative regret, per-segment regret for streams with
//! known change points, bootstrap summaries across seeds, and the per-step
//! trace format used by the experiment tooling.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::wire::render_f64;

/// Everything recorded about one completed step of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub ensemble_loss: f64,
    pub entropy: f64,
    pub weights: Vec<f64>,
    pub expert_losses: Vec<f64>,
    pub scores: Vec<f64>,
}

fn check_loss_table(ensemble_losses: &[f64], expert_losses: &[Vec<f64>]) -> Result<usize> {
    if ensemble_losses.is_empty() {
        return Err(Error::contract("regret needs at least one step"));
    }
    if expert_losses.len() != ensemble_losses.len() {
        return Err(Error::contract(format!(
            "expert loss table has {} rows for {} ensemble losses",
            expert_losses.len(),
            ensemble_losses.len()
        )));
    }
    let m = expert_losses[0].len();
    if m == 0 {
        return Err(Error::contract("expert loss rows must be non-empty"));
    }
    for row in expert_losses {
        if row.len() != m {
            return Err(Error::contract("ragged expert loss table"));
        }
    }
    Ok(m)
}

/// Cumulative regret over the whole stream: the ensemble's total loss minus
/// the total loss of the single best expert in hindsight.
pub fn regret(ensemble_losses: &[f64], expert_losses: &[Vec<f64>]) -> Result<f64> {
    let m = check_loss_table(ensemble_losses, expert_losses)?;
    let ensemble_total: f64 = ensemble_losses.iter().sum();
    let best = (0..m)
        .map(|i| expert_losses.iter().map(|row| row[i]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok(ensemble_total - best)
}

/// Regret per segment, where `change_points` split steps `1..=T` into
/// `[1, c_1)`, `[c_1, c_2)`, ..., `[c_k, T]`. Within each segment the
/// comparator is the best expert for that segment alone; an empty segment
/// contributes zero. Change points must be strictly increasing and inside
/// `[1, T]`.
pub fn segment_regret(
    ensemble_losses: &[f64],
    expert_losses: &[Vec<f64>],
    change_points: &[u64],
) -> Result<Vec<f64>> {
    let m = check_loss_table(ensemble_losses, expert_losses)?;
    let horizon = ensemble_losses.len() as u64;
    let mut prev = 0u64;
    for &cp in change_points {
        if cp <= prev {
            return Err(Error::contract(format!(
                "change points must be strictly increasing, got {cp} after {prev}"
            )));
        }
        if cp < 1 || cp > horizon {
            return Err(Error::contract(format!(
                "change point {cp} outside [1, {horizon}]"
            )));
        }
        prev = cp;
    }
    let mut boundaries: Vec<u64> = Vec::with_capacity(change_points.len() + 2);
    boundaries.push(1);
    boundaries.extend_from_slice(change_points);
    boundaries.push(horizon + 1);
    let mut out = Vec::with_capacity(boundaries.len() - 1);
    for pair in boundaries.windows(2) {
        let (start, end) = (pair[0], pair[1]);
        if start >= end {
            out.push(0.0);
            continue;
        }
        let range = (start - 1) as usize..(end - 1) as usize;
        let ensemble_total: f64 = ensemble_losses[range.clone()].iter().sum();
        let best = (0..m)
            .map(|i| {
                expert_losses[range.clone()]
                    .iter()
                    .map(|row| row[i])
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        out.push(ensemble_total - best);
    }
    Ok(out)
}

/// Mean, sample standard deviation, and a 95% percentile bootstrap interval
/// over per-seed results.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub mean: f64,
    pub std_dev: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Summarizes one metric across seeds. The values are sorted before
/// resampling, so the result depends only on the multiset of inputs, not
/// their order; the bootstrap itself is driven by `seed`.
pub fn summarize(values: &[f64], seed: u64) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::contract("cannot summarize zero values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("cannot summarize non-finite values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let std_dev = if n == 1 {
        0.0
    } else {
        let ss: f64 = sorted.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    let mut rng = SplitMix64::new(seed);
    let mut means = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let total: f64 = (0..n).map(|_| sorted[rng.next_below(n as u64) as usize]).sum();
        means.push(total / n as f64);
    }
    means.sort_by(|a, b| a.partial_cmp(b).expect("finite means"));
    Ok(SummaryStats {
        mean,
        std_dev,
        ci_lower: means[25],
        ci_upper: means[975],
    })
}

/// Renders per-step records as CSV with LF line endings. The header is
/// `step,ensemble_loss,entropy,w_0..,l_0..,s_0..`, widened to the expert
/// count; floats use the same exact decimal form as snapshots.
pub fn render_trace_csv(records: &[StepRecord]) -> Result<String> {
    let first = records
        .first()
        .ok_or_else(|| Error::contract("cannot render an empty trace"))?;
    let m = first.weights.len();
    let mut out = String::new();
    out.push_str("step,ensemble_loss,entropy");
    for prefix in ["w", "l", "s"] {
        for i in 0..m {
            out.push_str(&format!(",{prefix}_{i}"));
        }
    }
    out.push('\n');
    for record in records {
        if record.weights.len() != m
            || record.expert_losses.len() != m
            || record.scores.len() != m
        {
            return Err(Error::contract(format!(
                "trace record at step {} does not have {m} entries per column group",
                record.step
            )));
        }
        out.push_str(&record.step.to_string());
        out.push(',');
        out.push_str(&render_f64(record.ensemble_loss));
        out.push(',');
        out.push_str(&render_f64(record.entropy));
        for group in [&record.weights, &record.expert_losses, &record.scores] {
            for &v in group.iter() {
                out.push(',');
                out.push_str(&render_f64(v));
            }
        }
        out.push('\n');
    }
    Ok(out)
}
