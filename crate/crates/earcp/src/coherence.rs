//! Inter-expert coherence: how much each expert agrees with its peers.
//!
//! Classification coherence is the fraction of peers predicting the same
//! class. Regression coherence is the mean RBF similarity
//! `exp(-gamma ||p_i - p_j||^2)` over peers. Both have an exact pairwise form
//! and a sampled form that averages over `k` peers drawn without replacement
//! from a deterministic stream keyed by `(seed, step, expert)`.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::types::PredictionVector;

/// Raw coherence values plus how many pair evaluations produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport {
    /// Per-expert coherence, each in [0, 1].
    pub raw: Vec<f64>,
    /// Distinct pairs examined: `m (m - 1) / 2` exact, `m * k` sampled.
    pub pairs_evaluated: usize,
}

fn check_expert_count(m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::contract(format!(
            "coherence needs at least 2 experts, got {m}"
        )));
    }
    Ok(())
}

fn check_sample_k(m: usize, k: usize) -> Result<()> {
    if k < 1 || k > m - 1 {
        return Err(Error::config(
            "coherence_sample_k",
            format!("must be in [1, {}] for {m} experts, got {k}", m - 1),
        ));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::config("gamma", format!("must be > 0, got {gamma}")));
    }
    Ok(())
}

fn check_regression_inputs(predictions: &[PredictionVector]) -> Result<()> {
    check_expert_count(predictions.len())?;
    let d = predictions[0].len();
    for p in predictions {
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
        p.check_finite()?;
    }
    Ok(())
}

#[inline]
fn rbf(a: &PredictionVector, b: &PredictionVector, gamma: f64) -> f64 {
    let sq: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    (-gamma * sq).exp()
}

/// Draws `k` peers of expert `i` (all experts except `i`), ascending.
fn sample_peers(m: usize, i: usize, k: usize, seed: u64, step: u64) -> Vec<usize> {
    let mut stream = SplitMix64::keyed(seed, step, i as u64);
    let mut picked = stream.sample_prefix(m - 1, k);
    // Peers are summed in index order so that k = m - 1 reproduces the exact
    // pairwise result bit for bit.
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|v| if v < i { v } else { v + 1 })
        .collect()
}

/// Exact agreement coherence over predicted classes.
pub fn classification_coherence(classes: &[usize]) -> Result<CoherenceReport> {
    let m = classes.len();
    check_expert_count(m)?;
    let raw = classes
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let agree = classes
                .iter()
                .enumerate()
                .filter(|&(j, &cj)| j != i && cj == c)
                .count();
            agree as f64 / (m - 1) as f64
        })
        .collect();
    Ok(CoherenceReport {
        raw,
        pairs_evaluated: m * (m - 1) / 2,
    })
}

/// Exact RBF coherence over regression predictions.
pub fn regression_coherence(
    predictions: &[PredictionVector],
    gamma: f64,
) -> Result<CoherenceReport> {
    check_regression_inputs(predictions)?;
    check_gamma(gamma)?;
    let m = predictions.len();
    let raw = (0..m)
        .map(|i| {
            let mut sum = 0.0;
            for (j, p) in predictions.iter().enumerate() {
                if j != i {
                    sum += rbf(&predictions[i], p, gamma);
                }
            }
            sum / (m - 1) as f64
        })
        .collect();
    Ok(CoherenceReport {
        raw,
        pairs_evaluated: m * (m - 1) / 2,
    })
}

/// Agreement coherence estimated from `k` sampled peers per expert.
pub fn sampled_classification_coherence(
    classes: &[usize],
    k: usize,
    seed: u64,
    step: u64,
) -> Result<CoherenceReport> {
    let m = classes.len();
    check_expert_count(m)?;
    check_sample_k(m, k)?;
    let raw = (0..m)
        .map(|i| {
            let peers = sample_peers(m, i, k, seed, step);
            let agree = peers.iter().filter(|&&j| classes[j] == classes[i]).count();
            agree as f64 / k as f64
        })
        .collect();
    Ok(CoherenceReport {
        raw,
        pairs_evaluated: m * k,
    })
}

/// RBF coherence estimated from `k` sampled peers per expert.
pub fn sampled_regression_coherence(
    predictions: &[PredictionVector],
    gamma: f64,
    k: usize,
    seed: u64,
    step: u64,
) -> Result<CoherenceReport> {
    check_regression_inputs(predictions)?;
    check_gamma(gamma)?;
    let m = predictions.len();
    check_sample_k(m, k)?;
    let raw = (0..m)
        .map(|i| {
            let peers = sample_peers(m, i, k, seed, step);
            let sum: f64 = peers
                .iter()
                .map(|&j| rbf(&predictions[i], &predictions[j], gamma))
                .sum();
            sum / k as f64
        })
        .collect();
    Ok(CoherenceReport {
        raw,
        pairs_evaluated: m * k,
    })
}

/// Elementwise EMA `alpha_c * prev + (1 - alpha_c) * raw`.
///
/// All inputs must be in [0, 1] and `alpha_c` in (0, 1); the output stays in
/// [0, 1].
pub fn smooth_coherence(prev: &[f64], raw: &[f64], alpha_c: f64) -> Result<Vec<f64>> {
    if prev.len() != raw.len() {
        return Err(Error::DimensionMismatch {
            expected: prev.len(),
            got: raw.len(),
        });
    }
    if !(alpha_c > 0.0 && alpha_c < 1.0) {
        return Err(Error::config(
            "alpha_c",
            format!("must be in (0, 1), got {alpha_c}"),
        ));
    }
    for &v in prev.iter().chain(raw) {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::contract(format!(
                "coherence value {v} outside [0, 1]"
            )));
        }
    }
    Ok(prev
        .iter()
        .zip(raw)
        .map(|(p, r)| alpha_c * p + (1.0 - alpha_c) * r)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    /// Independent oracle: build the full m x m agreement matrix, then take
    /// row sums excluding the diagonal.
    fn classification_oracle(classes: &[usize]) -> Vec<f64> {
        let m = classes.len();
        let mut matrix = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                matrix[i][j] = if classes[i] == classes[j] { 1.0 } else { 0.0 };
            }
        }
        (0..m)
            .map(|i| {
                let row: f64 = matrix[i].iter().sum::<f64>() - matrix[i][i];
                row / (m - 1) as f64
            })
            .collect()
    }

    fn regression_oracle(preds: &[PredictionVector], gamma: f64) -> Vec<f64> {
        let m = preds.len();
        let mut matrix = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                let sq: f64 = preds[i]
                    .values
                    .iter()
                    .zip(&preds[j].values)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                matrix[i][j] = (-gamma * sq).exp();
            }
        }
        (0..m)
            .map(|i| {
                let row: f64 = matrix[i].iter().sum::<f64>() - matrix[i][i];
                row / (m - 1) as f64
            })
            .collect()
    }

    #[test]
    fn classification_three_expert_example() {
        let report = classification_coherence(&[2, 2, 7]).unwrap();
        assert_eq!(report.raw, vec![0.5, 0.5, 0.0]);
        assert_eq!(report.pairs_evaluated, 3);
    }

    #[test]
    fn unanimous_classes_give_full_coherence() {
        let report = classification_coherence(&[4, 4, 4, 4, 4]).unwrap();
        assert_eq!(report.raw, vec![1.0; 5]);
    }

    #[test]
    fn two_disagreeing_experts_give_zero() {
        let report = classification_coherence(&[0, 1]).unwrap();
        assert_eq!(report.raw, vec![0.0, 0.0]);
    }

    #[test]
    fn identical_regression_predictions_give_one() {
        let p = PredictionVector::new(vec![0.4, -0.2]);
        let report = regression_coherence(&[p.clone(), p.clone(), p], 1.0).unwrap();
        assert_eq!(report.raw, vec![1.0; 3]);
    }

    #[test]
    fn regression_pair_at_known_distance() {
        let a = PredictionVector::new(vec![0.0, 0.0]);
        let b = PredictionVector::new(vec![1.0, 1.0]);
        let report = regression_coherence(&[a, b], 0.5).unwrap();
        assert!((report.raw[0] - 0.367879).abs() < 1e-6, "got {}", report.raw[0]);
        assert_eq!(report.raw[0], report.raw[1]);
    }

    #[test]
    fn huge_gamma_drives_distinct_predictions_to_zero() {
        let preds = vec![
            PredictionVector::new(vec![0.0]),
            PredictionVector::new(vec![1.0]),
            PredictionVector::new(vec![2.0]),
        ];
        let report = regression_coherence(&preds, 1e6).unwrap();
        for v in report.raw {
            assert!(v.abs() < 1e-6);
        }
    }

    #[test]
    fn exact_classification_matches_matrix_oracle() {
        let mut g = SplitMix64::keyed(31, 0, 0);
        for _ in 0..1000 {
            let m = 2 + g.next_below(12) as usize;
            let labels = 1 + g.next_below(6);
            let classes: Vec<usize> =
                (0..m).map(|_| g.next_below(labels) as usize).collect();
            let got = classification_coherence(&classes).unwrap().raw;
            assert_eq!(got, classification_oracle(&classes));
        }
    }

    #[test]
    fn exact_regression_matches_matrix_oracle() {
        let mut g = SplitMix64::keyed(32, 0, 0);
        for _ in 0..200 {
            let m = 2 + g.next_below(8) as usize;
            let d = 1 + g.next_below(4) as usize;
            let preds: Vec<PredictionVector> = (0..m)
                .map(|_| {
                    PredictionVector::new((0..d).map(|_| g.next_f64() * 2.0 - 1.0).collect())
                })
                .collect();
            let got = regression_coherence(&preds, 0.7).unwrap().raw;
            let want = regression_oracle(&preds, 0.7);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampling_all_peers_reproduces_exact_classification() {
        let mut g = SplitMix64::keyed(33, 0, 0);
        for step in 0..50u64 {
            let m = 2 + g.next_below(10) as usize;
            let classes: Vec<usize> = (0..m).map(|_| g.next_below(4) as usize).collect();
            let exact = classification_coherence(&classes).unwrap();
            let sampled =
                sampled_classification_coherence(&classes, m - 1, 7, step).unwrap();
            assert_eq!(sampled.raw, exact.raw);
            assert_eq!(sampled.pairs_evaluated, m * (m - 1));
        }
    }

    #[test]
    fn sampling_all_peers_reproduces_exact_regression() {
        let mut g = SplitMix64::keyed(34, 0, 0);
        for step in 0..50u64 {
            let m = 2 + g.next_below(8) as usize;
            let preds: Vec<PredictionVector> = (0..m)
                .map(|_| PredictionVector::new(vec![g.next_f64(), g.next_f64()]))
                .collect();
            let exact = regression_coherence(&preds, 1.3).unwrap();
            let sampled =
                sampled_regression_coherence(&preds, 1.3, m - 1, 11, step).unwrap();
            assert_eq!(sampled.raw, exact.raw);
        }
    }

    #[test]
    fn unanimous_sampled_coherence_is_one() {
        let classes = vec![3usize; 100];
        let report = sampled_classification_coherence(&classes, 5, 42, 9).unwrap();
        assert_eq!(report.raw, vec![1.0; 100]);
        assert_eq!(report.pairs_evaluated, 500);
    }

    #[test]
    fn sampled_draws_depend_on_step_and_seed() {
        let mut g = SplitMix64::keyed(35, 0, 0);
        let classes: Vec<usize> = (0..40).map(|_| g.next_below(3) as usize).collect();
        let a = sampled_classification_coherence(&classes, 4, 1, 1).unwrap();
        let b = sampled_classification_coherence(&classes, 4, 1, 2).unwrap();
        let c = sampled_classification_coherence(&classes, 2, 1, 1).unwrap();
        let a2 = sampled_classification_coherence(&classes, 4, 1, 1).unwrap();
        assert_eq!(a.raw, a2.raw);
        assert_ne!(a.raw, b.raw);
        assert_ne!(a.raw, c.raw);
    }

    #[test]
    fn sample_k_out_of_range_is_rejected() {
        let classes = vec![0, 1, 2];
        assert!(matches!(
            sampled_classification_coherence(&classes, 0, 1, 1).unwrap_err(),
            Error::Config { .. }
        ));
        assert!(matches!(
            sampled_classification_coherence(&classes, 3, 1, 1).unwrap_err(),
            Error::Config { .. }
        ));
    }

    #[test]
    fn single_expert_is_rejected() {
        assert!(classification_coherence(&[1]).is_err());
        let p = vec![PredictionVector::new(vec![0.0])];
        assert!(regression_coherence(&p, 1.0).is_err());
    }

    #[test]
    fn smoothing_follows_the_ema_rule() {
        let out = smooth_coherence(&[0.5], &[1.0], 0.85).unwrap();
        assert!((out[0] - 0.575).abs() < 1e-12, "got {}", out[0]);
        let out = smooth_coherence(&[1.0], &[0.0], 0.85).unwrap();
        assert!((out[0] - 0.85).abs() < 1e-12, "got {}", out[0]);
    }

    #[test]
    fn smoothing_validates_inputs() {
        assert!(smooth_coherence(&[0.5], &[1.5], 0.85).is_err());
        assert!(smooth_coherence(&[0.5], &[0.5], 1.0).is_err());
        assert!(smooth_coherence(&[0.5, 0.5], &[0.5], 0.85).is_err());
    }

    #[test]
    fn moving_an_expert_away_lowers_its_coherence() {
        let base = vec![
            PredictionVector::new(vec![0.0, 0.0]),
            PredictionVector::new(vec![0.1, 0.0]),
            PredictionVector::new(vec![0.0, 0.1]),
        ];
        let mut further = base.clone();
        further[0] = PredictionVector::new(vec![2.0, 2.0]);
        let near = regression_coherence(&base, 1.0).unwrap().raw[0];
        let far = regression_coherence(&further, 1.0).unwrap().raw[0];
        assert!(far < near);
    }

    proptest! {
        #[test]
        fn coherence_stays_in_unit_interval(
            classes in proptest::collection::vec(0usize..5, 2..20),
        ) {
            let report = classification_coherence(&classes).unwrap();
            prop_assert!(report.raw.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }

        #[test]
        fn two_experts_have_symmetric_coherence(
            a in proptest::collection::vec(-3.0..3.0f64, 3),
            b in proptest::collection::vec(-3.0..3.0f64, 3),
        ) {
            let report = regression_coherence(
                &[PredictionVector::new(a), PredictionVector::new(b)],
                1.0,
            )
            .unwrap();
            prop_assert_eq!(report.raw[0], report.raw[1]);
        }

        #[test]
        fn permuting_experts_permutes_coherence(
            classes in proptest::collection::vec(0usize..4, 4..10),
            rot in 1usize..4,
        ) {
            let m = classes.len();
            let permuted: Vec<usize> = (0..m).map(|i| classes[(i + rot) % m]).collect();
            let base = classification_coherence(&classes).unwrap().raw;
            let moved = classification_coherence(&permuted).unwrap().raw;
            for i in 0..m {
                prop_assert_eq!(moved[i], base[(i + rot) % m]);
            }
        }
    }
}
