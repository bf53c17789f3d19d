//! Evaluation metrics: Adjusted Rand Index and per-run summaries.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::pdw::Labeling;
use crate::{Error, Result};

/// Headline numbers for one deinterleaving run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub ari: f64,
    pub detected_emitters: usize,
    pub outlier_fraction: f64,
    #[serde(rename = "injected_in_clusters")]
    pub injected_in_clusters_fraction: f64,
}

fn pairs(n: u64) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Chance-adjusted partition agreement over the contingency table. The
/// outlier label −1 counts as a class of its own, so losing pulses to
/// noise is penalized.
pub fn adjusted_rand_index(truth: &Labeling, pred: &Labeling) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::validation(format!(
            "label lengths differ: {} vs {}",
            truth.len(),
            pred.len()
        )));
    }
    ari_slices(truth.labels(), pred.labels())
}

fn ari_slices(truth: &[i32], pred: &[i32]) -> Result<f64> {
    let n = truth.len();
    if n == 0 {
        return Err(Error::validation("cannot score empty labelings"));
    }
    let mut table: HashMap<(i32, i32), u64> = HashMap::new();
    let mut rows: HashMap<i32, u64> = HashMap::new();
    let mut cols: HashMap<i32, u64> = HashMap::new();
    for (&t, &p) in truth.iter().zip(pred) {
        *table.entry((t, p)).or_default() += 1;
        *rows.entry(t).or_default() += 1;
        *cols.entry(p).or_default() += 1;
    }
    let sum_ij: f64 = table.values().map(|&c| pairs(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n as u64);
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom.abs() < 1e-12 {
        // Both partitions are trivial (all singletons or one block); they
        // agree exactly by construction.
        return Ok(1.0);
    }
    Ok((sum_ij - expected) / denom)
}

/// Scores a prediction against ground truth.
///
/// When `injected_mask` marks artificially added pulses, the ARI is
/// computed over the genuine pulses only and the summary reports which
/// share of the injected ones leaked into non-outlier clusters.
pub fn summarize_run(
    truth: &Labeling,
    pred: &Labeling,
    injected_mask: Option<&[bool]>,
) -> Result<RunSummary> {
    if truth.len() != pred.len() {
        return Err(Error::validation(format!(
            "label lengths differ: {} vs {}",
            truth.len(),
            pred.len()
        )));
    }
    if let Some(mask) = injected_mask {
        if mask.len() != truth.len() {
            return Err(Error::validation("injected mask length mismatch"));
        }
    }
    let n = truth.len();
    let keep: Vec<bool> = match injected_mask {
        Some(mask) => mask.iter().map(|&m| !m).collect(),
        None => vec![true; n],
    };
    let truth_kept: Vec<i32> = truth
        .labels()
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(&l, _)| l)
        .collect();
    let pred_kept: Vec<i32> = pred
        .labels()
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(&l, _)| l)
        .collect();
    let ari = ari_slices(&truth_kept, &pred_kept)?;

    let injected_total = keep.iter().filter(|&&k| !k).count();
    let injected_in_clusters = pred
        .labels()
        .iter()
        .zip(&keep)
        .filter(|(&l, &k)| !k && l >= 0)
        .count();
    Ok(RunSummary {
        ari,
        detected_emitters: pred.cluster_count(),
        outlier_fraction: pred.outlier_fraction(),
        injected_in_clusters_fraction: if injected_total == 0 {
            0.0
        } else {
            injected_in_clusters as f64 / injected_total as f64
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn l(v: &[i32]) -> Labeling {
        Labeling::new(v.to_vec())
    }

    /// Pair-counting oracle: classify every index pair as agreeing or not in
    /// each partition, then apply the pairwise ARI identity.
    fn ari_pair_oracle(truth: &[i32], pred: &[i32]) -> f64 {
        let n = truth.len();
        let (mut a, mut b, mut c, mut d) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..n {
            for j in i + 1..n {
                let same_t = truth[i] == truth[j];
                let same_p = pred[i] == pred[j];
                match (same_t, same_p) {
                    (true, true) => a += 1.0,
                    (true, false) => b += 1.0,
                    (false, true) => c += 1.0,
                    (false, false) => d += 1.0,
                }
            }
        }
        let denom = (a + b) * (b + d) + (a + c) * (c + d);
        if denom == 0.0 {
            return 1.0;
        }
        2.0 * (a * d - b * c) / denom
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let t = l(&[0, 0, 1, 1, 2]);
        assert_eq!(adjusted_rand_index(&t, &t).unwrap(), 1.0);
    }

    #[test]
    fn label_names_do_not_matter() {
        let t = l(&[0, 0, 1, 1, 2, 2]);
        let p = l(&[5, 5, 9, 9, 1, 1]);
        assert_eq!(adjusted_rand_index(&t, &p).unwrap(), 1.0);
    }

    #[test]
    fn crossed_pairs_score_minus_half() {
        let t = l(&[0, 0, 1, 1]);
        let p = l(&[0, 1, 0, 1]);
        assert!((adjusted_rand_index(&t, &p).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn matches_pair_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let n = rng.random_range(2..=30);
            let kt = rng.random_range(1..=4);
            let kp = rng.random_range(1..=4);
            let truth: Vec<i32> = (0..n).map(|_| rng.random_range(-1..kt)).collect();
            let pred: Vec<i32> = (0..n).map(|_| rng.random_range(-1..kp)).collect();
            let got = ari_slices(&truth, &pred).unwrap();
            let want = ari_pair_oracle(&truth, &pred);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn random_predictions_score_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 200;
        let truth: Vec<i32> = (0..n).map(|i| (i % 4) as i32).collect();
        let mut total = 0.0;
        let draws = 1000;
        for _ in 0..draws {
            let pred: Vec<i32> = (0..n).map(|_| rng.random_range(0..4)).collect();
            total += ari_slices(&truth, &pred).unwrap();
        }
        let mean = total / draws as f64;
        assert!(mean.abs() < 0.05, "mean ARI {mean}");
    }

    #[test]
    fn symmetry() {
        let t = l(&[0, 0, 1, 1, -1, 2]);
        let p = l(&[0, 1, 1, 1, 2, -1]);
        let ab = adjusted_rand_index(&t, &p).unwrap();
        let ba = adjusted_rand_index(&p, &t).unwrap();
        assert!((ab - ba).abs() < 1e-15);
    }

    #[test]
    fn summary_for_perfect_run() {
        let t = l(&[0, 0, 1, 1]);
        let s = summarize_run(&t, &t, None).unwrap();
        assert_eq!(s.ari, 1.0);
        assert_eq!(s.detected_emitters, 2);
        assert_eq!(s.outlier_fraction, 0.0);
        assert_eq!(s.injected_in_clusters_fraction, 0.0);
    }

    #[test]
    fn summary_all_outliers() {
        let t = l(&[0, 0, 1, 1]);
        let p = l(&[-1, -1, -1, -1]);
        let s = summarize_run(&t, &p, None).unwrap();
        assert_eq!(s.detected_emitters, 0);
        assert_eq!(s.outlier_fraction, 1.0);
    }

    #[test]
    fn summary_scores_injected_leakage() {
        let t = l(&[0, 0, 1, -1, -1]);
        let p = l(&[0, 0, 1, 1, -1]);
        let mask = vec![false, false, false, true, true];
        let s = summarize_run(&t, &p, Some(&mask)).unwrap();
        // ARI over the three genuine pulses is perfect.
        assert_eq!(s.ari, 1.0);
        // One of two injected pulses landed in a cluster.
        assert!((s.injected_in_clusters_fraction - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mismatched_lengths_error() {
        let t = l(&[0, 0]);
        let p = l(&[0]);
        assert!(adjusted_rand_index(&t, &p).is_err());
        let p2 = l(&[0, 0]);
        assert!(summarize_run(&t, &p2, Some(&[true])).is_err());
    }
}
