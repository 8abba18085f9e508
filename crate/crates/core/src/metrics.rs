//! Per-class ranking metrics for a semantic map.

use alloc::string::String;
use alloc::vec::Vec;

use crate::{ClassId, Error, LabeledPointCloud, MapPosterior, Result};

/// Default number of interior thresholds for [`mean_sensitivity`].
pub const DEFAULT_GRID_POINTS: usize = 99;

fn check_lengths(scores: &[f64], truth: &[bool]) -> Result<()> {
    if scores.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    Ok(())
}

/// Area under the ROC curve as the Mann–Whitney statistic: the probability
/// that a random positive outscores a random negative, ties counted as half.
pub fn auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    check_lengths(scores, truth)?;
    let n_pos = truth.iter().filter(|&&t| t).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both positives and negatives"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of 1-based average ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let tied_pos = order[i..j].iter().filter(|&&k| truth[k]).count();
        rank_sum += avg_rank * tied_pos as f64;
        i = j;
    }
    let n_pos = n_pos as f64;
    let u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg as f64))
}

/// Recall averaged over the thresholds `i/(G+1)`, `i = 1..=G`, predicting
/// positive when `score > τ`.
pub fn mean_sensitivity(scores: &[f64], truth: &[bool], grid_points: usize) -> Result<f64> {
    check_lengths(scores, truth)?;
    if grid_points == 0 {
        return Err(Error::invalid("threshold grid needs at least one point"));
    }
    let mut pos: Vec<f64> = scores.iter().zip(truth).filter(|(_, &t)| t).map(|(&s, _)| s).collect();
    if pos.is_empty() {
        return Err(Error::UndefinedMetric("sensitivity needs at least one positive"));
    }
    pos.sort_by(f64::total_cmp);
    let n_pos = pos.len() as f64;
    let denom = (grid_points + 1) as f64;
    let mut total = 0.0;
    for i in 1..=grid_points {
        let tau = i as f64 / denom;
        let above = pos.len() - pos.partition_point(|&s| s <= tau);
        total += above as f64 / n_pos;
    }
    Ok(total / grid_points as f64)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassMetrics {
    pub class_id: ClassId,
    pub name: Option<String>,
    /// `None` when the class is absent from, or covers all of, the truth cloud.
    pub auc: Option<f64>,
    pub mean_sensitivity: Option<f64>,
    /// Number of truth points carrying this class.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub per_class: Vec<ClassMetrics>,
    /// Unweighted mean over classes with a defined AUC.
    pub average_auc: Option<f64>,
    /// Unweighted mean over classes with a defined mean sensitivity.
    pub average_sensitivity: Option<f64>,
    /// Thresholds are `i/(grid_points+1)` for `i = 1..=grid_points`.
    pub grid_points: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Scores every posterior class one-vs-rest against the aligned truth cloud.
pub fn evaluate_map(posterior: &MapPosterior, truth: &LabeledPointCloud) -> Result<EvalReport> {
    evaluate_map_with_grid(posterior, truth, DEFAULT_GRID_POINTS)
}

pub fn evaluate_map_with_grid(
    posterior: &MapPosterior,
    truth: &LabeledPointCloud,
    grid_points: usize,
) -> Result<EvalReport> {
    if posterior.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: posterior.len(),
        });
    }
    let mut per_class = Vec::with_capacity(posterior.class_ids.len());
    for (k, &id) in posterior.class_ids.iter().enumerate() {
        let scores: Vec<f64> = posterior.class_probs.column(k).iter().copied().collect();
        let labels: Vec<bool> = truth.labels().iter().map(|&l| l == id).collect();
        let support = labels.iter().filter(|&&t| t).count();
        per_class.push(ClassMetrics {
            class_id: id,
            name: None,
            auc: auc(&scores, &labels).ok(),
            mean_sensitivity: mean_sensitivity(&scores, &labels, grid_points).ok(),
            support,
        });
    }
    Ok(EvalReport {
        average_auc: mean(per_class.iter().filter_map(|c| c.auc)),
        average_sensitivity: mean(per_class.iter().filter_map(|c| c.mean_sensitivity)),
        per_class,
        grid_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair_auc(scores: &[f64], truth: &[bool]) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, &ti) in truth.iter().enumerate() {
            for (j, &tj) in truth.iter().enumerate() {
                if ti && !tj {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    fn naive_sensitivity(scores: &[f64], truth: &[bool], g: usize) -> f64 {
        let n_pos = truth.iter().filter(|&&t| t).count() as f64;
        let mut total = 0.0;
        for i in 1..=g {
            let tau = i as f64 / (g + 1) as f64;
            let tp = scores.iter().zip(truth).filter(|(&s, &t)| t && s > tau).count();
            total += tp as f64 / n_pos;
        }
        total / g as f64
    }

    fn random_instance(n: usize, seed: u64, quantize: bool) -> (Vec<f64>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut truth: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        truth[0] = true;
        truth[1] = false;
        let scores = (0..n)
            .map(|i| {
                let s: f64 = rng.random::<f64>() * 0.7 + if truth[i] { 0.3 } else { 0.0 };
                if quantize {
                    (s * 20.0).round() / 20.0
                } else {
                    s
                }
            })
            .collect();
        (scores, truth)
    }

    #[test]
    fn auc_extremes() {
        assert_eq!(auc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(auc(&[0.1, 0.9], &[true, false]).unwrap(), 0.0);
        assert_eq!(auc(&[0.5, 0.5], &[true, false]).unwrap(), 0.5);
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedMetric(_))));
        assert!(matches!(auc(&[0.1], &[true, false]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn auc_matches_pair_counting() {
        for seed in 0..20 {
            let (s, t) = random_instance(200, seed, seed % 2 == 0);
            assert!((auc(&s, &t).unwrap() - pair_auc(&s, &t)).abs() < 1e-12);
        }
    }

    #[test]
    fn auc_invariances() {
        let (s, t) = random_instance(200, 7, true);
        let cubed: Vec<f64> = s.iter().map(|v| v * v * v).collect();
        let a = auc(&s, &t).unwrap();
        assert!((auc(&cubed, &t).unwrap() - a).abs() < 1e-12);
        let flipped: Vec<bool> = t.iter().map(|v| !v).collect();
        assert!((auc(&s, &flipped).unwrap() + a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sensitivity_extremes() {
        let t = [true, true, false];
        assert_eq!(mean_sensitivity(&[1.0, 1.0, 0.0], &t, 99).unwrap(), 1.0);
        assert_eq!(mean_sensitivity(&[0.0, 0.0, 0.0], &t, 99).unwrap(), 0.0);
        assert!(matches!(
            mean_sensitivity(&[0.3], &[false], 99),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn sensitivity_matches_naive_recount() {
        for seed in 0..20 {
            let (s, t) = random_instance(20, seed, seed % 2 == 1);
            for g in [1, 7, 99] {
                assert_eq!(mean_sensitivity(&s, &t, g).unwrap(), naive_sensitivity(&s, &t, g));
            }
        }
        // Scores sitting exactly on a threshold are not counted.
        let s = [0.5, 0.25];
        assert_eq!(mean_sensitivity(&s, &[true, true], 3).unwrap(), naive_sensitivity(&s, &[true, true], 3));
    }

    #[test]
    fn sensitivity_grid_refinement_bound() {
        for seed in 0..20 {
            let (s, t) = random_instance(60, seed, false);
            for g in [9, 49, 99] {
                let coarse = mean_sensitivity(&s, &t, g).unwrap();
                let fine = mean_sensitivity(&s, &t, 2 * g).unwrap();
                assert!((coarse - fine).abs() < 1.0 / g as f64);
            }
        }
    }

    fn posterior(probs: DMatrix<f64>, ids: Vec<ClassId>) -> MapPosterior {
        let n = probs.nrows();
        MapPosterior {
            points: vec![[0.0; 3]; n],
            hard_labels: vec![ids[0]; n],
            class_ids: ids,
            class_probs: probs,
        }
    }

    #[test]
    fn perfect_posterior_scores_one() {
        let labels = vec![1, 2, 3, 1, 2, 3];
        let truth = LabeledPointCloud::new(vec![[0.0; 3]; 6], labels.clone()).unwrap();
        let probs = DMatrix::from_fn(6, 3, |i, k| if labels[i] == k as u32 + 1 { 1.0 } else { 0.0 });
        let report = evaluate_map(&posterior(probs, vec![1, 2, 3]), &truth).unwrap();
        assert_eq!(report.average_auc, Some(1.0));
        assert_eq!(report.average_sensitivity, Some(1.0));
        assert!(report.per_class.iter().all(|c| c.support == 2));
    }

    #[test]
    fn uniform_posterior() {
        let labels = vec![1, 2, 3, 1, 2, 3];
        let truth = LabeledPointCloud::new(vec![[0.0; 3]; 6], labels.clone()).unwrap();
        let probs = DMatrix::from_element(6, 3, 1.0 / 3.0);
        let report = evaluate_map(&posterior(probs, vec![1, 2, 3]), &truth).unwrap();
        assert_eq!(report.average_auc, Some(0.5));
        // Thresholds i/100 below 1/3 are i = 1..=33.
        let t: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
        let expected = naive_sensitivity(&[1.0 / 3.0; 6], &t, 99);
        assert_eq!(expected, 33.0 / 99.0);
        assert_eq!(report.per_class[0].mean_sensitivity, Some(expected));
    }

    #[test]
    fn absent_class_is_flagged_and_excluded() {
        let truth = LabeledPointCloud::new(vec![[0.0; 3]; 4], vec![1, 2, 1, 2]).unwrap();
        let probs = DMatrix::from_row_slice(4, 3, &[
            0.8, 0.1, 0.1, 0.2, 0.7, 0.1, 0.6, 0.3, 0.1, 0.1, 0.8, 0.1,
        ]);
        let report = evaluate_map(&posterior(probs, vec![1, 2, 9]), &truth).unwrap();
        let absent = &report.per_class[2];
        assert_eq!((absent.support, absent.auc, absent.mean_sensitivity), (0, None, None));
        assert_eq!(report.average_auc, Some(1.0));
    }

    #[test]
    fn misaligned_lengths() {
        let truth = LabeledPointCloud::new(vec![[0.0; 3]; 3], vec![1, 2, 1]).unwrap();
        let probs = DMatrix::from_element(2, 2, 0.5);
        assert!(matches!(
            evaluate_map(&posterior(probs, vec![1, 2]), &truth),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
