//! Softmax cross-entropy, computed with max-subtraction so large logits
//! cannot overflow.

use super::NnError;

/// Softmax probabilities; always sums to 1 up to rounding.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Negative log likelihood of `label` under `softmax(logits)`. Non-negative.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64, NnError> {
    if label >= logits.len() {
        return Err(NnError::LabelOutOfRange {
            label,
            num_classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    Ok(log_sum - (logits[label] - max))
}

/// Index of the largest component; the earliest one on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_cost_the_log_of_the_class_count() {
        let loss = cross_entropy(&[0.7; 10], 3).unwrap();
        assert!((loss - std::f64::consts::LN_10).abs() < 1e-12);
    }

    #[test]
    fn huge_logit_gaps_do_not_overflow() {
        let loss = cross_entropy(&[1000.0, 0.0], 0).unwrap();
        assert!(loss.is_finite());
        assert!(loss < 1e-12);
        let loss = cross_entropy(&[1000.0, 0.0], 1).unwrap();
        assert!(loss.is_finite());
        assert!((loss - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn three_class_example_matches_direct_evaluation() {
        let loss = cross_entropy(&[1.0, 2.0, 3.0], 2).unwrap();
        let e = std::f64::consts::E;
        let want = -(e.powi(3) / (e + e.powi(2) + e.powi(3))).ln();
        assert!((loss - want).abs() < 1e-12);
        assert!((want - 0.407606).abs() < 1e-6);
    }

    #[test]
    fn out_of_range_labels_are_rejected() {
        assert_eq!(
            cross_entropy(&[0.0, 0.0], 2),
            Err(NnError::LabelOutOfRange {
                label: 2,
                num_classes: 2
            })
        );
    }

    #[test]
    fn softmax_normalizes_and_loss_stays_non_negative() {
        let cases: Vec<Vec<f64>> = vec![
            vec![0.0, 0.0, 0.0],
            vec![5.0, -3.0, 0.25, 9.0],
            vec![-100.0, 100.0],
            vec![1.5],
        ];
        for logits in cases {
            let p = softmax(&logits);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for label in 0..logits.len() {
                assert!(cross_entropy(&logits, label).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn argmax_takes_the_earliest_maximum() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[4.0]), 0);
        assert_eq!(argmax(&[-2.0, -1.0, -3.0]), 1);
    }
}
