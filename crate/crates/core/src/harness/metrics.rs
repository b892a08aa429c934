//! Convergence summaries over per-epoch training records.

use serde::Serialize;

use crate::harness::{HarnessError, TrainingRecord};
use crate::linalg::population_std;

/// Epochs of trailing loss used for the jitter estimate unless overridden.
pub const DEFAULT_TAIL_WINDOW: usize = 20;

/// Loss level a run is expected to settle under: 20% above its own minimum.
/// `None` when there are no records to take a minimum over.
pub fn default_loss_threshold(records: &[TrainingRecord]) -> Option<f64> {
    records
        .iter()
        .map(|r| r.train_loss)
        .min_by(|a, b| a.total_cmp(b))
        .map(|min| 1.2 * min)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub loss_threshold: f64,
    pub tail_window: usize,
    /// First epoch whose train loss is at or under the threshold; `None` if
    /// the run never reaches it.
    pub epoch_to_loss_threshold: Option<usize>,
    /// Population standard deviation of the last `tail_window` train losses.
    pub post_convergence_jitter: f64,
    pub best_test_accuracy: f64,
    /// Epoch of the best accuracy; earliest wins ties.
    pub best_accuracy_epoch: usize,
}

/// Summarizes how fast a run converged and how stable it stayed.
pub fn convergence_metrics(
    records: &[TrainingRecord],
    loss_threshold: f64,
    tail_window: usize,
) -> Result<ConvergenceSummary, HarnessError> {
    if tail_window == 0 || tail_window > records.len() {
        return Err(HarnessError::WindowTooLarge {
            window: tail_window,
            len: records.len(),
        });
    }

    let epoch_to_loss_threshold = records
        .iter()
        .find(|r| r.train_loss <= loss_threshold)
        .map(|r| r.epoch);

    let tail: Vec<f64> = records[records.len() - tail_window..]
        .iter()
        .map(|r| r.train_loss)
        .collect();
    let post_convergence_jitter = population_std(&tail);

    let mut best = &records[0];
    for r in &records[1..] {
        if r.test_accuracy > best.test_accuracy {
            best = r;
        }
    }

    Ok(ConvergenceSummary {
        loss_threshold,
        tail_window,
        epoch_to_loss_threshold,
        post_convergence_jitter,
        best_test_accuracy: best.test_accuracy,
        best_accuracy_epoch: best.epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records_from_losses(losses: &[f64]) -> Vec<TrainingRecord> {
        losses
            .iter()
            .enumerate()
            .map(|(i, &l)| TrainingRecord {
                epoch: i + 1,
                train_loss: l,
                test_accuracy: 0.5,
            })
            .collect()
    }

    #[test]
    fn worked_example_pins_threshold_epoch_and_jitter() {
        let records = records_from_losses(&[3.0, 2.0, 1.0, 1.5, 0.5]);
        let summary = convergence_metrics(&records, 1.0, 3).unwrap();
        assert_eq!(summary.epoch_to_loss_threshold, Some(3));
        // Tail [1.0, 1.5, 0.5]: mean 1.0, variance 1/6.
        let expected = (1.0f64 / 6.0).sqrt();
        assert!((summary.post_convergence_jitter - expected).abs() < 1e-12);
        assert!((expected - 0.408248).abs() < 1e-6);
    }

    #[test]
    fn threshold_never_reached_reports_none() {
        let records = records_from_losses(&[3.0, 2.0, 1.5]);
        let summary = convergence_metrics(&records, 1.0, 2).unwrap();
        assert_eq!(summary.epoch_to_loss_threshold, None);
    }

    #[test]
    fn default_threshold_sits_twenty_percent_above_the_minimum() {
        let records = records_from_losses(&[3.0, 0.5, 1.0]);
        assert_eq!(default_loss_threshold(&records), Some(0.6));
        assert_eq!(default_loss_threshold(&[]), None);
    }

    #[test]
    fn best_accuracy_takes_the_earliest_tie() {
        let mut records = records_from_losses(&[1.0, 1.0, 1.0, 1.0]);
        records[1].test_accuracy = 0.9;
        records[3].test_accuracy = 0.9;
        let summary = convergence_metrics(&records, 2.0, 2).unwrap();
        assert_eq!(summary.best_test_accuracy, 0.9);
        assert_eq!(summary.best_accuracy_epoch, 2);
    }

    #[test]
    fn oversized_or_empty_windows_are_rejected() {
        let records = records_from_losses(&[1.0, 2.0]);
        assert!(matches!(
            convergence_metrics(&records, 1.0, 3),
            Err(HarnessError::WindowTooLarge { window: 3, len: 2 })
        ));
        assert!(matches!(
            convergence_metrics(&records, 1.0, 0),
            Err(HarnessError::WindowTooLarge { window: 0, .. })
        ));
        assert!(matches!(
            convergence_metrics(&[], 1.0, 1),
            Err(HarnessError::WindowTooLarge { window: 1, len: 0 })
        ));
    }

    #[test]
    fn whole_run_window_is_allowed() {
        let records = records_from_losses(&[2.0, 2.0]);
        let summary = convergence_metrics(&records, 3.0, 2).unwrap();
        assert_eq!(summary.post_convergence_jitter, 0.0);
        assert_eq!(summary.epoch_to_loss_threshold, Some(1));
    }
}
