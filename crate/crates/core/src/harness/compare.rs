//! Side-by-side runs that differ only in their sampler, reported as a
//! checkpoint-epoch accuracy table.

use std::fmt;

use crate::harness::{run_experiment_full, ExperimentConfig, HarnessError, RunOutput};

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub name: String,
    /// Test accuracy at each checkpoint epoch; `None` when the run was
    /// shorter than that checkpoint.
    pub accuracy_at: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub checkpoints: Vec<usize>,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug)]
pub struct CompareOutput {
    pub table: ComparisonTable,
    /// Full run output per variant, in input order, keyed by row name.
    pub runs: Vec<(String, RunOutput)>,
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sampler");
        for cp in &self.checkpoints {
            out.push_str(&format!(",epoch_{cp}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.name);
            for cell in &row.accuracy_at {
                match cell {
                    Some(acc) => out.push_str(&format!(",{acc:.6}")),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name_width = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .chain(["sampler".len()])
            .max()
            .unwrap_or(0);
        write!(f, "{:<name_width$}", "sampler")?;
        for cp in &self.checkpoints {
            write!(f, "  {:>10}", format!("epoch_{cp}"))?;
        }
        writeln!(f)?;
        for row in &self.rows {
            write!(f, "{:<name_width$}", row.name)?;
            for cell in &row.accuracy_at {
                match cell {
                    Some(acc) => write!(f, "  {:>10.6}", acc)?,
                    None => write!(f, "  {:>10}", "-")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Runs every config and tabulates test accuracy at the checkpoint epochs.
///
/// The configs must be identical apart from their sampler; the shared
/// artifacts of each run (dataset, split, initial parameters, evaluation
/// order) are hash-checked to prove the comparison is sampler-only.
pub fn compare(
    configs: &[ExperimentConfig],
    checkpoints: &[usize],
) -> Result<CompareOutput, HarnessError> {
    let invalid = |reason: String| Err(HarnessError::ConfigInvalid { reason });
    let Some(first) = configs.first() else {
        return invalid("comparison needs at least one config".to_string());
    };
    for c in &configs[1..] {
        let mut shared = c.clone();
        shared.sampler = first.sampler;
        if shared != *first {
            return invalid("comparison variants may differ only in their sampler".to_string());
        }
    }
    let mut names: Vec<String> = configs.iter().map(|c| c.sampler.label()).collect();
    names.sort();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return invalid("comparison variants must have distinct sampler labels".to_string());
    }

    let mut runs = Vec::with_capacity(configs.len());
    for config in configs {
        runs.push((config.sampler.label(), run_experiment_full(config)?));
    }
    let reference = runs[0].1.hashes;
    for (_, out) in &runs {
        if out.hashes.dataset != reference.dataset {
            return Err(HarnessError::SharedArtifactDiverged { what: "dataset" });
        }
        if out.hashes.split != reference.split {
            return Err(HarnessError::SharedArtifactDiverged { what: "split" });
        }
        if out.hashes.init_params != reference.init_params {
            return Err(HarnessError::SharedArtifactDiverged {
                what: "initial parameters",
            });
        }
        if out.hashes.eval_order != reference.eval_order {
            return Err(HarnessError::SharedArtifactDiverged {
                what: "evaluation order",
            });
        }
    }

    let rows = runs
        .iter()
        .map(|(name, out)| ComparisonRow {
            name: name.clone(),
            accuracy_at: checkpoints
                .iter()
                .map(|&cp| {
                    cp.checked_sub(1)
                        .and_then(|i| out.records.get(i))
                        .map(|r| r.test_accuracy)
                })
                .collect(),
        })
        .collect();

    Ok(CompareOutput {
        table: ComparisonTable {
            checkpoints: checkpoints.to_vec(),
            rows,
        },
        runs,
    })
}
