//! The per-run CSV format: `epoch,train_loss,test_accuracy`, one row per
//! epoch, six decimal places, trailing newline. An empty run renders as the
//! header alone.

use std::fs;
use std::path::Path;

use crate::harness::{HarnessError, TrainingRecord};

pub const RECORDS_HEADER: &str = "epoch,train_loss,test_accuracy";

pub fn render_records_csv(records: &[TrainingRecord]) -> String {
    let mut out = String::with_capacity(32 * (records.len() + 1));
    out.push_str(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{:.6},{:.6}\n",
            r.epoch, r.train_loss, r.test_accuracy
        ));
    }
    out
}

/// Writes the CSV through a temporary file in the same directory, so the
/// destination is never observed half-written.
pub fn emit_csv(records: &[TrainingRecord], path: &Path) -> Result<(), HarnessError> {
    let mut tmp_name = path
        .file_name()
        .ok_or_else(|| HarnessError::ConfigInvalid {
            reason: format!("{} is not a file path", path.display()),
        })?
        .to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, render_records_csv(records))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn parse_records_csv(text: &str) -> Result<Vec<TrainingRecord>, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RECORDS_HEADER => {}
        other => {
            return Err(HarnessError::CsvParse {
                line: 1,
                reason: format!(
                    "expected header {:?}, found {:?}",
                    RECORDS_HEADER,
                    other.map(|(_, l)| l).unwrap_or("")
                ),
            });
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let mut fields = line.split(',');
        let parsed = (|| {
            let epoch = fields.next()?.parse::<usize>().ok()?;
            let train_loss = fields.next()?.parse::<f64>().ok()?;
            let test_accuracy = fields.next()?.parse::<f64>().ok()?;
            if fields.next().is_some() {
                return None;
            }
            Some(TrainingRecord {
                epoch,
                train_loss,
                test_accuracy,
            })
        })();
        match parsed {
            Some(r) => records.push(r),
            None => {
                return Err(HarnessError::CsvParse {
                    line: idx + 1,
                    reason: format!("expected `epoch,train_loss,test_accuracy`, found {line:?}"),
                });
            }
        }
    }
    Ok(records)
}
