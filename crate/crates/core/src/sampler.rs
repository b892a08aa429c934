//! Stepped sub-batch sampling.
//!
//! A batch of `batch_size` (L) consecutive items is divided into overlapping
//! windows of `step_size` (m) items whose starts advance by `step_stride` (n).
//! Consecutive windows share their trailing and leading `m - n` items, so the
//! shared items are fed to the model again, the "adjacent repetition" that
//! the sampler exists to produce. With `n = m` the windows tile the batch
//! disjointly; with `m = L` the sampler degenerates to the plain batch
//! sampler.
//!
//! Window starts are `0, n, 2n, ...` for as long as a full window fits in the
//! batch. Whatever tail the last window does not cover is dropped and
//! reported as `dropped_tail_len`, which is zero exactly when `(L - m) % n == 0`.
//! In that case the windowing is invertible: [`restore`] rebuilds the original
//! batch by keeping the first window and the last `n` items of every
//! subsequent window.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SamplerError {
    #[error("batch size, step size, and step stride must all be positive (got L={batch_size}, m={step_size}, n={step_stride})")]
    ZeroField {
        batch_size: usize,
        step_size: usize,
        step_stride: usize,
    },
    #[error("step size m={step_size} exceeds batch size L={batch_size}")]
    StepSizeTooLarge { step_size: usize, batch_size: usize },
    #[error("step stride n={step_stride} exceeds step size m={step_size}; windows would silently skip data")]
    StrideTooLarge {
        step_stride: usize,
        step_size: usize,
    },
    #[error("batch has {got} items but the configuration expects L={expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("expected {expected} windows for this configuration, got {got}")]
    WindowCountMismatch { expected: usize, got: usize },
    #[error("window {index} does not overlap its predecessor by m - n items")]
    InconsistentOverlap { index: usize },
}

/// The (L, m, n) triple governing window generation.
///
/// Invariants: `1 <= step_size <= batch_size` and `1 <= step_stride <= step_size`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Number of consecutive items grouped into one batch (L).
    pub batch_size: usize,
    /// Length of each sub-batch window (m).
    pub step_size: usize,
    /// Offset between consecutive window starts (n).
    pub step_stride: usize,
}

impl SamplerConfig {
    pub fn new(batch_size: usize, step_size: usize, step_stride: usize) -> Self {
        SamplerConfig {
            batch_size,
            step_size,
            step_stride,
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        validate_config(self)
    }

    /// Items shared by consecutive windows (m - n).
    pub fn overlap(&self) -> usize {
        self.step_size - self.step_stride
    }
}

/// Ordered window start offsets for one batch, plus the uncovered tail length.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WindowPlan {
    /// Start offsets `0, n, 2n, ...` within the batch.
    pub starts: Vec<usize>,
    /// Window length (= m).
    pub window_len: usize,
    /// Trailing batch items covered by no full window.
    pub dropped_tail_len: usize,
}

/// One contiguous window of `m` items taken from a batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubBatch<T> {
    pub indices: Vec<T>,
}

/// A non-negative rational kept in lowest terms.
///
/// The per-batch iteration count `(L - m) / n` is only an integer when the
/// stride divides the span, so it is exposed exactly rather than rounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0, "zero denominator");
        let g = gcd(num.max(1), den);
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn floor(&self) -> u64 {
        self.num / self.den
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Exact and operational iteration counts for one batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct IterationCount {
    /// `(L - m) / n` in lowest terms.
    pub d_exact: Ratio,
    /// Number of windows actually emitted: `floor(d_exact) + 1`.
    pub window_count: usize,
}

pub fn validate_config(cfg: &SamplerConfig) -> Result<(), SamplerError> {
    if cfg.batch_size == 0 || cfg.step_size == 0 || cfg.step_stride == 0 {
        return Err(SamplerError::ZeroField {
            batch_size: cfg.batch_size,
            step_size: cfg.step_size,
            step_stride: cfg.step_stride,
        });
    }
    if cfg.step_size > cfg.batch_size {
        return Err(SamplerError::StepSizeTooLarge {
            step_size: cfg.step_size,
            batch_size: cfg.batch_size,
        });
    }
    if cfg.step_stride > cfg.step_size {
        return Err(SamplerError::StrideTooLarge {
            step_stride: cfg.step_stride,
            step_size: cfg.step_size,
        });
    }
    Ok(())
}

/// Computes the window plan for one batch: starts `i * n` while a full window
/// still fits (`start + m <= L`), and the length of the uncovered tail.
pub fn window_starts(cfg: &SamplerConfig) -> Result<WindowPlan, SamplerError> {
    validate_config(cfg)?;
    let (l, m, n) = (cfg.batch_size, cfg.step_size, cfg.step_stride);
    let count = (l - m) / n + 1;
    let starts: Vec<usize> = (0..count).map(|i| i * n).collect();
    let last = starts[count - 1];
    Ok(WindowPlan {
        starts,
        window_len: m,
        dropped_tail_len: l - (last + m),
    })
}

/// The per-batch iteration count `(L - m) / n`, exact and floored.
///
/// `window_count` always equals `window_starts(cfg).starts.len()`.
pub fn iteration_count(cfg: &SamplerConfig) -> Result<IterationCount, SamplerError> {
    validate_config(cfg)?;
    let d_exact = Ratio::new(
        (cfg.batch_size - cfg.step_size) as u64,
        cfg.step_stride as u64,
    );
    Ok(IterationCount {
        d_exact,
        window_count: d_exact.floor() as usize + 1,
    })
}

/// Cuts one batch into its stepped sub-batches.
pub fn sub_batches<T: Clone>(
    batch: &[T],
    cfg: &SamplerConfig,
) -> Result<Vec<SubBatch<T>>, SamplerError> {
    let plan = window_starts(cfg)?;
    if batch.len() != cfg.batch_size {
        return Err(SamplerError::LengthMismatch {
            expected: cfg.batch_size,
            got: batch.len(),
        });
    }
    Ok(plan
        .starts
        .iter()
        .map(|&s| SubBatch {
            indices: batch[s..s + plan.window_len].to_vec(),
        })
        .collect())
}

/// The covered prefix recovered by [`restore`], plus the tail length that the
/// windows never saw.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Restored<T> {
    pub covered: Vec<T>,
    pub dropped_tail_len: usize,
}

/// Inverts [`sub_batches`]: keeps the first window whole and appends the last
/// `n` items of every subsequent window, after checking that each adjacent
/// pair really overlaps by `m - n` items.
///
/// The result equals the original batch exactly when `dropped_tail_len == 0`,
/// i.e. when `(L - m) % n == 0`; otherwise it is the batch prefix of length
/// `last_start + m`.
pub fn restore<T: Clone + PartialEq>(
    windows: &[SubBatch<T>],
    cfg: &SamplerConfig,
) -> Result<Restored<T>, SamplerError> {
    let plan = window_starts(cfg)?;
    if windows.len() != plan.starts.len() {
        return Err(SamplerError::WindowCountMismatch {
            expected: plan.starts.len(),
            got: windows.len(),
        });
    }
    let (m, n) = (cfg.step_size, cfg.step_stride);
    for (i, w) in windows.iter().enumerate() {
        if w.indices.len() != m {
            return Err(SamplerError::LengthMismatch {
                expected: m,
                got: w.indices.len(),
            });
        }
        if i > 0 && windows[i - 1].indices[n..] != w.indices[..m - n] {
            return Err(SamplerError::InconsistentOverlap { index: i });
        }
    }
    let mut covered = windows[0].indices.clone();
    for w in &windows[1..] {
        covered.extend_from_slice(&w.indices[m - n..]);
    }
    Ok(Restored {
        covered,
        dropped_tail_len: cfg.batch_size - (plan.starts[plan.starts.len() - 1] + m),
    })
}

/// Streams stepped sub-batches over sequential dataset indices `0..dataset_len`.
///
/// The index stream is chunked into batches of `batch_size` and each batch is
/// windowed in place. A trailing batch shorter than `batch_size` is dropped
/// when `drop_last_batch` is set; otherwise it is re-windowed with its own
/// length as the batch size, or skipped with a warning if even one window
/// does not fit.
pub fn stepped_stream(
    dataset_len: usize,
    cfg: &SamplerConfig,
    drop_last_batch: bool,
) -> Result<SteppedStream, SamplerError> {
    validate_config(cfg)?;
    Ok(SteppedStream {
        cfg: *cfg,
        dataset_len,
        drop_last_batch,
        next_batch_start: 0,
        next_batch_index: 0,
        current_batch: None,
        done: false,
    })
}

/// Iterator returned by [`stepped_stream`]; yields `(batch_index, SubBatch)`.
pub struct SteppedStream {
    cfg: SamplerConfig,
    dataset_len: usize,
    drop_last_batch: bool,
    next_batch_start: usize,
    next_batch_index: usize,
    current_batch: Option<BatchWindows>,
    done: bool,
}

struct BatchWindows {
    batch_index: usize,
    batch_start: usize,
    window_len: usize,
    starts: std::vec::IntoIter<usize>,
}

impl SteppedStream {
    fn advance_batch(&mut self) -> bool {
        loop {
            if self.next_batch_start >= self.dataset_len {
                return false;
            }
            let batch_start = self.next_batch_start;
            let batch_len = (self.dataset_len - batch_start).min(self.cfg.batch_size);
            let batch_index = self.next_batch_index;
            self.next_batch_start += batch_len;
            self.next_batch_index += 1;

            let effective = if batch_len == self.cfg.batch_size {
                self.cfg
            } else if self.drop_last_batch {
                return false;
            } else if self.cfg.step_size <= batch_len {
                SamplerConfig {
                    batch_size: batch_len,
                    ..self.cfg
                }
            } else {
                log::warn!(
                    "skipping trailing batch of {batch_len} items: step size {} does not fit",
                    self.cfg.step_size
                );
                continue;
            };
            // validate_config already ran; a full window fits, so the plan is non-empty.
            let plan = window_starts(&effective).expect("effective config is valid");
            self.current_batch = Some(BatchWindows {
                batch_index,
                batch_start,
                window_len: plan.window_len,
                starts: plan.starts.into_iter(),
            });
            return true;
        }
    }
}

impl Iterator for SteppedStream {
    type Item = (usize, SubBatch<usize>);

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.done {
                return None;
            }
            if let Some(batch) = self.current_batch.as_mut() {
                if let Some(start) = batch.starts.next() {
                    let lo = batch.batch_start + start;
                    return Some((
                        batch.batch_index,
                        SubBatch {
                            indices: (lo..lo + batch.window_len).collect(),
                        },
                    ));
                }
                self.current_batch = None;
            }
            if !self.advance_batch() {
                self.done = true;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct simulation of the sampler's cursor arithmetic: walk the batch
    /// one index at a time, emit a window whenever `m` items have
    /// accumulated, then rewind the cursor by `m - n`. Kept independent of
    /// the closed-form implementation above.
    fn simulated_starts(l: usize, m: usize, n: usize) -> Vec<usize> {
        let mut starts = Vec::new();
        let mut step = Vec::new();
        let mut idx = 0usize;
        while idx < l {
            step.push(idx);
            idx += 1;
            if step.len() == m {
                starts.push(step[0]);
                step.clear();
                idx = idx - m + n;
            }
        }
        starts
    }

    #[test]
    fn validate_accepts_and_rejects_the_documented_bounds() {
        assert!(validate_config(&SamplerConfig::new(5, 3, 1)).is_ok());
        assert!(validate_config(&SamplerConfig::new(5, 5, 1)).is_ok());
        assert_eq!(
            validate_config(&SamplerConfig::new(5, 6, 1)),
            Err(SamplerError::StepSizeTooLarge {
                step_size: 6,
                batch_size: 5
            })
        );
        assert_eq!(
            validate_config(&SamplerConfig::new(5, 3, 4)),
            Err(SamplerError::StrideTooLarge {
                step_stride: 4,
                step_size: 3
            })
        );
        assert!(matches!(
            validate_config(&SamplerConfig::new(5, 0, 1)),
            Err(SamplerError::ZeroField { .. })
        ));
    }

    #[test]
    fn window_starts_matches_the_worked_cases() {
        let plan = window_starts(&SamplerConfig::new(5, 3, 1)).unwrap();
        assert_eq!(plan.starts, vec![0, 1, 2]);
        assert_eq!(plan.dropped_tail_len, 0);

        let plan = window_starts(&SamplerConfig::new(4, 4, 1)).unwrap();
        assert_eq!(plan.starts, vec![0]);
        assert_eq!(plan.dropped_tail_len, 0);

        // Index 24 never fills a 20-item window.
        let plan = window_starts(&SamplerConfig::new(25, 20, 2)).unwrap();
        assert_eq!(plan.starts, vec![0, 2, 4]);
        assert_eq!(plan.dropped_tail_len, 1);

        // The next start, 6, would exceed L - m = 5.
        let plan = window_starts(&SamplerConfig::new(15, 10, 3)).unwrap();
        assert_eq!(plan.starts, vec![0, 3]);
        assert_eq!(plan.dropped_tail_len, 2);
    }

    #[test]
    fn window_starts_equals_cursor_simulation_up_to_l_32() {
        for l in 1..=32 {
            for m in 1..=l {
                for n in 1..=m {
                    let plan = window_starts(&SamplerConfig::new(l, m, n)).unwrap();
                    assert_eq!(plan.starts, simulated_starts(l, m, n), "L={l} m={m} n={n}");
                }
            }
        }
    }

    #[test]
    fn iteration_count_exposes_exact_and_floored_d() {
        let it = iteration_count(&SamplerConfig::new(5, 3, 1)).unwrap();
        assert_eq!(it.d_exact, Ratio::new(2, 1));
        assert_eq!(it.window_count, 3);

        let it = iteration_count(&SamplerConfig::new(15, 10, 5)).unwrap();
        assert_eq!(it.d_exact, Ratio::new(1, 1));
        assert_eq!(it.window_count, 2);

        let it = iteration_count(&SamplerConfig::new(25, 20, 3)).unwrap();
        assert_eq!(it.d_exact, Ratio::new(5, 3));
        assert_eq!(it.d_exact.to_string(), "5/3");
        assert_eq!(it.window_count, 2);
        assert_eq!(
            it.window_count,
            window_starts(&SamplerConfig::new(25, 20, 3))
                .unwrap()
                .starts
                .len()
        );
    }

    #[test]
    fn sub_batches_extracts_overlapping_windows() {
        let got = sub_batches(&[10, 11, 12, 13, 14], &SamplerConfig::new(5, 3, 1)).unwrap();
        let want: Vec<Vec<i32>> = vec![vec![10, 11, 12], vec![11, 12, 13], vec![12, 13, 14]];
        assert_eq!(
            got.iter().map(|s| s.indices.clone()).collect::<Vec<_>>(),
            want
        );

        let got = sub_batches(&[7, 8, 9], &SamplerConfig::new(3, 3, 1)).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].indices, vec![7, 8, 9]);

        let batch: Vec<usize> = (0..15).collect();
        let got = sub_batches(&batch, &SamplerConfig::new(15, 10, 5)).unwrap();
        assert_eq!(got[0].indices, (0..10).collect::<Vec<_>>());
        assert_eq!(got[1].indices, (5..15).collect::<Vec<_>>());

        assert_eq!(
            sub_batches(&[1, 2, 3], &SamplerConfig::new(5, 3, 1)),
            Err(SamplerError::LengthMismatch {
                expected: 5,
                got: 3
            })
        );
    }

    #[test]
    fn restore_round_trips_and_reports_the_tail() {
        let cfg = SamplerConfig::new(5, 3, 1);
        let windows = sub_batches(&[0, 1, 2, 3, 4], &cfg).unwrap();
        let r = restore(&windows, &cfg).unwrap();
        assert_eq!(r.covered, vec![0, 1, 2, 3, 4]);
        assert_eq!(r.dropped_tail_len, 0);

        let cfg = SamplerConfig::new(15, 10, 3);
        let batch: Vec<usize> = (0..15).collect();
        let r = restore(&sub_batches(&batch, &cfg).unwrap(), &cfg).unwrap();
        assert_eq!(r.covered, (0..13).collect::<Vec<_>>());
        assert_eq!(r.dropped_tail_len, 2);

        let cfg = SamplerConfig::new(3, 3, 1);
        let windows = vec![SubBatch {
            indices: vec![5, 6, 7],
        }];
        let r = restore(&windows, &cfg).unwrap();
        assert_eq!(r.covered, vec![5, 6, 7]);
        assert_eq!(r.dropped_tail_len, 0);
    }

    #[test]
    fn restore_rejects_inconsistent_windows() {
        let cfg = SamplerConfig::new(5, 3, 1);
        let windows = vec![
            SubBatch {
                indices: vec![0, 1, 2],
            },
            SubBatch {
                indices: vec![9, 2, 3],
            },
            SubBatch {
                indices: vec![2, 3, 4],
            },
        ];
        assert_eq!(
            restore(&windows, &cfg),
            Err(SamplerError::InconsistentOverlap { index: 1 })
        );

        let too_few = vec![SubBatch {
            indices: vec![0, 1, 2],
        }];
        assert_eq!(
            restore(&too_few, &cfg),
            Err(SamplerError::WindowCountMismatch {
                expected: 3,
                got: 1
            })
        );
    }

    #[test]
    fn stream_windows_batch_by_batch() {
        let cfg = SamplerConfig::new(5, 3, 1);
        let got: Vec<_> = stepped_stream(10, &cfg, false).unwrap().collect();
        assert_eq!(got.len(), 6);
        assert_eq!(
            got[0],
            (
                0,
                SubBatch {
                    indices: vec![0, 1, 2]
                }
            )
        );
        assert_eq!(
            got[2],
            (
                0,
                SubBatch {
                    indices: vec![2, 3, 4]
                }
            )
        );
        assert_eq!(
            got[3],
            (
                1,
                SubBatch {
                    indices: vec![5, 6, 7]
                }
            )
        );
        assert_eq!(
            got[5],
            (
                1,
                SubBatch {
                    indices: vec![7, 8, 9]
                }
            )
        );
    }

    #[test]
    fn stream_degenerates_to_the_batch_sampler_when_m_equals_l() {
        let cfg = SamplerConfig::new(5, 5, 1);
        let got: Vec<_> = stepped_stream(5, &cfg, false).unwrap().collect();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].1.indices, (0..5).collect::<Vec<_>>());
    }

    #[test]
    fn stream_tail_handling() {
        let cfg = SamplerConfig::new(5, 3, 1);
        // drop_last on: tail batch of 2 is dropped.
        let got: Vec<_> = stepped_stream(7, &cfg, true).unwrap().collect();
        assert_eq!(got.len(), 3);
        // drop_last off: tail of 2 cannot fit a 3-item window and is skipped.
        let got: Vec<_> = stepped_stream(7, &cfg, false).unwrap().collect();
        assert_eq!(got.len(), 3);
        // drop_last off with a tail of 4: re-windowed with L' = 4.
        let got: Vec<_> = stepped_stream(9, &cfg, false).unwrap().collect();
        assert_eq!(got.len(), 5);
        assert_eq!(got[3].1.indices, vec![5, 6, 7]);
        assert_eq!(got[4].1.indices, vec![6, 7, 8]);
        assert_eq!(got[4].0, 1);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn config_strategy() -> impl Strategy<Value = SamplerConfig> {
            (1usize..=32)
                .prop_flat_map(|l| (Just(l), 1..=l))
                .prop_flat_map(|(l, m)| (Just(l), Just(m), 1..=m))
                .prop_map(|(l, m, n)| SamplerConfig::new(l, m, n))
        }

        proptest! {
            #[test]
            fn starts_follow_the_count_law(cfg in config_strategy()) {
                let plan = window_starts(&cfg).unwrap();
                let (l, m, n) = (cfg.batch_size, cfg.step_size, cfg.step_stride);
                prop_assert_eq!(plan.starts.len(), (l - m) / n + 1);
                for (i, &s) in plan.starts.iter().enumerate() {
                    prop_assert_eq!(s, i * n);
                }
                let last = *plan.starts.last().unwrap();
                prop_assert!(last + m <= l);
                prop_assert_eq!(plan.dropped_tail_len, l - (last + m));
                prop_assert_eq!(plan.dropped_tail_len == 0, (l - m) % n == 0);
                if n == 1 {
                    prop_assert_eq!(plan.starts.len(), l - m + 1);
                    let it = iteration_count(&cfg).unwrap();
                    prop_assert_eq!(it.d_exact, Ratio::new((l - m) as u64, 1));
                }
            }

            #[test]
            fn adjacent_windows_repeat_m_minus_n_items(
                cfg in config_strategy(),
                salt in any::<u64>(),
            ) {
                let batch: Vec<u64> = (0..cfg.batch_size as u64).map(|i| i ^ salt).collect();
                let windows = sub_batches(&batch, &cfg).unwrap();
                let overlap = cfg.overlap();
                for pair in windows.windows(2) {
                    prop_assert_eq!(
                        &pair[0].indices[cfg.step_stride..],
                        &pair[1].indices[..overlap]
                    );
                }
            }

            #[test]
            fn restore_recovers_the_covered_prefix(cfg in config_strategy(), salt in any::<u64>()) {
                let batch: Vec<u64> = (0..cfg.batch_size as u64).map(|i| i.wrapping_mul(salt | 1)).collect();
                let windows = sub_batches(&batch, &cfg).unwrap();
                let r = restore(&windows, &cfg).unwrap();
                let covered_len = cfg.batch_size - r.dropped_tail_len;
                prop_assert_eq!(&r.covered[..], &batch[..covered_len]);
                if (cfg.batch_size - cfg.step_size) % cfg.step_stride == 0 {
                    prop_assert_eq!(&r.covered[..], &batch[..]);
                }
            }

            #[test]
            fn m_equals_l_reduces_to_the_plain_batch(l in 1usize..=32, n_seed in 1usize..=32) {
                let cfg = SamplerConfig::new(l, l, 1 + n_seed % l);
                let batch: Vec<usize> = (100..100 + l).collect();
                let windows = sub_batches(&batch, &cfg).unwrap();
                prop_assert_eq!(windows.len(), 1);
                prop_assert_eq!(&windows[0].indices[..], &batch[..]);
            }

            #[test]
            fn planning_is_deterministic(cfg in config_strategy()) {
                prop_assert_eq!(window_starts(&cfg).unwrap(), window_starts(&cfg).unwrap());
            }
        }
    }
}
