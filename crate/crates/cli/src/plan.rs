use std::collections::BTreeMap;

use anyhow::Context;
use clap::Args;
use restep_core::sampler::{iteration_count, stepped_stream, window_starts, SamplerConfig};

#[derive(Args)]
pub struct PlanArgs {
    /// Items per batch (L)
    #[arg(long)]
    batch_size: usize,
    /// Items per window (m)
    #[arg(long)]
    step_size: usize,
    /// Distance between window starts (n)
    #[arg(long)]
    step_stride: usize,
    /// Also summarize streaming this configuration over a dataset of N items
    #[arg(long)]
    dataset_len: Option<usize>,
    /// Emit JSON instead of text
    #[arg(long)]
    json: bool,
}

/// Per-batch window counts for a whole dataset; a missing final batch means
/// its tail was too short to re-window.
struct StreamSummary {
    dataset_len: usize,
    /// batch index -> (start, len, windows)
    batches: Vec<(usize, usize, usize)>,
    total_windows: usize,
}

fn summarize_stream(dataset_len: usize, cfg: &SamplerConfig) -> anyhow::Result<StreamSummary> {
    let mut windows_by_batch: BTreeMap<usize, usize> = BTreeMap::new();
    for (batch_index, _) in stepped_stream(dataset_len, cfg, false)? {
        *windows_by_batch.entry(batch_index).or_insert(0) += 1;
    }
    let batch_count = dataset_len.div_ceil(cfg.batch_size);
    let batches = (0..batch_count)
        .map(|k| {
            let start = k * cfg.batch_size;
            let len = cfg.batch_size.min(dataset_len - start);
            (start, len, windows_by_batch.get(&k).copied().unwrap_or(0))
        })
        .collect::<Vec<_>>();
    Ok(StreamSummary {
        dataset_len,
        total_windows: batches.iter().map(|b| b.2).sum(),
        batches,
    })
}

pub fn run(args: PlanArgs) -> anyhow::Result<()> {
    let cfg = SamplerConfig::new(args.batch_size, args.step_size, args.step_stride);
    let plan = window_starts(&cfg).context("cannot plan windows")?;
    let count = iteration_count(&cfg).expect("validated above");
    let stream = args
        .dataset_len
        .map(|n| summarize_stream(n, &cfg))
        .transpose()?;

    if args.json {
        let stream_json = stream.map(|s| {
            serde_json::json!({
                "dataset_len": s.dataset_len,
                "batches": s
                    .batches
                    .iter()
                    .map(|&(start, len, windows)| serde_json::json!({
                        "start": start,
                        "len": len,
                        "windows": windows,
                    }))
                    .collect::<Vec<_>>(),
                "total_windows": s.total_windows,
            })
        });
        let mut doc = serde_json::json!({
            "batch_size": cfg.batch_size,
            "step_size": cfg.step_size,
            "step_stride": cfg.step_stride,
            "window_starts": plan.starts,
            "window_count": count.window_count,
            "d_exact": {
                "num": count.d_exact.num(),
                "den": count.d_exact.den(),
                "value": count.d_exact.as_f64(),
                "text": count.d_exact.to_string(),
            },
            "dropped_tail_len": plan.dropped_tail_len,
        });
        if let Some(s) = stream_json {
            doc["stream"] = s;
        }
        println!("{}", serde_json::to_string_pretty(&doc)?);
        return Ok(());
    }

    println!(
        "batch_size {}, step_size {}, step_stride {}",
        cfg.batch_size, cfg.step_size, cfg.step_stride
    );
    let starts: Vec<String> = plan.starts.iter().map(|s| s.to_string()).collect();
    println!("window starts: {}", starts.join(", "));
    println!("window count: {}", count.window_count);
    println!("d_exact: {} = {:.6}", count.d_exact, count.d_exact.as_f64());
    println!("dropped tail length: {}", plan.dropped_tail_len);
    if let Some(s) = stream {
        println!(
            "dataset of {} items: {} batches, {} windows",
            s.dataset_len,
            s.batches.len(),
            s.total_windows
        );
        for (k, &(start, len, windows)) in s.batches.iter().enumerate() {
            let tail = if len < cfg.batch_size { " (tail)" } else { "" };
            if windows == 0 {
                println!(
                    "  batch {k} [{start}..{}){tail}: skipped, {} items cannot fill a {}-item window",
                    start + len,
                    len,
                    cfg.step_size
                );
            } else {
                println!(
                    "  batch {k} [{start}..{}){tail}: {windows} windows",
                    start + len
                );
            }
        }
    }
    Ok(())
}
