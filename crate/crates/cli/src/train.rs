use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use restep_core::harness::{
    convergence_metrics, curves_script, default_loss_threshold, emit_csv, run_experiment_full,
    ArtifactHashes, ConvergenceSummary, ExperimentConfig, PlotSeries, RunOutput,
    DEFAULT_TAIL_WINDOW,
};
use restep_core::nn::save_checkpoint;

#[derive(Args)]
pub struct TrainArgs {
    /// Experiment description (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing
    #[arg(long)]
    out: PathBuf,
    /// Loss threshold for convergence timing; defaults to 20% above the
    /// run's minimum loss
    #[arg(long)]
    tau: Option<f64>,
    /// Trailing epochs used for the jitter estimate
    #[arg(long, default_value_t = DEFAULT_TAIL_WINDOW)]
    tail_window: usize,
}

fn hashes_json(h: &ArtifactHashes) -> serde_json::Value {
    serde_json::json!({
        "dataset": format!("{:016x}", h.dataset),
        "split": format!("{:016x}", h.split),
        "init_params": format!("{:016x}", h.init_params),
        "eval_order": format!("{:016x}", h.eval_order),
    })
}

fn summarize(
    out: &RunOutput,
    tau: Option<f64>,
    tail_window: usize,
) -> anyhow::Result<Option<ConvergenceSummary>> {
    if out.records.is_empty() {
        return Ok(None);
    }
    let tau = tau
        .or_else(|| default_loss_threshold(&out.records))
        .expect("non-empty records have a minimum");
    let window = tail_window.min(out.records.len());
    if window < tail_window {
        log::warn!(
            "tail window {tail_window} exceeds the {}-epoch run; using {window}",
            out.records.len()
        );
    }
    Ok(Some(convergence_metrics(&out.records, tau, window)?))
}

pub fn run(args: TrainArgs) -> anyhow::Result<()> {
    let config = ExperimentConfig::from_json_file(&args.config)
        .with_context(|| format!("cannot load {}", args.config.display()))?;
    let out = run_experiment_full(&config).context("experiment failed")?;
    let summary = summarize(&out, args.tau, args.tail_window)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    emit_csv(&out.records, &args.out.join("records.csv"))?;
    fs::write(
        args.out.join("config.json"),
        serde_json::to_string_pretty(&config)?,
    )?;
    if let Some(manifest) = config.dataset_manifest() {
        fs::write(
            args.out.join("dataset_manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
    }
    let summary_doc = serde_json::json!({
        "epochs": out.records.len(),
        "updates_per_epoch": out.updates_per_epoch,
        "final": out.records.last(),
        "convergence": summary,
        "artifact_hashes": hashes_json(&out.hashes),
    });
    fs::write(
        args.out.join("summary.json"),
        serde_json::to_string_pretty(&summary_doc)?,
    )?;
    let series = [PlotSeries {
        title: config.sampler.label(),
        csv_path: "records.csv".to_string(),
    }];
    fs::write(
        args.out.join("curves.gp"),
        curves_script(&series, "curves.png"),
    )?;
    save_checkpoint(&out.model, &args.out.join("model.ckpt"))?;

    println!(
        "trained {} epochs, {} updates per epoch",
        out.records.len(),
        out.updates_per_epoch
    );
    if let Some(last) = out.records.last() {
        println!(
            "final train loss {:.6}, test accuracy {:.6}",
            last.train_loss, last.test_accuracy
        );
    }
    if let Some(s) = &summary {
        match s.epoch_to_loss_threshold {
            Some(e) => println!(
                "loss threshold {:.6} first reached at epoch {e}",
                s.loss_threshold
            ),
            None => println!("loss threshold {:.6} never reached", s.loss_threshold),
        }
        println!(
            "best test accuracy {:.6} at epoch {}, jitter {:.6} over the last {} epochs",
            s.best_test_accuracy, s.best_accuracy_epoch, s.post_convergence_jitter, s.tail_window
        );
    }
    println!("artifacts written to {}", args.out.display());
    Ok(())
}
