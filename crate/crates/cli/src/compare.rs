use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use restep_core::harness::{compare, curves_script, emit_csv, ExperimentConfig, PlotSeries};

#[derive(Args)]
pub struct CompareArgs {
    /// JSON array of experiment descriptions differing only in their sampler
    #[arg(long)]
    configs: PathBuf,
    /// Checkpoint epochs for the accuracy table, e.g. 10,50,100
    #[arg(long, value_delimiter = ',', required = true)]
    checkpoints: Vec<usize>,
    /// Output directory, created if missing
    #[arg(long)]
    out: PathBuf,
}

/// File-name-safe form of a variant label.
fn slug(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

pub fn run(args: CompareArgs) -> anyhow::Result<()> {
    let text = fs::read_to_string(&args.configs)
        .with_context(|| format!("cannot read {}", args.configs.display()))?;
    let configs: Vec<ExperimentConfig> = serde_json::from_str(&text)
        .with_context(|| format!("cannot parse {}", args.configs.display()))?;

    let out = compare(&configs, &args.checkpoints).context("comparison failed")?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    fs::write(args.out.join("comparison.csv"), out.table.to_csv())?;
    let mut series = Vec::with_capacity(out.runs.len());
    for (name, run) in &out.runs {
        let file = format!("{}.csv", slug(name));
        emit_csv(&run.records, &args.out.join(&file))?;
        series.push(PlotSeries {
            title: name.clone(),
            csv_path: file,
        });
    }
    fs::write(
        args.out.join("curves.gp"),
        curves_script(&series, "curves.png"),
    )?;

    print!("{}", out.table);
    println!(
        "shared artifacts verified identical across {} variants (dataset, split, initial parameters, evaluation order)",
        out.runs.len()
    );
    println!("artifacts written to {}", args.out.display());
    Ok(())
}
