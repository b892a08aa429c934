use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use restep_core::tinfo::annot::load_annotations;
use restep_core::tinfo::{aggregate_report, total_temporal_info, TemporalInfoReport};

#[derive(Args)]
pub struct TinfoArgs {
    /// Annotation document (JSON, one entry per frame)
    #[arg(long)]
    annotations: PathBuf,
    /// Report a single frame pair instead of the whole sequence
    #[arg(long, num_args = 2, value_names = ["I", "J"])]
    pair: Option<Vec<usize>>,
}

const HEADER: &str = "pair,t_between,t_within_overlap,t_within_disjoint,t_within,t_total";

fn row(label: &str, r: &TemporalInfoReport) -> String {
    format!(
        "{label},{:.6},{:.6},{:.6},{:.6},{:.6}",
        r.t_between, r.t_within_overlap, r.t_within_disjoint, r.t_within, r.t_total
    )
}

pub fn run(args: TinfoArgs) -> anyhow::Result<()> {
    let scenes = load_annotations(&args.annotations)
        .with_context(|| format!("cannot load {}", args.annotations.display()))?;

    println!("{HEADER}");
    if let Some(pair) = args.pair {
        let (i, j) = (pair[0], pair[1]);
        for idx in [i, j] {
            if idx >= scenes.len() {
                bail!(
                    "frame {idx} is out of range; the document has {} frames",
                    scenes.len()
                );
            }
        }
        let report = total_temporal_info(&scenes[i], &scenes[j])
            .with_context(|| format!("cannot score frames {i} and {j}"))?;
        println!("{}", row(&format!("{i}->{j}"), &report));
        return Ok(());
    }

    let mut reports = Vec::new();
    for (t, w) in scenes.windows(2).enumerate() {
        let report = total_temporal_info(&w[0], &w[1])
            .with_context(|| format!("cannot score frames {t} and {}", t + 1))?;
        println!("{}", row(&format!("{t}->{}", t + 1), &report));
        reports.push(report);
    }
    if let Some(mean) = aggregate_report(&reports) {
        println!("{}", row("mean", &mean));
    }
    Ok(())
}
