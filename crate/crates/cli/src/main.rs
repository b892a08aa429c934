mod compare;
mod plan;
mod tinfo;
mod train;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "restep",
    version,
    about = "Stepped sub-batch sampling experiments: plan windows, score temporal information, train, compare"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan the overlapping windows for one batch, optionally streamed over a dataset
    Plan(plan::PlanArgs),
    /// Temporal-information report for an annotated video
    Tinfo(tinfo::TinfoArgs),
    /// Train one experiment and write its artifacts
    Train(train::TrainArgs),
    /// Run sampler variants side by side and tabulate checkpoint accuracy
    Compare(compare::CompareArgs),
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Plan(args) => plan::run(args),
        Command::Tinfo(args) => tinfo::run(args),
        Command::Train(args) => train::run(args),
        Command::Compare(args) => compare::run(args),
    }
}
