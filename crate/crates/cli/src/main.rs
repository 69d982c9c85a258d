use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use imbalab_cli::commands;
use imbalab_cli::config::ScalarKind;
use imbalab_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "imbalab", version, about = "Concept-balanced diffusion experiments on 2-D mixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set train.loss.kind=imba`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory (beats `out_dir` and IMBALAB_OUT).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the configured mixture to data.csv.
    GenData(Common),
    /// Train a model; writes model.ckpt and train_log.csv.
    Train(Common),
    /// Draw samples and trajectories from a checkpoint.
    Sample(Common),
    /// Per-class IMBA distance at maximum noise.
    Probe(Common),
    /// Denoising direction of a checkpoint or the oracle on a lattice.
    ScoreField(Common),
    /// One-axis sweep over seeds; writes results.csv and summary.csv.
    Experiment(Common),
    /// Render a CSV as an SVG scatter, quiver, trajectory or bar plot.
    Figure(Common),
    /// Build a head/tail concept-pair benchmark from a caption corpus.
    BenchBuild(Common),
    /// Train per ratio and emit conditional and unconditional figures.
    Report(Common),
    /// Print the fully resolved configuration as TOML.
    ShowConfig(Common),
}

macro_rules! by_scalar {
    ($cfg:expr, $f:ident, $out:expr) => {
        match $cfg.scalar {
            ScalarKind::F64 => commands::$f::<f64>($cfg, $out),
            ScalarKind::F32 => commands::$f::<f32>($cfg, $out),
        }
    };
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let (common, command) = match cli.command {
        Command::GenData(c) => (c, "gen-data"),
        Command::Train(c) => (c, "train"),
        Command::Sample(c) => (c, "sample"),
        Command::Probe(c) => (c, "probe"),
        Command::ScoreField(c) => (c, "score-field"),
        Command::Experiment(c) => (c, "experiment"),
        Command::Figure(c) => (c, "figure"),
        Command::BenchBuild(c) => (c, "bench-build"),
        Command::Report(c) => (c, "report"),
        Command::ShowConfig(c) => (c, "show-config"),
    };
    let cfg = RunConfig::load(common.config.as_deref(), &common.sets)?;
    let out = cfg.out_dir(common.out.as_deref());
    let out: &Path = &out;
    match command {
        "gen-data" => by_scalar!(&cfg, gen_data, out),
        "train" => by_scalar!(&cfg, train_cmd, out),
        "sample" => by_scalar!(&cfg, sample_cmd, out),
        "probe" => by_scalar!(&cfg, probe_cmd, out),
        "score-field" => by_scalar!(&cfg, score_field_cmd, out),
        "experiment" => by_scalar!(&cfg, experiment_cmd, out),
        "report" => by_scalar!(&cfg, report_cmd, out),
        "figure" => commands::figure_cmd(&cfg, out),
        "bench-build" => commands::bench_build_cmd(&cfg, out),
        _ => {
            print!("{}", cfg.to_toml());
            Ok(Vec::new())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("imbalab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
