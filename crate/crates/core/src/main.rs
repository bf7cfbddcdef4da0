use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use bsopt::config::{parse_override, RunConfig};
use bsopt::experiment;
use bsopt::optimizer::Method;

#[derive(Parser)]
#[command(
    name = "bsopt",
    version,
    about = "Base-station deployment optimization by block-coordinate-descent BO"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file of `section.key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Extra `section.key=value` overrides; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method and write trace, best deployment, heatmap and manifest.
    Run {
        #[command(flatten)]
        common: Common,
        /// naive-bo, bcd-bo, square-omni or square-dir (overrides run.method).
        #[arg(long)]
        method: Option<String>,
        /// Number of base stations (overrides run.n_tx).
        #[arg(long)]
        n_tx: Option<usize>,
        /// Top-level seed (overrides run.seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every (method, seed) pair and write per-pair traces plus summary.csv.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated methods: naive-bo, bcd-bo, square-omni, square-dir.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "square-dir,square-omni,naive-bo,bcd-bo"
        )]
        methods: Vec<String>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        /// Number of base stations (overrides run.n_tx).
        #[arg(long)]
        n_tx: Option<usize>,
        /// Output directory for summary.csv and traces/.
        #[arg(long)]
        out: PathBuf,
        /// Run pairs concurrently.
        #[arg(long)]
        parallel: bool,
    },
}

fn overrides(common: &Common, flags: Vec<(&str, Option<String>)>) -> Result<Vec<(String, String)>> {
    let mut pairs = common
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<bsopt::Result<Vec<_>>>()?;
    for (key, value) in flags {
        if let Some(value) = value {
            pairs.push((key.to_string(), value));
        }
    }
    Ok(pairs)
}

fn load(common: &Common, flags: Vec<(&str, Option<String>)>) -> Result<RunConfig> {
    let pairs = overrides(common, flags)?;
    RunConfig::from_file(&common.config, &pairs)
        .with_context(|| format!("loading {}", common.config.display()))
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            common,
            method,
            n_tx,
            seed,
            out,
        } => {
            let config = load(
                &common,
                vec![
                    ("run.method", method),
                    ("run.n_tx", n_tx.map(|n| n.to_string())),
                    ("run.seed", seed.map(|s| s.to_string())),
                    ("output.dir", out.map(|p| p.display().to_string())),
                ],
            )?;
            let report = experiment::run(&config)?;
            println!(
                "{} n_tx={} seed={} evaluations={} final_y_best={:.6e} -> {}",
                config.method,
                config.n_tx,
                config.seed,
                report.evaluations,
                report.outcome.best_y,
                report.out_dir.display()
            );
        }
        Command::Compare {
            common,
            methods,
            seeds,
            n_tx,
            out,
            parallel,
        } => {
            let methods = methods
                .iter()
                .map(|m| m.trim().parse::<Method>())
                .collect::<bsopt::Result<Vec<_>>>()?;
            let mut flags = vec![("run.n_tx", n_tx.map(|n| n.to_string()))];
            // the file's own method must not veto a compare over other methods
            flags.push(("run.method", Some(methods[0].to_string())));
            let config = load(&common, flags)?;
            let rows = experiment::compare(&config, &methods, &seeds, &out, parallel)?;
            for row in rows {
                println!("{},{},{:.6e}", row.method, row.seed, row.final_y_best);
            }
        }
    }
    Ok(())
}
