//! Command-line driver for the two experiment families.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use vgnep::experiment::{parse_config, run_experiment, Algo, ExperimentSpec, Family, SelectorKind};
use vgnep::splitting::DualUpdate;

#[derive(Parser)]
#[command(name = "vgnep", version, about = "Equilibrium selection runs for generalized Nash games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Six random boxes in [0, 100]^3 with empty intersection; HSDM with the
    /// cycle selector finds a cycle of the box projections.
    Cycles(RunArgs),
    /// Six-player, three-resource coupled game with a shared capacity
    /// constraint; FBF against HSDM from several initial points.
    CoupledGame(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Fbf,
    Hsdm,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectorArg {
    Consensus,
    Cycle,
    None,
}

#[derive(Args)]
struct RunArgs {
    /// Key-value config file; flags given here override its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Iteration budget per run.
    #[arg(long, value_name = "N")]
    iters: Option<usize>,
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    /// Number of initial points.
    #[arg(long, value_name = "N")]
    inits: Option<usize>,
    /// Output files are PREFIX_<algo>_init<k>.csv and PREFIX_summary.txt.
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
    /// Use the dual update without the forward term γLx.
    #[arg(long)]
    literal_line6: bool,
    #[arg(long, value_enum)]
    selector: Option<SelectorArg>,
}

impl RunArgs {
    fn spec(&self, family: Family) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => parse_config(path, Some(family))?,
            None => ExperimentSpec::defaults(family),
        };
        if let Some(seed) = self.seed {
            spec.seed = seed;
            spec.solver.seed = seed;
        }
        if let Some(n) = self.iters {
            spec.solver.max_iters = n;
        }
        if let Some(a) = self.algo {
            spec.algo = match a {
                AlgoArg::Fbf => Algo::Fbf,
                AlgoArg::Hsdm => Algo::Hsdm,
                AlgoArg::Both => Algo::Both,
            };
        }
        if let Some(n) = self.inits {
            spec.init_count = n;
        }
        if let Some(out) = &self.out {
            spec.output_prefix = out.clone();
        }
        if self.literal_line6 {
            spec.solver.dual_update = DualUpdate::Literal;
        }
        if let Some(s) = self.selector {
            spec.selector = match s {
                SelectorArg::Consensus => SelectorKind::Consensus,
                SelectorArg::Cycle => SelectorKind::Cycle,
                SelectorArg::None => SelectorKind::None,
            };
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn run(family: Family, args: &RunArgs) -> Result<bool> {
    let spec = args.spec(family)?;
    let report = run_experiment(&spec).with_context(|| format!("{family} experiment failed"))?;
    println!(
        "{family}: seed {}, gamma {:.6}, kappa_G + |L| = {:.6}, margin {:.6}",
        spec.seed,
        report.gamma,
        report.kappa_a(),
        report.gamma_margin()
    );
    let mut ok = true;
    for run in &report.runs {
        match &run.outcome {
            Ok(r) => {
                let t = &r.trace;
                let cycle = t
                    .last()
                    .cycle_residual
                    .map_or(String::new(), |c| format!(", cycle residual {c:.3e}"));
                println!(
                    "  {} init {}: {} iterations, fixed-point residual {:.3e}{cycle} -> {}",
                    run.algo,
                    run.init,
                    t.iterations,
                    t.final_fix_residual(),
                    run.csv_path.display()
                );
            }
            Err(e) => {
                ok = false;
                println!("  {} init {}: failed: {e}", run.algo, run.init);
            }
        }
    }
    println!("summary -> {}", report.summary_path.display());
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Cycles(args) => run(Family::Cycles, args),
        Command::CoupledGame(args) => run(Family::CoupledGame, args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
