use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use featkrr::report::{
    exit_code, run_derivs, run_fit, run_optimize, run_scenario_gen, run_verify, DataSource,
    ExperimentConfig, EXIT_SUITE_FAILURE, SUITES,
};
use featkrr::{Error, Result};

#[derive(Parser)]
#[command(
    name = "featkrr",
    version,
    about = "Kernel ridge regression with learned coordinate weights"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Top-level seed (overrides `seed`)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this
    #[arg(long, env = "FEATKRR_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit at fixed weights for every lambda
    Fit(Common),
    /// Directional derivatives and finite-difference sweeps
    Derivs(Common),
    /// Multistart optimization of the weights
    Optimize(Common),
    /// Run verification suites
    Verify {
        #[command(flatten)]
        common: Common,
        /// Suite to run (repeatable); defaults to the config list, then to all suites
        #[arg(long = "suite")]
        suites: Vec<String>,
    },
    /// Synthetic scenarios
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// Sample a scenario and write it as CSV with its ground truth
    Gen(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn init_threads(common: &Common) -> Result<()> {
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

/// Returns whether every verification record passed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Fit(c) => {
            init_threads(&c)?;
            let cfg = load(&c)?;
            let fits = run_fit(&cfg, &cfg.output_dir)?;
            for f in &fits {
                println!("lambda={:e} objective={:.6e}", f.lambda, f.objective);
            }
        }
        Command::Derivs(c) => {
            init_threads(&c)?;
            let cfg = load(&c)?;
            let reports = run_derivs(&cfg, &cfg.output_dir)?;
            let stationary = reports.iter().filter(|r| r.is_stationary).count();
            println!(
                "{} probes, {stationary} certified stationary",
                reports.len()
            );
        }
        Command::Optimize(c) => {
            init_threads(&c)?;
            let cfg = load(&c)?;
            for (lambda, res) in cfg
                .lambda_list
                .iter()
                .zip(run_optimize(&cfg, &cfg.output_dir)?)
            {
                let best = res.best();
                println!(
                    "lambda={lambda:e} objective={:.6e} status={:?} support={:?}",
                    best.terminal_objective(),
                    best.status,
                    best.support()
                );
            }
        }
        Command::Verify { common, suites } => {
            init_threads(&common)?;
            let cfg = load(&common)?;
            let suites = if !suites.is_empty() {
                suites
            } else if !cfg.suites.is_empty() {
                cfg.suites.clone()
            } else {
                SUITES.iter().map(|s| s.to_string()).collect()
            };
            if let Some(s) = suites.iter().find(|s| !SUITES.contains(&s.as_str())) {
                return Err(Error::Config(format!(
                    "unknown suite '{s}' (known: {})",
                    SUITES.join(", ")
                )));
            }
            let outcome = run_verify(&suites, cfg.seed, &cfg.output_dir)?;
            for r in outcome.failures() {
                eprintln!("FAIL {} {}", r.suite, r.case);
            }
            println!(
                "{} records, {} failed",
                outcome.records.len(),
                outcome.failures().count()
            );
            return Ok(outcome.all_pass);
        }
        Command::Scenario {
            action: ScenarioAction::Gen(c),
        } => {
            init_threads(&c)?;
            let mut cfg = load(&c)?;
            if let (Some(seed), Some(DataSource::Scenario(spec))) = (c.seed, cfg.scenario.as_mut())
            {
                spec.seed = seed;
            }
            run_scenario_gen(&cfg, &cfg.output_dir)?;
            println!("wrote {}", cfg.output_dir.join("scenario.csv").display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_SUITE_FAILURE as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
