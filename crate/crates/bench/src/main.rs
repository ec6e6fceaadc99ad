use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lvrep::pomdp::{decodability_gap, DEFAULT_NODE_BUDGET};
use lvrep_bench::error::{read, write};
use lvrep_bench::fixture::BUILTINS;
use lvrep_bench::runner::{run_experiment, write_experiment, RunOptions};
use lvrep_bench::verify::{run_verify, PolicySpec};
use lvrep_bench::{plot, BenchError, ExperimentConfig, FixtureSpec, Result};

const OUT_ENV: &str = "LVREP_OUT_DIR";

#[derive(Parser)]
#[command(name = "lvrep", version, about = "Latent-representation RL on small POMDPs")]
struct Cli {
    /// Output directory [default: config output_dir, then $LVREP_OUT_DIR, then ./lvrep-out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Treat warnings (e.g. a fixture that is not decodable at the window length) as failures
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (variant, seed) of an experiment config
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's seed list with this single seed
        #[arg(long)]
        seed_override: Option<u64>,
        /// Record per-episode wall-clock time (makes metrics.csv non-reproducible)
        #[arg(long)]
        timing: bool,
    },
    /// Print decodability gaps and representability residuals per step
    Verify {
        /// Fixture spec, e.g. flip:eta=0.8,horizon=3, or a fixture .toml file
        #[arg(long)]
        fixture: String,
        #[arg(long, default_value_t = 1)]
        window: usize,
        /// uniform, constant:A, random:SEED, or a policy .toml file
        #[arg(long, default_value = "uniform")]
        policy: String,
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
        /// Replace the fixture's reward by zero
        #[arg(long)]
        zero_reward: bool,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        budget: usize,
    },
    /// Turn a metrics.csv into per-variant learning-curve files
    PlotData {
        #[arg(long)]
        metrics: PathBuf,
    },
    /// List built-in fixtures, or print one as a fixture file
    Fixtures {
        #[arg(long)]
        dump: Option<String>,
    },
}

fn env_out() -> Option<PathBuf> {
    std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn cmd_run(cli_out: Option<PathBuf>, strict: bool, config: &Path, seed: Option<u64>, timing: bool) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::from_text(&read(config)?)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    let pomdp = cfg.fixture_spec()?.build()?;
    match decodability_gap(&pomdp, cfg.agent.window_len, pomdp.horizon() - 1, DEFAULT_NODE_BUDGET) {
        Ok(gap) if gap > 1e-9 => {
            eprintln!(
                "warning: {} is not decodable with window {} (gap {gap:.3e})",
                cfg.fixture, cfg.agent.window_len
            );
            if strict {
                return Ok(ExitCode::FAILURE);
            }
        }
        Ok(_) => {}
        Err(e) => eprintln!("warning: decodability not checked: {e}"),
    }
    let dir = cli_out
        .or_else(|| cfg.output_dir.clone())
        .or_else(env_out)
        .unwrap_or_else(|| PathBuf::from("lvrep-out"));
    let out = run_experiment(&cfg, RunOptions { timing })?;
    write_experiment(&dir, &cfg, &out)?;
    println!("variant    runs  medianFinal  q1       q3       medianCumulative");
    for s in &out.summary {
        println!(
            "{:<10} {:<5} {:<12.4} {:<8.4} {:<8.4} {:.4}",
            s.variant, s.runs, s.median_final_return, s.final_return_q1, s.final_return_q3, s.median_cumulative_return
        );
    }
    println!("wrote {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    cli_out: Option<PathBuf>,
    strict: bool,
    fixture: &str,
    window: usize,
    policy: &str,
    threshold: f64,
    zero_reward: bool,
    budget: usize,
) -> Result<ExitCode> {
    let spec: FixtureSpec = fixture.parse()?;
    let mut pomdp = spec.build()?;
    if zero_reward {
        pomdp = pomdp.with_zero_reward();
    }
    let policy = policy.parse::<PolicySpec>()?.build(&pomdp, window)?;
    let report = run_verify(&pomdp, &policy, threshold, budget)?;
    println!("fixture {spec}{}, window {window}", if zero_reward { " (zero reward)" } else { "" });
    print!("{}", report.render());
    if let Some(dir) = cli_out.or_else(env_out) {
        write(&dir.join("residuals.csv"), report.csv()?)?;
    }
    Ok(if report.passed(strict) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_plot(cli_out: Option<PathBuf>, metrics: &Path) -> Result<ExitCode> {
    let files = plot::curve_files(&read(metrics)?)?;
    let dir = cli_out.or_else(env_out).unwrap_or_else(|| {
        metrics.parent().map(Path::to_path_buf).unwrap_or_default()
    });
    for (name, text) in &files {
        write(&dir.join(name), text)?;
        println!("{}", dir.join(name).display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_fixtures(dump: Option<String>) -> Result<ExitCode> {
    match dump {
        Some(spec) => print!("{}", spec.parse::<FixtureSpec>()?.build()?.to_text()),
        None => {
            for (name, params, about) in BUILTINS {
                println!("{name}:{params}\n    {about}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed_override,
            timing,
        } => cmd_run(cli.out, cli.strict, &config, seed_override, timing),
        Command::Verify {
            fixture,
            window,
            policy,
            threshold,
            zero_reward,
            budget,
        } => cmd_verify(cli.out, cli.strict, &fixture, window, &policy, threshold, zero_reward, budget),
        Command::PlotData { metrics } => cmd_plot(cli.out, &metrics),
        Command::Fixtures { dump } => cmd_fixtures(dump),
    };
    result.unwrap_or_else(|e: BenchError| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
