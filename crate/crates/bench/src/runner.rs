//! Seeded batch runs of the online agent and the uniform baseline.

use std::path::Path;
use std::time::Instant;

use lvrep::agent::{evaluate_policy, run_online_observed};
use lvrep::exploration::BonusTraceRow;
use lvrep::pomdp::sample_episode;
use lvrep::rng::derive_seed;
use lvrep::{TabularPomdp, WindowPolicy};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Variant};
use crate::error::{write, Result};
use crate::table::{to_csv, BONUS_SCHEMA, METRICS_SCHEMA, SUMMARY_SCHEMA};

const TAG_UNIFORM: u64 = 100;
const TAG_FINAL_EVAL: u64 = 101;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsRow {
    pub run_id: String,
    pub variant: String,
    pub seed: u64,
    pub episode: usize,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub planning_value: Option<f64>,
    #[serde(rename = "modelTV")]
    pub model_tv: Option<f64>,
    pub mean_bonus: Option<f64>,
    pub wall_clock_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SummaryRow {
    pub variant: String,
    pub runs: usize,
    pub median_final_return: f64,
    pub final_return_q1: f64,
    pub final_return_q3: f64,
    pub median_cumulative_return: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Fill the `wallClockMs` column; outputs are then no longer reproducible.
    pub timing: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub run_id: String,
    pub variant: Variant,
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    /// Mean return of the final policy over `eval_episodes`.
    pub final_return: f64,
    pub cumulative_return: f64,
    /// `(file name, contents)` written under `runs/<runId>/`.
    pub artifacts: Vec<(String, String)>,
}

pub fn run_id(variant: Variant, seed: u64) -> String {
    format!("{}-s{seed}", variant.name())
}

pub fn run_one(
    pomdp: &TabularPomdp,
    cfg: &ExperimentConfig,
    variant: Variant,
    seed: u64,
    opts: RunOptions,
) -> Result<RunOutput> {
    let id = run_id(variant, seed);
    let episodes = cfg.agent.episodes;
    let mut rows = Vec::with_capacity(episodes);
    let mut artifacts = Vec::new();
    let final_policy;
    let start = Instant::now();
    let mut last = 0.0;
    let mut lap = || {
        let now = start.elapsed().as_secs_f64() * 1e3;
        let dt = now - last;
        last = now;
        opts.timing.then_some(dt)
    };
    match variant {
        Variant::Uniform => {
            let policy = WindowPolicy::uniform(pomdp.n_actions(), cfg.agent.window_len);
            for k in 1..=episodes {
                let t = sample_episode(pomdp, &policy, derive_seed(seed, &[TAG_UNIFORM, k as u64]));
                rows.push(MetricsRow {
                    run_id: id.clone(),
                    variant: variant.name().into(),
                    seed,
                    episode: k,
                    episode_return: t.total_return(),
                    planning_value: None,
                    model_tv: None,
                    mean_bonus: None,
                    wall_clock_ms: lap(),
                });
            }
            final_policy = policy;
        }
        Variant::BonusOn | Variant::BonusOff => {
            let agent = cfg.agent.agent_config(variant, seed);
            let mut times = Vec::with_capacity(episodes);
            let run = run_online_observed(pomdp, &agent, |_| times.push(lap()))?;
            for (log, ms) in run.logs.iter().zip(times) {
                rows.push(MetricsRow {
                    run_id: id.clone(),
                    variant: variant.name().into(),
                    seed,
                    episode: log.episode,
                    episode_return: log.episode_return,
                    planning_value: Some(log.planning_value),
                    model_tv: log.model_tv,
                    mean_bonus: agent.bonus.enabled.then_some(log.mean_bonus),
                    wall_clock_ms: ms,
                });
            }
            artifacts.push(("model.toml".into(), run.model.to_text()));
            artifacts.push(("bonus.csv".into(), bonus_csv(&run.bonus_trace)?));
            final_policy = run.final_policy().clone();
        }
    }
    artifacts.push(("policy.toml".into(), final_policy.to_text()));
    let final_return = evaluate_policy(
        pomdp,
        &final_policy,
        cfg.eval_episodes,
        derive_seed(seed, &[TAG_FINAL_EVAL]),
    )
    .mean;
    let cumulative_return = rows.iter().map(|r| r.episode_return).sum();
    Ok(RunOutput {
        run_id: id,
        variant,
        seed,
        rows,
        final_return,
        cumulative_return,
        artifacts,
    })
}

fn bonus_csv(rows: &[BonusTraceRow]) -> Result<String> {
    to_csv(BONUS_SCHEMA, rows)
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub runs: Vec<RunOutput>,
    pub summary: Vec<SummaryRow>,
}

/// Runs every `(variant, seed)` pair in a worker pool, then merges in config order.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ExperimentOutput> {
    let pomdp = cfg.fixture_spec()?.build()?;
    let jobs: Vec<(Variant, u64)> = cfg
        .variants
        .iter()
        .flat_map(|v| cfg.seeds.iter().map(move |s| (*v, *s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|(v, s)| run_one(&pomdp, cfg, *v, *s, opts))
        .collect::<Result<Vec<_>>>()?;
    let summary = cfg
        .variants
        .iter()
        .map(|v| {
            let mine: Vec<&RunOutput> = runs.iter().filter(|r| r.variant == *v).collect();
            let finals: Vec<f64> = mine.iter().map(|r| r.final_return).collect();
            let cumulative: Vec<f64> = mine.iter().map(|r| r.cumulative_return).collect();
            SummaryRow {
                variant: v.name().into(),
                runs: mine.len(),
                median_final_return: quantile(&finals, 0.5),
                final_return_q1: quantile(&finals, 0.25),
                final_return_q3: quantile(&finals, 0.75),
                median_cumulative_return: quantile(&cumulative, 0.5),
            }
        })
        .collect();
    Ok(ExperimentOutput { runs, summary })
}

/// Linear-interpolation quantile of unsorted values; `NaN` when empty.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Writes the config snapshot, `metrics.csv`, `summary.csv` and per-run artifacts.
pub fn write_experiment(dir: &Path, cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<()> {
    write(&dir.join("config.toml"), cfg.to_text())?;
    let rows: Vec<&MetricsRow> = out.runs.iter().flat_map(|r| &r.rows).collect();
    write(&dir.join("metrics.csv"), to_csv(METRICS_SCHEMA, &rows)?)?;
    write(&dir.join("summary.csv"), to_csv(SUMMARY_SCHEMA, &out.summary)?)?;
    for r in &out.runs {
        for (name, text) in &r.artifacts {
            write(&dir.join("runs").join(&r.run_id).join(name), text)?;
        }
    }
    Ok(())
}
