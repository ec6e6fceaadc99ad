use serde::{Deserialize, Serialize};

use super::{
    collect_rollout, enumerate_windows, plan, AgentConfig, BonusTable, Datasets, Plan, Shaping,
};
use crate::error::Result;
use crate::exploration::{schedule, BonusMode, BonusStats, BonusTraceRow, CovarianceAccumulator};
use crate::latent::{fit_mle, model_tv_error, LatentModel, TransitionDataset};
use crate::policy::WindowPolicy;
use crate::pomdp::{sample_episode, TabularPomdp, Window, WindowBeliefs, DEFAULT_NODE_BUDGET};
use crate::rng::derive_seed;

pub(crate) const TAG_COLLECT: u64 = 1;
pub(crate) const TAG_FIT: u64 = 2;
pub(crate) const TAG_EVAL: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpisodeLog {
    pub episode: usize,
    /// Return of one true-environment episode under the newly planned policy.
    #[serde(rename = "return")]
    pub episode_return: f64,
    /// Planned value of the new policy in the fitted model, bonus included.
    pub planning_value: f64,
    pub model_tv: Option<f64>,
    pub mean_bonus: f64,
    pub max_bonus: f64,
}

#[derive(Debug, Clone)]
pub struct OnlineRun {
    /// `π_1 … π_K`.
    pub policies: Vec<WindowPolicy>,
    pub logs: Vec<EpisodeLog>,
    pub model: LatentModel,
    pub bonuses: BonusTable,
    pub bonus_trace: Vec<BonusTraceRow>,
    pub datasets: Datasets,
}

impl OnlineRun {
    pub fn final_policy(&self) -> &WindowPolicy {
        self.policies.last().expect("at least one episode")
    }

    pub fn cumulative_return(&self) -> f64 {
        self.logs.iter().map(|l| l.episode_return).sum()
    }
}

/// One covariance accumulator per step over the features of `sets[h]`.
pub fn accumulate_covariances(
    model: &LatentModel,
    sets: &[&TransitionDataset],
    lambda: f64,
) -> Result<Vec<CovarianceAccumulator>> {
    sets.iter()
        .enumerate()
        .map(|(h, d)| {
            let mut acc = CovarianceAccumulator::new(h, model.n_latent(), lambda)?;
            for r in d.records() {
                acc.accumulate(&model.encode(h, &r.window, r.action).probs)?;
            }
            Ok(acc)
        })
        .collect()
}

/// Exploration with L-step uniform rollouts, maximum likelihood fitting,
/// ellipsoid bonuses and exact planning in the fitted model.
///
/// Episode `k` collects with `π_{k-1}` (uniform for `k = 1`) and returns `π_k`.
pub fn run_online(pomdp: &TabularPomdp, cfg: &AgentConfig) -> Result<OnlineRun> {
    run_online_observed(pomdp, cfg, |_| {})
}

/// [`run_online`] with a callback after every episode.
pub fn run_online_observed(
    pomdp: &TabularPomdp,
    cfg: &AgentConfig,
    mut on_episode: impl FnMut(&EpisodeLog),
) -> Result<OnlineRun> {
    cfg.validate()?;
    let horizon = pomdp.horizon();
    let len = cfg.window_len;
    let windows = enumerate_windows(
        len,
        horizon,
        pomdp.n_obs(),
        pomdp.n_actions(),
        cfg.planner.window_budget,
    )?;
    let beliefs = if cfg.track_model_tv {
        Some(WindowBeliefs::build(pomdp, len, horizon - 1, DEFAULT_NODE_BUDGET)?)
    } else {
        None
    };

    let mut data = Datasets::new(pomdp, len);
    let mut policies: Vec<WindowPolicy> = Vec::with_capacity(cfg.episodes);
    let mut logs = Vec::with_capacity(cfg.episodes);
    let mut bonus_trace = Vec::new();
    let mut last = None;
    let uniform = WindowPolicy::uniform(pomdp.n_actions(), len);

    for k in 1..=cfg.episodes {
        let behaviour = policies.last().unwrap_or(&uniform);
        for h in 0..horizon {
            let seed = derive_seed(cfg.seed, &[TAG_COLLECT, k as u64, h as u64]);
            data.absorb(collect_rollout(pomdp, behaviour, h, len, seed)?)?;
        }
        data.mark_episode();

        let model = fit_mle(
            &data.combined_all()?,
            &cfg.fit_config(derive_seed(cfg.seed, &[TAG_FIT, k as u64])),
        )?;
        let bonuses = if cfg.bonus.enabled {
            let (alpha, lambda) = schedule(k, &cfg.bonus.schedule())?;
            let sets: Vec<&TransitionDataset> = (0..horizon)
                .map(|h| if h + len <= horizon { data.main(h) } else { data.aux(h) })
                .collect();
            let accs = accumulate_covariances(&model, &sets, lambda)?;
            let bcfg = cfg.bonus.bonus_config(alpha, lambda, BonusMode::Optimism);
            BonusTable::compute(&model, &accs, &bcfg, &windows)?
        } else {
            BonusTable::zeros(horizon)
        };
        let Plan { policy, value, .. } = plan(
            &model,
            pomdp.reward_table(),
            &bonuses,
            Shaping::Optimistic,
            &data.initial_obs_freq(),
            horizon,
            &cfg.planner,
        )?;

        let mut all = Vec::new();
        for h in 0..horizon {
            let stats = bonuses.stats(h, model.step(h).encode_table().keys());
            all.extend(model.step(h).encode_table().keys().map(|(x, a)| bonuses.get(h, x, *a)));
            bonus_trace.push(BonusTraceRow {
                episode: k,
                step: h,
                mean_bonus: stats.mean,
                max_bonus: stats.max,
            });
        }
        let stats = BonusStats::from_values(all);
        let model_tv = match &beliefs {
            Some(b) => Some(mean_model_tv(&model, pomdp, b, &data)?),
            None => None,
        };
        let episode_return =
            sample_episode(pomdp, &policy, derive_seed(cfg.seed, &[TAG_EVAL, k as u64]))
                .total_return();
        let log = EpisodeLog {
            episode: k,
            episode_return,
            planning_value: value,
            model_tv,
            mean_bonus: stats.mean,
            max_bonus: stats.max,
        };
        on_episode(&log);
        logs.push(log);
        policies.push(policy);
        last = Some((model, bonuses));
    }
    let (model, bonuses) = last.expect("episodes >= 1");
    Ok(OnlineRun {
        policies,
        logs,
        model,
        bonuses,
        bonus_trace,
        datasets: data,
    })
}

/// Mean over steps of the data-weighted squared L1 prediction error.
fn mean_model_tv(
    model: &LatentModel,
    pomdp: &TabularPomdp,
    beliefs: &WindowBeliefs,
    data: &Datasets,
) -> Result<f64> {
    let mut total = 0.0;
    let mut steps = 0;
    for h in 0..pomdp.horizon() {
        let d = data.combined(h)?;
        if d.is_empty() {
            continue;
        }
        let weighting: Vec<((Window, usize), f64)> = d.empirical_weighting();
        total += model_tv_error(model, pomdp, beliefs, h, &weighting)?;
        steps += 1;
    }
    Ok(if steps == 0 { 0.0 } else { total / steps as f64 })
}
