use super::{accumulate_covariances, enumerate_windows, plan, AgentConfig, BonusTable, Datasets, Shaping};
use crate::error::{Error, Result};
use crate::exploration::{schedule, BonusMode};
use crate::latent::{fit_mle, LatentModel, TransitionDataset};
use crate::policy::WindowPolicy;
use crate::pomdp::{sample_episode, TabularPomdp};
use crate::rng::derive_seed;

use super::online::TAG_FIT;

/// `n_episodes` full episodes of a behaviour policy, every triple stored at its step.
pub fn collect_offline(
    pomdp: &TabularPomdp,
    behaviour: &WindowPolicy,
    n_episodes: usize,
    seed: u64,
) -> Result<Datasets> {
    let mut data = Datasets::new(pomdp, behaviour.window_len());
    for i in 0..n_episodes {
        data.push_episode(&sample_episode(pomdp, behaviour, derive_seed(seed, &[i as u64])))?;
    }
    Ok(data)
}

#[derive(Debug, Clone)]
pub struct OfflineResult {
    pub policy: WindowPolicy,
    /// Planned value under `max(r - penalty, 0)` in the fitted model.
    pub pessimistic_value: f64,
    pub model: LatentModel,
    pub penalties: BonusTable,
}

/// Fits once, penalizes poorly covered `(x, a)` by the ellipsoid bonus of the
/// dataset covariance, and plans with the penalized reward. The schedule is
/// evaluated at `k` = number of episodes in the dataset.
pub fn run_offline(pomdp: &TabularPomdp, data: &Datasets, cfg: &AgentConfig) -> Result<OfflineResult> {
    cfg.validate()?;
    let horizon = pomdp.horizon();
    if data.window_len() != cfg.window_len || data.horizon() != horizon {
        return Err(Error::DimensionMismatch("dataset shape differs from the configuration".into()));
    }
    let combined = data.combined_all()?;
    if let Some(d) = combined.iter().find(|d| d.is_empty()) {
        return Err(Error::EmptyDataset { step: d.step() });
    }
    let model = fit_mle(&combined, &cfg.fit_config(derive_seed(cfg.seed, &[TAG_FIT, 0])))?;
    let windows = enumerate_windows(
        cfg.window_len,
        horizon,
        pomdp.n_obs(),
        pomdp.n_actions(),
        cfg.planner.window_budget,
    )?;
    let penalties = if cfg.bonus.enabled {
        let (alpha, lambda) = schedule(data.episodes().max(1), &cfg.bonus.schedule())?;
        let sets: Vec<&TransitionDataset> = combined.iter().collect();
        let accs = accumulate_covariances(&model, &sets, lambda)?;
        let bcfg = cfg.bonus.bonus_config(alpha, lambda, BonusMode::Pessimism);
        BonusTable::compute(&model, &accs, &bcfg, &windows)?
    } else {
        BonusTable::zeros(horizon)
    };
    let planned = plan(
        &model,
        pomdp.reward_table(),
        &penalties,
        Shaping::Pessimistic,
        &data.initial_obs_freq(),
        horizon,
        &cfg.planner,
    )?;
    Ok(OfflineResult {
        policy: planned.policy,
        pessimistic_value: planned.value,
        model,
        penalties,
    })
}
