use std::collections::{BTreeMap, HashMap};

use super::PlannerConfig;
use crate::error::{Error, Result};
use crate::exploration::{bonus, max_bonus, BonusConfig, BonusStats, CovarianceAccumulator};
use crate::latent::LatentModel;
use crate::numeric::sum;
use crate::policy::WindowPolicy;
use crate::pomdp::Window;

/// Tolerance under which two action values count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// All padded windows that can occur at each step, within a budget.
pub fn enumerate_windows(
    len: usize,
    horizon: usize,
    n_obs: usize,
    n_actions: usize,
    budget: usize,
) -> Result<Vec<Vec<Window>>> {
    let mut total = 0usize;
    for h in 0..horizon {
        total = total.saturating_add(Window::count(len, h, n_obs, n_actions));
        if total > budget {
            return Err(Error::BudgetExceeded { budget });
        }
    }
    Ok((0..horizon)
        .map(|h| Window::enumerate(len, h, n_obs, n_actions))
        .collect())
}

/// Bonus magnitude per `(h, x, a)`; absent entries are zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BonusTable {
    steps: Vec<BTreeMap<(Window, usize), f64>>,
}

impl BonusTable {
    pub fn zeros(horizon: usize) -> Self {
        Self {
            steps: vec![BTreeMap::new(); horizon],
        }
    }

    /// Evaluates the bonus of every `(x, a)` over `windows[h]` against the
    /// step's accumulator. Pairs the model never saw get [`max_bonus`]: their
    /// encoder row is a placeholder, not an estimate.
    pub fn compute(
        model: &LatentModel,
        accumulators: &[CovarianceAccumulator],
        cfg: &BonusConfig,
        windows: &[Vec<Window>],
    ) -> Result<Self> {
        if accumulators.len() < windows.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} accumulators for {} steps",
                accumulators.len(),
                windows.len()
            )));
        }
        let steps = windows
            .iter()
            .enumerate()
            .map(|(h, ws)| {
                let mut table = BTreeMap::new();
                for x in ws {
                    for a in 0..model.n_actions() {
                        let enc = model.encode(h, x, a);
                        let b = if enc.seen {
                            bonus(&accumulators[h], &enc.probs, cfg)?
                        } else {
                            max_bonus(cfg)
                        };
                        table.insert((x.clone(), a), b);
                    }
                }
                Ok(table)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { steps })
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn get(&self, h: usize, x: &Window, a: usize) -> f64 {
        self.steps
            .get(h)
            .and_then(|t| t.get(&(x.clone(), a)))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn insert(&mut self, h: usize, x: Window, a: usize, value: f64) {
        if self.steps.len() <= h {
            self.steps.resize(h + 1, BTreeMap::new());
        }
        self.steps[h].insert((x, a), value);
    }

    pub fn step(&self, h: usize) -> &BTreeMap<(Window, usize), f64> {
        &self.steps[h]
    }

    /// Mean and max over the given pairs at step `h`.
    pub fn stats<'a>(&self, h: usize, pairs: impl IntoIterator<Item = &'a (Window, usize)>) -> BonusStats {
        BonusStats::from_values(pairs.into_iter().map(|(x, a)| self.get(h, x, *a)))
    }
}

/// How the bonus enters the backup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shaping {
    /// `Q = r + b + E[V']`.
    Optimistic,
    /// `Q = max(r - b + E[V'], 0)`.
    Pessimistic,
}

impl Shaping {
    pub fn backup(self, reward: f64, bonus: f64, continuation: f64) -> f64 {
        match self {
            Shaping::Optimistic => reward + bonus + continuation,
            Shaping::Pessimistic => (reward - bonus + continuation).max(0.0),
        }
    }
}

/// Output of backward induction in a learned model.
#[derive(Debug, Clone)]
pub struct Plan {
    pub policy: WindowPolicy,
    /// `Σ_o freq(o) V̂_0(x_0(o))`.
    pub value: f64,
    pub q: Vec<BTreeMap<(Window, usize), f64>>,
    pub v: Vec<BTreeMap<Window, f64>>,
}

impl Plan {
    pub fn q_value(&self, h: usize, x: &Window, a: usize) -> Option<f64> {
        self.q.get(h)?.get(&(x.clone(), a)).copied()
    }
}

/// Exact backward induction over all padded windows:
/// `Q̂_h(x, a) = r(o_h, a) ± b(h, x, a) + Σ_o' p̂_h(o' | x, a) V̂_{h+1}(shift(x, a, o'))`,
/// with greedy actions and ties resolved toward the smallest index.
pub fn plan(
    model: &LatentModel,
    rewards: &[Vec<f64>],
    bonuses: &BonusTable,
    shaping: Shaping,
    initial_obs: &[f64],
    horizon: usize,
    cfg: &PlannerConfig,
) -> Result<Plan> {
    let (n_obs, n_actions, len) = (model.n_obs(), model.n_actions(), model.window_len());
    if model.horizon() < horizon {
        return Err(Error::DimensionMismatch(format!(
            "model covers {} steps, planning needs {horizon}",
            model.horizon()
        )));
    }
    if rewards.len() != n_obs || rewards.iter().any(|r| r.len() != n_actions) {
        return Err(Error::DimensionMismatch("reward table shape differs from the model".into()));
    }
    if initial_obs.len() != n_obs {
        return Err(Error::DimensionMismatch("initial observation frequencies".into()));
    }
    let windows = enumerate_windows(len, horizon, n_obs, n_actions, cfg.window_budget)?;

    let mut q = vec![BTreeMap::new(); horizon];
    let mut v = vec![BTreeMap::new(); horizon];
    let mut greedy = vec![BTreeMap::new(); horizon];
    let mut next_v: HashMap<Window, f64> = HashMap::new();
    for h in (0..horizon).rev() {
        let mut this_v = HashMap::with_capacity(windows[h].len());
        for x in &windows[h] {
            let o = x.current_obs();
            let mut best = (0usize, f64::NEG_INFINITY);
            for a in 0..n_actions {
                let mut continuation = 0.0;
                if h + 1 < horizon {
                    let pred = model.predicted_obs_prob(h, x, a);
                    continuation = sum(pred.iter().enumerate().filter(|(_, p)| **p > 0.0).map(
                        |(o_next, p)| p * next_v.get(&x.shift(a, o_next)).copied().unwrap_or(0.0),
                    ));
                }
                let value = shaping.backup(rewards[o][a], bonuses.get(h, x, a), continuation);
                if value > best.1 + TIE_TOL {
                    best = (a, value);
                }
                q[h].insert((x.clone(), a), value);
            }
            this_v.insert(x.clone(), best.1);
            v[h].insert(x.clone(), best.1);
            greedy[h].insert(x.clone(), best.0);
        }
        next_v = this_v;
    }
    let value = sum(initial_obs.iter().enumerate().filter(|(_, f)| **f > 0.0).map(|(o, f)| {
        f * v[0][&Window::initial(len, o)]
    }));
    Ok(Plan {
        policy: WindowPolicy::deterministic(n_actions, len, greedy)?,
        value,
        q,
        v,
    })
}
