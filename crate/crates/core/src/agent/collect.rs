use crate::error::{Error, Result};
use crate::latent::{TransitionDataset, TransitionRecord};
use crate::policy::WindowPolicy;
use crate::pomdp::{Simulator, TabularPomdp, Trajectory, Window};

/// Records produced by one exploratory rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutRecords {
    pub step: usize,
    pub initial_obs: usize,
    /// The step-`h` triple, present when `h + L ≤ H`.
    pub main: Option<TransitionRecord>,
    /// `(step, triple)` pairs for the auxiliary buffers.
    pub aux: Vec<(usize, TransitionRecord)>,
}

/// Rolls `policy` for `h` steps, then takes `min(L, H - h)` uniform actions.
///
/// The first uniform triple belongs to the step-`h` dataset when a full
/// L-step rollout fits before the horizon; otherwise it goes to the step-`h`
/// auxiliary buffer. Later triples go to the auxiliary buffer of their step.
pub fn collect_rollout(
    pomdp: &TabularPomdp,
    policy: &WindowPolicy,
    h: usize,
    len: usize,
    seed: u64,
) -> Result<RolloutRecords> {
    let horizon = pomdp.horizon();
    if h >= horizon {
        return Err(Error::IndexOutOfRange(format!("step {h} (horizon {horizon})")));
    }
    if len == 0 {
        return Err(Error::InvalidArgument("window length must be at least 1".into()));
    }
    let mut sim = Simulator::new(pomdp, seed);
    let initial_obs = sim.reset();
    let mut x = Window::initial(len, initial_obs);
    for j in 0..h {
        let a = policy.sample(j, &x, sim.rng());
        let o = sim.step(a);
        x = x.shift(a, o);
    }
    let mut main = None;
    let mut aux = Vec::new();
    for i in 0..len.min(horizon - h) {
        let a = sim.uniform_action();
        let o = sim.step(a);
        let record = TransitionRecord {
            window: x.clone(),
            action: a,
            next_obs: o,
        };
        if i == 0 && h + len <= horizon {
            main = Some(record);
        } else {
            aux.push((h + i, record));
        }
        x = x.shift(a, o);
    }
    Ok(RolloutRecords {
        step: h,
        initial_obs,
        main,
        aux,
    })
}

/// Per-step datasets and auxiliary buffers plus initial-observation counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Datasets {
    window_len: usize,
    horizon: usize,
    main: Vec<TransitionDataset>,
    aux: Vec<TransitionDataset>,
    initial_obs: Vec<usize>,
    episodes: usize,
}

impl Datasets {
    pub fn new(pomdp: &TabularPomdp, window_len: usize) -> Self {
        let make = |h| TransitionDataset::new(h, window_len, pomdp.n_obs(), pomdp.n_actions());
        Self {
            window_len,
            horizon: pomdp.horizon(),
            main: (0..pomdp.horizon()).map(make).collect(),
            aux: (0..pomdp.horizon()).map(make).collect(),
            initial_obs: vec![0; pomdp.n_obs()],
            episodes: 0,
        }
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn main(&self, h: usize) -> &TransitionDataset {
        &self.main[h]
    }

    pub fn aux(&self, h: usize) -> &TransitionDataset {
        &self.aux[h]
    }

    /// Number of completed collection rounds (online episodes or offline trajectories).
    pub fn episodes(&self) -> usize {
        self.episodes
    }

    pub fn mark_episode(&mut self) {
        self.episodes += 1;
    }

    pub fn absorb(&mut self, records: RolloutRecords) -> Result<()> {
        self.count_initial(records.initial_obs)?;
        if let Some(r) = records.main {
            self.main[records.step].push(r)?;
        }
        for (h, r) in records.aux {
            self.aux[h].push(r)?;
        }
        Ok(())
    }

    fn count_initial(&mut self, o: usize) -> Result<()> {
        let n = self.initial_obs.len();
        *self
            .initial_obs
            .get_mut(o)
            .ok_or_else(|| Error::IndexOutOfRange(format!("observation {o} (of {n})")))? += 1;
        Ok(())
    }

    /// Every `(x_h, a_h, o_{h+1})` of a full episode into the step datasets.
    pub fn push_episode(&mut self, t: &Trajectory) -> Result<()> {
        if t.horizon() != self.horizon {
            return Err(Error::DimensionMismatch(format!(
                "episode of length {} for horizon {}",
                t.horizon(),
                self.horizon
            )));
        }
        self.count_initial(t.observations[0])?;
        for h in 0..self.horizon {
            self.main[h].push(TransitionRecord {
                window: t.window_at(h, self.window_len),
                action: t.actions[h],
                next_obs: t.observations[h + 1],
            })?;
        }
        self.episodes += 1;
        Ok(())
    }

    /// Union of the step dataset and auxiliary buffer, used for fitting.
    pub fn combined(&self, h: usize) -> Result<TransitionDataset> {
        let mut out = self.main[h].clone();
        out.extend_from(&self.aux[h])?;
        Ok(out)
    }

    pub fn combined_all(&self) -> Result<Vec<TransitionDataset>> {
        (0..self.horizon).map(|h| self.combined(h)).collect()
    }

    pub fn initial_obs_counts(&self) -> &[usize] {
        &self.initial_obs
    }

    /// Empirical frequencies of `o_0`; uniform before any data.
    pub fn initial_obs_freq(&self) -> Vec<f64> {
        let total: usize = self.initial_obs.iter().sum();
        if total == 0 {
            return crate::numeric::uniform(self.initial_obs.len());
        }
        self.initial_obs
            .iter()
            .map(|c| *c as f64 / total as f64)
            .collect()
    }
}
