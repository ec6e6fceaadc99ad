use rand::Rng;

use super::{TabularPomdp, Window};
use crate::policy::WindowPolicy;
use crate::rng::{rng_from_seed, sample_index, SeededRng};

/// One sampled episode. `latent_states` is filled by the simulator for
/// oracle checks and is never shown to learning code.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub observations: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub latent_states: Option<Vec<usize>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    /// `x_h` for a window of length `len`.
    pub fn window_at(&self, h: usize, len: usize) -> Window {
        Window::from_history(&self.observations[..=h], &self.actions[..h], len)
    }

    pub fn total_return(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Stateful environment stepper over a fixture.
pub struct Simulator<'a> {
    pomdp: &'a TabularPomdp,
    rng: SeededRng,
    state: usize,
}

impl<'a> Simulator<'a> {
    pub fn new(pomdp: &'a TabularPomdp, seed: u64) -> Self {
        Self {
            pomdp,
            rng: rng_from_seed(seed),
            state: 0,
        }
    }

    /// Samples `s_0 ~ ρ0` and returns `o_0`.
    pub fn reset(&mut self) -> usize {
        self.state = sample_index(&mut self.rng, self.pomdp.rho0());
        sample_index(&mut self.rng, self.pomdp.emit(self.state))
    }

    /// Applies `a` and returns the next observation.
    pub fn step(&mut self, a: usize) -> usize {
        self.state = sample_index(&mut self.rng, self.pomdp.trans(self.state, a));
        sample_index(&mut self.rng, self.pomdp.emit(self.state))
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Draws a uniformly random action from the simulator's own stream.
    pub fn uniform_action(&mut self) -> usize {
        self.rng.random_range(0..self.pomdp.n_actions())
    }

    pub fn rng(&mut self) -> &mut SeededRng {
        &mut self.rng
    }
}

/// Samples a full `H`-step episode under a window policy.
pub fn sample_episode(pomdp: &TabularPomdp, policy: &WindowPolicy, seed: u64) -> Trajectory {
    let horizon = pomdp.horizon();
    let mut sim = Simulator::new(pomdp, seed);
    let o0 = sim.reset();
    let mut observations = vec![o0];
    let mut states = vec![sim.state()];
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    let mut window = Window::initial(policy.window_len(), o0);
    for h in 0..horizon {
        let a = policy.sample(h, &window, sim.rng());
        let o = observations[h];
        rewards.push(pomdp.reward(o, a));
        let next = sim.step(a);
        actions.push(a);
        observations.push(next);
        states.push(sim.state());
        window = window.shift(a, next);
    }
    Trajectory {
        observations,
        actions,
        rewards,
        latent_states: Some(states),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_flip_keeps_observation_under_stay() {
        let p = TabularPomdp::flip(1.0, 6).unwrap();
        let stay = WindowPolicy::constant(2, 1, 0).unwrap();
        for seed in 0..20 {
            let t = sample_episode(&p, &stay, seed);
            assert!(t.observations.iter().all(|o| *o == t.observations[0]));
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let p = TabularPomdp::flip(0.8, 5).unwrap();
        let pi = WindowPolicy::uniform(2, 2);
        assert_eq!(sample_episode(&p, &pi, 42), sample_episode(&p, &pi, 42));
    }

    #[test]
    fn rewards_follow_observation_and_action() {
        let p = TabularPomdp::lock(2, 3).unwrap();
        let pi = WindowPolicy::uniform(2, 2);
        let t = sample_episode(&p, &pi, 3);
        assert_eq!(t.observations.len(), p.horizon() + 1);
        assert_eq!(t.latent_states.as_ref().unwrap().len(), p.horizon() + 1);
        for h in 0..p.horizon() {
            assert_eq!(t.rewards[h], p.reward(t.observations[h], t.actions[h]));
        }
    }

    #[test]
    fn shifting_reproduces_trajectory_windows() {
        let p = TabularPomdp::gridmask(4, 6).unwrap();
        let pi = WindowPolicy::uniform(3, 3);
        let t = sample_episode(&p, &pi, 9);
        let mut x = Window::initial(3, t.observations[0]);
        for h in 0..t.horizon() {
            assert_eq!(x, t.window_at(h, 3));
            x = x.shift(t.actions[h], t.observations[h + 1]);
        }
        assert_eq!(x, t.window_at(t.horizon(), 3));
    }
}
