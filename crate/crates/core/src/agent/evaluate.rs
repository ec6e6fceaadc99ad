use rayon::prelude::*;

use crate::numeric::CompensatedSum;
use crate::policy::WindowPolicy;
use crate::pomdp::{sample_episode, TabularPomdp};
use crate::rng::derive_seed;

/// Monte-Carlo return of a policy in the true environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub mean: f64,
    pub std_error: f64,
    pub episodes: usize,
}

/// Runs `n_episodes` seeded episodes in parallel; the result does not depend
/// on the thread count.
pub fn evaluate_policy(
    pomdp: &TabularPomdp,
    policy: &WindowPolicy,
    n_episodes: usize,
    seed: u64,
) -> Evaluation {
    if n_episodes == 0 {
        return Evaluation {
            mean: 0.0,
            std_error: 0.0,
            episodes: 0,
        };
    }
    let returns: Vec<f64> = (0..n_episodes)
        .into_par_iter()
        .map(|i| sample_episode(pomdp, policy, derive_seed(seed, &[i as u64])).total_return())
        .collect();
    let n = n_episodes as f64;
    let mean = returns.iter().copied().collect::<CompensatedSum>().value() / n;
    let std_error = if n_episodes > 1 {
        let ss: CompensatedSum = returns.iter().map(|r| (r - mean).powi(2)).collect();
        (ss.value() / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        0.0
    };
    Evaluation {
        mean,
        std_error,
        episodes: n_episodes,
    }
}
