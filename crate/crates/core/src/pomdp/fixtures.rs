//! Built-in fixtures.

use super::TabularPomdp;
use crate::error::{Error, Result};
use crate::numeric::one_hot;

impl TabularPomdp {
    /// Two-state flip chain. Action 0 keeps the state, action 1 swaps it; the
    /// state is reported correctly with probability `eta`, and reward is 1
    /// whenever observation 1 is seen.
    pub fn flip(eta: f64, horizon: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidArgument(format!("eta = {eta} outside [0, 1]")));
        }
        let trans = vec![
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        ];
        let emit = vec![vec![eta, 1.0 - eta], vec![1.0 - eta, eta]];
        let reward = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        Self::new(horizon, vec![0.5, 0.5], trans, emit, reward)
    }

    /// Combination lock with a phase signal, two actions, and horizon
    /// `code_length + 1`. See [`TabularPomdp::lock_with_actions`].
    pub fn lock(window: usize, code_length: usize) -> Result<Self> {
        Self::lock_with_actions(window, code_length, 2)
    }

    /// Combination lock that is decodable from `window` observations but not
    /// from `window - 1`.
    ///
    /// While the lock is still closed and no mistake has been made, the agent
    /// sits at position `i` and sees a phase bit that flips every step. The
    /// correct action at position `i` is `(i + 1) % n_actions`; after the last
    /// digit the lock opens, shows observation 2 and pays 1 per step for the
    /// rest of the episode. A wrong action starts a failure chain: the phase
    /// keeps flipping for `window - 1` more steps and then freezes, so a
    /// repeated phase is the only evidence of failure.
    pub fn lock_with_actions(window: usize, code_length: usize, n_actions: usize) -> Result<Self> {
        if window < 2 {
            return Err(Error::InvalidArgument(
                "lock fixtures need a window of at least 2".into(),
            ));
        }
        if code_length == 0 || n_actions < 2 {
            return Err(Error::InvalidArgument(
                "lock fixtures need a positive code length and at least two actions".into(),
            ));
        }
        let n = code_length;
        let dying = window - 1;
        let good = |i: usize, phase: usize| 2 * i + phase;
        let failing = |j: usize, phase: usize| 2 * n + 2 * (j - 1) + phase;
        let dead = |phase: usize| 2 * n + 2 * dying + phase;
        let open = 2 * n + 2 * dying + 2;
        let n_states = open + 1;

        let mut trans = vec![vec![vec![0.0; n_states]; n_actions]; n_states];
        let mut emit = vec![vec![0.0; 3]; n_states];
        for i in 0..n {
            for phase in 0..2 {
                let s = good(i, phase);
                emit[s] = one_hot(3, phase);
                for a in 0..n_actions {
                    let next = if a == (i + 1) % n_actions {
                        if i + 1 == n {
                            open
                        } else {
                            good(i + 1, 1 - phase)
                        }
                    } else {
                        failing(1, 1 - phase)
                    };
                    trans[s][a][next] = 1.0;
                }
            }
        }
        for j in 1..=dying {
            for phase in 0..2 {
                let s = failing(j, phase);
                emit[s] = one_hot(3, phase);
                let next = if j < dying {
                    failing(j + 1, 1 - phase)
                } else {
                    dead(phase)
                };
                for a in 0..n_actions {
                    trans[s][a][next] = 1.0;
                }
            }
        }
        for phase in 0..2 {
            let s = dead(phase);
            emit[s] = one_hot(3, phase);
            for a in 0..n_actions {
                trans[s][a][s] = 1.0;
            }
        }
        emit[open] = one_hot(3, 2);
        for a in 0..n_actions {
            trans[open][a][open] = 1.0;
        }

        let mut rho0 = vec![0.0; n_states];
        rho0[good(0, 0)] = 0.5;
        rho0[good(0, 1)] = 0.5;
        let mut reward = vec![vec![0.0; n_actions]; 3];
        reward[2] = vec![1.0; n_actions];
        Self::new(code_length + 1, rho0, trans, emit, reward)
    }

    /// One-dimensional track where the position is observed and the velocity
    /// is masked. Actions 0, 1, 2 accelerate by -1, 0, +1; velocity lives in
    /// {-1, 0, +1}; hitting a wall stops the agent. Reward 1 at the rightmost
    /// cell. The episode starts at cell 0 with velocity 0 or +1.
    pub fn gridmask(positions: usize, horizon: usize) -> Result<Self> {
        if positions < 2 {
            return Err(Error::InvalidArgument(
                "gridmask needs at least two positions".into(),
            ));
        }
        let n_states = positions * 3;
        let idx = |pos: usize, vel: i64| pos * 3 + (vel + 1) as usize;
        let mut trans = vec![vec![vec![0.0; n_states]; 3]; n_states];
        let mut emit = vec![vec![0.0; positions]; n_states];
        for pos in 0..positions {
            for vel in -1i64..=1 {
                let s = idx(pos, vel);
                emit[s] = one_hot(positions, pos);
                for a in 0..3 {
                    let mut v = (vel + a as i64 - 1).clamp(-1, 1);
                    let mut p = pos as i64 + v;
                    if p < 0 || p >= positions as i64 {
                        p = p.clamp(0, positions as i64 - 1);
                        v = 0;
                    }
                    trans[s][a][idx(p as usize, v)] = 1.0;
                }
            }
        }
        let mut rho0 = vec![0.0; n_states];
        rho0[idx(0, 0)] = 0.5;
        rho0[idx(0, 1)] = 0.5;
        let mut reward = vec![vec![0.0; 3]; positions];
        reward[positions - 1] = vec![1.0; 3];
        Self::new(horizon, rho0, trans, emit, reward)
    }
}
