use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The L-step mega-state: the last `L` observations interleaved with the
/// `L - 1` actions between them. Slots before the start of the episode hold
/// the sentinel `None` (written `-`), always as a contiguous prefix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Window {
    obs: Vec<Option<usize>>,
    acts: Vec<Option<usize>>,
}

impl Window {
    pub fn new(obs: Vec<Option<usize>>, acts: Vec<Option<usize>>) -> Result<Self> {
        if obs.is_empty() {
            return Err(Error::InvalidWindow("window length must be at least 1".into()));
        }
        if acts.len() + 1 != obs.len() {
            return Err(Error::InvalidWindow(format!(
                "{} observations need {} actions, found {}",
                obs.len(),
                obs.len() - 1,
                acts.len()
            )));
        }
        let first_obs = obs.iter().position(Option::is_some).ok_or_else(|| {
            Error::InvalidWindow("the latest observation cannot be a sentinel".into())
        })?;
        if obs[first_obs..].iter().any(Option::is_none) {
            return Err(Error::InvalidWindow("sentinels must form a prefix".into()));
        }
        // action slot i sits between observation slots i and i + 1
        for (i, a) in acts.iter().enumerate() {
            let expected = i >= first_obs;
            if a.is_some() != expected {
                return Err(Error::InvalidWindow(format!(
                    "action slot {i} is inconsistent with the observation padding"
                )));
            }
        }
        Ok(Self { obs, acts })
    }

    /// The window at step 0: all sentinels followed by `o0`.
    pub fn initial(len: usize, o0: usize) -> Self {
        assert!(len >= 1, "window length must be at least 1");
        let mut obs = vec![None; len];
        obs[len - 1] = Some(o0);
        Self {
            obs,
            acts: vec![None; len - 1],
        }
    }

    /// Window of length `len` ending at the last entry of an episode prefix
    /// `o_0 a_0 … o_h` (`obs.len() == acts.len() + 1`).
    pub fn from_history(obs: &[usize], acts: &[usize], len: usize) -> Self {
        assert_eq!(obs.len(), acts.len() + 1, "history must end with an observation");
        assert!(len >= 1, "window length must be at least 1");
        let h = obs.len() - 1;
        let window_obs = (0..len)
            .map(|i| (h + i + 1).checked_sub(len).map(|t| obs[t]))
            .collect();
        let window_acts = (0..len - 1)
            .map(|i| (h + i + 1).checked_sub(len).map(|t| acts[t]))
            .collect();
        Self {
            obs: window_obs,
            acts: window_acts,
        }
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn obs(&self) -> &[Option<usize>] {
        &self.obs
    }

    pub fn acts(&self) -> &[Option<usize>] {
        &self.acts
    }

    /// The observation at the current step.
    pub fn current_obs(&self) -> usize {
        self.obs[self.obs.len() - 1].expect("the latest slot is never a sentinel")
    }

    /// Number of sentinel observation slots.
    pub fn padding(&self) -> usize {
        self.obs.iter().take_while(|o| o.is_none()).count()
    }

    /// Drops the oldest observation-action pair and appends `(a, o_next)`.
    pub fn shift(&self, a: usize, o_next: usize) -> Self {
        let len = self.obs.len();
        let mut obs = Vec::with_capacity(len);
        let mut acts = Vec::with_capacity(len - 1);
        obs.extend_from_slice(&self.obs[1..]);
        obs.push(Some(o_next));
        if len > 1 {
            acts.extend_from_slice(&self.acts[1..]);
            acts.push(Some(a));
        }
        Self { obs, acts }
    }

    /// Every window that can occur at step `h`, in lexicographic order.
    pub fn enumerate(len: usize, h: usize, n_obs: usize, n_actions: usize) -> Vec<Self> {
        let filled = (h + 1).min(len);
        let mut out = Vec::new();
        let mut obs = vec![0usize; filled];
        let mut acts = vec![0usize; filled - 1];
        loop {
            let mut w_obs = vec![None; len - filled];
            w_obs.extend(obs.iter().map(|o| Some(*o)));
            let mut w_acts = vec![None; len - filled];
            w_acts.extend(acts.iter().map(|a| Some(*a)));
            out.push(Self {
                obs: w_obs,
                acts: w_acts,
            });
            // odometer over interleaved slots o a o a … o, last slot fastest
            let mut slot = 2 * filled - 1;
            loop {
                if slot == 0 {
                    return out;
                }
                slot -= 1;
                let (value, limit) = if slot % 2 == 0 {
                    (&mut obs[slot / 2], n_obs)
                } else {
                    (&mut acts[slot / 2], n_actions)
                };
                *value += 1;
                if *value < limit {
                    break;
                }
                *value = 0;
            }
        }
    }

    /// Number of windows [`Window::enumerate`] yields for step `h`.
    pub fn count(len: usize, h: usize, n_obs: usize, n_actions: usize) -> usize {
        let filled = (h + 1).min(len) as u32;
        n_obs.saturating_pow(filled).saturating_mul(n_actions.saturating_pow(filled - 1))
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let token = |v: Option<usize>| v.map_or("-".to_string(), |x| x.to_string());
        for i in 0..self.obs.len() {
            if i > 0 {
                write!(f, " {} ", token(self.acts[i - 1]))?;
            }
            write!(f, "{}", token(self.obs[i]))?;
        }
        Ok(())
    }
}

impl FromStr for Window {
    type Err = Error;

    /// Parses `o a o … o` with `-` for sentinels, e.g. `- - 1`.
    fn from_str(s: &str) -> Result<Self> {
        let tokens = s
            .split_whitespace()
            .map(|t| match t {
                "-" => Ok(None),
                _ => t
                    .parse::<usize>()
                    .map(Some)
                    .map_err(|_| Error::InvalidWindow(format!("bad token {t:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if tokens.len() % 2 == 0 {
            return Err(Error::InvalidWindow(format!(
                "{s:?} must alternate observations and actions and end with an observation"
            )));
        }
        let obs = tokens.iter().step_by(2).copied().collect();
        let acts = tokens.iter().skip(1).step_by(2).copied().collect();
        Self::new(obs, acts)
    }
}
