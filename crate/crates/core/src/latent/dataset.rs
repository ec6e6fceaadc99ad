use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::pomdp::Window;

/// One `(x_h, a_h, o_{h+1})` triple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TransitionRecord {
    pub window: Window,
    pub action: usize,
    pub next_obs: usize,
}

/// Transitions observed at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDataset {
    step: usize,
    window_len: usize,
    n_obs: usize,
    n_actions: usize,
    records: Vec<TransitionRecord>,
}

impl TransitionDataset {
    pub fn new(step: usize, window_len: usize, n_obs: usize, n_actions: usize) -> Self {
        Self {
            step,
            window_len,
            n_obs,
            n_actions,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: TransitionRecord) -> Result<()> {
        if record.window.len() != self.window_len {
            return Err(Error::DimensionMismatch(format!(
                "window {} has length {}, dataset uses {}",
                record.window,
                record.window.len(),
                self.window_len
            )));
        }
        if record.action >= self.n_actions || record.next_obs >= self.n_obs {
            return Err(Error::IndexOutOfRange(format!(
                "record ({}, {}, {}) outside |A| = {}, |O| = {}",
                record.window, record.action, record.next_obs, self.n_actions, self.n_obs
            )));
        }
        if record.window.padding() != (self.window_len - 1).saturating_sub(self.step) {
            return Err(Error::InvalidWindow(format!(
                "window {} cannot occur at step {}",
                record.window, self.step
            )));
        }
        self.records.push(record);
        Ok(())
    }

    /// Appends every record of `other` (same step and shape).
    pub fn extend_from(&mut self, other: &TransitionDataset) -> Result<()> {
        if other.step != self.step
            || other.window_len != self.window_len
            || other.n_obs != self.n_obs
            || other.n_actions != self.n_actions
        {
            return Err(Error::DimensionMismatch("datasets do not share a shape".into()));
        }
        self.records.extend(other.records.iter().cloned());
        Ok(())
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn records(&self) -> &[TransitionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Next-observation counts per distinct `(x, a)`.
    pub fn counts(&self) -> BTreeMap<(Window, usize), Vec<f64>> {
        let mut out: BTreeMap<(Window, usize), Vec<f64>> = BTreeMap::new();
        for r in &self.records {
            out.entry((r.window.clone(), r.action))
                .or_insert_with(|| vec![0.0; self.n_obs])[r.next_obs] += 1.0;
        }
        out
    }

    /// Empirical distribution over `(x, a)`.
    pub fn empirical_weighting(&self) -> Vec<((Window, usize), f64)> {
        let n = self.records.len() as f64;
        self.counts()
            .into_iter()
            .map(|(key, c)| (key, c.iter().sum::<f64>() / n))
            .collect()
    }
}
