//! Time grids.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Nodes `0 = t_0 < t_1 < ... < t_M = T`, graded as `t_k = T (k/M)^γ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
    pub gamma: f64,
    pub t: Vec<f64>,
}

impl TimeGrid {
    pub fn graded(horizon: f64, steps: usize, gamma: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Config(format!("time.T must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::Config("time.M must be at least 1".into()));
        }
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("time.gamma must be >= 1, got {gamma}")));
        }
        let m = steps as f64;
        let mut t: Vec<f64> = (0..=steps).map(|k| horizon * (k as f64 / m).powf(gamma)).collect();
        t[steps] = horizon;
        Ok(Self { horizon, steps, gamma, t })
    }

    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        Self::graded(horizon, steps, 1.0)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `t_k - t_{k-1}` for `k >= 1`.
    pub fn dt(&self, k: usize) -> f64 {
        self.t[k] - self.t[k - 1]
    }

    pub fn is_uniform(&self) -> bool {
        self.gamma == 1.0
    }

    /// Step of a uniform grid.
    pub fn uniform_step(&self) -> Result<f64> {
        if !self.is_uniform() {
            return Err(Error::Config("a uniform time grid is required here".into()));
        }
        Ok(self.horizon / self.steps as f64)
    }

    /// Number of nodes in `(0, t]`.
    pub fn count_upto(&self, t: f64) -> usize {
        self.t[1..].iter().filter(|&&s| s <= t + 1e-12 * self.horizon).count()
    }

    /// First node index with `t_k >= t`.
    pub fn first_at_or_after(&self, t: f64) -> usize {
        self.t.iter().position(|&s| s >= t - 1e-12 * self.horizon).unwrap_or(self.steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_nodes() {
        let g = TimeGrid::graded(2.0, 4, 2.0).unwrap();
        assert_eq!(g.t, vec![0.0, 0.125, 0.5, 1.125, 2.0]);
        assert!(TimeGrid::graded(1.0, 4, 0.5).is_err());
        assert_eq!(g.first_at_or_after(0.5), 2);
    }
}
