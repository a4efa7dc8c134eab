use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Uniform partition of `[0, T]`.
///
/// Node `i` is `i * T / n_steps`; the last node is stored as `T` itself so
/// that the map `t -> T - t` sends grid nodes to grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(param(format!("horizon must be positive, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(param("n_steps must be at least 1"));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Time of node `i`. Panics when `i > n_steps`.
    pub fn node(&self, i: usize) -> f64 {
        assert!(i <= self.n_steps, "grid index {i} out of range");
        if i == self.n_steps {
            self.horizon
        } else {
            i as f64 * self.horizon / self.n_steps as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.node(i)).collect()
    }

    /// Grid index of `T - t_i`.
    pub fn reverse_index(&self, i: usize) -> Result<usize> {
        if i > self.n_steps {
            return Err(param(format!(
                "index {i} outside 0..={}",
                self.n_steps
            )));
        }
        Ok(self.n_steps - i)
    }

    /// Nearest node to `t`; errors outside `[0, T]`.
    pub fn nearest_index(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(param(format!(
                "time {t} outside [0, {}]",
                self.horizon
            )));
        }
        let i = (t / self.dt()).round() as usize;
        Ok(i.min(self.n_steps))
    }
}

pub fn make_grid(horizon: f64, n_steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(horizon, n_steps)
}

/// Composite trapezoid rule over the grid nodes.
pub fn trapezoid(grid: &TimeGrid, values: &[f64]) -> f64 {
    assert_eq!(values.len(), grid.n_nodes());
    let dt = grid.dt();
    let n = values.len();
    let inner: f64 = values[1..n - 1].iter().sum();
    dt * (0.5 * values[0] + inner + 0.5 * values[n - 1])
}
