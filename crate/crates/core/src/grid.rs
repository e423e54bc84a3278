use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid t_k = kΔ on [0, T].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("grid.T", format!("horizon {horizon} must be positive and finite")));
        }
        if steps == 0 {
            return Err(Error::invalid("grid.n", "step count must be at least 1"));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn delta(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Node t_k. `t(n)` is exactly T.
    pub fn t(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.delta()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |k| self.t(k))
    }

    /// Same horizon with a different step count.
    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        TimeGrid::new(self.horizon, steps)
    }
}

/// Composite trapezoid rule for values sampled on every node of `grid`.
pub fn trapezoid(grid: &TimeGrid, values: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), grid.steps() + 1);
    let n = values.len() - 1;
    let inner: f64 = values[1..n].iter().sum();
    grid.delta() * (inner + 0.5 * (values[0] + values[n]))
}
