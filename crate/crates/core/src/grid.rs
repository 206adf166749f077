//! Uniform time grids on [0, T] and piecewise-constant functions on them.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform grid 0 = t_0 < t_1 < ... < t_n = T with step `step` (n = n_steps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    step: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(step: f64, n_steps: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::domain(format!("grid step must be positive, got {step}")));
        }
        if n_steps == 0 {
            return Err(Error::domain("grid needs at least one step"));
        }
        Ok(TimeGrid { step, n_steps })
    }

    /// Builds the grid from a horizon that must be an integer multiple of the step.
    pub fn from_horizon(step: f64, horizon: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() || !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::domain(format!(
                "step and horizon must be positive, got step={step}, horizon={horizon}"
            )));
        }
        let n = (horizon / step).round();
        if n < 1.0 || (n * step - horizon).abs() > 1e-9 * horizon.max(1.0) {
            return Err(Error::domain(format!(
                "horizon {horizon} is not an integer multiple of step {step}"
            )));
        }
        Ok(TimeGrid {
            step,
            n_steps: n as usize,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.step
    }

    pub fn horizon(&self) -> f64 {
        self.node(self.n_steps)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(|j| self.node(j))
    }
}

/// Piecewise-constant function on a grid: `values[j]` on [t_j, t_{j+1}).
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_steps() {
            return Err(Error::domain(format!(
                "step function needs one value per cell: got {} values for {} cells",
                values.len(),
                grid.n_steps()
            )));
        }
        Ok(StepFunction { grid, values })
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Self {
        let n = grid.n_steps();
        StepFunction {
            grid,
            values: vec![value; n],
        }
    }

    /// Indicator of [0, t_end): 1 on every cell whose right node is <= t_end.
    pub fn indicator(grid: TimeGrid, t_end: f64) -> Self {
        let values = (0..grid.n_steps())
            .map(|j| {
                if grid.node(j + 1) <= t_end + 1e-12 * grid.step() {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        StepFunction { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn abs(&self) -> StepFunction {
        StepFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    /// Exact integral of the square over [0, T].
    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.step()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_must_divide() {
        assert!(TimeGrid::from_horizon(0.25, 1.0).is_ok());
        assert!(TimeGrid::from_horizon(0.3, 1.0).is_err());
        let g = TimeGrid::from_horizon(0.25, 1.0).unwrap();
        assert_eq!(g.n_steps(), 4);
        assert_eq!(g.horizon(), 1.0);
    }

    #[test]
    fn indicator_covers_prefix() {
        let g = TimeGrid::new(0.25, 4).unwrap();
        let ind = StepFunction::indicator(g, 0.5);
        assert_eq!(ind.values(), &[1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(0.1, 0).is_err());
        let g = TimeGrid::new(0.25, 4).unwrap();
        assert!(StepFunction::new(g, vec![1.0; 3]).is_err());
    }
}
