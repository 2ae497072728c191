use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dist, norm, sub};
use crate::scalar::Real;

/// Time nodes `0 = t₀ < t₁ < … < t_N = b`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeGrid<T> {
    nodes: Vec<T>,
}

impl<T: Real> TimeGrid<T> {
    pub fn uniform(horizon: T, steps: usize) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::invalid("horizon must be positive and finite"));
        }
        if steps == 0 {
            return Err(Error::invalid("grid needs at least one step"));
        }
        let n = T::from_usize_lossy(steps);
        let mut nodes: Vec<T> = (0..=steps).map(|k| horizon * T::from_usize_lossy(k) / n).collect();
        nodes[steps] = horizon;
        Ok(TimeGrid { nodes })
    }

    pub fn from_nodes(nodes: Vec<T>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::invalid("grid needs at least two nodes"));
        }
        if nodes[0] != T::zero() {
            return Err(Error::invalid("grid must start at t = 0"));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) || !nodes[nodes.len() - 1].is_finite() {
            return Err(Error::invalid("grid nodes must be strictly increasing and finite"));
        }
        Ok(TimeGrid { nodes })
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn horizon(&self) -> T {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn t(&self, k: usize) -> T {
        self.nodes[k]
    }

    /// Length of step `k`, i.e. `t_{k+1} − t_k`.
    pub fn dt(&self, k: usize) -> T {
        self.nodes[k + 1] - self.nodes[k]
    }

    pub fn max_dt(&self) -> T {
        (0..self.steps()).map(|k| self.dt(k)).fold(T::zero(), T::max)
    }

    /// Inserts the midpoint of every step.
    pub fn refine(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push((w[0] + w[1]) * T::half());
        }
        nodes.push(self.horizon());
        TimeGrid { nodes }
    }

    /// Right-endpoint quadrature `Σ_{k≥1} (t_k − t_{k−1}) v_k`.
    pub fn right_sum(&self, values: &[T]) -> T {
        (1..self.len()).map(|k| self.dt(k - 1) * values[k]).sum()
    }

    /// Composite trapezoid rule.
    pub fn trapezoid(&self, values: &[T]) -> T {
        (0..self.steps())
            .map(|k| self.dt(k) * (values[k] + values[k + 1]) * T::half())
            .sum()
    }
}

/// States on a time grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory<T> {
    pub grid: TimeGrid<T>,
    pub states: Vec<Vec<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(grid: TimeGrid<T>, states: Vec<Vec<T>>) -> Result<Self> {
        if states.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: states.len(),
            });
        }
        let n = states[0].len();
        if n == 0 {
            return Err(Error::invalid("states must have positive dimension"));
        }
        if let Some(bad) = states.iter().find(|s| s.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
        }
        Ok(Trajectory { grid, states })
    }

    pub fn constant(grid: TimeGrid<T>, x: Vec<T>) -> Self {
        let states = vec![x; grid.len()];
        Trajectory { grid, states }
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn initial(&self) -> &[T] {
        &self.states[0]
    }

    pub fn terminal(&self) -> &[T] {
        &self.states[self.states.len() - 1]
    }

    /// Difference quotients `(x_{k+1} − x_k)/Δt_k`.
    pub fn velocities(&self) -> Vec<Vec<T>> {
        (0..self.grid.steps())
            .map(|k| {
                let dt = self.grid.dt(k);
                sub(&self.states[k + 1], &self.states[k]).into_iter().map(|v| v / dt).collect()
            })
            .collect()
    }

    /// `max_k |x_k − y_k|`.
    pub fn sup_gap(&self, other: &Trajectory<T>) -> Result<T> {
        if self.states.len() != other.states.len() {
            return Err(Error::DimensionMismatch {
                expected: self.states.len(),
                got: other.states.len(),
            });
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| dist(a, b))
            .fold(T::zero(), T::max))
    }
}

/// `(L^p(0, b) norm, sup norm)` of a trajectory; the first by the composite
/// trapezoid rule applied to `|x(t)|^p`.
pub fn trajectory_norms<T: Real>(x: &Trajectory<T>, p: T) -> Result<(T, T)> {
    if !(p >= T::one()) {
        return Err(Error::invalid("norm exponent must satisfy p >= 1"));
    }
    let pointwise: Vec<T> = x.states.iter().map(|s| norm(s)).collect();
    let sup = pointwise.iter().copied().fold(T::zero(), T::max);
    let powered: Vec<T> = pointwise.iter().map(|&v| v.powf(p)).collect();
    Ok((x.grid.trapezoid(&powered).powf(T::one() / p), sup))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::<f64>::uniform(0.0, 4).is_err());
        assert!(TimeGrid::<f64>::uniform(1.0, 0).is_err());
        assert!(TimeGrid::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(TimeGrid::from_nodes(vec![0.1, 1.0]).is_err());
        let g = TimeGrid::uniform(2.0, 4).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        let r = g.refine();
        assert_eq!(r.steps(), 8);
        assert_eq!(r.horizon(), 2.0);
    }

    #[test]
    fn norm_examples() {
        let g = TimeGrid::uniform(2.0, 10).unwrap();
        let zero = Trajectory::constant(g.clone(), vec![0.0, 0.0]);
        assert_eq!(trajectory_norms(&zero, 2.0).unwrap(), (0.0, 0.0));
        let c = Trajectory::constant(g, vec![3.0]);
        let (lp, sup) = trajectory_norms(&c, 3.0).unwrap();
        assert!((lp - 3.0 * 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(sup, 3.0);

        let g = TimeGrid::uniform(1.0, 1000).unwrap();
        let states = g.nodes().iter().map(|&t| vec![t]).collect();
        let ramp = Trajectory::new(g, states).unwrap();
        let (l2, sup) = trajectory_norms(&ramp, 2.0).unwrap();
        assert!((l2 - 3f64.powf(-0.5)).abs() < 1e-6);
        assert_eq!(sup, 1.0);
    }
}
