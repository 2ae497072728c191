use serde::Serialize;

use crate::convex::{distance_to_sum, ConvexBody};
use crate::error::{check_dim, Error, Result};
use crate::inclusion::{MultiMap, TimeGrid, Trajectory};
use crate::linalg::{dist, dot, norm, sub};
use crate::operators::{MonotoneOp, WeightedPLaplacian};
use crate::scalar::Real;

/// Compact parameter set `E` with its metric.
#[derive(Clone, Debug, PartialEq)]
pub enum ParameterSpace<T> {
    Interval { lo: T, hi: T },
    /// Finitely many parameter values; the metric is `|λ − μ|` unless a
    /// symmetric distance table indexed like `points` is given.
    Finite { points: Vec<T>, distances: Option<Vec<Vec<T>>> },
}

impl<T: Real> ParameterSpace<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            ParameterSpace::Interval { lo, hi } => {
                if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::invalid("parameter interval needs finite lo <= hi"));
                }
            }
            ParameterSpace::Finite { points, distances } => {
                if points.is_empty() {
                    return Err(Error::invalid("finite parameter set is empty"));
                }
                if let Some(d) = distances {
                    let n = points.len();
                    if d.len() != n || d.iter().any(|r| r.len() != n) {
                        return Err(Error::invalid("distance table must be square and match the points"));
                    }
                    for i in 0..n {
                        if d[i][i] != T::zero() {
                            return Err(Error::invalid("distance table needs a zero diagonal"));
                        }
                        for j in 0..n {
                            if d[i][j] != d[j][i] || d[i][j] < T::zero() || (i != j && d[i][j] == T::zero()) {
                                return Err(Error::invalid("distance table is not a metric"));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, lambda: T) -> bool {
        match self {
            ParameterSpace::Interval { lo, hi } => *lo <= lambda && lambda <= *hi,
            ParameterSpace::Finite { points, .. } => points.contains(&lambda),
        }
    }

    pub fn distance(&self, a: T, b: T) -> Result<T> {
        match self {
            ParameterSpace::Finite {
                points,
                distances: Some(d),
            } => {
                let i = points.iter().position(|&p| p == a);
                let j = points.iter().position(|&p| p == b);
                match (i, j) {
                    (Some(i), Some(j)) => Ok(d[i][j]),
                    _ => Err(Error::invalid("parameter not in the finite parameter set")),
                }
            }
            _ => Ok((a - b).abs()),
        }
    }

    /// Endpoints (interval) or all points (finite set).
    fn extremes(&self) -> Vec<T> {
        match self {
            ParameterSpace::Interval { lo, hi } => vec![*lo, *hi],
            ParameterSpace::Finite { points, .. } => points.clone(),
        }
    }
}

/// `λ ↦ A_λ`.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorFamily<T> {
    Fixed(MonotoneOp<T>),
    /// `A_λ x = (M₀ + λ M₁) x`.
    Linear { base: Vec<Vec<T>>, slope: Vec<Vec<T>> },
    /// Weighted p-Laplacian with half-node weights `a + λ a_λ`.
    PLaplacian { weights: Vec<T>, weights_lambda: Vec<T>, p: T },
}

impl<T: Real> OperatorFamily<T> {
    pub fn at(&self, lambda: T) -> Result<MonotoneOp<T>> {
        match self {
            OperatorFamily::Fixed(op) => Ok(op.clone()),
            OperatorFamily::Linear { base, slope } => {
                if base.len() != slope.len() {
                    return Err(Error::DimensionMismatch { expected: base.len(), got: slope.len() });
                }
                let m = base
                    .iter()
                    .zip(slope)
                    .map(|(r0, r1)| r0.iter().zip(r1).map(|(&a, &b)| a + lambda * b).collect())
                    .collect();
                MonotoneOp::linear(m)
            }
            OperatorFamily::PLaplacian { weights, weights_lambda, p } => {
                check_dim(weights.len(), weights_lambda.len())?;
                let w = weights.iter().zip(weights_lambda).map(|(&a, &b)| a + lambda * b).collect();
                Ok(MonotoneOp::p_laplacian(WeightedPLaplacian::new(w, *p)?))
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            OperatorFamily::Fixed(op) => op.dim(),
            OperatorFamily::Linear { base, .. } => base.len(),
            OperatorFamily::PLaplacian { weights, .. } => weights.len() - 1,
        }
    }

    pub fn depends_on_lambda(&self) -> bool {
        match self {
            OperatorFamily::Fixed(_) => false,
            OperatorFamily::Linear { slope, .. } => slope.iter().flatten().any(|v| *v != T::zero()),
            OperatorFamily::PLaplacian { weights_lambda, .. } => weights_lambda.iter().any(|v| *v != T::zero()),
        }
    }
}

/// Quadratic-plus-linear cost data:
/// `L = ½ q_x(λ)|x − x_ref|² + ⟨ℓ, x⟩`, `H = ½ q_u(λ)|u|² + ⟨h_u, u⟩`,
/// `ψ̂ = ½ q_T|x(b) − x_T|² + ⟨ℓ_T, x(b)⟩ + c_ξ⟨ξ, x(b)⟩`,
/// with `q(λ) = q + λ q_λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostSpec<T> {
    pub q_state: T,
    pub q_state_lambda: T,
    pub x_ref: Vec<T>,
    pub lin_state: Vec<T>,
    pub q_control: T,
    pub q_control_lambda: T,
    pub lin_control: Vec<T>,
    pub q_terminal: T,
    pub x_terminal: Vec<T>,
    pub lin_terminal: Vec<T>,
    pub xi_coupling: T,
}

impl<T: Real> CostSpec<T> {
    pub fn zero(dim: usize) -> Self {
        let z = vec![T::zero(); dim];
        CostSpec {
            q_state: T::zero(),
            q_state_lambda: T::zero(),
            x_ref: z.clone(),
            lin_state: z.clone(),
            q_control: T::zero(),
            q_control_lambda: T::zero(),
            lin_control: z.clone(),
            q_terminal: T::zero(),
            x_terminal: z.clone(),
            lin_terminal: z,
            xi_coupling: T::zero(),
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        for v in [&self.x_ref, &self.lin_state, &self.lin_control, &self.x_terminal, &self.lin_terminal] {
            check_dim(n, v.len())?;
        }
        if !(self.q_terminal >= T::zero()) {
            return Err(Error::invalid("terminal weight must be nonnegative"));
        }
        Ok(())
    }
}

/// One parametric optimal control problem on a fixed grid:
/// minimise `∫L + ∫H + ψ̂` subject to
/// `−x′ ∈ A_λ(t, x) + F(t, x, λ) + g(λ)⊙u`, `x(0) = ξ`, `|u(t)| ≤ r(t, λ)`,
/// with `g(λ) = g + λ g_λ` and `r(t, λ) = r + λ r_λ + t r_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlProblem<T> {
    pub operator: OperatorFamily<T>,
    pub map: MultiMap<T>,
    pub gain: Vec<T>,
    pub gain_lambda: Vec<T>,
    pub radius: T,
    pub radius_lambda: T,
    pub radius_time: T,
    pub cost: CostSpec<T>,
    pub parameters: ParameterSpace<T>,
    pub grid: TimeGrid<T>,
    /// Inner resolvent tolerance.
    pub tol: T,
}

impl<T: Real> ControlProblem<T> {
    /// Minimal instance with unit gain, the given radius, zero cost and
    /// `E = [0, 1]`.
    pub fn new(operator: OperatorFamily<T>, map: MultiMap<T>, radius: T, grid: TimeGrid<T>) -> Result<Self> {
        let n = operator.dim();
        let prob = ControlProblem {
            operator,
            map,
            gain: vec![T::one(); n],
            gain_lambda: vec![T::zero(); n],
            radius,
            radius_lambda: T::zero(),
            radius_time: T::zero(),
            cost: CostSpec::zero(n),
            parameters: ParameterSpace::Interval { lo: T::zero(), hi: T::one() },
            grid,
            tol: T::lit(crate::operators::DEFAULT_RESOLVENT_TOL),
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    /// Checks shapes, `r ≥ 0` on `[0, b] × E` and convexity of `H`.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        check_dim(n, self.map.dim())?;
        check_dim(n, self.gain.len())?;
        check_dim(n, self.gain_lambda.len())?;
        self.cost.check(n)?;
        self.parameters.validate()?;
        if !(self.tol > T::zero()) {
            return Err(Error::invalid("resolvent tolerance must be positive"));
        }
        let b = self.grid.horizon();
        for lam in self.parameters.extremes() {
            for t in [T::zero(), b] {
                if !(self.control_radius(t, lam) >= T::zero()) {
                    return Err(Error::invalid("control radius must be nonnegative on [0, b] x E"));
                }
            }
            if !(self.q_control(lam) >= T::zero()) {
                return Err(Error::invalid("control cost must be convex (q_u >= 0) on E"));
            }
        }
        Ok(())
    }

    pub fn check_parameter(&self, lambda: T) -> Result<()> {
        if self.parameters.contains(lambda) {
            Ok(())
        } else {
            Err(Error::invalid(format!("parameter {lambda} is outside E")))
        }
    }

    pub fn control_radius(&self, t: T, lambda: T) -> T {
        self.radius + lambda * self.radius_lambda + t * self.radius_time
    }

    pub fn control_set(&self, t: T, lambda: T) -> Result<ConvexBody<T>> {
        ConvexBody::ball(vec![T::zero(); self.dim()], self.control_radius(t, lambda))
    }

    pub fn multiplier(&self, lambda: T) -> Vec<T> {
        self.gain.iter().zip(&self.gain_lambda).map(|(&g, &gl)| g + lambda * gl).collect()
    }

    /// `M_g` with `|g(λ)_i| ≤ M_g` on `E`.
    pub fn gain_bound(&self) -> T {
        self.parameters
            .extremes()
            .into_iter()
            .flat_map(|l| self.multiplier(l))
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    fn q_state(&self, lambda: T) -> T {
        self.cost.q_state + lambda * self.cost.q_state_lambda
    }

    fn q_control(&self, lambda: T) -> T {
        self.cost.q_control + lambda * self.cost.q_control_lambda
    }

    pub fn running_state_cost(&self, x: &[T], lambda: T) -> T {
        let d = sub(x, &self.cost.x_ref);
        T::half() * self.q_state(lambda) * dot(&d, &d) + dot(&self.cost.lin_state, x)
    }

    pub fn control_cost(&self, u: &[T], lambda: T) -> T {
        T::half() * self.q_control(lambda) * dot(u, u) + dot(&self.cost.lin_control, u)
    }

    pub fn terminal_cost(&self, xi: &[T], x: &[T]) -> T {
        let d = sub(x, &self.cost.x_terminal);
        T::half() * self.cost.q_terminal * dot(&d, &d) + dot(&self.cost.lin_terminal, x) + self.cost.xi_coupling * dot(xi, x)
    }

    /// `∇_x (L + ψ̂)` at `x`.
    pub(crate) fn greedy_gradient(&self, xi: &[T], x: &[T], lambda: T) -> Vec<T> {
        let (qx, qt, c) = (self.q_state(lambda), self.cost.q_terminal, self.cost.xi_coupling);
        (0..x.len())
            .map(|i| {
                qx * (x[i] - self.cost.x_ref[i])
                    + self.cost.lin_state[i]
                    + qt * (x[i] - self.cost.x_terminal[i])
                    + self.cost.lin_terminal[i]
                    + c * xi[i]
            })
            .collect()
    }

    /// Total cost for given node states and controls (trapezoid rule).
    pub(crate) fn cost_of(&self, states: &[Vec<T>], controls: &[Vec<T>], xi: &[T], lambda: T) -> T {
        let l: Vec<T> = states.iter().map(|x| self.running_state_cost(x, lambda)).collect();
        let h: Vec<T> = controls.iter().map(|u| self.control_cost(u, lambda)).collect();
        self.grid.trapezoid(&l) + self.grid.trapezoid(&h) + self.terminal_cost(xi, &states[states.len() - 1])
    }
}

/// A state-control pair with its residual record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmissiblePair<T> {
    pub state: Trajectory<T>,
    pub control: Vec<Vec<T>>,
    /// Recorded selections of `F` (`selections[k] ∈ F(t_k, x_k, λ)`).
    pub selections: Vec<Vec<T>>,
    pub inclusion_residual: Vec<T>,
    pub constraint_residual: Vec<T>,
}

impl<T: Real> AdmissiblePair<T> {
    /// Pair with empty residual record; see [`check_admissible`].
    pub fn new(state: Trajectory<T>, control: Vec<Vec<T>>, selections: Vec<Vec<T>>) -> Result<Self> {
        check_dim(state.states.len(), control.len())?;
        check_dim(state.states.len(), selections.len())?;
        Ok(AdmissiblePair {
            state,
            control,
            selections,
            inclusion_residual: Vec::new(),
            constraint_residual: Vec::new(),
        })
    }

    /// `sup_k |x_k − y_k| + (∫|u − v|²)^{1/2}`.
    pub fn distance(&self, other: &AdmissiblePair<T>) -> Result<T> {
        let s = self.state.sup_gap(&other.state)?;
        Ok(s + control_l2_gap(&self.state.grid, &self.control, &other.control)?)
    }
}

/// `(∫₀ᵇ |u − v|²)^{1/2}` by the trapezoid rule.
pub fn control_l2_gap<T: Real>(grid: &TimeGrid<T>, u: &[Vec<T>], v: &[Vec<T>]) -> Result<T> {
    check_dim(grid.len(), u.len())?;
    check_dim(grid.len(), v.len())?;
    let sq: Vec<T> = u.iter().zip(v).map(|(a, b)| {
        let d = dist(a, b);
        d * d
    }).collect();
    Ok(grid.trapezoid(&sq).sqrt())
}

/// Residual record of [`check_admissible`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmissibilityReport<T> {
    /// Entry 0 is `|x_0 − ξ|`; entry `k ≥ 1` the inclusion residual of step `k`.
    pub inclusion_residual: Vec<T>,
    pub constraint_residual: Vec<T>,
    pub max_inclusion: T,
    pub max_constraint: T,
    pub pass: bool,
}

/// `J(x, u, ξ, λ)`.
pub fn evaluate_cost<T: Real>(prob: &ControlProblem<T>, pair: &AdmissiblePair<T>, xi: &[T], lambda: T) -> Result<T> {
    if pair.state.grid != prob.grid {
        return Err(Error::invalid("pair lives on a different grid than the problem"));
    }
    check_dim(prob.grid.len(), pair.control.len())?;
    check_dim(prob.dim(), xi.len())?;
    Ok(prob.cost_of(&pair.state.states, &pair.control, xi, lambda))
}

/// Per-node residuals of the discrete inclusion
/// `(x_k − x_{k+1})/Δt − g⊙u_{k+1} ∈ A(t_{k+1}, x_{k+1}) + F(t_{k+1}, x_{k+1}, λ)`
/// and of the control constraint.
pub fn check_admissible<T: Real>(
    prob: &ControlProblem<T>,
    pair: &AdmissiblePair<T>,
    xi: &[T],
    lambda: T,
    tol: T,
) -> Result<AdmissibilityReport<T>> {
    let grid = &pair.state.grid;
    check_dim(grid.len(), pair.control.len())?;
    check_dim(prob.dim(), xi.len())?;
    let op = prob.operator.at(lambda)?;
    let g = prob.multiplier(lambda);
    let mut inclusion = vec![dist(pair.state.initial(), xi)];
    for k in 0..grid.steps() {
        let (x0, x1) = (&pair.state.states[k], &pair.state.states[k + 1]);
        let dt = grid.dt(k);
        let t1 = grid.t(k + 1);
        let v: Vec<T> = (0..x0.len())
            .map(|i| (x0[i] - x1[i]) / dt - g[i] * pair.control[k + 1][i])
            .collect();
        let a = op.apply(t1, x1)?;
        let f = prob.map.eval(t1, x1, lambda)?;
        inclusion.push(distance_to_sum(&v, &a, &f)?);
    }
    let constraint: Vec<T> = pair
        .control
        .iter()
        .enumerate()
        .map(|(k, u)| (norm(u) - prob.control_radius(grid.t(k), lambda)).max(T::zero()))
        .collect();
    let max_inclusion = inclusion.iter().copied().fold(T::zero(), T::max);
    let max_constraint = constraint.iter().copied().fold(T::zero(), T::max);
    Ok(AdmissibilityReport {
        pass: max_inclusion <= tol && max_constraint <= tol,
        inclusion_residual: inclusion,
        constraint_residual: constraint,
        max_inclusion,
        max_constraint,
    })
}

/// Fills the residual record of `pair` from [`check_admissible`].
pub fn annotate<T: Real>(prob: &ControlProblem<T>, pair: &mut AdmissiblePair<T>, xi: &[T], lambda: T) -> Result<()> {
    let rep = check_admissible(prob, pair, xi, lambda, prob.tol)?;
    pair.inclusion_residual = rep.inclusion_residual;
    pair.constraint_residual = rep.constraint_residual;
    Ok(())
}
