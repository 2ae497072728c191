use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{TimeGrid, Trajectory};
use super::multimap::MultiMap;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist, norm};
use crate::operators::{MonotoneOp, TimeFn};
use crate::sampling::{rng_for, unit_ball_point, unit_direction};
use crate::scalar::Real;

/// Iteration cap of the per-step selection corrector.
const CORRECTOR_MAX_ITER: usize = 200;

/// One implicit Euler step `x ↦ (I + dt A(t + dt, ·))⁻¹(x − dt f_next)`.
pub fn step_implicit<T: Real>(op: &MonotoneOp<T>, t: T, dt: T, x: &[T], f_next: &[T], tol: T) -> Result<Vec<T>> {
    if !(dt > T::zero()) {
        return Err(Error::invalid("time step must be positive"));
    }
    check_dim(x.len(), f_next.len())?;
    let y: Vec<T> = x.iter().zip(f_next).map(|(&xi, &fi)| xi - dt * fi).collect();
    op.resolvent(t + dt, dt, &y, tol)
}

/// Implicit Euler for `−x′ ∈ A(t, x) + f(t)`; `f[k]` is the forcing at node
/// `k` and `f[0]` is never read.
pub fn solve_forced<T: Real>(op: &MonotoneOp<T>, f: &[Vec<T>], xi: &[T], grid: &TimeGrid<T>, tol: T) -> Result<Trajectory<T>> {
    check_dim(grid.len(), f.len())?;
    check_dim(op.dim(), xi.len())?;
    let mut states = Vec::with_capacity(grid.len());
    states.push(xi.to_vec());
    for k in 0..grid.steps() {
        let next = step_implicit(op, grid.t(k), grid.dt(k), &states[k], &f[k + 1], tol).map_err(|e| e.at_node(k + 1))?;
        states.push(next);
    }
    Trajectory::new(grid.clone(), states)
}

/// Identity on the closed ball of radius `m`, radial projection outside it.
pub fn radial_retract<T: Real>(x: &[T], m: T) -> Vec<T> {
    let nx = norm(x);
    if nx <= m {
        x.to_vec()
    } else {
        x.iter().map(|&v| v * m / nx).collect()
    }
}

/// Gronwall bound `M` with `|x(t)| ≤ M` on `[0, b]` for every solution of
/// `−x′ ∈ A(t, x) + F(t, x, λ)`.
pub fn apriori_bound<T: Real>(op: &MonotoneOp<T>, map: &MultiMap<T>, xi: &[T], lambda: T, horizon: T) -> Result<T> {
    let (a3, c3) = map.growth(lambda);
    apriori_bound_with_growth(op, &a3, c3, xi, horizon)
}

/// As [`apriori_bound`] for a right-hand side bounded by `a3(t) + c3|x|`.
///
/// Pairing the equation with `x` and using `⟨A(t,x), x⟩ ≥ −a2(t)` and
/// `|f||x| ≤ ½a3² + ½|x|² + c3|x|²` gives
/// `|x(t)|² ≤ c8² + 2 c9 ∫₀ᵗ |x|²` with `c8² = |ξ|² + 2‖a2‖₁ + ‖a3‖₂²` and
/// `c9 = c3 + ½` (`c9 = c3` when `a3 ≡ 0`), hence `M = c8 e^{c9 b}`.
pub fn apriori_bound_with_growth<T: Real>(op: &MonotoneOp<T>, a3: &TimeFn<T>, c3: T, xi: &[T], horizon: T) -> Result<T> {
    check_dim(op.dim(), xi.len())?;
    let c = op.constants();
    let a2_l1 = c.a2.integral(horizon);
    let a3_l2 = a3.l2_norm(horizon);
    if !a2_l1.is_finite() || !a3_l2.is_finite() || !c3.is_finite() || !(c3 >= T::zero()) {
        return Err(Error::invalid("a-priori bound needs finite growth and coercivity constants"));
    }
    if !c.a2.is_nonnegative_on(horizon) {
        return Err(Error::invalid("a2 must be nonnegative"));
    }
    let nx = norm(xi);
    let c8 = (nx * nx + T::two() * a2_l1 + a3_l2 * a3_l2).sqrt();
    let c9 = if a3_l2 > T::zero() { c3 + T::half() } else { c3 };
    Ok(c8 * (c9 * horizon).exp())
}

/// How `sample_solution_set` picks an element of `F(t_{k+1}, ·, λ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionStrategy {
    MinimalNorm,
    ExtremePoint,
    RandomExtreme,
    ProjectPrevious,
}

/// Data shared by every step of a semi-implicit run.
pub(crate) struct StepContext<'a, T> {
    pub op: &'a MonotoneOp<T>,
    pub map: &'a MultiMap<T>,
    pub lambda: T,
    pub tol: T,
}

/// Which element of `F(t_{k+1}, x_{k+1})` the corrector tracks.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Target<'a, T> {
    /// The projection of the current selection.
    Nearest,
    Centre,
    /// A maximiser of `⟨d, ·⟩`.
    Extreme(&'a [T]),
}

impl<T: Real> StepContext<'_, T> {
    /// Advances one step from `x` with selection predictor `f0 ∈ F(t_next, x)`.
    ///
    /// The corrector `f ← proj(f, F(t_next, x(f)))` contracts with ratio
    /// `k·dt`; it stops once the selection moves by less than the selection
    /// tolerance and returns `(x(f), f)` for that `f`, so that
    /// `x(f) = step_implicit(x, f + extra)` holds exactly and
    /// `d(f, F(t_next, x(f))) ≤ tolerance`.
    pub fn advance(&self, t: T, dt: T, x: &[T], f0: Vec<T>, extra: Option<&[T]>) -> Result<(Vec<T>, Vec<T>)> {
        self.advance_to(t, dt, x, f0, extra, Target::Nearest)
    }

    /// [`advance`](Self::advance) with the corrector `f ← target(F(t_next, x(f)))`.
    pub fn advance_to(
        &self,
        t: T,
        dt: T,
        x: &[T],
        f0: Vec<T>,
        extra: Option<&[T]>,
        target: Target<'_, T>,
    ) -> Result<(Vec<T>, Vec<T>)> {
        let t_next = t + dt;
        let mut f = f0;
        let mut last_move = T::infinity();
        let mut prev_move = T::infinity();
        for _ in 0..CORRECTOR_MAX_ITER {
            let forcing: Vec<T> = match extra {
                Some(e) => f.iter().zip(e).map(|(&a, &b)| a + b).collect(),
                None => f.clone(),
            };
            let next = step_implicit(self.op, t, dt, x, &forcing, self.tol)?;
            let set = self.map.eval(t_next, &next, self.lambda)?;
            let moved = match target {
                Target::Nearest => set.project(&f)?,
                Target::Centre => set.center(),
                Target::Extreme(d) => set.extreme_point(d)?,
            };
            let delta = dist(&moved, &f);
            if delta <= selection_tol(&f) {
                return Ok((next, f));
            }
            prev_move = last_move;
            last_move = delta;
            f = moved;
        }
        Err(Error::NoContraction {
            iterations: CORRECTOR_MAX_ITER,
            ratio: (last_move / prev_move).as_f64(),
        })
    }
}

/// Tolerance on `d(f, F(t, x))` accepted for a recorded selection.
pub(crate) fn selection_tol<T: Real>(f: &[T]) -> T {
    T::lit(1e-12) * (T::one() + norm(f))
}

/// One sampled element of the solution set with its selection path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionSample<T> {
    pub trajectory: Trajectory<T>,
    /// `selections[k] ∈ F(t_k, x_k, λ)`; entry 0 is the strategy's pick at `(0, ξ)`.
    pub selections: Vec<Vec<T>>,
}

/// Per-sample state of the randomized strategies.
enum Picker<T> {
    MinimalNorm,
    Direction(Vec<T>),
    Random { mean: Vec<T>, rng: Box<rand_chacha::ChaCha8Rng> },
    ProjectPrevious,
}

impl<T: Real> Picker<T> {
    fn new(strategy: SelectionStrategy, dim: usize, seed: u64, index: u64) -> Self {
        let mut rng = rng_for(seed, index);
        match strategy {
            SelectionStrategy::MinimalNorm => Picker::MinimalNorm,
            SelectionStrategy::ProjectPrevious => Picker::ProjectPrevious,
            SelectionStrategy::ExtremePoint => Picker::Direction(unit_direction(&mut rng, dim)),
            SelectionStrategy::RandomExtreme => {
                let mean = unit_ball_point(&mut rng, dim);
                Picker::Random { mean, rng: Box::new(rng) }
            }
        }
    }

    fn pick(&mut self, set: &crate::convex::ConvexBody<T>, prev: &[T]) -> Result<Vec<T>> {
        let zero = vec![T::zero(); set.dim()];
        match self {
            Picker::MinimalNorm => set.project(&zero),
            Picker::ProjectPrevious => set.project(prev),
            Picker::Direction(d) => set.extreme_point(d),
            Picker::Random { mean, rng } => {
                let m = norm(mean);
                let d: Vec<T> = if m > T::zero() && rng.gen::<f64>() < m.as_f64() {
                    mean.iter().map(|&v| v / m).collect()
                } else {
                    unit_direction(rng, set.dim())
                };
                set.extreme_point(&d)
            }
        }
    }
}

/// Samples `count` discrete solutions of `−x′ ∈ A(t, x) + F(t, x, λ)` from
/// `ξ`. Sample `i` draws its randomness from stream `i` of `seed`, so the
/// output does not depend on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn sample_solution_set<T: Real>(
    op: &MonotoneOp<T>,
    map: &MultiMap<T>,
    xi: &[T],
    lambda: T,
    grid: &TimeGrid<T>,
    strategy: SelectionStrategy,
    count: usize,
    seed: u64,
    tol: T,
) -> Result<Vec<SolutionSample<T>>> {
    if count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    check_dim(op.dim(), xi.len())?;
    check_dim(op.dim(), map.dim())?;
    let ctx = StepContext { op, map, lambda, tol };
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut picker = Picker::new(strategy, op.dim(), seed, i as u64);
            let mut states = vec![xi.to_vec()];
            let first = picker.pick(&map.eval(T::zero(), xi, lambda)?, &vec![T::zero(); xi.len()])?;
            let mut selections = vec![first];
            for k in 0..grid.steps() {
                let (t, dt) = (grid.t(k), grid.dt(k));
                let set = map.eval(t + dt, &states[k], lambda)?;
                let f0 = picker.pick(&set, &selections[k])?;
                let (x, f) = ctx.advance(t, dt, &states[k], f0, None).map_err(|e| e.at_node(k + 1))?;
                states.push(x);
                selections.push(f);
            }
            Ok(SolutionSample {
                trajectory: Trajectory::new(grid.clone(), states)?,
                selections,
            })
        })
        .collect()
}

/// Result of comparing two solutions driven by the same forcing.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionReport {
    pub initial_gap: f64,
    pub sup_gap: f64,
    pub pass: bool,
}

/// Solves from `ξ₁` and `ξ₂` with the same forcing and checks
/// `sup_k |x₁(t_k) − x₂(t_k)| ≤ |ξ₁ − ξ₂| + 10·tol`.
pub fn contraction_check<T: Real>(
    op: &MonotoneOp<T>,
    xi1: &[T],
    xi2: &[T],
    f: &[Vec<T>],
    grid: &TimeGrid<T>,
    tol: T,
) -> Result<ContractionReport> {
    let a = solve_forced(op, f, xi1, grid, tol)?;
    let b = solve_forced(op, f, xi2, grid, tol)?;
    let initial = dist(xi1, xi2);
    let gap = a.sup_gap(&b)?;
    Ok(ContractionReport {
        initial_gap: initial.as_f64(),
        sup_gap: gap.as_f64(),
        pass: gap <= initial + T::lit(10.0) * tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::ConvexBody;

    const TOL: f64 = 1e-10;

    fn zeros(grid: &TimeGrid<f64>, n: usize) -> Vec<Vec<f64>> {
        vec![vec![0.0; n]; grid.len()]
    }

    #[test]
    fn step_examples() {
        let z = MonotoneOp::<f64>::zero(1);
        assert_eq!(step_implicit(&z, 0.0, 0.1, &[1.0], &[2.0], TOL).unwrap(), vec![0.8]);
        let id = MonotoneOp::<f64>::identity(1);
        let x = step_implicit(&id, 0.0, 0.1, &[1.0], &[2.0], TOL).unwrap();
        assert!((x[0] - 0.8 / 1.1).abs() < 1e-15);
        let a = MonotoneOp::<f64>::abs_subdifferential(1);
        assert_eq!(step_implicit(&a, 0.0, 0.5, &[0.3], &[0.0], TOL).unwrap(), vec![0.0]);
        assert!(step_implicit(&a, 0.0, 0.0, &[0.3], &[0.0], TOL).is_err());
    }

    #[test]
    fn solve_examples() {
        let g = TimeGrid::uniform(1.0, 50).unwrap();
        let z = MonotoneOp::<f64>::zero(2);
        let tr = solve_forced(&z, &zeros(&g, 2), &[1.0, -2.0], &g, TOL).unwrap();
        assert!(tr.states.iter().all(|s| s == &vec![1.0, -2.0]));

        let g = TimeGrid::uniform(1.0, 10_000).unwrap();
        let id = MonotoneOp::<f64>::identity(1);
        let tr = solve_forced(&id, &zeros(&g, 1), &[1.0], &g, TOL).unwrap();
        assert!((tr.terminal()[0] - (-1f64).exp()).abs() <= 1e-4);
    }

    #[test]
    fn sliding_mode() {
        let g = TimeGrid::uniform(1.0, 1000).unwrap();
        let a = MonotoneOp::<f64>::abs_subdifferential(1);
        let tr = solve_forced(&a, &zeros(&g, 1), &[0.5], &g, TOL).unwrap();
        for (t, s) in g.nodes().iter().zip(&tr.states) {
            assert!((s[0] - (0.5 - t).max(0.0)).abs() <= 2e-3);
        }
    }

    #[test]
    fn retraction_examples() {
        assert_eq!(radial_retract(&[0.1, 0.2], 1.0), vec![0.1, 0.2]);
        let r = radial_retract(&[3.0_f64, 4.0], 1.0);
        assert!((r[0] - 0.6).abs() < 1e-15 && (r[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn apriori_examples() {
        let id = MonotoneOp::<f64>::identity(2);
        let zero = MultiMap::zero(2);
        assert!((apriori_bound(&id, &zero, &[3.0, 4.0], 0.0, 2.0).unwrap() - 5.0).abs() < 1e-14);
        let f = MultiMap::constant(ConvexBody::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap());
        let m1 = apriori_bound(&id, &f, &[1.0, 0.0], 0.0, 1.0).unwrap();
        let m2 = apriori_bound(&id, &f, &[2.0, 0.0], 0.0, 1.0).unwrap();
        assert!(m2 >= m1);
    }

    #[test]
    fn singleton_samples_match_forced_solve() {
        let g = TimeGrid::uniform(1.0, 40).unwrap();
        let id = MonotoneOp::<f64>::identity(1);
        let f = MultiMap::constant(ConvexBody::point(vec![0.5]).unwrap());
        let forced = solve_forced(&id, &vec![vec![0.5]; g.len()], &[1.0], &g, TOL).unwrap();
        for s in [
            SelectionStrategy::MinimalNorm,
            SelectionStrategy::ExtremePoint,
            SelectionStrategy::RandomExtreme,
            SelectionStrategy::ProjectPrevious,
        ] {
            let samples = sample_solution_set(&id, &f, &[1.0], 0.0, &g, s, 3, 9, TOL).unwrap();
            assert!(samples.iter().all(|p| p.trajectory == forced));
        }
    }

    #[test]
    fn reachable_interval_is_filled() {
        let b = 1.0;
        let g = TimeGrid::uniform(b, 50).unwrap();
        let z = MonotoneOp::<f64>::zero(1);
        let f = MultiMap::constant(ConvexBody::boxed(vec![-1.0], vec![1.0]).unwrap());
        let samples = sample_solution_set(&z, &f, &[0.0], 0.0, &g, SelectionStrategy::RandomExtreme, 1000, 4, TOL).unwrap();
        let ends: Vec<f64> = samples.iter().map(|s| s.trajectory.terminal()[0]).collect();
        let lo = ends.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ends.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo <= -0.95 * b && hi >= 0.95 * b, "{lo} {hi}");
        assert!(ends.iter().all(|e| e.abs() <= b + 1e-12));
    }

    #[test]
    fn state_dependent_selection_is_valid() {
        let g = TimeGrid::uniform(1.0, 100).unwrap();
        let id = MonotoneOp::<f64>::identity(1);
        let f = MultiMap::affine(Some(vec![vec![1.0]]), vec![0.0]).unwrap().with_box(vec![1.0]).unwrap();
        for s in [SelectionStrategy::ExtremePoint, SelectionStrategy::ProjectPrevious] {
            for smp in sample_solution_set(&id, &f, &[0.5], 0.0, &g, s, 4, 1, TOL).unwrap() {
                for (k, (x, sel)) in smp.trajectory.states.iter().zip(&smp.selections).enumerate() {
                    let d = f.eval(g.t(k), x, 0.0).unwrap().distance(sel).unwrap();
                    assert!(d <= 1e-9, "node {k}: {d}");
                }
            }
        }
    }

    #[test]
    fn contraction_examples() {
        let g = TimeGrid::uniform(1.0, 200).unwrap();
        let id = MonotoneOp::<f64>::identity(1);
        let f = zeros(&g, 1);
        let same = contraction_check(&id, &[1.0], &[1.0], &f, &g, TOL).unwrap();
        assert_eq!(same.sup_gap, 0.0);
        let rep = contraction_check(&id, &[1.0], &[0.0], &f, &g, TOL).unwrap();
        assert!(rep.pass);
        assert!(rep.sup_gap <= 1.0);
    }
}
