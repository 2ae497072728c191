use serde::Serialize;

use super::grid::{TimeGrid, Trajectory};
use super::multimap::MultiMap;
use super::solver::solve_forced;
use crate::error::{check_dim, Error, Result};
use crate::linalg::dist;
use crate::operators::{MonotoneOp, TimeFn};
use crate::scalar::Real;

/// Tuning of [`filippov_construct`].
#[derive(Clone, Debug, PartialEq)]
pub struct FilippovOptions<T> {
    pub epsilon: T,
    pub max_iter: usize,
    /// Inner resolvent tolerance.
    pub tol: T,
    /// Largest accepted `d(γ(t_k), F(t_k, x(t_k), λ))` of the returned selection.
    pub selection_tol: T,
    /// Added to the bound when setting the per-node pass flags.
    pub allowance: T,
}

impl<T: Real> FilippovOptions<T> {
    pub fn new(epsilon: T) -> Self {
        FilippovOptions {
            epsilon,
            max_iter: 60,
            tol: T::lit(crate::operators::DEFAULT_RESOLVENT_TOL),
            selection_tol: T::lit(1e-11),
            allowance: T::zero(),
        }
    }
}

/// Per-node error budget of a Filippov construction and its verification.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FilippovCertificate<T> {
    pub epsilon: T,
    pub times: Vec<T>,
    pub tau: Vec<T>,
    pub defect: Vec<T>,
    pub bound: Vec<T>,
    pub deviation: Vec<T>,
    pub pass: Vec<bool>,
}

impl<T: Real> FilippovCertificate<T> {
    pub fn all_pass(&self) -> bool {
        self.pass.iter().all(|&p| p)
    }

    /// Largest `deviation − bound` over the nodes.
    pub fn worst_excess(&self) -> T {
        self.deviation
            .iter()
            .zip(&self.bound)
            .map(|(&d, &b)| d - b)
            .fold(T::neg_infinity(), T::max)
    }
}

/// Output of [`filippov_construct`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FilippovOutcome<T> {
    pub trajectory: Trajectory<T>,
    pub selections: Vec<Vec<T>>,
    pub certificate: FilippovCertificate<T>,
    /// `‖γⁿ − γⁿ⁻¹‖₁` for `n = 1, 2, …`.
    pub gaps: Vec<T>,
}

/// `τ(t_k) = ∫₀^{t_k} k`.
pub fn tau_values<T: Real>(k: &TimeFn<T>, grid: &TimeGrid<T>) -> Vec<T> {
    grid.nodes().iter().map(|&t| k.integral(t)).collect()
}

/// `B_k = b ε e^{τ_k} + Σ_{j=1..k} p_j e^{τ_k − τ_j} (t_j − t_{j−1})`.
pub fn certificate_bound<T: Real>(grid: &TimeGrid<T>, tau: &[T], defect: &[T], epsilon: T) -> Vec<T> {
    let b = grid.horizon();
    (0..grid.len())
        .map(|k| {
            let tail: T = (1..=k).map(|j| defect[j] * (tau[k] - tau[j]).exp() * grid.dt(j - 1)).sum();
            b * epsilon * tau[k].exp() + tail
        })
        .collect()
}

/// `τ(b)ⁿ/n! · (‖η‖₁ + 2bε)`, the majorant of the `n`-th iterate gap.
pub fn factorial_envelope<T: Real>(n: usize, tau_b: T, eta_l1: T, horizon: T, epsilon: T) -> T {
    let mut term = T::one();
    for i in 1..=n {
        term = term * tau_b / T::from_usize_lossy(i);
    }
    term * (eta_l1 + T::two() * horizon * epsilon)
}

/// `βₙ(t_k) = 2∫₀^{t_k} η(s)(τ(t_k) − τ(s))^{n−1}/(n−1)! ds
///           + 2b (Σ_{i=0..n} ε/2^{i+1}) τ(t_k)^{n−1}/(n−1)!`
/// with right-endpoint quadrature, for `n ≥ 1`.
pub fn beta_n<T: Real>(n: usize, grid: &TimeGrid<T>, tau: &[T], eta: &[T], epsilon: T) -> Result<Vec<T>> {
    if n == 0 {
        return Err(Error::invalid("beta_n is defined for n >= 1"));
    }
    check_dim(grid.len(), tau.len())?;
    check_dim(grid.len(), eta.len())?;
    let fact: T = (1..n).map(T::from_usize_lossy).fold(T::one(), |a, b| a * b);
    let pw = |v: T| if n == 1 { T::one() } else { v.powi(n as i32 - 1) };
    let eps_sum: T = (0..=n).map(|i| epsilon / T::two().powi(i as i32 + 1)).sum();
    let b = grid.horizon();
    Ok((0..grid.len())
        .map(|k| {
            let integral: T = (1..=k).map(|j| grid.dt(j - 1) * eta[j] * pw(tau[k] - tau[j])).sum();
            T::two() * integral / fact + T::two() * b * eps_sum * pw(tau[k]) / fact
        })
        .collect())
}

/// Turns a reference trajectory `u`, solving `−u′ ∈ A(t, u) + h + e` from
/// `ξ = u(0)`, into a solution of `−x′ ∈ A(t, x) + F(t, x, λ) + e` by
/// successive projection: `γ⁰ = proj(h, F(·, u, λ))`, then
/// `xⁿ = solve(γⁿ⁻¹ + e)` and `γⁿ = proj(γⁿ⁻¹, F(·, xⁿ, λ))`.
///
/// Iteration stops when `‖γⁿ − γⁿ⁻¹‖₁ ≤ εb/2ⁿ` and the selection is within
/// `selection_tol` of `F(·, xⁿ, λ)` at every node; the pair `(xⁿ, γⁿ⁻¹)` is
/// returned, so the trajectory is exactly the forced solve of the returned
/// selection. `extra` is an optional additional forcing `e` (for instance a
/// control term) shared by both problems.
pub fn filippov_construct<T: Real>(
    op: &MonotoneOp<T>,
    map: &MultiMap<T>,
    reference: &Trajectory<T>,
    reference_forcing: &[Vec<T>],
    extra: Option<&[Vec<T>]>,
    lambda: T,
    opts: &FilippovOptions<T>,
) -> Result<FilippovOutcome<T>> {
    if !(opts.epsilon > T::zero()) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let grid = &reference.grid;
    check_dim(grid.len(), reference_forcing.len())?;
    check_dim(op.dim(), reference.dim())?;
    if let Some(e) = extra {
        check_dim(grid.len(), e.len())?;
    }
    let xi = reference.initial().to_vec();
    let b = grid.horizon();

    let mut defect = Vec::with_capacity(grid.len());
    let mut gamma = Vec::with_capacity(grid.len());
    for (k, (u, h)) in reference.states.iter().zip(reference_forcing).enumerate() {
        let set = map.eval(grid.t(k), u, lambda)?;
        defect.push(set.distance(h)?);
        gamma.push(set.project(h)?);
    }

    let mut gaps = Vec::new();
    for n in 1..=opts.max_iter {
        let forcing: Vec<Vec<T>> = match extra {
            Some(e) => gamma.iter().zip(e).map(|(g, ei)| g.iter().zip(ei).map(|(&a, &c)| a + c).collect()).collect(),
            None => gamma.clone(),
        };
        let x = solve_forced(op, &forcing, &xi, grid, opts.tol)?;
        let mut next = Vec::with_capacity(grid.len());
        let (mut gap, mut worst) = (T::zero(), T::zero());
        for k in 0..grid.len() {
            let g = map.eval(grid.t(k), &x.states[k], lambda)?.project(&gamma[k])?;
            let moved = dist(&g, &gamma[k]);
            if k > 0 {
                gap += grid.dt(k - 1) * moved;
            }
            worst = worst.max(moved);
            next.push(g);
        }
        gaps.push(gap);
        if gap <= opts.epsilon * b / T::two().powi(n as i32) && worst <= opts.selection_tol {
            let tau = tau_values(&map.lipschitz(), grid);
            let bound = certificate_bound(grid, &tau, &defect, opts.epsilon);
            let deviation: Vec<T> = x.states.iter().zip(&reference.states).map(|(a, u)| dist(a, u)).collect();
            let pass = deviation.iter().zip(&bound).map(|(&d, &bk)| d <= bk + opts.allowance).collect();
            return Ok(FilippovOutcome {
                certificate: FilippovCertificate {
                    epsilon: opts.epsilon,
                    times: grid.nodes().to_vec(),
                    tau,
                    defect,
                    bound,
                    deviation,
                    pass,
                },
                trajectory: x,
                selections: gamma,
                gaps,
            });
        }
        gamma = next;
    }
    let ratio = match gaps.len() {
        0 | 1 => f64::NAN,
        l => (gaps[l - 1] / gaps[l - 2]).as_f64(),
    };
    Err(Error::NoContraction {
        iterations: opts.max_iter,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inclusion::solve_forced;

    #[test]
    fn zero_defect_reference_is_fixed() {
        let g = TimeGrid::uniform(1.0, 100).unwrap();
        let id = MonotoneOp::<f64>::identity(1);
        // F(t, x) = [x − 1, x + 1] contains h ≡ 0.5 along any u with |u − 0.5| ≤ 1
        let f = MultiMap::affine(Some(vec![vec![1.0]]), vec![0.0]).unwrap().with_box(vec![1.0]).unwrap();
        let h = vec![vec![0.5]; g.len()];
        let u = solve_forced(&id, &h, &[0.2], &g, 1e-12).unwrap();
        let out = filippov_construct(&id, &f, &u, &h, None, 0.0, &FilippovOptions::new(0.01)).unwrap();
        assert!(out.trajectory.sup_gap(&u).unwrap() < 1e-12);
        assert!(out.certificate.defect.iter().all(|&p| p == 0.0));
        for (b, tau) in out.certificate.bound.iter().zip(&out.certificate.tau) {
            assert!((b - 0.01 * tau.exp()).abs() < 1e-15);
        }
        assert!(out.certificate.all_pass());
    }

    #[test]
    fn unit_defect_bound_closed_form() {
        let g = TimeGrid::uniform(1.0, 400).unwrap();
        let z = MonotoneOp::<f64>::zero(1);
        let f = MultiMap::affine(Some(vec![vec![1.0]]), vec![2.0]).unwrap().with_box(vec![1.0]).unwrap();
        let h = vec![vec![0.0]; g.len()];
        let u = Trajectory::constant(g.clone(), vec![0.0]);
        let eps = 1e-3;
        let out = filippov_construct(&z, &f, &u, &h, None, 0.0, &FilippovOptions::new(eps)).unwrap();
        assert!(out.certificate.all_pass());
        for (k, &t) in g.nodes().iter().enumerate() {
            assert!((out.certificate.defect[k] - 1.0).abs() < 1e-12);
            // right-endpoint sum of e^{t − s} over (0, t], within O(dt) of e^t − 1
            let exact = eps * t.exp() + t.exp() - 1.0;
            assert!((out.certificate.bound[k] - exact).abs() <= 2.0 * g.dt(0) * t.exp());
            assert!((out.trajectory.states[k][0] + t).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_and_beta() {
        assert!((factorial_envelope(3, 2.0_f64, 1.0, 1.0, 0.5) - 8.0 / 6.0 * 2.0).abs() < 1e-14);
        let g = TimeGrid::uniform(1.0, 10).unwrap();
        let tau = tau_values(&TimeFn::Constant(1.0_f64), &g);
        let eta = vec![0.0; g.len()];
        let beta = beta_n(1, &g, &tau, &eta, 1.0).unwrap();
        // n = 1: 2b(ε/2 + ε/4)
        assert!(beta.iter().all(|v: &f64| (*v - 1.5).abs() < 1e-14));
        assert!(beta_n(0, &g, &tau, &eta, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_epsilon() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let z = MonotoneOp::<f64>::zero(1);
        let u = Trajectory::constant(g.clone(), vec![0.0]);
        let h = vec![vec![0.0]; g.len()];
        assert!(filippov_construct(&z, &MultiMap::zero(1), &u, &h, None, 0.0, &FilippovOptions::new(0.0)).is_err());
    }
}
