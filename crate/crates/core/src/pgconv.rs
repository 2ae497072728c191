//! Oscillating-coefficient experiments for `y′ + aₙ(y) ∋ h` with the weighted
//! p-Laplacian `aₙ = −div(a(nz)|Dy|^{p−2}Dy)`, compared against the constant
//! coefficient limit in a weak sense.
//!
//! The solver convention is `−x′ ∈ A(t, x) + f`, so the forcing `h` enters
//! as `f = −h`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::inclusion::{solve_forced, TimeGrid, Trajectory};
use crate::operators::{MonotoneOp, WeightedPLaplacian};
use crate::scalar::Real;

/// Quadrature points for period means of smooth generators.
const MEAN_POINTS: usize = 4096;

/// A 1-periodic coefficient `a(z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Generator<T> {
    Constant { value: T },
    /// `left` on `[0, split)`, `right` on `[split, 1)`.
    TwoPhase { left: T, right: T, split: T },
    /// `mean + amplitude·cos(2πz)`.
    Cosine { mean: T, amplitude: T },
}

impl<T: Real> Generator<T> {
    pub fn eval(&self, z: T) -> T {
        let frac = z - z.floor();
        match *self {
            Generator::Constant { value } => value,
            Generator::TwoPhase { left, right, split } => {
                if frac < split {
                    left
                } else {
                    right
                }
            }
            Generator::Cosine { mean, amplitude } => mean + amplitude * (T::two() * T::PI() * frac).cos(),
        }
    }

    pub fn bounds(&self) -> (T, T) {
        match *self {
            Generator::Constant { value } => (value, value),
            Generator::TwoPhase { left, right, .. } => (left.min(right), left.max(right)),
            Generator::Cosine { mean, amplitude } => (mean - amplitude.abs(), mean + amplitude.abs()),
        }
    }

    /// `∫₀¹ a(z)^s dz`.
    fn period_mean(&self, s: T) -> T {
        match *self {
            Generator::Constant { value } => value.powf(s),
            Generator::TwoPhase { left, right, split } => split * left.powf(s) + (T::one() - split) * right.powf(s),
            Generator::Cosine { .. } => {
                let n = T::from_usize_lossy(MEAN_POINTS);
                (0..MEAN_POINTS)
                    .map(|i| self.eval(T::from_usize_lossy(i) / n).powf(s))
                    .sum::<T>()
                    / n
            }
        }
    }
}

/// The family `n ↦ a(nz)` on a fixed spatial mesh of `m` interior nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFamily<T> {
    pub generator: Generator<T>,
    pub p: T,
    pub m: usize,
}

impl<T: Real> CoefficientFamily<T> {
    pub fn new(generator: Generator<T>, p: T, m: usize) -> Result<Self> {
        let fam = CoefficientFamily { generator, p, m };
        fam.validate()?;
        Ok(fam)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.generator.bounds();
        if !(lo > T::zero()) || !hi.is_finite() {
            return Err(Error::invalid("coefficient generator must be bounded and positive"));
        }
        if let Generator::TwoPhase { split, .. } = self.generator {
            if !(split > T::zero() && split < T::one()) {
                return Err(Error::invalid("two-phase split must lie in (0, 1)"));
            }
        }
        if self.m == 0 {
            return Err(Error::invalid("mesh needs at least one interior node"));
        }
        if !(self.p >= T::two()) {
            return Err(Error::invalid("exponent must satisfy p >= 2"));
        }
        Ok(())
    }

    pub fn bounds(&self) -> (T, T) {
        self.generator.bounds()
    }

    /// Half-node weights `a(n z_{j+½})`.
    pub fn weights(&self, n: usize) -> Vec<T> {
        let dz = T::one() / T::from_usize_lossy(self.m + 1);
        let nn = T::from_usize_lossy(n);
        (0..=self.m)
            .map(|j| self.generator.eval(nn * (T::from_usize_lossy(j) + T::half()) * dz))
            .collect()
    }

    pub fn member(&self, n: usize) -> Result<WeightedPLaplacian<T>> {
        if n == 0 {
            return Err(Error::invalid("family index must be at least 1"));
        }
        WeightedPLaplacian::new(self.weights(n), self.p)
    }

    pub fn nodes(&self) -> Vec<T> {
        let dz = T::one() / T::from_usize_lossy(self.m + 1);
        (1..=self.m).map(|i| T::from_usize_lossy(i) * dz).collect()
    }
}

/// `h(t, z_i) = Σ_k c_k sin(kπz_i)` on every grid node.
pub fn sine_forcing<T: Real>(family: &CoefficientFamily<T>, coefficients: &[T], grid: &TimeGrid<T>) -> Vec<Vec<T>> {
    let z = family.nodes();
    let h: Vec<T> = z
        .iter()
        .map(|&zi| {
            coefficients
                .iter()
                .enumerate()
                .map(|(k, &c)| c * (T::from_usize_lossy(k + 1) * T::PI() * zi).sin())
                .sum()
        })
        .collect();
    vec![h; grid.len()]
}

fn solve_with<T: Real>(lap: WeightedPLaplacian<T>, h: &[Vec<T>], xi: &[T], grid: &TimeGrid<T>) -> Result<Trajectory<T>> {
    check_dim(grid.len(), h.len())?;
    let op = MonotoneOp::p_laplacian(lap);
    let f: Vec<Vec<T>> = h.iter().map(|v| v.iter().map(|&x| -x).collect()).collect();
    solve_forced(&op, &f, xi, grid, T::lit(crate::operators::DEFAULT_RESOLVENT_TOL))
}

/// Solves `y′ + aₙ(y) ∋ h`, `y(0) = ξ`.
pub fn solve_family_member<T: Real>(
    family: &CoefficientFamily<T>,
    n: usize,
    h: &[Vec<T>],
    xi: &[T],
    grid: &TimeGrid<T>,
) -> Result<Trajectory<T>> {
    solve_with(family.member(n)?, h, xi, grid)
}

/// The constant coefficient `a_hom = (∫₀¹ a^{−1/(p−1)})^{−(p−1)}`; the
/// harmonic mean when `p = 2`.
pub fn homogenized_coefficient<T: Real>(family: &CoefficientFamily<T>) -> T {
    let s = T::one() / (family.p - T::one());
    family.generator.period_mean(-s).powf(-(family.p - T::one()))
}

/// The limit operator with coefficient [`homogenized_coefficient`].
pub fn homogenized_limit<T: Real>(family: &CoefficientFamily<T>) -> Result<WeightedPLaplacian<T>> {
    family.validate()?;
    WeightedPLaplacian::constant(family.m, homogenized_coefficient(family), family.p)
}

/// A test functional: sine mode `k` restricted to a time window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunctional<T> {
    pub mode: usize,
    pub t0: T,
    pub t1: T,
}

/// Sine modes `1..=modes` times `windows` equal time windows.
pub fn default_functionals<T: Real>(horizon: T, modes: usize, windows: usize) -> Vec<TestFunctional<T>> {
    let w = T::from_usize_lossy(windows);
    (1..=modes)
        .flat_map(|k| {
            (0..windows).map(move |j| TestFunctional {
                mode: k,
                t0: horizon * T::from_usize_lossy(j) / w,
                t1: horizon * T::from_usize_lossy(j + 1) / w,
            })
        })
        .collect()
}

/// `∫_{t0}^{t1} Σ_i Δz y_i(t) sin(kπz_i) dt`, each step assigned to the
/// window containing its midpoint and evaluated at its right node.
pub fn pairing<T: Real>(y: &Trajectory<T>, phi: &TestFunctional<T>) -> T {
    let m = y.dim();
    let dz = T::one() / T::from_usize_lossy(m + 1);
    let k = T::from_usize_lossy(phi.mode);
    let shape: Vec<T> = (1..=m).map(|i| (k * T::PI() * T::from_usize_lossy(i) * dz).sin()).collect();
    let grid = &y.grid;
    (0..grid.steps())
        .filter(|&s| {
            let mid = grid.t(s) + T::half() * grid.dt(s);
            mid >= phi.t0 && mid < phi.t1
        })
        .map(|s| {
            let inner: T = y.states[s + 1].iter().zip(&shape).map(|(&a, &b)| a * b).sum();
            grid.dt(s) * dz * inner
        })
        .sum()
}

/// `(Σ_k Δt ‖D y_{k+1}‖_p^p)^{1/p}` with `‖D‖_p^p = Σ_j Δz |D_j|^p`.
pub fn gradient_norm<T: Real>(y: &Trajectory<T>, p: T) -> T {
    let m = y.dim();
    let dz = T::one() / T::from_usize_lossy(m + 1);
    let probe = WeightedPLaplacian::constant(m, T::one(), p).expect("valid probe operator");
    let grid = &y.grid;
    let total: T = (0..grid.steps())
        .map(|s| {
            let d: T = probe.gradients(&y.states[s + 1]).iter().map(|g| dz * g.abs().powf(p)).sum();
            grid.dt(s) * d
        })
        .sum();
    total.powf(T::one() / p)
}

/// `max_k (Σ_i Δz y_i(t_k)²)^{1/2}`.
pub fn sup_l2<T: Real>(y: &Trajectory<T>) -> T {
    let dz = T::one() / T::from_usize_lossy(y.dim() + 1);
    y.states
        .iter()
        .map(|x| (dz * x.iter().map(|&v| v * v).sum::<T>()).sqrt())
        .fold(T::zero(), T::max)
}

/// Energy bounds `(sup_t |y|, ‖Dy‖_{L^p L^p})` valid for every member:
/// with `E = |ξ|² + 2K Σ Δt |h_{k+1}|^{p′}` and
/// `K = (p ĉ₁/2)^{−1/(p−1)} / p′`, `|y(t)|² ≤ E` and `ĉ₁‖Dy‖^p ≤ E`
/// (Δz-weighted norms throughout).
pub fn energy_bound<T: Real>(family: &CoefficientFamily<T>, h: &[Vec<T>], xi: &[T], grid: &TimeGrid<T>) -> (T, T) {
    let p = family.p;
    let (c1, _) = family.bounds();
    let dz = T::one() / T::from_usize_lossy(family.m + 1);
    let l2 = |v: &[T]| (dz * v.iter().map(|&x| x * x).sum::<T>()).sqrt();
    let q = p / (p - T::one());
    let k = (p * c1 * T::half()).powf(-T::one() / (p - T::one())) / q;
    let forcing: T = (0..grid.steps()).map(|s| grid.dt(s) * l2(&h[s + 1]).powf(q)).sum();
    let e = l2(xi).powi(2) + T::two() * k * forcing;
    (e.sqrt(), (e / c1).powf(T::one() / p))
}

/// Outcome for one family index.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PGEntry<T> {
    pub n: usize,
    pub pairings: Vec<T>,
    pub gaps: Vec<T>,
    pub max_gap: T,
    /// `sup_t |yₙ − y_hom|` in the Δz-weighted norm; not expected to vanish
    /// in general.
    pub strong_gap: T,
    pub gradient_norm: T,
    pub sup_norm: T,
    pub error: Option<String>,
}

/// Weak-convergence report for a coefficient family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PGReport<T> {
    pub a_hom: T,
    pub functionals: Vec<TestFunctional<T>>,
    pub limit_pairings: Vec<T>,
    pub limit_gradient_norm: T,
    pub entries: Vec<PGEntry<T>>,
    pub energy_bound_sup: T,
    pub energy_bound_gradient: T,
    pub tolerance: T,
    pub trend_ok: bool,
    pub final_ok: bool,
    pub energy_ok: bool,
    pub pass: bool,
}

/// Solves every member in `n_list` and the homogenized problem and compares
/// test-functional pairings. Passes when no member failed, the largest gap at
/// the last `n` is below the one at the first `n`, the last gap is at most
/// `tol_pg`, and every member respects the energy bound.
pub fn run_pg_experiment<T: Real>(
    family: &CoefficientFamily<T>,
    h: &[Vec<T>],
    xi: &[T],
    grid: &TimeGrid<T>,
    n_list: &[usize],
    functionals: &[TestFunctional<T>],
    tol_pg: T,
) -> Result<PGReport<T>> {
    family.validate()?;
    check_dim(family.m, xi.len())?;
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
        return Err(Error::invalid("n_list must be nonempty, positive and strictly increasing"));
    }
    if functionals.is_empty() {
        return Err(Error::invalid("at least one test functional is required"));
    }
    let a_hom = homogenized_coefficient(family);
    let limit = solve_with(homogenized_limit(family)?, h, xi, grid)?;
    let limit_pairings: Vec<T> = functionals.iter().map(|f| pairing(&limit, f)).collect();
    let dz = T::one() / T::from_usize_lossy(family.m + 1);

    let entries: Vec<PGEntry<T>> = n_list
        .par_iter()
        .map(|&n| match solve_family_member(family, n, h, xi, grid) {
            Ok(y) => {
                let pairings: Vec<T> = functionals.iter().map(|f| pairing(&y, f)).collect();
                let gaps: Vec<T> = pairings.iter().zip(&limit_pairings).map(|(a, b)| (*a - *b).abs()).collect();
                let strong_gap = y
                    .states
                    .iter()
                    .zip(&limit.states)
                    .map(|(a, b)| (dz * a.iter().zip(b).map(|(&u, &v)| (u - v) * (u - v)).sum::<T>()).sqrt())
                    .fold(T::zero(), T::max);
                PGEntry {
                    n,
                    max_gap: gaps.iter().copied().fold(T::zero(), T::max),
                    pairings,
                    gaps,
                    strong_gap,
                    gradient_norm: gradient_norm(&y, family.p),
                    sup_norm: sup_l2(&y),
                    error: None,
                }
            }
            Err(e) => PGEntry {
                n,
                pairings: Vec::new(),
                gaps: Vec::new(),
                max_gap: T::nan(),
                strong_gap: T::nan(),
                gradient_norm: T::nan(),
                sup_norm: T::nan(),
                error: Some(e.to_string()),
            },
        })
        .collect();

    let (bound_sup, bound_grad) = energy_bound(family, h, xi, grid);
    let all_ok = entries.iter().all(|e| e.error.is_none());
    let first = entries[0].max_gap;
    let last = entries[entries.len() - 1].max_gap;
    let trend_ok = all_ok && (entries.len() == 1 || last <= first);
    let final_ok = all_ok && last <= tol_pg;
    let slack = T::lit(1e-9);
    let energy_ok = all_ok
        && entries
            .iter()
            .all(|e| e.sup_norm <= bound_sup * (T::one() + slack) && e.gradient_norm <= bound_grad * (T::one() + slack));
    Ok(PGReport {
        a_hom,
        functionals: functionals.to_vec(),
        limit_pairings,
        limit_gradient_norm: gradient_norm(&limit, family.p),
        entries,
        energy_bound_sup: bound_sup,
        energy_bound_gradient: bound_grad,
        tolerance: tol_pg,
        trend_ok,
        final_ok,
        energy_ok,
        pass: trend_ok && final_ok && energy_ok,
    })
}

/// Constant coefficient whose solution matches member `n` on the first
/// functional, by bisection on `[ĉ₁, ĉ₂]` (the pairing is monotone in the
/// coefficient for a positive single-mode forcing).
pub fn fit_effective_coefficient<T: Real>(
    family: &CoefficientFamily<T>,
    n: usize,
    h: &[Vec<T>],
    xi: &[T],
    grid: &TimeGrid<T>,
    functional: &TestFunctional<T>,
) -> Result<T> {
    let target = pairing(&solve_family_member(family, n, h, xi, grid)?, functional);
    let at = |c: T| -> Result<T> {
        let lap = WeightedPLaplacian::constant(family.m, c, family.p)?;
        Ok(pairing(&solve_with(lap, h, xi, grid)?, functional))
    };
    let (mut lo, mut hi) = family.bounds();
    let decreasing = at(lo)? >= at(hi)?;
    for _ in 0..50 {
        let mid = T::half() * (lo + hi);
        let v = at(mid)?;
        if (v > target) == decreasing {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::lit(1e-10) * hi {
            break;
        }
    }
    Ok(T::half() * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_phase(p: f64, m: usize) -> CoefficientFamily<f64> {
        CoefficientFamily::new(Generator::TwoPhase { left: 1.0, right: 4.0, split: 0.5 }, p, m).unwrap()
    }

    #[test]
    fn homogenized_values() {
        assert!((homogenized_coefficient(&two_phase(2.0, 10)) - 1.6).abs() < 1e-14);
        let c = CoefficientFamily::new(Generator::Constant { value: 2.5 }, 3.0, 10).unwrap();
        assert!((homogenized_coefficient(&c) - 2.5f64).abs() < 1e-14);
        let f = two_phase(3.0, 10);
        let a = homogenized_coefficient(&f);
        let (lo, hi) = f.bounds();
        assert!(lo <= a && a <= hi);
        let expected = (0.5 * (1.0f64 + 0.25f64.sqrt())).powi(-2);
        assert!((a - expected).abs() < 1e-14);
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let fam = two_phase(2.0, 8);
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let h = vec![vec![0.0; 8]; grid.len()];
        let y = solve_family_member(&fam, 3, &h, &[0.0; 8], &grid).unwrap();
        assert!(y.states.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn heat_equation_steady_state() {
        let fam = CoefficientFamily::new(Generator::Constant { value: 1.0 }, 2.0, 200).unwrap();
        let grid = TimeGrid::uniform(5.0, 200).unwrap();
        let h = sine_forcing(&fam, &[1.0], &grid);
        let y = solve_family_member(&fam, 1, &h, &vec![0.0; 200], &grid).unwrap();
        let z = fam.nodes();
        let pi2 = std::f64::consts::PI.powi(2);
        let exact: Vec<f64> = z.iter().map(|&zi| (std::f64::consts::PI * zi).sin() / pi2).collect();
        let err = crate::linalg::dist(y.terminal(), &exact) / crate::linalg::norm(&exact);
        assert!(err <= 1e-2, "{err}");
    }

    #[test]
    fn smaller_coefficient_gives_larger_energy() {
        let grid = TimeGrid::uniform(1.0, 50).unwrap();
        let lo = CoefficientFamily::new(Generator::Constant { value: 1.0 }, 3.0, 30).unwrap();
        let hi = CoefficientFamily::new(Generator::Constant { value: 4.0 }, 3.0, 30).unwrap();
        let h = sine_forcing(&lo, &[1.0, 0.5], &grid);
        let xi = vec![0.0; 30];
        let ylo = solve_family_member(&lo, 1, &h, &xi, &grid).unwrap();
        let yhi = solve_family_member(&hi, 1, &h, &xi, &grid).unwrap();
        assert!(sup_l2(&ylo) > sup_l2(&yhi));
    }

    #[test]
    fn constant_family_has_no_gap() {
        let fam = CoefficientFamily::new(Generator::Constant { value: 2.0 }, 2.0, 20).unwrap();
        let grid = TimeGrid::uniform(1.0, 30).unwrap();
        let h = sine_forcing(&fam, &[1.0], &grid);
        let phis = default_functionals(1.0, 5, 3);
        let r = run_pg_experiment(&fam, &h, &[0.0; 20], &grid, &[1, 2, 4], &phis, 1e-12).unwrap();
        assert!(r.entries.iter().all(|e| e.max_gap <= 1e-14));
        assert!(r.energy_ok && r.pass);
    }

    #[test]
    fn rejects_bad_n_list() {
        let fam = two_phase(2.0, 8);
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let h = vec![vec![0.0; 8]; grid.len()];
        let phis = default_functionals(1.0, 1, 1);
        assert!(run_pg_experiment(&fam, &h, &[0.0; 8], &grid, &[4, 2], &phis, 1.0).is_err());
    }
}
