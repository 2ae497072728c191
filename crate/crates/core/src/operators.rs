//! Monotone operators `A(t, ·)`: pointwise values, resolvents
//! `(I + hA(t, ·))⁻¹`, the weighted discrete p-Laplacian and Monte-Carlo
//! checks of the growth/coercivity constants.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::convex::ConvexBody;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, mat_vec, norm, solve_dense, solve_tridiagonal, spectral_norm, sub};
use crate::sampling::{normal_vector, rng_for};
use crate::scalar::Real;

/// Default inner tolerance of the resolvent solves.
pub const DEFAULT_RESOLVENT_TOL: f64 = 1e-10;
/// Default iteration cap of the resolvent solves.
pub const DEFAULT_RESOLVENT_MAX_ITER: usize = 200;

/// A nonnegative function of time, either constant or affine on `[0, b]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeFn<T> {
    Constant(T),
    Affine { intercept: T, slope: T },
}

impl<T: Real> TimeFn<T> {
    pub fn zero() -> Self {
        TimeFn::Constant(T::zero())
    }

    pub fn eval(&self, t: T) -> T {
        match *self {
            TimeFn::Constant(c) => c,
            TimeFn::Affine { intercept, slope } => intercept + slope * t,
        }
    }

    /// `∫₀ᵇ f`.
    pub fn integral(&self, b: T) -> T {
        match *self {
            TimeFn::Constant(c) => c * b,
            TimeFn::Affine { intercept, slope } => intercept * b + slope * b * b * T::half(),
        }
    }

    /// `(∫₀ᵇ f²)^{1/2}`.
    pub fn l2_norm(&self, b: T) -> T {
        match *self {
            TimeFn::Constant(c) => c.abs() * b.sqrt(),
            TimeFn::Affine { intercept: a, slope: s } => {
                let three = T::lit(3.0);
                (a * a * b + a * s * b * b + s * s * b * b * b / three).max(T::zero()).sqrt()
            }
        }
    }

    pub fn is_nonnegative_on(&self, b: T) -> bool {
        self.eval(T::zero()) >= T::zero() && self.eval(b) >= T::zero()
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> TimeFn<U> {
        match *self {
            TimeFn::Constant(c) => TimeFn::Constant(f(c)),
            TimeFn::Affine { intercept, slope } => TimeFn::Affine {
                intercept: f(intercept),
                slope: f(slope),
            },
        }
    }
}

/// Growth `|h| ≤ a1(t) + c1|x|^{p−1}` and coercivity `⟨h, x⟩ ≥ c2|x|^p − a2(t)`
/// constants of an operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisConstants<T> {
    pub p: T,
    pub a1: TimeFn<T>,
    pub c1: T,
    pub c2: T,
    pub a2: TimeFn<T>,
}

impl<T: Real> HypothesisConstants<T> {
    fn new(p: T, a1: T, c1: T, c2: T, a2: T) -> Self {
        HypothesisConstants {
            p,
            a1: TimeFn::Constant(a1),
            c1,
            c2,
            a2: TimeFn::Constant(a2),
        }
    }
}

/// Convex piecewise-linear function of one variable, given by its kinks and
/// the slopes of the pieces between them (`slopes.len() == breakpoints.len() + 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear<T> {
    pub breakpoints: Vec<T>,
    pub slopes: Vec<T>,
}

impl<T: Real> PiecewiseLinear<T> {
    pub fn new(breakpoints: Vec<T>, slopes: Vec<T>) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::invalid("piecewise-linear potential needs one more slope than breakpoints"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("breakpoints must be strictly increasing"));
        }
        if slopes.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::invalid("slopes must be nondecreasing for a convex potential"));
        }
        if slopes.iter().chain(&breakpoints).any(|v| !v.is_finite()) {
            return Err(Error::invalid("piecewise-linear potential has non-finite data"));
        }
        Ok(PiecewiseLinear { breakpoints, slopes })
    }

    /// `|·|`
    pub fn abs() -> Self {
        PiecewiseLinear {
            breakpoints: vec![T::zero()],
            slopes: vec![-T::one(), T::one()],
        }
    }

    /// Subdifferential `[lo, hi]` at `x`.
    pub fn subdifferential(&self, x: T) -> (T, T) {
        let j = self.breakpoints.iter().take_while(|&&b| b < x).count();
        if j < self.breakpoints.len() && self.breakpoints[j] == x {
            (self.slopes[j], self.slopes[j + 1])
        } else {
            (self.slopes[j], self.slopes[j])
        }
    }

    /// Minimiser of `½(x − y)² + h(ψ(x) + ½ q x²)`.
    pub fn prox(&self, y: T, h: T, q: T) -> T {
        let den = T::one() + h * q;
        let n = self.breakpoints.len();
        for j in 0..=n {
            let x = (y - h * self.slopes[j]) / den;
            let above = j == 0 || x > self.breakpoints[j - 1];
            let below = j == n || x < self.breakpoints[j];
            if above && below {
                return x;
            }
            if j < n {
                // kink b_j absorbs y when y − (1 + hq) b_j ∈ h [s_j, s_{j+1}]
                let b = self.breakpoints[j];
                let r = y - den * b;
                if r >= h * self.slopes[j] && r <= h * self.slopes[j + 1] {
                    return b;
                }
            }
        }
        // unreachable for a convex potential; fall back to the nearest kink
        self.breakpoints.first().copied().unwrap_or(y / den)
    }

    pub fn max_abs_slope(&self) -> T {
        self.slopes.iter().fold(T::zero(), |m, s| m.max(s.abs()))
    }
}

/// Weighted discrete p-Laplacian `−div(a(z)|Dx|^{p−2}Dx)` on `(0, 1)` with
/// homogeneous Dirichlet data, on `m` interior nodes and `m + 1` half-node
/// weights `a(z_{j+½})`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPLaplacian<T> {
    weights: Vec<T>,
    p: T,
    modulation: Option<(T, T)>,
}

impl<T: Real> WeightedPLaplacian<T> {
    pub fn new(weights: Vec<T>, p: T) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::invalid("p-Laplacian needs at least one interior node"));
        }
        if weights.iter().any(|w| !(*w > T::zero()) || !w.is_finite()) {
            return Err(Error::invalid("p-Laplacian weights must be positive and finite"));
        }
        if !(p >= T::two()) || !p.is_finite() {
            return Err(Error::invalid("p-Laplacian exponent must satisfy p >= 2"));
        }
        Ok(WeightedPLaplacian {
            weights,
            p,
            modulation: None,
        })
    }

    pub fn constant(m: usize, a: T, p: T) -> Result<Self> {
        Self::new(vec![a; m + 1], p)
    }

    /// Multiplies every weight by `1 + amplitude·sin(2π·frequency·t)`.
    pub fn with_modulation(mut self, amplitude: T, frequency: T) -> Result<Self> {
        if !(amplitude >= T::zero() && amplitude < T::one()) {
            return Err(Error::invalid("weight modulation amplitude must lie in [0, 1)"));
        }
        self.modulation = Some((amplitude, frequency));
        Ok(self)
    }

    pub fn interior_nodes(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn mesh_width(&self) -> T {
        T::one() / T::from_usize_lossy(self.weights.len())
    }

    pub fn exponent(&self) -> T {
        self.p
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Interior node coordinates `z_i = i Δz`.
    pub fn nodes(&self) -> Vec<T> {
        let dz = self.mesh_width();
        (1..=self.interior_nodes()).map(|i| T::from_usize_lossy(i) * dz).collect()
    }

    fn factor(&self, t: T) -> T {
        match self.modulation {
            Some((amp, freq)) => T::one() + amp * (T::two() * T::PI() * freq * t).sin(),
            None => T::one(),
        }
    }

    /// `(ĉ1, ĉ2)` with `ĉ1 ≤ a(t, z) ≤ ĉ2` for all `t`.
    pub fn weight_bounds(&self) -> (T, T) {
        let lo = self.weights.iter().copied().fold(T::infinity(), T::min);
        let hi = self.weights.iter().copied().fold(T::neg_infinity(), T::max);
        match self.modulation {
            Some((amp, _)) => (lo * (T::one() - amp), hi * (T::one() + amp)),
            None => (lo, hi),
        }
    }

    /// Smallest eigenvalue of the scaled second-difference matrix `K/Δz²`.
    pub fn poincare_constant(&self) -> T {
        let dz = self.mesh_width();
        let s = (T::PI() * dz * T::half()).sin();
        T::lit(4.0) * s * s / (dz * dz)
    }

    /// Half-node gradients `D_j = (x_{j+1} − x_j)/Δz`, zero boundary values.
    pub fn gradients(&self, x: &[T]) -> Vec<T> {
        let m = self.interior_nodes();
        let dz = self.mesh_width();
        let at = |k: usize| if k == 0 || k == m + 1 { T::zero() } else { x[k - 1] };
        (0..=m).map(|j| (at(j + 1) - at(j)) / dz).collect()
    }

    fn fluxes(&self, t: T, grads: &[T]) -> Vec<T> {
        let f = self.factor(t);
        let pm2 = self.p - T::two();
        grads
            .iter()
            .zip(&self.weights)
            .map(|(&d, &a)| {
                let mag = if pm2 == T::zero() { T::one() } else { d.abs().powf(pm2) };
                f * a * mag * d
            })
            .collect()
    }

    pub fn apply(&self, t: T, x: &[T]) -> Vec<T> {
        let dz = self.mesh_width();
        let flux = self.fluxes(t, &self.gradients(x));
        (0..self.interior_nodes()).map(|i| -(flux[i + 1] - flux[i]) / dz).collect()
    }

    /// `φ(x) = Σ_j Δz a_j |D_j|^p / p`; the operator equals `∇φ / Δz`.
    pub fn potential(&self, t: T, x: &[T]) -> T {
        let dz = self.mesh_width();
        let f = self.factor(t);
        self.gradients(x)
            .iter()
            .zip(&self.weights)
            .map(|(&d, &a)| dz * f * a * d.abs().powf(self.p) / self.p)
            .sum()
    }

    fn derived_constants(&self) -> HypothesisConstants<T> {
        let (c_lo, c_hi) = self.weight_bounds();
        let dz = self.mesh_width();
        let p = self.p;
        let intervals = T::from_usize_lossy(self.weights.len());
        let c1 = c_hi * (T::two() / dz).powf(p);
        let c2 = c_lo * intervals.powf(T::one() - p * T::half()) * self.poincare_constant().powf(p * T::half());
        HypothesisConstants::new(p, T::zero(), c1, c2, T::zero())
    }

    /// Damped Newton on `½|x − y|² + (h/Δz) φ(x)`.
    fn resolvent(&self, t: T, h: T, y: &[T], tol: T, max_iter: usize) -> Result<Vec<T>> {
        let m = self.interior_nodes();
        let dz = self.mesh_width();
        let f = self.factor(t);
        let target = tol * h.min(T::one());
        let objective = |x: &[T]| {
            let d = sub(x, y);
            T::half() * dot(&d, &d) + h / dz * self.potential(t, x)
        };
        let mut x = y.to_vec();
        let mut last = T::infinity();
        for _ in 0..max_iter {
            let ax = self.apply(t, &x);
            let grad: Vec<T> = (0..m).map(|i| x[i] - y[i] + h * ax[i]).collect();
            let gnorm = norm(&grad);
            last = gnorm;
            if gnorm <= target {
                return Ok(x);
            }
            let grads = self.gradients(&x);
            let pm1 = self.p - T::one();
            let pm2 = self.p - T::two();
            let kappa: Vec<T> = grads
                .iter()
                .zip(&self.weights)
                .map(|(&d, &a)| {
                    let mag = if pm2 == T::zero() { T::one() } else { d.abs().powf(pm2) };
                    f * a * pm1 * mag / (dz * dz)
                })
                .collect();
            let diag: Vec<T> = (0..m).map(|i| T::one() + h * (kappa[i] + kappa[i + 1])).collect();
            let off: Vec<T> = (0..m).map(|i| -h * kappa[i + 1]).collect();
            let lower: Vec<T> = (0..m).map(|i| -h * kappa[i]).collect();
            let neg: Vec<T> = grad.iter().map(|&g| -g).collect();
            let step = solve_tridiagonal(&lower, &diag, &off, &neg)?;
            let f0 = objective(&x);
            let slope = dot(&grad, &step);
            let residual_at = |z: &[T]| {
                let az = self.apply(t, z);
                norm(&(0..m).map(|i| z[i] - y[i] + h * az[i]).collect::<Vec<T>>())
            };
            // Once the predicted decrease is below the rounding level of the
            // objective, the Armijo test is meaningless; backtrack on the
            // residual norm instead.
            let flat = -slope <= T::lit(1e3) * T::epsilon() * (T::one() + f0.abs());
            let mut s = T::one();
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<T> = x.iter().zip(&step).map(|(&xi, &di)| xi + s * di).collect();
                let ok = if flat {
                    residual_at(&trial) < gnorm
                } else {
                    objective(&trial) <= f0 + T::lit(1e-4) * s * slope
                };
                if ok {
                    x = trial;
                    accepted = true;
                    break;
                }
                s *= T::half();
            }
            if !accepted {
                if gnorm <= tol {
                    return Ok(x);
                }
                break;
            }
        }
        if last <= tol {
            return Ok(x);
        }
        Err(Error::Nonconvergence {
            iterations: max_iter,
            residual: last.as_f64(),
        })
    }
}

/// Evaluation rule of a monotone operator.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorRule<T> {
    Zero,
    /// `x ↦ M x` with `M + Mᵀ` positive semidefinite.
    Linear { matrix: Vec<Vec<T>> },
    /// Gradient of `Σᵢ c |xᵢ|^q / q`, `q ≥ 2`.
    Power { coeff: T, exponent: T },
    /// Subdifferential of `Σᵢ ψᵢ(xᵢ) + ½ q |x|²` with convex piecewise-linear `ψᵢ`.
    Prox {
        pieces: Vec<PiecewiseLinear<T>>,
        quadratic: T,
    },
    PLaplacian(WeightedPLaplacian<T>),
}

/// A maximal monotone operator on `Rⁿ` together with its declared constants.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneOp<T> {
    dim: usize,
    rule: OperatorRule<T>,
    constants: HypothesisConstants<T>,
}

impl<T: Real> MonotoneOp<T> {
    pub fn zero(dim: usize) -> Self {
        MonotoneOp {
            dim,
            rule: OperatorRule::Zero,
            constants: HypothesisConstants::new(T::two(), T::zero(), T::zero(), T::zero(), T::zero()),
        }
    }

    /// Linear operator; its growth constant is `|M|₂` and its coercivity
    /// constant the smallest eigenvalue of the symmetric part.
    pub fn linear(matrix: Vec<Vec<T>>) -> Result<Self> {
        let n = matrix.len();
        if n == 0 || matrix.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("linear operator needs a nonempty square matrix"));
        }
        if matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("linear operator has non-finite entries"));
        }
        let sym = nalgebra::DMatrix::<f64>::from_fn(n, n, |i, j| {
            0.5 * (matrix[i][j].as_f64() + matrix[j][i].as_f64())
        });
        let lam_min = sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        let c1 = spectral_norm(&matrix);
        if lam_min < -1e-12 * (1.0 + c1.as_f64()) {
            return Err(Error::invalid("linear operator is not monotone (symmetric part indefinite)"));
        }
        Ok(MonotoneOp {
            dim: n,
            rule: OperatorRule::Linear { matrix },
            constants: HypothesisConstants::new(T::two(), T::zero(), c1, T::lit(lam_min.max(0.0)), T::zero()),
        })
    }

    /// `x ↦ x` in dimension `n`.
    pub fn identity(n: usize) -> Self {
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
            .collect();
        Self::linear(matrix).expect("identity is monotone")
    }

    pub fn power(dim: usize, coeff: T, exponent: T) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("operator dimension must be positive"));
        }
        if !(coeff >= T::zero()) || !(exponent >= T::two()) {
            return Err(Error::invalid("power operator needs coeff >= 0 and exponent >= 2"));
        }
        let n = T::from_usize_lossy(dim);
        let c2 = coeff * n.powf(T::one() - exponent * T::half());
        Ok(MonotoneOp {
            dim,
            rule: OperatorRule::Power { coeff, exponent },
            constants: HypothesisConstants::new(exponent, T::zero(), coeff, c2, T::zero()),
        })
    }

    /// Subdifferential of a separable piecewise-linear potential plus `½ q|x|²`.
    /// A single piece is shared by every coordinate.
    pub fn prox(dim: usize, pieces: Vec<PiecewiseLinear<T>>, quadratic: T) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("operator dimension must be positive"));
        }
        let pieces = match pieces.len() {
            1 => vec![pieces[0].clone(); dim],
            n if n == dim => pieces,
            n => return Err(Error::DimensionMismatch { expected: dim, got: n }),
        };
        if !(quadratic >= T::zero()) {
            return Err(Error::invalid("quadratic coefficient must be nonnegative"));
        }
        let lip = pieces.iter().fold(T::zero(), |m, p| m.max(p.max_abs_slope()));
        let n = T::from_usize_lossy(dim);
        // ⟨h, x⟩ ≥ q|x|² − L√n|x| ≥ (q/2)|x|² − L²n/(2q)
        let (c2, a2) = if quadratic > T::zero() {
            (quadratic * T::half(), lip * lip * n / (T::two() * quadratic))
        } else {
            (T::zero(), T::zero())
        };
        Ok(MonotoneOp {
            dim,
            rule: OperatorRule::Prox { pieces, quadratic },
            constants: HypothesisConstants::new(T::two(), lip * n.sqrt(), quadratic, c2, a2),
        })
    }

    /// `∂|·|` coordinate-wise.
    pub fn abs_subdifferential(dim: usize) -> Self {
        Self::prox(dim, vec![PiecewiseLinear::abs()], T::zero()).expect("|.| is convex")
    }

    pub fn p_laplacian(op: WeightedPLaplacian<T>) -> Self {
        let constants = op.derived_constants();
        MonotoneOp {
            dim: op.interior_nodes(),
            rule: OperatorRule::PLaplacian(op),
            constants,
        }
    }

    /// Replaces the derived constants by declared ones.
    pub fn with_constants(mut self, constants: HypothesisConstants<T>) -> Self {
        self.constants = constants;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rule(&self) -> &OperatorRule<T> {
        &self.rule
    }

    pub fn constants(&self) -> &HypothesisConstants<T> {
        &self.constants
    }

    pub fn exponent(&self) -> T {
        self.constants.p
    }

    /// The value set `A(t, x)`.
    pub fn apply(&self, t: T, x: &[T]) -> Result<ConvexBody<T>> {
        check_dim(self.dim, x.len())?;
        let point = |v: Vec<T>| ConvexBody::Point { x: v };
        Ok(match &self.rule {
            OperatorRule::Zero => point(vec![T::zero(); self.dim]),
            OperatorRule::Linear { matrix } => point(mat_vec(matrix, x)),
            OperatorRule::Power { coeff, exponent } => point(
                x.iter()
                    .map(|&xi| *coeff * xi.abs().powf(*exponent - T::two()) * xi)
                    .collect(),
            ),
            OperatorRule::Prox { pieces, quadratic } => {
                let (lo, hi): (Vec<T>, Vec<T>) = pieces
                    .iter()
                    .zip(x)
                    .map(|(pl, &xi)| {
                        let (l, h) = pl.subdifferential(xi);
                        (l + *quadratic * xi, h + *quadratic * xi)
                    })
                    .unzip();
                if lo == hi {
                    point(lo)
                } else {
                    ConvexBody::Box { lo, hi }
                }
            }
            OperatorRule::PLaplacian(op) => point(op.apply(t, x)),
        })
    }

    /// Solves `x + hA(t, x) ∋ y` with default iteration cap.
    pub fn resolvent(&self, t: T, h: T, y: &[T], tol: T) -> Result<Vec<T>> {
        self.resolvent_with_cap(t, h, y, tol, DEFAULT_RESOLVENT_MAX_ITER)
    }

    pub fn resolvent_with_cap(&self, t: T, h: T, y: &[T], tol: T, max_iter: usize) -> Result<Vec<T>> {
        check_dim(self.dim, y.len())?;
        if !(h > T::zero()) || !(tol > T::zero()) {
            return Err(Error::invalid("resolvent needs h > 0 and tol > 0"));
        }
        match &self.rule {
            OperatorRule::Zero => Ok(y.to_vec()),
            OperatorRule::Linear { matrix } => {
                let sys: Vec<Vec<T>> = matrix
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        row.iter()
                            .enumerate()
                            .map(|(j, &v)| if i == j { T::one() + h * v } else { h * v })
                            .collect()
                    })
                    .collect();
                solve_dense(&sys, y)
            }
            OperatorRule::Power { coeff, exponent } => y
                .iter()
                .map(|&yi| power_resolvent_scalar(yi, h * *coeff, *exponent, tol * h.min(T::one()), max_iter))
                .collect(),
            OperatorRule::Prox { pieces, quadratic } => Ok(pieces
                .iter()
                .zip(y)
                .map(|(pl, &yi)| pl.prox(yi, h, *quadratic))
                .collect()),
            OperatorRule::PLaplacian(op) => op.resolvent(t, h, y, tol, max_iter),
        }
    }

    /// `d(y − x, h·A(t, x))`: how far `x` is from solving `x + hA(t, x) ∋ y`.
    pub fn resolvent_residual(&self, t: T, h: T, y: &[T], x: &[T]) -> Result<T> {
        let set = self.apply(t, x)?.scaled(h)?;
        set.distance(&sub(y, x))
    }
}

/// Solves `s + k s^{q−1} = |y|` for `s ≥ 0` by Newton from the right and
/// returns `sign(y)·s`.
fn power_resolvent_scalar<T: Real>(y: T, k: T, q: T, tol: T, max_iter: usize) -> Result<T> {
    let target = y.abs();
    if target == T::zero() || k == T::zero() {
        return Ok(y);
    }
    let mut s = target;
    let mut resid = T::infinity();
    for _ in 0..max_iter {
        let val = s + k * s.powf(q - T::one()) - target;
        resid = val.abs();
        if resid <= tol {
            return Ok(s.copysign(y));
        }
        let deriv = T::one() + k * (q - T::one()) * s.powf(q - T::two());
        let next = s - val / deriv;
        if !(next < s) {
            // already at working precision
            return Ok(s.copysign(y));
        }
        s = next.max(T::zero());
    }
    if resid <= tol * T::lit(1e3) {
        return Ok(s.copysign(y));
    }
    Err(Error::Nonconvergence {
        iterations: max_iter,
        residual: resid.as_f64(),
    })
}

/// Outcome of the Monte-Carlo hypothesis check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    Reject(String),
}

/// Worst normalised margins found by [`validate_hypotheses`].
///
/// Each margin is `(lhs − rhs) / (1 + |lhs| + |rhs|)` for the inequality being
/// checked, so that rounding in large-magnitude samples does not register as
/// a violation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub samples: usize,
    pub monotonicity_margin: f64,
    pub growth_margin: f64,
    pub coercivity_margin: f64,
    pub verdict: Verdict,
}

/// Margin threshold below which a sampled inequality counts as violated.
pub const HYPOTHESIS_MARGIN_TOL: f64 = -1e-8;

fn normalized(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs) / (1.0 + lhs.abs() + rhs.abs())
}

/// Samples `(t, x, y)` and checks monotonicity, growth and coercivity of `op`
/// on `[0, horizon]`. Worst-case elements of multivalued values are used.
pub fn validate_hypotheses<T: Real>(op: &MonotoneOp<T>, sample_budget: usize, horizon: T, seed: u64) -> HypothesisReport {
    let c = op.constants();
    let reject = |why: &str| HypothesisReport {
        samples: 0,
        monotonicity_margin: f64::NAN,
        growth_margin: f64::NAN,
        coercivity_margin: f64::NAN,
        verdict: Verdict::Reject(why.to_string()),
    };
    if sample_budget == 0 {
        return reject("sample budget must be at least 1");
    }
    if !(c.p >= T::two()) {
        return reject("exponent p must satisfy p >= 2");
    }
    if !(c.c2 > T::zero()) {
        return reject("coercivity constant c2 must be positive");
    }
    if !(c.c1 >= T::zero()) || !c.a1.is_nonnegative_on(horizon) || !c.a2.is_nonnegative_on(horizon) {
        return reject("growth and coercivity functions must be nonnegative");
    }
    let mut rng = rng_for(seed, 0x7e57);
    let n = op.dim();
    let p = c.p.as_f64();
    let kinks: Vec<f64> = match op.rule() {
        OperatorRule::Prox { pieces, .. } => pieces.iter().flat_map(|pl| pl.breakpoints.iter().map(|b| b.as_f64())).collect(),
        _ => Vec::new(),
    };
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<T> {
        let radius = 10f64.powf(rng.gen_range(-2.0..1.0)) / (n as f64).sqrt();
        let mut x: Vec<T> = normal_vector::<T, _>(rng, n).into_iter().map(|v| v * T::lit(radius)).collect();
        if !kinks.is_empty() && rng.gen_bool(0.25) {
            let i = rng.gen_range(0..n);
            x[i] = T::lit(kinks[rng.gen_range(0..kinks.len())]);
        }
        x
    };
    let (mut mono, mut growth, mut coerc) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for _ in 0..sample_budget {
        let t = horizon * T::lit(rng.gen::<f64>());
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let (ax, ay) = match (op.apply(t, &x), op.apply(t, &y)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return reject("operator evaluation failed"),
        };
        let d = sub(&x, &y);
        let neg_d: Vec<T> = d.iter().map(|&v| -v).collect();
        // min over h1 ∈ A(x), h2 ∈ A(y) of ⟨h1 − h2, x − y⟩
        let lo1 = -ax.support(&neg_d).unwrap_or(T::nan());
        let hi2 = ay.support(&d).unwrap_or(T::nan());
        mono = mono.min(normalized(lo1.as_f64(), hi2.as_f64()));

        let nx = norm(&x).as_f64();
        let bound = c.a1.eval(t).as_f64() + c.c1.as_f64() * nx.powf(p - 1.0);
        growth = growth.min(normalized(bound, ax.norm_bound().as_f64()));

        let neg_x: Vec<T> = x.iter().map(|&v| -v).collect();
        let pairing = -ax.support(&neg_x).unwrap_or(T::nan());
        let floor = c.c2.as_f64() * nx.powf(p) - c.a2.eval(t).as_f64();
        coerc = coerc.min(normalized(pairing.as_f64(), floor));
    }
    let ok = [mono, growth, coerc].iter().all(|&m| m >= HYPOTHESIS_MARGIN_TOL);
    HypothesisReport {
        samples: sample_budget,
        monotonicity_margin: mono,
        growth_margin: growth,
        coercivity_margin: coerc,
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
    }
}

/// Smallness condition tying the coercivity of `A` to the growth of `F`:
/// automatically true for `p > 2`, and `β² c3 < c2` when `p = 2`.
pub fn smallness_check<T: Real>(c2: T, c3: T, beta: T, p: T) -> Result<bool> {
    if !(p >= T::two()) {
        return Err(Error::invalid("exponent p must satisfy p >= 2"));
    }
    if !(c2 > T::zero() && c3 > T::zero() && beta > T::zero()) {
        return Err(Error::invalid("smallness_check needs positive constants"));
    }
    Ok(p > T::two() || beta * beta * c3 < c2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_examples() {
        let z = MonotoneOp::<f64>::zero(2);
        assert_eq!(z.apply(0.0, &[1.0, 2.0]).unwrap(), ConvexBody::Point { x: vec![0.0, 0.0] });
        let a = MonotoneOp::<f64>::abs_subdifferential(1);
        assert_eq!(
            a.apply(0.0, &[0.0]).unwrap(),
            ConvexBody::Box { lo: vec![-1.0], hi: vec![1.0] }
        );
        assert_eq!(a.apply(0.0, &[-3.0]).unwrap(), ConvexBody::Point { x: vec![-1.0] });
    }

    #[test]
    fn p_laplacian_on_sine_mode() {
        let m = 200;
        let op = WeightedPLaplacian::constant(m, 1.0, 2.0).unwrap();
        let z = op.nodes();
        let x: Vec<f64> = z.iter().map(|&zi| (std::f64::consts::PI * zi).sin()).collect();
        let ax = op.apply(0.0, &x);
        let pi2 = std::f64::consts::PI.powi(2);
        let worst = ax
            .iter()
            .zip(&x)
            .map(|(&a, &s)| ((a - pi2 * s) / (pi2 * s)).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-3, "relative error {worst}");
    }

    #[test]
    fn resolvent_examples() {
        let z = MonotoneOp::<f64>::zero(1);
        assert_eq!(z.resolvent(0.0, 0.3, &[2.0], 1e-10).unwrap(), vec![2.0]);
        let id = MonotoneOp::<f64>::identity(1);
        assert!((id.resolvent(0.0, 1.0, &[2.0], 1e-10).unwrap()[0] - 1.0).abs() < 1e-15);
        let a = MonotoneOp::<f64>::abs_subdifferential(1);
        assert_eq!(a.resolvent(0.0, 1.0, &[0.5], 1e-10).unwrap(), vec![0.0]);
        assert_eq!(a.resolvent(0.0, 1.0, &[1.5], 1e-10).unwrap(), vec![0.5]);
        assert_eq!(a.resolvent(0.0, 1.0, &[-1.5], 1e-10).unwrap(), vec![-0.5]);
    }

    #[test]
    fn resolvent_rejects_bad_step() {
        let id = MonotoneOp::<f64>::identity(1);
        assert!(id.resolvent(0.0, 0.0, &[1.0], 1e-10).is_err());
        assert!(id.resolvent(0.0, 1.0, &[1.0, 2.0], 1e-10).is_err());
    }

    #[test]
    fn prox_with_several_kinks_matches_residual() {
        let pl = PiecewiseLinear::new(vec![-1.0, 0.5, 2.0], vec![-2.0, -0.5, 1.0, 3.0]).unwrap();
        let op = MonotoneOp::prox(1, vec![pl], 0.7).unwrap();
        for k in -40..=40 {
            let y = k as f64 * 0.2;
            let x = op.resolvent(0.0, 0.4, &[y], 1e-12).unwrap();
            assert!(op.resolvent_residual(0.0, 0.4, &[y], &x).unwrap() < 1e-12, "y = {y}");
        }
    }

    #[test]
    fn power_and_plaplacian_resolvents_solve_their_equation() {
        let op = MonotoneOp::<f64>::power(3, 2.0, 3.5).unwrap();
        let y = [1.5, -0.2, 0.0];
        let x = op.resolvent(0.0, 0.3, &y, 1e-12).unwrap();
        assert!(op.resolvent_residual(0.0, 0.3, &y, &x).unwrap() < 1e-11);

        let w: Vec<f64> = (0..=30).map(|j| 1.0 + 0.5 * (j as f64 * 0.7).sin()).collect();
        let lap = MonotoneOp::p_laplacian(WeightedPLaplacian::new(w, 3.0).unwrap());
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).cos()).collect();
        let x = lap.resolvent(0.0, 0.01, &y, 1e-10).unwrap();
        let r = lap.resolvent_residual(0.0, 0.01, &y, &x).unwrap();
        assert!(r <= 1e-10, "residual {r:e}");
    }

    #[test]
    fn non_monotone_linear_rejected() {
        assert!(MonotoneOp::linear(vec![vec![-1.0_f64]]).is_err());
        assert!(MonotoneOp::linear(vec![vec![0.0_f64, 1.0], vec![-1.0, 0.0]]).is_ok());
    }

    #[test]
    fn hypothesis_examples() {
        let zero = MonotoneOp::<f64>::zero(2);
        assert!(matches!(validate_hypotheses(&zero, 10, 1.0, 1).verdict, Verdict::Reject(_)));

        let id = MonotoneOp::<f64>::identity(1);
        let rep = validate_hypotheses(&id, 200, 1.0, 1);
        assert_eq!(rep.verdict, Verdict::Pass);
        assert!(rep.growth_margin.abs() < 1e-12 && rep.coercivity_margin.abs() < 1e-12);
        assert!(rep.monotonicity_margin >= 0.0);
    }

    #[test]
    fn declared_constants_that_are_too_strong_fail() {
        let id = MonotoneOp::<f64>::identity(2).with_constants(HypothesisConstants {
            p: 2.0,
            a1: TimeFn::Constant(0.0),
            c1: 0.5,
            c2: 1.0,
            a2: TimeFn::Constant(0.0),
        });
        assert_eq!(validate_hypotheses(&id, 100, 1.0, 3).verdict, Verdict::Fail);
    }

    #[test]
    fn smallness_examples() {
        assert!(smallness_check(1.0, 5.0, 3.0, 3.0).unwrap());
        assert!(smallness_check(1.0, 0.5, 1.0, 2.0).unwrap());
        assert!(!smallness_check(1.0, 1.0, 1.0, 2.0).unwrap());
        assert!(smallness_check(1.0, 1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn time_fn_norms() {
        let f = TimeFn::Affine { intercept: 1.0_f64, slope: 2.0 };
        // ∫₀¹ (1 + 2t) = 2, ∫₀¹ (1 + 2t)² = 13/3
        assert!((f.integral(1.0) - 2.0).abs() < 1e-15);
        assert!((f.l2_norm(1.0) - (13.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let json = serde_json::to_string(&TimeFn::Constant(0.5)).unwrap();
        assert_eq!(json, "0.5");
    }
}
