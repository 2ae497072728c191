use rand::Rng;
use serde::Serialize;

use crate::convex::{hausdorff, ConvexBody};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{mat_vec, norm};
use crate::operators::TimeFn;
use crate::sampling::{normal_vector, rng_for};
use crate::scalar::Real;

/// Shape of the value set around the moving centre.
#[derive(Clone, Debug, PartialEq)]
pub enum SetShape<T> {
    Point,
    /// Half widths `w + λ·w_λ`.
    Box { half_width: Vec<T>, half_width_lambda: Vec<T> },
    /// Radius `r + λ·r_λ`.
    Ball { radius: T, radius_lambda: T },
    /// A fixed body independent of `(t, x, λ)`.
    Constant(ConvexBody<T>),
}

/// Multifunction `F(t, x, λ)` whose value is a point, box or ball centred at
/// `M·x̂ + c + λ·c_λ + t·c_t`, where `x̂` is `x` or its radial retraction onto
/// a ball of radius `R` when a truncation is set.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiMap<T> {
    dim: usize,
    shape: SetShape<T>,
    matrix: Option<Vec<Vec<T>>>,
    offset: Vec<T>,
    offset_lambda: Vec<T>,
    offset_time: Vec<T>,
    truncation: Option<T>,
    lipschitz: T,
}

impl<T: Real> MultiMap<T> {
    /// `F ≡ {0}`.
    pub fn zero(dim: usize) -> Self {
        MultiMap {
            dim,
            shape: SetShape::Point,
            matrix: None,
            offset: vec![T::zero(); dim],
            offset_lambda: vec![T::zero(); dim],
            offset_time: vec![T::zero(); dim],
            truncation: None,
            lipschitz: T::zero(),
        }
    }

    pub fn constant(body: ConvexBody<T>) -> Self {
        let dim = body.dim();
        MultiMap {
            shape: SetShape::Constant(body),
            ..Self::zero(dim)
        }
    }

    /// Point value `M x + c`.
    pub fn affine(matrix: Option<Vec<Vec<T>>>, offset: Vec<T>) -> Result<Self> {
        let dim = offset.len();
        if dim == 0 {
            return Err(Error::invalid("multimap dimension must be positive"));
        }
        let lipschitz = match &matrix {
            Some(m) => {
                if m.len() != dim || m.iter().any(|r| r.len() != dim) {
                    return Err(Error::invalid("multimap matrix must be square and match the offset"));
                }
                if m.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("multimap matrix has non-finite entries"));
                }
                let mm = nalgebra::DMatrix::<f64>::from_fn(dim, dim, |i, j| m[i][j].as_f64());
                let s = mm.singular_values().iter().copied().fold(0.0, f64::max);
                // round up so the modulus stays an upper bound after conversion
                T::lit(s * (1.0 + 1e-12))
            }
            None => T::zero(),
        };
        Ok(MultiMap {
            matrix,
            offset,
            lipschitz,
            ..Self::zero(dim)
        })
    }

    pub fn with_box(mut self, half_width: Vec<T>) -> Result<Self> {
        check_dim(self.dim, half_width.len())?;
        if half_width.iter().any(|w| !(*w >= T::zero())) {
            return Err(Error::invalid("box half widths must be nonnegative"));
        }
        self.shape = SetShape::Box {
            half_width,
            half_width_lambda: vec![T::zero(); self.dim],
        };
        Ok(self)
    }

    pub fn with_ball(mut self, radius: T) -> Result<Self> {
        if !(radius >= T::zero()) {
            return Err(Error::invalid("ball radius must be nonnegative"));
        }
        self.shape = SetShape::Ball {
            radius,
            radius_lambda: T::zero(),
        };
        Ok(self)
    }

    /// Sets the λ-slope of the box half widths or of the ball radius.
    pub fn with_size_lambda(mut self, slope: Vec<T>) -> Result<Self> {
        match &mut self.shape {
            SetShape::Box { half_width_lambda, .. } => {
                check_dim(self.dim, slope.len())?;
                *half_width_lambda = slope;
            }
            SetShape::Ball { radius_lambda, .. } => {
                if slope.len() != 1 {
                    return Err(Error::DimensionMismatch { expected: 1, got: slope.len() });
                }
                *radius_lambda = slope[0];
            }
            _ => return Err(Error::invalid("size slope needs a box or ball shape")),
        }
        Ok(self)
    }

    pub fn with_offset_lambda(mut self, v: Vec<T>) -> Result<Self> {
        check_dim(self.dim, v.len())?;
        self.offset_lambda = v;
        Ok(self)
    }

    pub fn with_offset_time(mut self, v: Vec<T>) -> Result<Self> {
        check_dim(self.dim, v.len())?;
        self.offset_time = v;
        Ok(self)
    }

    /// Evaluates `F` at the radial retraction of `x` onto the ball of radius `r`.
    pub fn truncated(mut self, r: T) -> Result<Self> {
        if !(r > T::zero()) {
            return Err(Error::invalid("truncation radius must be positive"));
        }
        self.truncation = Some(r);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &SetShape<T> {
        &self.shape
    }

    /// True when every value is a single point.
    pub fn is_single_valued(&self) -> bool {
        match &self.shape {
            SetShape::Point => true,
            SetShape::Constant(b) => b.is_singleton(),
            _ => false,
        }
    }

    pub fn eval(&self, t: T, x: &[T], lambda: T) -> Result<ConvexBody<T>> {
        check_dim(self.dim, x.len())?;
        if let SetShape::Constant(body) = &self.shape {
            return Ok(body.clone());
        }
        let xr;
        let x = match self.truncation {
            Some(r) => {
                xr = super::radial_retract(x, r);
                &xr[..]
            }
            None => x,
        };
        let mut c: Vec<T> = (0..self.dim)
            .map(|i| self.offset[i] + lambda * self.offset_lambda[i] + t * self.offset_time[i])
            .collect();
        if let Some(m) = &self.matrix {
            for (ci, mi) in c.iter_mut().zip(mat_vec(m, x)) {
                *ci += mi;
            }
        }
        match &self.shape {
            SetShape::Point => Ok(ConvexBody::Point { x: c }),
            SetShape::Box { half_width, half_width_lambda } => {
                let w: Vec<T> = half_width
                    .iter()
                    .zip(half_width_lambda)
                    .map(|(&w, &wl)| w + lambda * wl)
                    .collect();
                if w.iter().any(|v| *v < T::zero()) {
                    return Err(Error::invalid("box half width negative at this parameter"));
                }
                ConvexBody::centered_box(&c, &w)
            }
            SetShape::Ball { radius, radius_lambda } => ConvexBody::ball(c, *radius + lambda * *radius_lambda),
            SetShape::Constant(_) => unreachable!(),
        }
    }

    /// Lipschitz modulus `k(t)` in the state, in the Hausdorff metric.
    pub fn lipschitz(&self) -> TimeFn<T> {
        TimeFn::Constant(self.lipschitz)
    }

    /// `(a3, c3)` with `|F(t, x, λ)| ≤ a3(t) + c3|x|` on `[0, b]`.
    pub fn growth(&self, lambda: T) -> (TimeFn<T>, T) {
        if let SetShape::Constant(body) = &self.shape {
            return (TimeFn::Constant(body.norm_bound()), T::zero());
        }
        let base: Vec<T> = self.offset.iter().zip(&self.offset_lambda).map(|(&c, &cl)| c + lambda * cl).collect();
        let size = match &self.shape {
            SetShape::Point | SetShape::Constant(_) => T::zero(),
            SetShape::Box { half_width, half_width_lambda } => {
                let w: Vec<T> = half_width.iter().zip(half_width_lambda).map(|(&w, &wl)| w + lambda * wl).collect();
                norm(&w)
            }
            SetShape::Ball { radius, radius_lambda } => *radius + lambda * *radius_lambda,
        };
        let slope = norm(&self.offset_time);
        let intercept = norm(&base) + size;
        let a3 = if slope == T::zero() {
            TimeFn::Constant(intercept)
        } else {
            TimeFn::Affine { intercept, slope }
        };
        (a3, self.lipschitz)
    }

    /// `β` with `h(F(t, x, λ), F(t, x, μ)) ≤ β |λ − μ|`.
    pub fn parameter_modulus(&self) -> T {
        let size = match &self.shape {
            SetShape::Box { half_width_lambda, .. } => norm(half_width_lambda),
            SetShape::Ball { radius_lambda, .. } => radius_lambda.abs(),
            _ => T::zero(),
        };
        if matches!(self.shape, SetShape::Constant(_)) {
            return T::zero();
        }
        norm(&self.offset_lambda) + size
    }
}

/// Worst sampled margins of the Lipschitz and growth estimates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultiMapReport {
    pub samples: usize,
    pub lipschitz_margin: f64,
    pub growth_margin: f64,
    pub pass: bool,
}

/// Samples `(t, x, y)` and checks `h(F(t,x,λ), F(t,y,λ)) ≤ k(t)|x − y|` and
/// `|F(t,x,λ)| ≤ a3(t) + c3|x|`, each with slack `1e-8`.
pub fn validate_multimap<T: Real>(f: &MultiMap<T>, lambda: T, horizon: T, samples: usize, seed: u64) -> Result<MultiMapReport> {
    let mut rng = rng_for(seed, 0xF0);
    let k = f.lipschitz();
    let (a3, c3) = f.growth(lambda);
    let (mut lip, mut gro) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..samples {
        let t = horizon * T::lit(rng.gen::<f64>());
        let scale = T::lit(10f64.powf(rng.gen_range(-1.0..1.0)));
        let x: Vec<T> = normal_vector::<T, _>(&mut rng, f.dim()).into_iter().map(|v| v * scale).collect();
        let y: Vec<T> = normal_vector::<T, _>(&mut rng, f.dim()).into_iter().map(|v| v * scale).collect();
        let (fx, fy) = (f.eval(t, &x, lambda)?, f.eval(t, &y, lambda)?);
        let d = crate::linalg::dist(&x, &y);
        lip = lip.min((k.eval(t) * d - hausdorff(&fx, &fy)?).as_f64());
        gro = gro.min((a3.eval(t) + c3 * norm(&x) - fx.norm_bound()).as_f64());
    }
    Ok(MultiMapReport {
        samples,
        lipschitz_margin: lip,
        growth_margin: gro,
        pass: lip >= -1e-8 && gro >= -1e-8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_interval_family() {
        // F(t, x) = [x + 1, x + 3]
        let f = MultiMap::affine(Some(vec![vec![1.0]]), vec![2.0]).unwrap().with_box(vec![1.0]).unwrap();
        assert_eq!(f.eval(0.0, &[0.5], 0.0).unwrap(), ConvexBody::Box { lo: vec![1.5], hi: vec![3.5] });
        assert!((f.lipschitz().eval(0.0_f64) - 1.0).abs() < 1e-9);
        let rep = validate_multimap(&f, 0.0, 1.0, 200, 1).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn parameter_dependence_and_truncation() {
        let f = MultiMap::affine(Some(vec![vec![2.0, 0.0], vec![0.0, 1.0]]), vec![0.0, 0.0])
            .unwrap()
            .with_ball(0.5)
            .unwrap()
            .with_size_lambda(vec![1.0])
            .unwrap()
            .with_offset_lambda(vec![1.0, 0.0])
            .unwrap();
        let a = f.eval(0.0, &[1.0, 1.0], 0.0).unwrap();
        let b = f.eval(0.0, &[1.0, 1.0], 0.25).unwrap();
        assert!(hausdorff(&a, &b).unwrap() <= f.parameter_modulus() * 0.25 + 1e-15);
        assert!(validate_multimap(&f, 0.3, 2.0, 300, 5).unwrap().pass);

        let g = f.clone().truncated(1.0).unwrap();
        assert_eq!(g.eval(0.0, &[3.0, 4.0], 0.0).unwrap(), f.eval(0.0, &[0.6, 0.8], 0.0).unwrap());
    }

    #[test]
    fn negative_width_rejected() {
        let f = MultiMap::affine(None, vec![0.0]).unwrap().with_box(vec![1.0]).unwrap().with_size_lambda(vec![-2.0]).unwrap();
        assert!(f.eval(0.0, &[0.0], 1.0).is_err());
    }
}
