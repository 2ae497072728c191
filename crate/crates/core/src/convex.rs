//! Nonempty compact convex sets in `Rⁿ` (points, boxes, balls) and the
//! set-valued analysis built on them: distance, metric projection, support
//! function, Hausdorff metric, Hörmander's support-function estimate and
//! finite Kuratowski limits.
//!
//! Every Hausdorff excess between two supported bodies has a closed form:
//!
//! * anything into a ball `B(c, r)`: `max(0, sup_{x∈A} |x − c| − r)`;
//! * box into box: the squared distance to a box separates over coordinates,
//!   so the supremum is attained coordinate-wise at interval endpoints;
//! * ball `B(c, r)` into box: `max(0, r + φ)` with `aᵢ = max(cᵢ − hiᵢ, loᵢ − cᵢ)`
//!   and `φ = |a⁺|` when some `aᵢ > 0`, otherwise `φ = maxᵢ aᵢ`. This is the
//!   support-function form `sup_{|w|=1} σ(w, B) − σ(w, box)` maximised in
//!   closed form.
//!
//! so `hausdorff` is exact in every dimension.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist, dot, norm};
use crate::scalar::Real;

/// A nonempty, closed, bounded convex set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[serde(try_from = "RawBody<T>", bound(deserialize = "T: Real + Deserialize<'de>"))]
pub enum ConvexBody<T> {
    Point { x: Vec<T> },
    Box { lo: Vec<T>, hi: Vec<T> },
    Ball { center: Vec<T>, radius: T },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum RawBody<T> {
    Point { x: Vec<T> },
    Box { lo: Vec<T>, hi: Vec<T> },
    Ball { center: Vec<T>, radius: T },
}

impl<T: Real> TryFrom<RawBody<T>> for ConvexBody<T> {
    type Error = Error;

    fn try_from(raw: RawBody<T>) -> Result<Self> {
        match raw {
            RawBody::Point { x } => ConvexBody::point(x),
            RawBody::Box { lo, hi } => ConvexBody::boxed(lo, hi),
            RawBody::Ball { center, radius } => ConvexBody::ball(center, radius),
        }
    }
}

/// Kuratowski lower/upper limits of a finite sequence of point clouds.
#[derive(Clone, Debug, PartialEq)]
pub struct SetSequenceLimits<T> {
    pub lower: Vec<Vec<T>>,
    pub upper: Vec<Vec<T>>,
}

fn check_finite<T: Real>(v: &[T], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} has non-finite entries")))
    }
}

impl<T: Real> ConvexBody<T> {
    pub fn point(x: Vec<T>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("point of dimension zero"));
        }
        check_finite(&x, "point")?;
        Ok(ConvexBody::Point { x })
    }

    pub fn boxed(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::invalid("box of dimension zero"));
        }
        check_finite(&lo, "box lower corner")?;
        check_finite(&hi, "box upper corner")?;
        if let Some(i) = lo.iter().zip(&hi).position(|(l, h)| l > h) {
            return Err(Error::invalid(format!("box has lo > hi in coordinate {i}")));
        }
        Ok(ConvexBody::Box { lo, hi })
    }

    pub fn ball(center: Vec<T>, radius: T) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("ball of dimension zero"));
        }
        check_finite(&center, "ball center")?;
        if !(radius >= T::zero()) || !radius.is_finite() {
            return Err(Error::invalid("ball radius must be finite and nonnegative"));
        }
        Ok(ConvexBody::Ball { center, radius })
    }

    /// The box `c ± w`.
    pub fn centered_box(center: &[T], half_width: &[T]) -> Result<Self> {
        check_dim(center.len(), half_width.len())?;
        let lo = center.iter().zip(half_width).map(|(&c, &w)| c - w).collect();
        let hi = center.iter().zip(half_width).map(|(&c, &w)| c + w).collect();
        Self::boxed(lo, hi)
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Point { x } => x.len(),
            ConvexBody::Box { lo, .. } => lo.len(),
            ConvexBody::Ball { center, .. } => center.len(),
        }
    }

    pub fn center(&self) -> Vec<T> {
        match self {
            ConvexBody::Point { x } => x.clone(),
            ConvexBody::Box { lo, hi } => lo.iter().zip(hi).map(|(&l, &h)| (l + h) * T::half()).collect(),
            ConvexBody::Ball { center, .. } => center.clone(),
        }
    }

    pub fn is_singleton(&self) -> bool {
        match self {
            ConvexBody::Point { .. } => true,
            ConvexBody::Box { lo, hi } => lo == hi,
            ConvexBody::Ball { radius, .. } => *radius == T::zero(),
        }
    }

    /// Euclidean distance from `y` to the set.
    pub fn distance(&self, y: &[T]) -> Result<T> {
        check_dim(self.dim(), y.len())?;
        Ok(match self {
            ConvexBody::Point { x } => dist(y, x),
            ConvexBody::Box { lo, hi } => {
                let gap: Vec<T> = y
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(&yi, (&l, &h))| (l - yi).max(yi - h).max(T::zero()))
                    .collect();
                norm(&gap)
            }
            ConvexBody::Ball { center, radius } => (dist(y, center) - *radius).max(T::zero()),
        })
    }

    /// The nearest point of the set to `y`.
    pub fn project(&self, y: &[T]) -> Result<Vec<T>> {
        check_dim(self.dim(), y.len())?;
        Ok(match self {
            ConvexBody::Point { x } => x.clone(),
            ConvexBody::Box { lo, hi } => y
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&yi, (&l, &h))| yi.max(l).min(h))
                .collect(),
            ConvexBody::Ball { center, radius } => {
                let d = dist(y, center);
                if d <= *radius {
                    y.to_vec()
                } else {
                    let s = *radius / d;
                    center.iter().zip(y).map(|(&c, &yi)| c + s * (yi - c)).collect()
                }
            }
        })
    }

    /// Support function `σ(v, C) = sup_{c∈C} ⟨v, c⟩`.
    pub fn support(&self, v: &[T]) -> Result<T> {
        check_dim(self.dim(), v.len())?;
        Ok(match self {
            ConvexBody::Point { x } => dot(v, x),
            ConvexBody::Box { lo, hi } => v
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&vi, (&l, &h))| (vi * l).max(vi * h))
                .sum(),
            ConvexBody::Ball { center, radius } => dot(v, center) + *radius * norm(v),
        })
    }

    /// A maximiser of `⟨d, ·⟩` over the set (the centre when `d = 0`).
    pub fn extreme_point(&self, d: &[T]) -> Result<Vec<T>> {
        check_dim(self.dim(), d.len())?;
        Ok(match self {
            ConvexBody::Point { x } => x.clone(),
            ConvexBody::Box { lo, hi } => d
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&di, (&l, &h))| {
                    if di > T::zero() {
                        h
                    } else if di < T::zero() {
                        l
                    } else {
                        (l + h) * T::half()
                    }
                })
                .collect(),
            ConvexBody::Ball { center, radius } => {
                let nd = norm(d);
                if nd == T::zero() {
                    center.clone()
                } else {
                    center.iter().zip(d).map(|(&c, &di)| c + *radius * di / nd).collect()
                }
            }
        })
    }

    /// `sup_{c∈C} |c − y|`.
    pub fn farthest_distance(&self, y: &[T]) -> Result<T> {
        check_dim(self.dim(), y.len())?;
        Ok(match self {
            ConvexBody::Point { x } => dist(x, y),
            ConvexBody::Box { lo, hi } => {
                let far: Vec<T> = y
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(&yi, (&l, &h))| (l - yi).abs().max((h - yi).abs()))
                    .collect();
                norm(&far)
            }
            ConvexBody::Ball { center, radius } => dist(center, y) + *radius,
        })
    }

    /// `|C| = sup_{c∈C} |c|`.
    pub fn norm_bound(&self) -> T {
        let zero = vec![T::zero(); self.dim()];
        self.farthest_distance(&zero).unwrap_or_else(|_| T::nan())
    }

    pub fn contains(&self, y: &[T], tol: T) -> Result<bool> {
        Ok(self.distance(y)? <= tol)
    }

    pub fn translate(&self, v: &[T]) -> Result<Self> {
        check_dim(self.dim(), v.len())?;
        let shift = |a: &[T]| a.iter().zip(v).map(|(&x, &y)| x + y).collect::<Vec<T>>();
        Ok(match self {
            ConvexBody::Point { x } => ConvexBody::Point { x: shift(x) },
            ConvexBody::Box { lo, hi } => ConvexBody::Box { lo: shift(lo), hi: shift(hi) },
            ConvexBody::Ball { center, radius } => ConvexBody::Ball {
                center: shift(center),
                radius: *radius,
            },
        })
    }

    /// `s · C` for `s ≥ 0`.
    pub fn scaled(&self, s: T) -> Result<Self> {
        if !(s >= T::zero()) {
            return Err(Error::invalid("set scaling factor must be nonnegative"));
        }
        let mul = |a: &[T]| a.iter().map(|&x| s * x).collect::<Vec<T>>();
        Ok(match self {
            ConvexBody::Point { x } => ConvexBody::Point { x: mul(x) },
            ConvexBody::Box { lo, hi } => ConvexBody::Box { lo: mul(lo), hi: mul(hi) },
            ConvexBody::Ball { center, radius } => ConvexBody::Ball {
                center: mul(center),
                radius: s * *radius,
            },
        })
    }

    /// A random element of the set (uniform on boxes, radially uniform on balls).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        match self {
            ConvexBody::Point { x } => x.clone(),
            ConvexBody::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(&l, &h)| l + (h - l) * T::lit(rng.gen::<f64>()))
                .collect(),
            ConvexBody::Ball { center, radius } => {
                let dir: Vec<T> = crate::sampling::unit_direction(rng, center.len());
                let rad = *radius * T::lit(rng.gen::<f64>());
                center.iter().zip(&dir).map(|(&c, &d)| c + rad * d).collect()
            }
        }
    }

    /// Box bounds when the body is a point or a box.
    fn box_bounds(&self) -> Option<(&[T], &[T])> {
        match self {
            ConvexBody::Point { x } => Some((x, x)),
            ConvexBody::Box { lo, hi } => Some((lo, hi)),
            ConvexBody::Ball { .. } => None,
        }
    }
}

/// Distance from `y` to the Minkowski sum `a ⊕ b`.
pub fn distance_to_sum<T: Real>(y: &[T], a: &ConvexBody<T>, b: &ConvexBody<T>) -> Result<T> {
    check_dim(a.dim(), b.dim())?;
    check_dim(a.dim(), y.len())?;
    match (a, b) {
        (ConvexBody::Point { x }, other) | (other, ConvexBody::Point { x }) => {
            let shifted: Vec<T> = y.iter().zip(x).map(|(&yi, &xi)| yi - xi).collect();
            other.distance(&shifted)
        }
        (ConvexBody::Box { lo: l1, hi: h1 }, ConvexBody::Box { lo: l2, hi: h2 }) => {
            let lo = l1.iter().zip(l2).map(|(&p, &q)| p + q).collect();
            let hi = h1.iter().zip(h2).map(|(&p, &q)| p + q).collect();
            ConvexBody::Box { lo, hi }.distance(y)
        }
        (ConvexBody::Ball { center: c1, radius: r1 }, ConvexBody::Ball { center: c2, radius: r2 }) => {
            let c: Vec<T> = c1.iter().zip(c2).map(|(&p, &q)| p + q).collect();
            Ok((dist(y, &c) - (*r1 + *r2)).max(T::zero()))
        }
        (bx @ ConvexBody::Box { .. }, ConvexBody::Ball { center, radius })
        | (ConvexBody::Ball { center, radius }, bx @ ConvexBody::Box { .. }) => {
            let shifted: Vec<T> = y.iter().zip(center).map(|(&yi, &c)| yi - c).collect();
            Ok((bx.distance(&shifted)? - *radius).max(T::zero()))
        }
    }
}

/// One-sided Hausdorff excess `sup_{x∈a} d(x, b)`.
pub fn excess<T: Real>(a: &ConvexBody<T>, b: &ConvexBody<T>) -> Result<T> {
    check_dim(a.dim(), b.dim())?;
    if let ConvexBody::Ball { center, radius } = b {
        return Ok((a.farthest_distance(center)? - *radius).max(T::zero()));
    }
    let (blo, bhi) = b.box_bounds().expect("non-ball body has box bounds");
    let gap = |s: T, l: T, h: T| (l - s).max(s - h).max(T::zero());
    match a {
        ConvexBody::Ball { center, radius } => {
            let coeffs: Vec<T> = center
                .iter()
                .zip(blo.iter().zip(bhi))
                .map(|(&c, (&l, &h))| (c - h).max(l - c))
                .collect();
            let positive: Vec<T> = coeffs.iter().map(|&a| a.max(T::zero())).collect();
            let phi = if coeffs.iter().any(|&a| a > T::zero()) {
                norm(&positive)
            } else {
                coeffs.iter().fold(T::neg_infinity(), |m, &a| m.max(a))
            };
            Ok((*radius + phi).max(T::zero()))
        }
        _ => {
            let (alo, ahi) = a.box_bounds().expect("non-ball body has box bounds");
            let worst: Vec<T> = (0..alo.len())
                .map(|i| gap(alo[i], blo[i], bhi[i]).max(gap(ahi[i], blo[i], bhi[i])))
                .collect();
            Ok(norm(&worst))
        }
    }
}

/// Hausdorff distance between two bodies.
pub fn hausdorff<T: Real>(a: &ConvexBody<T>, b: &ConvexBody<T>) -> Result<T> {
    Ok(excess(a, b)?.max(excess(b, a)?))
}

/// `max_v |σ(v, a) − σ(v, b)|` over the supplied unit directions; a lower
/// bound on the Hausdorff distance that becomes exact for dense direction sets.
pub fn hormander_estimate<T: Real>(a: &ConvexBody<T>, b: &ConvexBody<T>, directions: &[Vec<T>]) -> Result<T> {
    check_dim(a.dim(), b.dim())?;
    if directions.is_empty() {
        return Err(Error::invalid("hormander_estimate needs at least one direction"));
    }
    let unit_tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
    let mut best = T::zero();
    for v in directions {
        if (norm(v) - T::one()).abs() > unit_tol {
            return Err(Error::invalid("hormander_estimate directions must be unit vectors"));
        }
        best = best.max((a.support(v)? - b.support(v)?).abs());
    }
    Ok(best)
}

fn nearest<T: Real>(p: &[T], cloud: &[Vec<T>]) -> T {
    cloud.iter().map(|q| dist(p, q)).fold(T::infinity(), T::min)
}

/// Finite surrogate of the sequential Kuratowski limits.
///
/// The tail is the second half of the sequence. A point is in `lower` when it
/// lies within `tol` of some point of every tail set; it is in `upper` when it
/// lies within `tol` of points of at least two tail sets (one if the tail has a
/// single set), one of which is in the final quarter of the sequence.
/// Candidates for `lower` come from the final set, candidates for `upper` from
/// the whole tail; candidates closer than `tol` are merged.
pub fn kuratowski_limits<T: Real>(sets: &[Vec<Vec<T>>], tol: T) -> Result<SetSequenceLimits<T>> {
    if sets.is_empty() {
        return Err(Error::invalid("kuratowski_limits needs a nonempty sequence"));
    }
    if !(tol > T::zero()) {
        return Err(Error::invalid("kuratowski_limits needs tol > 0"));
    }
    let dim = sets
        .iter()
        .flat_map(|s| s.iter())
        .map(|p| p.len())
        .next()
        .unwrap_or(0);
    for p in sets.iter().flat_map(|s| s.iter()) {
        check_dim(dim, p.len())?;
    }
    let len = sets.len();
    let tail_start = len / 2;
    let late_start = len - (len / 4).max(1);
    let tail = &sets[tail_start..];
    let required = tail.len().min(2);

    let merge = |reps: &mut Vec<Vec<T>>, p: &Vec<T>| {
        if reps.iter().all(|r| dist(r, p) > tol) {
            reps.push(p.clone());
        }
    };

    let mut lower = Vec::new();
    for p in sets[len - 1].iter().rev() {
        if tail.iter().all(|s| nearest(p, s) <= tol) {
            merge(&mut lower, p);
        }
    }

    let mut candidates = lower.clone();
    for s in tail.iter().rev() {
        for p in s {
            merge(&mut candidates, p);
        }
    }
    let upper = candidates
        .into_iter()
        .filter(|p| {
            let mut count = 0;
            let mut late = false;
            for (offset, s) in tail.iter().enumerate() {
                if nearest(p, s) <= tol {
                    count += 1;
                    late |= tail_start + offset >= late_start;
                }
            }
            count >= required && late
        })
        .collect();
    Ok(SetSequenceLimits { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(lo: &[f64], hi: &[f64]) -> ConvexBody<f64> {
        ConvexBody::boxed(lo.to_vec(), hi.to_vec()).unwrap()
    }

    fn ball(c: &[f64], r: f64) -> ConvexBody<f64> {
        ConvexBody::ball(c.to_vec(), r).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(ball(&[0.0], 1.0).distance(&[0.0]).unwrap(), 0.0);
        assert_eq!(bx(&[-1.0], &[1.0]).distance(&[2.0]).unwrap(), 1.0);
        assert!((ball(&[0.0, 0.0], 1.0).distance(&[3.0, 4.0]).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn distance_dimension_mismatch() {
        assert!(matches!(
            ball(&[0.0, 0.0], 1.0).distance(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn projection_examples() {
        let b = bx(&[0.0, 0.0], &[1.0, 1.0]);
        assert_eq!(b.project(&[0.5, 0.25]).unwrap(), vec![0.5, 0.25]);
        assert_eq!(b.project(&[2.0, -2.0]).unwrap(), vec![1.0, 0.0]);
        let p = ball(&[0.0, 0.0], 1.0).project(&[3.0, 4.0]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn support_examples() {
        assert_eq!(ball(&[0.0, 0.0], 1.0).support(&[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(bx(&[0.0, 0.0], &[1.0, 2.0]).support(&[1.0, 1.0]).unwrap(), 3.0);
        assert_eq!(bx(&[0.0, 0.0], &[1.0, 2.0]).support(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn hausdorff_examples() {
        let c = bx(&[0.0, -1.0], &[2.0, 3.0]);
        assert_eq!(hausdorff(&c, &c).unwrap(), 0.0);
        assert_eq!(hausdorff(&bx(&[0.0], &[1.0]), &bx(&[0.0], &[2.0])).unwrap(), 1.0);
        assert_eq!(hausdorff(&ball(&[0.0, 0.0], 1.0), &ball(&[3.0, 0.0], 1.0)).unwrap(), 3.0);
    }

    #[test]
    fn point_to_set_hausdorff_is_farthest_distance() {
        let p = ConvexBody::point(vec![0.0]).unwrap();
        // sup over [0, 2] of |c - 0| = 2 even though d(0, [0, 2]) = 0
        assert_eq!(hausdorff(&p, &bx(&[0.0], &[2.0])).unwrap(), 2.0);
    }

    #[test]
    fn ball_into_box_excess_closed_form() {
        // ball of radius 2 around the centre of [-1, 1]^2: worst point is (2, 0)
        assert!((excess(&ball(&[0.0, 0.0], 2.0), &bx(&[-1.0, -1.0], &[1.0, 1.0])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(excess(&ball(&[5.0], 1.0), &bx(&[0.0], &[1.0])).unwrap(), 5.0);
        assert_eq!(excess(&ball(&[0.5], 0.25), &bx(&[0.0], &[1.0])).unwrap(), 0.0);
    }

    #[test]
    fn hormander_examples() {
        let a = ball(&[0.0, 0.0], 1.0);
        let b = ball(&[0.0, 0.0], 2.0);
        let dirs = vec![vec![0.6, 0.8]];
        assert!((hormander_estimate(&a, &b, &dirs).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(hormander_estimate(&a, &a, &dirs).unwrap(), 0.0);
        assert!(hormander_estimate(&a, &b, &[]).is_err());
        assert!(hormander_estimate(&a, &b, &[vec![1.0, 1.0]]).is_err());
    }

    #[test]
    fn minkowski_sum_distance() {
        let b = bx(&[-1.0], &[1.0]);
        let r = ball(&[0.0], 0.5);
        assert!((distance_to_sum(&[3.0], &b, &r).unwrap() - 1.5).abs() < 1e-15);
        let p = ConvexBody::point(vec![2.0]).unwrap();
        assert!((distance_to_sum(&[0.0], &p, &b).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_bodies_rejected() {
        assert!(ConvexBody::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(ConvexBody::ball(vec![0.0], -1.0).is_err());
        let json = r#"{"kind":"box","lo":[1.0],"hi":[0.0]}"#;
        assert!(serde_json::from_str::<ConvexBody<f64>>(json).is_err());
    }

    #[test]
    fn json_shape() {
        let b = ball(&[1.0, 2.0], 0.5);
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, r#"{"kind":"ball","center":[1.0,2.0],"radius":0.5}"#);
        let back: ConvexBody<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn kuratowski_constant_and_alternating() {
        let constant: Vec<Vec<Vec<f64>>> = (0..10).map(|_| vec![vec![1.0, 2.0]]).collect();
        let lim = kuratowski_limits(&constant, 1e-9).unwrap();
        assert_eq!(lim.lower, vec![vec![1.0, 2.0]]);
        assert_eq!(lim.upper, vec![vec![1.0, 2.0]]);

        let alternating: Vec<Vec<Vec<f64>>> = (0..20).map(|n| vec![vec![(n % 2) as f64]]).collect();
        let lim = kuratowski_limits(&alternating, 1e-9).unwrap();
        assert!(lim.lower.is_empty());
        let mut up: Vec<f64> = lim.upper.iter().map(|p| p[0]).collect();
        up.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(up, vec![0.0, 1.0]);
    }

    #[test]
    fn kuratowski_rejects_bad_input() {
        assert!(kuratowski_limits::<f64>(&[], 1.0).is_err());
        assert!(kuratowski_limits(&[vec![vec![0.0]]], 0.0).is_err());
    }
}
