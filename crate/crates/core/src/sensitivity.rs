//! Empirical checks of how the value and the optimal pairs depend on the
//! data `(ξ, λ)`.
//!
//! Each point `(ξ, λ)` is optimised with a seed derived from the master seed
//! and the bit patterns of the point itself, so results do not depend on the
//! order in which points are listed.

use rayon::prelude::*;
use serde::Serialize;

use crate::control::{
    annotate, check_admissible, control_l2_gap, optimal_set_sample, optimize, AdmissiblePair, ControlProblem, OptimalSetSample,
};
use crate::error::{check_dim, Error, Result};
use crate::inclusion::{filippov_construct, radial_retract, solve_forced, FilippovOptions};
use crate::linalg::dist;
use crate::sampling::{derive_seed, mix64};
use crate::scalar::Real;

/// Default relative tolerance on the final value gap.
pub const DEFAULT_VALUE_TOL: f64 = 5e-3;
/// Default tolerance on the final one-sided distance between optimal sets.
pub const DEFAULT_SET_TOL: f64 = 1e-1;

/// A data point `(ξ, λ)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Datum<T> {
    pub xi: Vec<T>,
    pub lambda: T,
}

impl<T: Real> Datum<T> {
    pub fn new(xi: Vec<T>, lambda: T) -> Self {
        Datum { xi, lambda }
    }

    /// Seed for this point under the master seed.
    pub fn seed(&self, master: u64) -> u64 {
        let h = self
            .xi
            .iter()
            .chain(std::iter::once(&self.lambda))
            .fold(0x5eed_u64, |acc, v| mix64(acc ^ v.as_f64().to_bits()));
        derive_seed(master, h)
    }

    /// `|ξ − ξ'| + d(λ, λ')` in the parameter metric of `prob`.
    pub fn distance(&self, other: &Datum<T>, prob: &ControlProblem<T>) -> Result<T> {
        Ok(dist(&self.xi, &other.xi) + prob.parameters.distance(self.lambda, other.lambda)?)
    }
}

/// One point of a [`ValueSurface`]. Failed points carry `NaN` and the error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurfaceEntry<T> {
    pub xi: Vec<T>,
    pub lambda: T,
    pub m_hat: T,
    pub converged: bool,
    pub seed: u64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueSurface<T> {
    pub entries: Vec<SurfaceEntry<T>>,
    pub budget: usize,
    pub steps: usize,
    pub horizon: T,
}

impl<T> ValueSurface<T> {
    pub fn failed(&self) -> usize {
        self.entries.iter().filter(|e| e.error.is_some()).count()
    }
}

/// `m̂` on the product grid `xi_grid × lambda_grid`, entries in row-major
/// order (`ξ` outer).
pub fn sweep_value<T: Real>(
    prob: &ControlProblem<T>,
    xi_grid: &[Vec<T>],
    lambda_grid: &[T],
    budget: usize,
    seed: u64,
) -> Result<ValueSurface<T>> {
    if xi_grid.is_empty() || lambda_grid.is_empty() {
        return Err(Error::invalid("sweep grids must be nonempty"));
    }
    for xi in xi_grid {
        check_dim(prob.dim(), xi.len())?;
    }
    let points: Vec<Datum<T>> = xi_grid
        .iter()
        .flat_map(|xi| lambda_grid.iter().map(move |&l| Datum::new(xi.clone(), l)))
        .collect();
    let entries = points
        .into_par_iter()
        .map(|d| {
            let s = d.seed(seed);
            let (m_hat, converged, error) = match optimize(prob, &d.xi, d.lambda, budget, s) {
                Ok(r) => (r.m_hat, r.converged, None),
                Err(e) => (T::nan(), false, Some(e.to_string())),
            };
            SurfaceEntry {
                xi: d.xi,
                lambda: d.lambda,
                m_hat,
                converged,
                seed: s,
                error,
            }
        })
        .collect();
    Ok(ValueSurface {
        entries,
        budget,
        steps: prob.grid.steps(),
        horizon: prob.grid.horizon(),
    })
}

/// One sequence point in a [`SequenceReport`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SequenceEntry<T> {
    pub n: usize,
    pub datum: Datum<T>,
    pub dist: T,
    pub m_hat: T,
    pub value_gap: T,
    /// `sup_{P ∈ Σ̂ₙ} inf_{Q ∈ Σ̂} d(P, Q)` (set reports only).
    pub e_n: Option<T>,
    /// The reverse one-sided distance, reported but not asserted.
    pub reverse: Option<T>,
    pub pass: bool,
}

/// Trend and tolerance verdict along a sequence `(ξₙ, λₙ) → (ξ, λ)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SequenceReport<T> {
    pub target: Datum<T>,
    pub target_value: T,
    pub tolerance: T,
    /// Discrepancy between two independent runs at the target.
    pub noise_floor: T,
    pub entries: Vec<SequenceEntry<T>>,
    pub trend_ok: bool,
    pub final_ok: bool,
    pub pass: bool,
}

fn sequence_distances<T: Real>(prob: &ControlProblem<T>, target: &Datum<T>, sequence: &[Datum<T>]) -> Result<Vec<T>> {
    if sequence.is_empty() {
        return Err(Error::invalid("sequence must be nonempty"));
    }
    prob.check_parameter(target.lambda)?;
    check_dim(prob.dim(), target.xi.len())?;
    let mut out = Vec::with_capacity(sequence.len());
    for d in sequence {
        prob.check_parameter(d.lambda)?;
        check_dim(prob.dim(), d.xi.len())?;
        out.push(d.distance(target, prob)?);
    }
    if out.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid("distances to the target must be nonincreasing along the sequence"));
    }
    Ok(out)
}

/// Value gaps `|m̂(ξₙ, λₙ) − m̂(ξ, λ)|`. Passes when the final gap is at most
/// `5e-3 (1 + |m̂|)` and the largest gap over the last third of the sequence
/// does not exceed the largest over the first third by more than twice the
/// noise floor.
pub fn continuity_report<T: Real>(
    prob: &ControlProblem<T>,
    target: &Datum<T>,
    sequence: &[Datum<T>],
    budget: usize,
    seed: u64,
) -> Result<SequenceReport<T>> {
    let dists = sequence_distances(prob, target, sequence)?;
    let target_seed = target.seed(seed);
    let (m0, m1) = rayon::join(
        || optimize(prob, &target.xi, target.lambda, budget, target_seed),
        || optimize(prob, &target.xi, target.lambda, budget, derive_seed(target_seed, 1)),
    );
    let m = m0?.m_hat;
    let noise_floor = (m1?.m_hat - m).abs();
    let tolerance = T::lit(DEFAULT_VALUE_TOL) * (T::one() + m.abs());
    let values: Vec<T> = sequence
        .par_iter()
        .map(|d| optimize(prob, &d.xi, d.lambda, budget, d.seed(seed)).map(|r| r.m_hat))
        .collect::<Result<_>>()?;
    let gaps: Vec<T> = values.iter().map(|&v| (v - m).abs()).collect();
    let third = sequence.len().div_ceil(3);
    let head = gaps[..third].iter().copied().fold(T::zero(), T::max);
    let tail = gaps[gaps.len() - third..].iter().copied().fold(T::zero(), T::max);
    let trend_ok = tail <= head + T::two() * noise_floor;
    let final_ok = gaps[gaps.len() - 1] <= tolerance;
    let entries = sequence
        .iter()
        .enumerate()
        .map(|(i, d)| SequenceEntry {
            n: i + 1,
            datum: d.clone(),
            dist: dists[i],
            m_hat: values[i],
            value_gap: gaps[i],
            e_n: None,
            reverse: None,
            pass: gaps[i] <= tolerance,
        })
        .collect();
    Ok(SequenceReport {
        target: target.clone(),
        target_value: m,
        tolerance,
        noise_floor,
        entries,
        trend_ok,
        final_ok,
        pass: trend_ok && final_ok,
    })
}

/// `sup_{P ∈ from} inf_{Q ∈ to} d(P, Q)` with `d` the sup-norm state gap
/// plus the L² control gap.
pub fn one_sided_distance<T: Real>(from: &[AdmissiblePair<T>], to: &[AdmissiblePair<T>]) -> Result<T> {
    let mut sup = T::zero();
    for p in from {
        let mut inf = T::infinity();
        for q in to {
            inf = inf.min(p.distance(q)?);
        }
        sup = sup.max(inf);
    }
    Ok(sup)
}

/// One-sided distances `eₙ` from sampled optimal sets along the sequence to
/// the sampled optimal set at the target. Passes when `eₙ` is nonincreasing
/// over the last half of the sequence (up to twice the noise floor) and the
/// final `eₙ` is at most `tol_set`. The noise floor is the one-sided distance
/// between two independent samples at the target.
#[allow(clippy::too_many_arguments)]
pub fn usc_report<T: Real>(
    prob: &ControlProblem<T>,
    target: &Datum<T>,
    sequence: &[Datum<T>],
    budget: usize,
    count: usize,
    gap: T,
    tol_set: T,
    seed: u64,
) -> Result<SequenceReport<T>> {
    let dists = sequence_distances(prob, target, sequence)?;
    let target_seed = target.seed(seed);
    let sample = |d: &Datum<T>, s: u64| optimal_set_sample(prob, &d.xi, d.lambda, budget, count, gap, s);
    let (reference, repeat) = rayon::join(|| sample(target, target_seed), || sample(target, derive_seed(target_seed, 1)));
    let reference = reference?;
    let noise_floor = one_sided_distance(&repeat?.pairs, &reference.pairs)?;
    let samples: Vec<OptimalSetSample<T>> = sequence.par_iter().map(|d| sample(d, d.seed(seed))).collect::<Result<_>>()?;
    let mut e = Vec::with_capacity(samples.len());
    let mut reverse = Vec::with_capacity(samples.len());
    for s in &samples {
        e.push(one_sided_distance(&s.pairs, &reference.pairs)?);
        reverse.push(one_sided_distance(&reference.pairs, &s.pairs)?);
    }
    let half = e.len() / 2;
    let trend_ok = e[half..].windows(2).all(|w| w[1] <= w[0] + T::two() * noise_floor);
    let final_ok = e[e.len() - 1] <= tol_set;
    let entries = sequence
        .iter()
        .enumerate()
        .map(|(i, d)| SequenceEntry {
            n: i + 1,
            datum: d.clone(),
            dist: dists[i],
            m_hat: samples[i].m_hat,
            value_gap: (samples[i].m_hat - reference.m_hat).abs(),
            e_n: Some(e[i]),
            reverse: Some(reverse[i]),
            pass: e[i] <= tol_set,
        })
        .collect();
    Ok(SequenceReport {
        target: target.clone(),
        target_value: reference.m_hat,
        tolerance: tol_set,
        noise_floor,
        entries,
        trend_ok,
        final_ok,
        pass: trend_ok && final_ok,
    })
}

/// A constructed admissible pair near the target at one sequence point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QLiminfEntry<T> {
    pub n: usize,
    pub datum: Datum<T>,
    pub dist: T,
    pub pair: AdmissiblePair<T>,
    /// `sup_k |xₙ(t_k) − x(t_k)|`.
    pub state_gap: T,
    /// `‖uₙ − u‖_{L²}`.
    pub control_gap: T,
    /// `‖uₙ − u‖_{L²}` caused by projecting `u` onto the perturbed control
    /// sets. The construction keeps the projected control, so this equals
    /// `control_gap`; it is kept as the bound that gap is checked against.
    pub projection_displacement: T,
    /// Largest per-node Filippov certificate bound.
    pub certificate_bound: T,
    /// Measured sup gap between the reference flow and the target state.
    pub flow_gap: T,
    /// `|ξₙ − ξ| + Σ Δt |g(λₙ)uₙ − g(λ)u|`, the nonexpansiveness bound on
    /// `flow_gap` when `A` does not depend on `λ`; otherwise the measured gap.
    pub flow_bound: T,
    pub admissible: bool,
    pub pass: bool,
}

/// Default Filippov accuracy used by [`q_liminf_construct`].
pub const Q_LIMINF_EPSILON: f64 = 1e-6;

/// Builds, for every `(ξₙ, λₙ)`, an admissible pair close to `target_pair`.
///
/// The control is projected onto `U(t_k, λₙ)`. The reference flow solves
/// `−y′ ∈ A_{λₙ}(t, y) + γ + g(λₙ)uₙ` from `ξₙ` with the target selections
/// `γ`, and Filippov projection turns it into a solution at `(ξₙ, λₙ)`. An
/// entry passes when the pair is admissible, the state gap is below the
/// certificate bound plus the flow bound, and the control gap is the
/// projection displacement.
pub fn q_liminf_construct<T: Real>(
    prob: &ControlProblem<T>,
    target_pair: &AdmissiblePair<T>,
    target: &Datum<T>,
    sequence: &[Datum<T>],
) -> Result<Vec<QLiminfEntry<T>>> {
    let dists = sequence_distances(prob, target, sequence)?;
    let admissible_tol = T::lit(10.0) * prob.tol;
    let rep = check_admissible(prob, target_pair, &target.xi, target.lambda, admissible_tol)?;
    if !rep.pass {
        return Err(Error::invalid(format!(
            "target pair is not admissible (inclusion {}, constraint {})",
            rep.max_inclusion, rep.max_constraint
        )));
    }
    let grid = &prob.grid;
    check_dim(grid.len(), target_pair.state.states.len())?;
    let g0 = prob.multiplier(target.lambda);
    let lambda_free = !prob.operator.depends_on_lambda();
    sequence
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let op = prob.operator.at(d.lambda)?;
            let g = prob.multiplier(d.lambda);
            let control: Vec<Vec<T>> = target_pair
                .control
                .iter()
                .enumerate()
                .map(|(k, u)| radial_retract(u, prob.control_radius(grid.t(k), d.lambda)))
                .collect();
            let extra: Vec<Vec<T>> = control
                .iter()
                .map(|u| u.iter().zip(&g).map(|(&a, &b)| a * b).collect())
                .collect();
            let forcing: Vec<Vec<T>> = target_pair
                .selections
                .iter()
                .zip(&extra)
                .map(|(s, e)| s.iter().zip(e).map(|(&a, &b)| a + b).collect())
                .collect();
            let reference = solve_forced(&op, &forcing, &d.xi, grid, prob.tol)?;
            let mut opts = FilippovOptions::new(T::lit(Q_LIMINF_EPSILON));
            opts.tol = prob.tol;
            let out = filippov_construct(&op, &prob.map, &reference, &target_pair.selections, Some(&extra), d.lambda, &opts)?;
            let mut pair = AdmissiblePair::new(out.trajectory, control, out.selections)?;
            annotate(prob, &mut pair, &d.xi, d.lambda)?;
            let admissible = check_admissible(prob, &pair, &d.xi, d.lambda, admissible_tol)?.pass;

            let state_gap = pair.state.sup_gap(&target_pair.state)?;
            let control_gap = control_l2_gap(grid, &pair.control, &target_pair.control)?;
            let projection_displacement = control_gap;
            let certificate_bound = out.certificate.bound.iter().copied().fold(T::zero(), T::max);
            let flow_gap = reference.sup_gap(&target_pair.state)?;
            let flow_bound = if lambda_free {
                let drift: T = (0..grid.steps())
                    .map(|k| {
                        let v: Vec<T> = (0..g.len())
                            .map(|j| g[j] * pair.control[k + 1][j] - g0[j] * target_pair.control[k + 1][j])
                            .collect();
                        grid.dt(k) * crate::linalg::norm(&v)
                    })
                    .sum();
                dist(&d.xi, &target.xi) + drift
            } else {
                flow_gap
            };
            let slack = admissible_tol * (T::one() + flow_bound);
            let pass = admissible
                && state_gap <= certificate_bound + flow_bound + slack
                && control_gap <= projection_displacement + slack;
            Ok(QLiminfEntry {
                n: i + 1,
                datum: d.clone(),
                dist: dists[i],
                pair,
                state_gap,
                control_gap,
                projection_displacement,
                certificate_bound,
                flow_gap,
                flow_bound,
                admissible,
                pass,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{CostSpec, OperatorFamily};
    use crate::inclusion::{MultiMap, TimeGrid};
    use crate::operators::MonotoneOp;

    fn convex_instance(steps: usize) -> ControlProblem<f64> {
        let grid = TimeGrid::uniform(1.0, steps).unwrap();
        let mut p =
            ControlProblem::new(OperatorFamily::Fixed(MonotoneOp::identity(1)), MultiMap::zero(1), 1.0, grid).unwrap();
        p.cost = CostSpec {
            q_control: 1.0,
            lin_control: vec![0.2],
            lin_terminal: vec![1.0],
            ..CostSpec::zero(1)
        };
        p
    }

    #[test]
    fn point_seed_ignores_order() {
        let p = convex_instance(10);
        let a = sweep_value(&p, &[vec![0.0], vec![1.0]], &[0.0, 0.5], 2, 4).unwrap();
        let b = sweep_value(&p, &[vec![1.0], vec![0.0]], &[0.5, 0.0], 2, 4).unwrap();
        for e in &a.entries {
            let f = b.entries.iter().find(|f| f.xi == e.xi && f.lambda == e.lambda).unwrap();
            assert_eq!(e, f);
        }
        assert_eq!(a.failed(), 0);
    }

    #[test]
    fn single_point_sweep_equals_value() {
        let p = convex_instance(10);
        let s = sweep_value(&p, &[vec![0.3]], &[0.0], 3, 8).unwrap();
        let d = Datum::new(vec![0.3], 0.0);
        let v = crate::control::value(&p, &[0.3], 0.0, 3, d.seed(8)).unwrap();
        assert_eq!(s.entries[0].m_hat, v);
    }

    #[test]
    fn constant_sequence_is_continuous() {
        let p = convex_instance(10);
        let t = Datum::new(vec![0.5], 0.0);
        let r = continuity_report(&p, &t, &[t.clone(), t.clone(), t.clone()], 4, 1).unwrap();
        assert!(r.pass);
        assert!(r.entries.iter().all(|e| e.value_gap <= 2.0 * r.noise_floor + 1e-12));
    }

    #[test]
    fn increasing_distances_rejected() {
        let p = convex_instance(5);
        let t = Datum::new(vec![0.0], 0.0);
        let seq = [Datum::new(vec![0.1], 0.0), Datum::new(vec![0.2], 0.0)];
        assert!(continuity_report(&p, &t, &seq, 1, 0).is_err());
    }

    #[test]
    fn q_liminf_constant_sequence_returns_target() {
        let p = convex_instance(20);
        let t = Datum::new(vec![0.4], 0.0);
        let target = optimize(&p, &t.xi, 0.0, 4, 2).unwrap().pair;
        let out = q_liminf_construct(&p, &target, &t, std::slice::from_ref(&t)).unwrap();
        assert!(out[0].pass, "{:?}", out[0].state_gap);
        assert!(out[0].state_gap < 1e-9);
        assert_eq!(out[0].control_gap, 0.0);
    }

    #[test]
    fn q_liminf_shrinking_radius() {
        let mut p = convex_instance(20);
        p.radius_lambda = -0.5;
        let t = Datum::new(vec![0.0], 0.0);
        let target = optimize(&p, &t.xi, 0.0, 4, 2).unwrap().pair;
        let seq: Vec<_> = (1..5).map(|n| Datum::new(vec![0.0], 0.5f64.powi(n))).collect();
        let out = q_liminf_construct(&p, &target, &t, &seq).unwrap();
        for e in &out {
            assert!(e.pass && e.admissible);
            let shrink = 0.5 * e.datum.lambda;
            assert!(e.projection_displacement <= shrink + 1e-12);
        }
    }
}
