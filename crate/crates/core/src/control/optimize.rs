use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use super::problem::{annotate, AdmissiblePair, ControlProblem};
use crate::error::{check_dim, Error, Result};
use crate::inclusion::{StepContext, Target, Trajectory};
use crate::linalg::norm;
use crate::operators::MonotoneOp;
use crate::sampling::{derive_seed, rng_for, unit_ball_point};
use crate::scalar::Real;

/// Number of multistarts used by [`optimize`].
pub const DEFAULT_STARTS: usize = 8;

/// Settings of the direct-method search.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizeOptions {
    /// Coordinate-descent sweeps per start.
    pub budget: usize,
    pub starts: usize,
    pub seed: u64,
}

impl OptimizeOptions {
    pub fn new(budget: usize, seed: u64) -> Self {
        OptimizeOptions {
            budget,
            starts: DEFAULT_STARTS,
            seed,
        }
    }
}

/// Best pair found by [`optimize`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizeResult<T> {
    pub pair: AdmissiblePair<T>,
    pub m_hat: T,
    /// True when the winning start stopped because a sweep no longer improved
    /// the cost, rather than by exhausting the budget.
    pub converged: bool,
    pub sweeps: usize,
    pub start: usize,
}

/// Forward simulation with greedy selection of `F` for a fixed `(ξ, λ)`.
/// Values at every grid node.
type Path<T> = Vec<Vec<T>>;
/// `(cost, controls, states, selections)` of a trial run.
type Candidate<T> = (T, Path<T>, Path<T>, Path<T>);

struct Simulator<'a, T> {
    prob: &'a ControlProblem<T>,
    op: MonotoneOp<T>,
    xi: &'a [T],
    lambda: T,
    gain: Vec<T>,
}

impl<'a, T: Real> Simulator<'a, T> {
    fn new(prob: &'a ControlProblem<T>, xi: &'a [T], lambda: T) -> Result<Self> {
        Ok(Simulator {
            op: prob.operator.at(lambda)?,
            prob,
            xi,
            lambda,
            gain: prob.multiplier(lambda),
        })
    }

    fn proxy(&self, x: &[T]) -> T {
        self.prob.running_state_cost(x, self.lambda) + self.prob.terminal_cost(self.xi, x)
    }

    /// Step `k → k + 1`. Three selection rules are tried in order, and a later
    /// one replaces an earlier one only on strict improvement of
    /// `L(x_{k+1}) + ψ̂(x_{k+1})`: nearest to the previous selection, the
    /// centre of `F(t_{k+1}, x_{k+1})`, and its extreme point in the direction
    /// of `∇(L + ψ̂)(x_k)`.
    fn step(&self, k: usize, x: &[T], prev: &[T], u_next: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        let grid = &self.prob.grid;
        let (t, dt) = (grid.t(k), grid.dt(k));
        let extra: Vec<T> = self.gain.iter().zip(u_next).map(|(&g, &u)| g * u).collect();
        let ctx = StepContext {
            op: &self.op,
            map: &self.prob.map,
            lambda: self.lambda,
            tol: self.prob.tol,
        };
        let set = self.prob.map.eval(t + dt, x, self.lambda)?;
        if set.is_singleton() {
            return ctx.advance(t, dt, x, set.center(), Some(&extra));
        }
        let grad = self.prob.greedy_gradient(self.xi, x, self.lambda);
        let candidates = [
            (set.project(prev)?, Target::Nearest),
            (set.center(), Target::Centre),
            (set.extreme_point(&grad)?, Target::Extreme(&grad)),
        ];
        let mut best: Option<(T, Vec<T>, Vec<T>)> = None;
        for (c, target) in candidates {
            let (xn, f) = ctx.advance_to(t, dt, x, c, Some(&extra), target)?;
            let score = self.proxy(&xn);
            if best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((score, xn, f));
            }
        }
        let (_, xn, f) = best.expect("at least one candidate");
        Ok((xn, f))
    }

    /// Recomputes `states[k0+1..]` and `sels[k0+1..]` from node `k0`.
    fn run_from(&self, k0: usize, states: &mut [Vec<T>], sels: &mut [Vec<T>], controls: &[Vec<T>]) -> Result<()> {
        for k in k0..self.prob.grid.steps() {
            let (x, f) = self.step(k, &states[k], &sels[k], &controls[k + 1]).map_err(|e| e.at_node(k + 1))?;
            states[k + 1] = x;
            sels[k + 1] = f;
        }
        Ok(())
    }

    fn initial(&self, controls: &[Vec<T>]) -> Result<(Path<T>, Path<T>)> {
        let n = self.xi.len();
        let len = self.prob.grid.len();
        let mut states = vec![vec![T::zero(); n]; len];
        let mut sels = vec![vec![T::zero(); n]; len];
        states[0] = self.xi.to_vec();
        sels[0] = self.prob.map.eval(T::zero(), self.xi, self.lambda)?.project(&vec![T::zero(); n])?;
        self.run_from(0, &mut states, &mut sels, controls)?;
        Ok((states, sels))
    }

    fn cost(&self, states: &[Vec<T>], controls: &[Vec<T>]) -> T {
        self.prob.cost_of(states, controls, self.xi, self.lambda)
    }
}

fn project_ball<T: Real>(u: &[T], r: T) -> Vec<T> {
    crate::inclusion::radial_retract(u, r)
}

struct StartOutcome<T> {
    cost: T,
    controls: Vec<Vec<T>>,
    states: Vec<Vec<T>>,
    sels: Vec<Vec<T>>,
    converged: bool,
    sweeps: usize,
    start: usize,
}

/// Projected coordinate descent over the node controls from one start.
///
/// Each coordinate costs three simulations: `J(u ± δeᵢ)` for a central
/// difference and one trial step. The trial is the finite-difference Newton
/// step when the curvature estimate is positive and an adaptive gradient
/// step otherwise. Only improvements are accepted, and a perturbation at node
/// `k` re-simulates from `k` on.
fn descend<T: Real>(sim: &Simulator<T>, mut controls: Vec<Vec<T>>, budget: usize, start: usize) -> Result<StartOutcome<T>> {
    let grid = &sim.prob.grid;
    let n = sim.xi.len();
    let (mut states, mut sels) = sim.initial(&controls)?;
    let mut j = sim.cost(&states, &controls);
    let mut scale = T::one();
    let mut converged = false;
    let mut sweeps = 0;

    let evaluate = |k: usize, uk: &[T], controls: &[Vec<T>], states: &[Vec<T>], sels: &[Vec<T>]| {
        let mut c = controls.to_vec();
        c[k] = uk.to_vec();
        let mut s = states.to_vec();
        let mut f = sels.to_vec();
        if k > 0 {
            sim.run_from(k - 1, &mut s, &mut f, &c)?;
        }
        let cost = sim.cost(&s, &c);
        Ok::<_, Error>((cost, c, s, f))
    };
    let eval_or_inf = |k: usize, uk: &[T], controls: &[Vec<T>], states: &[Vec<T>], sels: &[Vec<T>]| {
        match evaluate(k, uk, controls, states, sels) {
            Ok(v) if v.0.is_finite() => Some(v),
            _ => None,
        }
    };

    for _ in 0..budget {
        sweeps += 1;
        let j_start = j;
        for k in 0..grid.len() {
            let r = sim.prob.control_radius(grid.t(k), sim.lambda);
            for i in 0..n {
                let uk = controls[k].clone();
                let delta = T::lit(1e-5) * (T::one() + norm(&uk));
                let mut plus = uk.clone();
                plus[i] += delta;
                let mut minus = uk.clone();
                minus[i] -= delta;
                let jp = eval_or_inf(k, &plus, &controls, &states, &sels);
                let jm = eval_or_inf(k, &minus, &controls, &states, &sels);
                let mut best: Option<Candidate<T>> = None;
                let mut consider = |cand: Option<Candidate<T>>, feasible: bool| {
                    if let Some(c) = cand {
                        if feasible && c.0 < j && best.as_ref().is_none_or(|b| c.0 < b.0) {
                            best = Some(c);
                        }
                    }
                };
                let (vp, vm) = (jp.as_ref().map(|v| v.0), jm.as_ref().map(|v| v.0));
                let mut trial_used_gradient = false;
                let trial = match (vp, vm) {
                    (Some(p), Some(m)) => {
                        let d1 = (p - m) / (T::two() * delta);
                        let d2 = (p - T::two() * j + m) / (delta * delta);
                        let step = if d2 > T::zero() {
                            -d1 / d2
                        } else {
                            trial_used_gradient = true;
                            -scale * d1
                        };
                        let mut u = uk.clone();
                        u[i] += step;
                        Some(project_ball(&u, r))
                    }
                    _ => None,
                };
                consider(jp, norm(&plus) <= r);
                consider(jm, norm(&minus) <= r);
                let mut trial_accepted = false;
                if let Some(u) = trial {
                    if u != uk {
                        let res = eval_or_inf(k, &u, &controls, &states, &sels);
                        if let Some(v) = &res {
                            trial_accepted = v.0 < j;
                        }
                        consider(res, true);
                    }
                }
                if trial_used_gradient {
                    scale = if trial_accepted { scale * T::two() } else { (scale * T::half()).max(T::lit(1e-12)) };
                }
                if let Some((cost, c, s, f)) = best {
                    j = cost;
                    controls = c;
                    states = s;
                    sels = f;
                }
            }
        }
        if j_start - j <= T::lit(1e-14) * (T::one() + j.abs()) {
            converged = true;
            break;
        }
    }
    Ok(StartOutcome {
        cost: j,
        controls,
        states,
        sels,
        converged,
        sweeps,
        start,
    })
}

fn lexicographic<T: Real>(a: &[Vec<T>], b: &[Vec<T>]) -> Ordering {
    for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
        match x.as_f64().total_cmp(&y.as_f64()) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Direct method over node controls: projected coordinate descent from
/// several starts (start 0 is `u ≡ 0`, the others uniform in the control
/// balls), greedy selection of `F`, and a deterministic reduction by cost
/// with ties broken by the lexicographically smallest control.
pub fn optimize_with<T: Real>(prob: &ControlProblem<T>, xi: &[T], lambda: T, opts: &OptimizeOptions) -> Result<OptimizeResult<T>> {
    if opts.budget == 0 || opts.starts == 0 {
        return Err(Error::invalid("budget and starts must be at least 1"));
    }
    check_dim(prob.dim(), xi.len())?;
    prob.check_parameter(lambda)?;
    let sim = Simulator::new(prob, xi, lambda)?;
    let grid = &prob.grid;
    let n = prob.dim();
    let outcomes: Vec<Result<StartOutcome<T>>> = (0..opts.starts)
        .into_par_iter()
        .map(|s| {
            let controls: Vec<Vec<T>> = if s == 0 {
                vec![vec![T::zero(); n]; grid.len()]
            } else {
                let mut rng = rng_for(opts.seed, s as u64);
                (0..grid.len())
                    .map(|k| {
                        let r = prob.control_radius(grid.t(k), lambda);
                        unit_ball_point::<T, _>(&mut rng, n).into_iter().map(|v| v * r).collect()
                    })
                    .collect()
            };
            descend(&sim, controls, opts.budget, s)
        })
        .collect();
    let mut best: Option<StartOutcome<T>> = None;
    let mut first_err = None;
    for o in outcomes {
        match o {
            Ok(o) => {
                let better = match &best {
                    None => true,
                    Some(b) => match o.cost.partial_cmp(&b.cost) {
                        Some(Ordering::Less) => true,
                        Some(Ordering::Equal) => lexicographic(&o.controls, &b.controls) == Ordering::Less,
                        _ => false,
                    },
                };
                if better {
                    best = Some(o);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let best = match (best, first_err) {
        (Some(b), _) => b,
        (None, Some(e)) => return Err(e),
        (None, None) => return Err(Error::Internal("no multistart finished".into())),
    };
    let state = Trajectory::new(grid.clone(), best.states)?;
    let mut pair = AdmissiblePair::new(state, best.controls, best.sels)?;
    annotate(prob, &mut pair, xi, lambda)?;
    Ok(OptimizeResult {
        pair,
        m_hat: best.cost,
        converged: best.converged,
        sweeps: best.sweeps,
        start: best.start,
    })
}

/// [`optimize_with`] with the default number of starts.
pub fn optimize<T: Real>(prob: &ControlProblem<T>, xi: &[T], lambda: T, budget: usize, seed: u64) -> Result<OptimizeResult<T>> {
    optimize_with(prob, xi, lambda, &OptimizeOptions::new(budget, seed))
}

/// The value estimate `m̂(ξ, λ)`.
pub fn value<T: Real>(prob: &ControlProblem<T>, xi: &[T], lambda: T, budget: usize, seed: u64) -> Result<T> {
    Ok(optimize(prob, xi, lambda, budget, seed)?.m_hat)
}

/// Near-optimal pairs from independent optimisation runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimalSetSample<T> {
    pub pairs: Vec<AdmissiblePair<T>>,
    pub costs: Vec<T>,
    pub m_hat: T,
    pub spread: T,
}

/// Runs `count` multistart optimisations (run 0 with `seed`, run `i` with a
/// seed derived from `(seed, i)`) and keeps the pairs whose cost is within
/// `gap` of the best one.
#[allow(clippy::too_many_arguments)]
pub fn optimal_set_sample<T: Real>(
    prob: &ControlProblem<T>,
    xi: &[T],
    lambda: T,
    budget: usize,
    count: usize,
    gap: T,
    seed: u64,
) -> Result<OptimalSetSample<T>> {
    if !(gap > T::zero()) {
        return Err(Error::invalid("retention gap must be positive"));
    }
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    let runs: Vec<OptimizeResult<T>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let s = if i == 0 { seed } else { derive_seed(seed, i as u64) };
            optimize(prob, xi, lambda, budget, s)
        })
        .collect::<Result<_>>()?;
    let m_hat = runs.iter().map(|r| r.m_hat).fold(T::infinity(), T::min);
    let (mut pairs, mut costs) = (Vec::new(), Vec::new());
    for r in runs {
        if r.m_hat <= m_hat + gap {
            costs.push(r.m_hat);
            pairs.push(r.pair);
        }
    }
    let spread = costs.iter().copied().fold(m_hat, T::max) - m_hat;
    Ok(OptimalSetSample {
        pairs,
        costs,
        m_hat,
        spread,
    })
}
