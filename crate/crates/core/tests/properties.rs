use proptest::prelude::*;

use evinc::convex::{hausdorff, ConvexBody};
use evinc::inclusion::{sample_solution_set, solve_forced, MultiMap, SelectionStrategy, TimeGrid};
use evinc::operators::{MonotoneOp, WeightedPLaplacian};
use evinc::sampling::rng_for;

fn coords(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, dim)
}

fn body(dim: usize) -> impl Strategy<Value = ConvexBody<f64>> {
    prop_oneof![
        coords(dim).prop_map(|x| ConvexBody::point(x).unwrap()),
        (coords(dim), prop::collection::vec(0.0..1.5f64, dim))
            .prop_map(|(c, w)| ConvexBody::centered_box(&c, &w).unwrap()),
        (coords(dim), 0.0..1.5f64).prop_map(|(c, r)| ConvexBody::ball(c, r).unwrap()),
    ]
}

fn three_bodies() -> impl Strategy<Value = (ConvexBody<f64>, ConvexBody<f64>, ConvexBody<f64>)> {
    (1usize..=3).prop_flat_map(|d| (body(d), body(d), body(d)))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn operator(kind: u8, dim: usize, coeff: f64) -> MonotoneOp<f64> {
    match kind % 4 {
        0 => MonotoneOp::identity(dim),
        1 => MonotoneOp::power(dim, coeff, 3.0).unwrap(),
        2 => MonotoneOp::abs_subdifferential(dim),
        _ => MonotoneOp::p_laplacian(WeightedPLaplacian::constant(dim, coeff, 2.5).unwrap()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hausdorff_is_a_metric((a, b, c) in three_bodies()) {
        let ab = hausdorff(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        prop_assert!((ab - hausdorff(&b, &a).unwrap()).abs() <= 1e-12);
        prop_assert!(ab <= hausdorff(&a, &c).unwrap() + hausdorff(&c, &b).unwrap() + 1e-12);
    }

    #[test]
    fn projection_is_the_obtuse_angle_point(
        (k, y) in (1usize..=3).prop_flat_map(|d| (body(d), coords(d))),
        seed in any::<u64>(),
    ) {
        let p = k.project(&y).unwrap();
        prop_assert!(k.contains(&p, 1e-12).unwrap());
        prop_assert!((dist(&y, &p) - k.distance(&y).unwrap()).abs() <= 1e-12);
        let mut rng = rng_for(seed, 0);
        for _ in 0..16 {
            let z = k.sample(&mut rng);
            let inner: f64 = y.iter().zip(&p).zip(&z).map(|((yi, pi), zi)| (yi - pi) * (zi - pi)).sum();
            prop_assert!(inner <= 1e-10, "inner product {inner}");
            prop_assert!(dist(&y, &z) >= dist(&y, &p) - 1e-12);
        }
    }

    #[test]
    fn resolvent_is_nonexpansive(
        kind in 0u8..4,
        coeff in 0.3..2.0f64,
        h in 0.01..1.0f64,
        (y1, y2) in (1usize..=4).prop_flat_map(|d| (coords(d), coords(d))),
    ) {
        let op = operator(kind, y1.len(), coeff);
        let tol = 1e-11;
        let x1 = op.resolvent(0.0, h, &y1, tol).unwrap();
        let x2 = op.resolvent(0.0, h, &y2, tol).unwrap();
        prop_assert!(dist(&x1, &x2) <= dist(&y1, &y2) + 1e-8);
    }

    #[test]
    fn implicit_flow_is_nonexpansive(
        kind in 0u8..4,
        coeff in 0.3..2.0f64,
        steps in 2usize..30,
        (x1, x2, f) in (1usize..=3).prop_flat_map(|d| (coords(d), coords(d), coords(d))),
    ) {
        let op = operator(kind, x1.len(), coeff);
        let grid = TimeGrid::uniform(1.0, steps).unwrap();
        let forcing = vec![f; grid.len()];
        let a = solve_forced(&op, &forcing, &x1, &grid, 1e-11).unwrap();
        let b = solve_forced(&op, &forcing, &x2, &grid, 1e-11).unwrap();
        prop_assert!(a.sup_gap(&b).unwrap() <= dist(&x1, &x2) + 1e-8);
    }

    #[test]
    fn selections_belong_to_the_multimap(
        slope in -1.0..1.0f64,
        width in 0.0..1.0f64,
        xi in -1.0..1.0f64,
        strategy in prop_oneof![
            Just(SelectionStrategy::MinimalNorm),
            Just(SelectionStrategy::ExtremePoint),
            Just(SelectionStrategy::RandomExtreme),
            Just(SelectionStrategy::ProjectPrevious),
        ],
        seed in any::<u64>(),
    ) {
        let grid = TimeGrid::uniform(1.0, 20).unwrap();
        let map = MultiMap::affine(Some(vec![vec![slope]]), vec![0.2]).unwrap().with_box(vec![width]).unwrap();
        let op = MonotoneOp::identity(1);
        let samples = sample_solution_set(&op, &map, &[xi], 0.0, &grid, strategy, 2, seed, 1e-12).unwrap();
        for s in &samples {
            for (k, (x, f)) in s.trajectory.states.iter().zip(&s.selections).enumerate() {
                let set = map.eval(grid.t(k), x, 0.0).unwrap();
                prop_assert!(set.distance(f).unwrap() <= 1e-9, "step {k}: {f:?} not in F");
            }
        }
    }
}

#[test]
fn single_precision_resolvent_matches_double() {
    let op32 = evinc::f32::MonotoneOp::power(2, 1.0, 3.0).unwrap();
    let op64 = MonotoneOp::<f64>::power(2, 1.0, 3.0).unwrap();
    let x32 = op32.resolvent(0.0, 0.5, &[1.0f32, -0.5], 1e-5).unwrap();
    let x64 = op64.resolvent(0.0, 0.5, &[1.0, -0.5], 1e-12).unwrap();
    for (a, b) in x32.iter().zip(&x64) {
        assert!((*a as f64 - b).abs() < 1e-4);
    }
    assert!(norm(&x64) < norm(&[1.0, -0.5]));
}
