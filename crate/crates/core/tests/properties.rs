mod common;

use common::*;
use proptest::prelude::*;
use trajmetric::admm::{admm_metric, AdmmConfig};
use trajmetric::exact::{brute_force_metric, cost_matrices, exact_metric, loc_cost, enumerate_assignments};
use trajmetric::lp::{assignment_to_weights, lp_metric};
use trajmetric::{base_distance, MetricParams, TrajectorySet};

fn pair(seed: u64, n_max: usize, window: usize) -> (TrajectorySet, TrajectorySet, MetricParams) {
    let mut r = rng(seed);
    let x = random_set(&mut r, n_max, window, 2);
    let y = random_set(&mut r, n_max, window, 2);
    (x, y, random_params(&mut r))
}

fn far_copy(s: &TrajectorySet) -> TrajectorySet {
    s.translated(&[1.0e4, -1.0e4])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn viterbi_equals_brute_force(seed in any::<u64>(), window in 1usize..=4) {
        let (x, y, params) = pair(seed, 2, window);
        let v = exact_metric(&x, &y, &params).unwrap();
        let b = brute_force_metric(&x, &y, &params).unwrap();
        prop_assert!(rel_close(v.value, b.value, 1e-9), "{} vs {}", v.value, b.value);
        prop_assert_eq!(v.per_time_assignments, b.per_time_assignments);
    }

    #[test]
    fn viterbi_equals_reference(seed in any::<u64>(), window in 1usize..=4) {
        let (x, y, params) = pair(seed, 3, window);
        let v = exact_metric(&x, &y, &params).unwrap();
        let r = reference_metric(&x, &y, params.c(), params.gamma(), params.p());
        prop_assert!(rel_close(v.value, r, 1e-9), "{} vs {}", v.value, r);
    }

    #[test]
    fn lp_is_a_lower_bound(seed in any::<u64>(), window in 1usize..=4) {
        let (x, y, params) = pair(seed, 2, window);
        let e = exact_metric(&x, &y, &params).unwrap();
        let l = lp_metric(&x, &y, &params).unwrap();
        prop_assert!(l.value <= e.value + 1e-8, "{} > {}", l.value, e.value);
        prop_assert!((l.decomposition.total() - l.raw_cost).abs() <= 1e-7 * l.raw_cost.max(1.0));
    }

    #[test]
    fn exact_decomposition_sums_to_raw_cost(seed in any::<u64>(), window in 1usize..=4) {
        let (x, y, params) = pair(seed, 3, window);
        let e = exact_metric(&x, &y, &params).unwrap();
        prop_assert!((e.decomposition.total() - e.raw_cost).abs() <= 1e-9 * e.raw_cost.max(1.0));
    }

    #[test]
    fn stage_cost_is_the_weight_inner_product(seed in any::<u64>()) {
        let (x, y, params) = pair(seed, 3, 3);
        let costs = cost_matrices(&x, &y, &params).unwrap();
        for pi in enumerate_assignments(x.len(), y.len()).unwrap() {
            for d in &costs {
                let w = assignment_to_weights(&pi, y.len());
                prop_assert!((loc_cost(d, &pi).unwrap() - w.dot(d)).abs() < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn exact_metric_axioms(seed in any::<u64>(), window in 1usize..=4) {
        let mut r = rng(seed);
        let params = random_params(&mut r);
        let sets: Vec<TrajectorySet> = (0..3).map(|_| random_set(&mut r, 3, window, 2)).collect();
        let d = |a: &TrajectorySet, b: &TrajectorySet| exact_metric(a, b, &params).unwrap().value;
        let (x, y, z) = (&sets[0], &sets[1], &sets[2]);
        prop_assert!(rel_close(d(x, y), d(y, x), 1e-8));
        prop_assert!(d(x, x) <= 1e-12);
        if canonical(x) != canonical(y) {
            prop_assert!(d(x, y) > 0.0);
        }
        prop_assert!(d(x, z) <= d(x, y) + d(y, z) + 1e-8 * d(x, z).max(1.0));
    }

    #[test]
    fn lp_metric_axioms(seed in any::<u64>(), window in 1usize..=4) {
        let mut r = rng(seed);
        let params = random_params(&mut r);
        let sets: Vec<TrajectorySet> = (0..3).map(|_| random_set(&mut r, 3, window, 2)).collect();
        let d = |a: &TrajectorySet, b: &TrajectorySet| lp_metric(a, b, &params).unwrap().value;
        let (x, y, z) = (&sets[0], &sets[1], &sets[2]);
        prop_assert!(rel_close(d(x, y), d(y, x), 1e-8));
        prop_assert!(d(x, x) <= 1e-8);
        if canonical(x) != canonical(y) {
            prop_assert!(d(x, y) > 0.0);
        }
        prop_assert!(d(x, z) <= d(x, y) + d(y, z) + 1e-8 * d(x, z).max(1.0));
    }

    #[test]
    fn invariances(seed in any::<u64>(), window in 1usize..=4, shift in 0usize..3, dx in -50.0f64..50.0) {
        let (x, y, params) = pair(seed, 3, window);
        let base = exact_metric(&x, &y, &params).unwrap().value;
        let lp = lp_metric(&x, &y, &params).unwrap().value;
        let check = |a: &TrajectorySet, b: &TrajectorySet| {
            let e = exact_metric(a, b, &params).unwrap().value;
            let l = lp_metric(a, b, &params).unwrap().value;
            rel_close(e, base, 1e-9) && rel_close(l, lp, 1e-7)
        };
        prop_assert!(check(&x.time_reversed(), &y.time_reversed()));
        let w = window + shift;
        prop_assert!(check(&x.time_shifted(shift, w).unwrap(), &y.time_shifted(shift, w).unwrap()));
        prop_assert!(check(&x.translated(&[dx, -dx]), &y.translated(&[dx, -dx])));
        let rev_x: Vec<usize> = (0..x.len()).rev().collect();
        let rev_y: Vec<usize> = (0..y.len()).rev().collect();
        prop_assert!(check(&x.permuted(&rev_x), &y.permuted(&rev_y)));
    }

    #[test]
    fn far_duplicate_doubles_raw_cost(seed in any::<u64>(), window in 1usize..=3) {
        let (x, y, params) = pair(seed, 2, window);
        let single = exact_metric(&x, &y, &params).unwrap().raw_cost;
        let xx = x.union(&far_copy(&x)).unwrap();
        let yy = y.union(&far_copy(&y)).unwrap();
        let double = exact_metric(&xx, &yy, &params).unwrap().raw_cost;
        prop_assert!((double - 2.0 * single).abs() <= 1e-9 * double.max(1.0));
    }

    #[test]
    fn single_step_is_gospa(seed in any::<u64>()) {
        let (x, y, params) = pair(seed, 4, 1);
        let points = |s: &TrajectorySet| s.trajectories().iter().map(|t| t.states()[0].clone()).collect::<Vec<_>>();
        let g = gospa_alpha2(&points(&x), &points(&y), params.c(), params.p());
        prop_assert!(rel_close(exact_metric(&x, &y, &params).unwrap().value, g, 1e-9));
        prop_assert!(rel_close(lp_metric(&x, &y, &params).unwrap().value, g, 1e-9));
    }

    #[test]
    fn base_metric_is_a_metric(
        a in proptest::option::of(prop::collection::vec(-5.0f64..5.0, 2)),
        b in proptest::option::of(prop::collection::vec(-5.0f64..5.0, 2)),
        c in proptest::option::of(prop::collection::vec(-5.0f64..5.0, 2)),
        cut in 0.1f64..4.0,
        p in 1.0f64..4.0,
    ) {
        let params = MetricParams::new(cut, 1.0, p).unwrap();
        let d = |u: &Option<Vec<f64>>, v: &Option<Vec<f64>>| base_distance(u.as_deref(), v.as_deref(), &params).unwrap();
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!(d(&a, &b) <= cut);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn admm_is_feasible_and_above_lp(seed in any::<u64>(), window in 2usize..=5) {
        let (x, y, params) = pair(seed, 3, window);
        let l = lp_metric(&x, &y, &params).unwrap();
        let a = admm_metric(&x, &y, &params, &AdmmConfig::default()).unwrap();
        prop_assert!(a.raw_cost >= l.raw_cost - 1e-7 * l.raw_cost.max(1.0));
        for w in &a.weights {
            prop_assert!(w.check_feasible(1e-9).is_ok());
        }
        if a.converged {
            let t = AdmmConfig::default().threshold(x.len(), y.len());
            prop_assert!(a.primal_residual < t && a.dual_residual < t);
        }
        prop_assert!((a.decomposition.total() - a.raw_cost).abs() <= 1e-7 * a.raw_cost.max(1.0));
    }
}

