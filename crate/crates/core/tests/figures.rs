mod common;

use common::*;
use trajmetric::admm::{admm_metric, AdmmConfig};
use trajmetric::exact::{brute_force_metric_with, exact_metric, ExactConfig};
use trajmetric::lp::lp_metric;
use trajmetric::AssignmentVector;

fn assignments_of(r: &trajmetric::ExactResult, i: usize) -> Vec<usize> {
    r.per_time_assignments.iter().map(|a| a.entries()[i]).collect()
}

#[test]
fn exact_matches_brute_force_on_figures() {
    let params = figure_params();
    // Fig. 1(d) has 34 assignment vectors per step, 34^5 sequences.
    let wide = ExactConfig { max_sequences: 50_000_000, ..ExactConfig::default() };
    for (name, (x, y), expected) in all_figures() {
        let v = exact_metric(&x, &y, &params).unwrap();
        let b = brute_force_metric_with(&x, &y, &params, &wide).unwrap();
        assert!(rel_close(v.value, expected, 1e-9), "{name}: {} vs {expected}", v.value);
        assert!(rel_close(b.value, expected, 1e-9), "{name}: oracle {} vs {expected}", b.value);
        assert_eq!(v.per_time_assignments, b.per_time_assignments, "{name}");
    }
}

#[test]
fn figure_assignment_sequences() {
    let params = figure_params();
    let (x, y) = fig1a();
    assert_eq!(assignments_of(&exact_metric(&x, &y, &params).unwrap(), 0), vec![1; 5]);
    let (x, y) = fig1b();
    assert_eq!(assignments_of(&exact_metric(&x, &y, &params).unwrap(), 0), vec![1; 5]);
    let (x, y) = fig1c();
    assert_eq!(
        assignments_of(&exact_metric(&x, &y, &params).unwrap(), 0),
        vec![1, 1, 1, 2, 2]
    );
    let (x, y) = fig1d();
    let r = exact_metric(&x, &y, &params).unwrap();
    assert_eq!(assignments_of(&r, 0), vec![1, 1, 1, 2, 2]);
    assert_eq!(assignments_of(&r, 1), vec![3, 3, 3, 0, 0]);
    assert_eq!(assignments_of(&r, 2), vec![0, 0, 0, 3, 3]);
    let (x, y) = fig2a();
    let r = exact_metric(&x, &y, &params).unwrap();
    assert_eq!(assignments_of(&r, 0), vec![1, 1, 2, 2]);
    assert_eq!(assignments_of(&r, 1), vec![2, 2, 1, 1]);
    let (x, y) = fig2b();
    let r = exact_metric(&x, &y, &params).unwrap();
    assert_eq!(assignments_of(&r, 0), vec![1, 1, 1, 1]);
    assert_eq!(assignments_of(&r, 1), vec![2, 2, 3, 3]);
}

#[test]
fn switching_orderings() {
    let params = figure_params();
    let v = |(x, y): (trajmetric::TrajectorySet, trajmetric::TrajectorySet)| {
        exact_metric(&x, &y, &params).unwrap().value
    };
    assert!(rel_close(v(fig1d()), 2.0 * v(fig1c()), 1e-12));
    assert!(v(fig2b()) < v(fig2a()));
}

#[test]
fn figure_decompositions() {
    let params = figure_params();
    let (x, y) = fig1b();
    let d = exact_metric(&x, &y, &params).unwrap().decomposition;
    assert!((d.localization - 0.4).abs() < 1e-12);
    assert!((d.missed - 2.5).abs() < 1e-12);
    assert_eq!(d.false_, 0.0);
    assert_eq!(d.switching, 0.0);

    let (x, y) = fig1c();
    let d = lp_metric(&x, &y, &params).unwrap().decomposition;
    assert!((d.localization - 0.5).abs() < 1e-9);
    assert!((d.switching - 2.0).abs() < 1e-9);
    assert!(d.missed.abs() < 1e-9 && d.false_.abs() < 1e-9);
}

#[test]
fn lp_is_tight_on_figures() {
    let params = figure_params();
    for (name, (x, y), expected) in all_figures() {
        let r = lp_metric(&x, &y, &params).unwrap();
        assert!(rel_close(r.value, expected, 1e-9), "{name}: {} vs {expected}", r.value);
        assert!((r.decomposition.total() - r.raw_cost).abs() < 1e-9, "{name}");
        for w in &r.weights {
            w.check_feasible(1e-9).unwrap();
        }
    }
}

#[test]
fn admm_default_config_close_on_fig2b() {
    let (x, y) = fig2b();
    let r = admm_metric(&x, &y, &figure_params(), &AdmmConfig::default()).unwrap();
    assert!((r.value - 2.8).abs() / 2.8 <= 0.025, "{}", r.value);
}

#[test]
fn admm_converged_matches_figures() {
    let params = figure_params();
    let cfg = AdmmConfig { residual_factor: 1e-9, max_admm_iters: 1000, ..AdmmConfig::default() };
    for (name, (x, y), expected) in all_figures() {
        let r = admm_metric(&x, &y, &params, &cfg).unwrap();
        assert!(rel_close(r.value, expected, 1e-9), "{name}: admm {} vs {expected}", r.value);
        assert!(r.converged, "{name}");
    }
}

#[test]
fn loc_cost_at_final_step_of_fig1b() {
    // At k = 5 the estimate is gone; both assignments cost one missed target.
    let params = figure_params();
    let (x, y) = fig1b();
    let d = trajmetric::exact::cost_matrix(&x, &y, 5, &params).unwrap();
    for pi in [0usize, 1] {
        let pi = AssignmentVector::new(vec![pi], 1).unwrap();
        assert_eq!(trajmetric::exact::loc_cost(&d, &pi).unwrap(), 2.5);
    }
}

