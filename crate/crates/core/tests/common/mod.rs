#![allow(dead_code)]

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trajmetric::{MetricParams, Trajectory, TrajectorySet};

pub const DELTA: f64 = 0.1;
/// Separation between target groups, far beyond any cut-off used here.
pub const FAR: f64 = 100.0;

pub fn line(start: usize, values: &[f64]) -> Trajectory {
    Trajectory::new(start, values.iter().map(|&v| vec![v]).collect()).unwrap()
}

pub fn constant(start: usize, len: usize, v: f64) -> Trajectory {
    line(start, &vec![v; len])
}

pub fn set(window: usize, trajectories: Vec<Trajectory>) -> TrajectorySet {
    TrajectorySet::new(window, 1, trajectories).unwrap()
}

pub fn figure_params() -> MetricParams {
    MetricParams::new(5.0, 2.0, 1.0).unwrap()
}

/// One truth and one estimate, offset by Δ over all five steps.
pub fn fig1a() -> (TrajectorySet, TrajectorySet) {
    (
        set(5, vec![constant(1, 5, 0.0)]),
        set(5, vec![constant(1, 5, DELTA)]),
    )
}

/// The estimate stops one step early.
pub fn fig1b() -> (TrajectorySet, TrajectorySet) {
    (
        set(5, vec![constant(1, 5, 0.0)]),
        set(5, vec![constant(1, 4, DELTA)]),
    )
}

/// The estimate is split into two tracks of lengths 3 and 2.
pub fn fig1c() -> (TrajectorySet, TrajectorySet) {
    (
        set(5, vec![constant(1, 5, 0.0)]),
        set(5, vec![constant(1, 3, DELTA), constant(4, 2, DELTA)]),
    )
}

/// Three truths against three estimates: one full switch and two half switches.
pub fn fig1d() -> (TrajectorySet, TrajectorySet) {
    (
        set(
            5,
            vec![constant(1, 5, 0.0), constant(1, 3, FAR), constant(4, 2, FAR)],
        ),
        set(
            5,
            vec![
                constant(1, 3, DELTA),
                constant(4, 2, DELTA),
                constant(1, 5, FAR - DELTA),
            ],
        ),
    )
}

/// Two estimates that swap targets halfway.
pub fn fig2a() -> (TrajectorySet, TrajectorySet) {
    (
        set(4, vec![constant(1, 4, 0.0), constant(1, 4, FAR)]),
        set(
            4,
            vec![
                line(1, &[DELTA, DELTA, FAR - DELTA, FAR - DELTA]),
                line(1, &[FAR - DELTA, FAR - DELTA, DELTA, DELTA]),
            ],
        ),
    )
}

/// Only the second target's estimate is broken in two.
pub fn fig2b() -> (TrajectorySet, TrajectorySet) {
    (
        set(4, vec![constant(1, 4, 0.0), constant(1, 4, FAR)]),
        set(
            4,
            vec![
                constant(1, 4, DELTA),
                constant(1, 2, FAR - DELTA),
                constant(3, 2, FAR - DELTA),
            ],
        ),
    )
}

pub fn all_figures() -> Vec<(&'static str, (TrajectorySet, TrajectorySet), f64)> {
    vec![
        ("fig1a", fig1a(), 0.5),
        ("fig1b", fig1b(), 0.4 + 2.5),
        ("fig1c", fig1c(), 0.5 + 2.0),
        ("fig1d", fig1d(), 1.0 + 4.0),
        ("fig2a", fig2a(), 0.8 + 4.0),
        ("fig2b", fig2b(), 0.8 + 2.0),
    ]
}

/// Random small set: up to `n_max` trajectories in `dim` dimensions with
/// states on a coarse grid so that coincidences and cut-offs both occur.
pub fn random_set(rng: &mut ChaCha8Rng, n_max: usize, window: usize, dim: usize) -> TrajectorySet {
    let n = rng.random_range(0..=n_max);
    let mut trajectories = Vec::with_capacity(n);
    for _ in 0..n {
        let start = rng.random_range(1..=window);
        let len = rng.random_range(1..=window - start + 1);
        let mut x: Vec<f64> = (0..dim).map(|_| rng.random_range(0..8) as f64 * 0.5).collect();
        let mut states = Vec::with_capacity(len);
        for _ in 0..len {
            states.push(x.clone());
            for v in x.iter_mut() {
                *v += rng.random_range(-2..=2) as f64 * 0.25;
            }
        }
        trajectories.push(Trajectory::new(start, states).unwrap());
    }
    TrajectorySet::new(window, dim, trajectories).unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng) -> MetricParams {
    let c = [0.5, 1.0, 2.0, 3.0][rng.random_range(0..4)];
    let gamma = [0.3, 1.0, 2.0, 5.0][rng.random_range(0..4)];
    let p = [1.0, 1.5, 2.0, 3.0][rng.random_range(0..4)];
    MetricParams::new(c, gamma, p).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()).max(1e-12) + 1e-15
}

/// GOSPA (α = 2) between two point sets by enumerating every partial
/// matching: `(Σ_matched min(d,c)^p + (c^p/2)(|X| + |Y| - 2·#matched))^{1/p}`.
pub fn gospa_alpha2(xs: &[Vec<f64>], ys: &[Vec<f64>], c: f64, p: f64) -> f64 {
    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
    }
    fn go(i: usize, xs: &[Vec<f64>], ys: &[Vec<f64>], used: &mut Vec<bool>, c: f64, p: f64) -> f64 {
        if i == xs.len() {
            let unused = used.iter().filter(|u| !**u).count();
            return unused as f64 * c.powf(p) / 2.0;
        }
        // Leave x_i unmatched.
        let mut best = c.powf(p) / 2.0 + go(i + 1, xs, ys, used, c, p);
        for j in 0..ys.len() {
            if !used[j] {
                let d = dist(&xs[i], &ys[j]);
                // A pair beyond the cut-off costs c^p, the same as leaving both
                // unmatched, so allowing it does not change the minimum.
                used[j] = true;
                let cost = d.min(c).powf(p) + go(i + 1, xs, ys, used, c, p);
                used[j] = false;
                best = best.min(cost);
            }
        }
        best
    }
    let mut used = vec![false; ys.len()];
    go(0, xs, ys, &mut used, c, p).powf(1.0 / p)
}

/// Metric straight from the definitions: base metric per pair, stage cost
/// per assignment vector, switch cost per pair of vectors, minimized by a
/// plain min-plus recursion over every assignment vector.
pub fn reference_metric(x: &TrajectorySet, y: &TrajectorySet, c: f64, gamma: f64, p: f64) -> f64 {
    fn base(a: Option<&[f64]>, b: Option<&[f64]>, c: f64, p: f64) -> f64 {
        match (a, b) {
            (Some(a), Some(b)) => a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt().min(c),
            (None, None) => 0.0,
            _ => c / 2f64.powf(1.0 / p),
        }
    }
    fn vectors(nx: usize, ny: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..nx {
            let mut next = Vec::new();
            for v in &out {
                for j in 0..=ny {
                    if j == 0 || !v.contains(&j) {
                        let mut w = v.clone();
                        w.push(j);
                        next.push(w);
                    }
                }
            }
            out = next;
        }
        out
    }
    let at = |s: &TrajectorySet, i: usize, k: usize| -> Option<Vec<f64>> {
        let t = &s.trajectories()[i];
        (k >= t.start() && k <= t.end()).then(|| t.states()[k - t.start()].clone())
    };
    let (nx, ny) = (x.len(), y.len());
    let pis = vectors(nx, ny);
    let stage = |pi: &Vec<usize>, k: usize| -> f64 {
        let mut total = 0.0;
        for (i, &j) in pi.iter().enumerate() {
            let xi = at(x, i, k);
            let yj = if j > 0 { at(y, j - 1, k) } else { None };
            total += base(xi.as_deref(), yj.as_deref(), c, p).powf(p);
        }
        for j in 1..=ny {
            if !pi.contains(&j) {
                total += base(None, at(y, j - 1, k).as_deref(), c, p).powf(p);
            }
        }
        total
    };
    let switch = |a: &Vec<usize>, b: &Vec<usize>| -> f64 {
        let s: f64 = a
            .iter()
            .zip(b)
            .map(|(&u, &v)| if u == v { 0.0 } else if u != 0 && v != 0 { 1.0 } else { 0.5 })
            .sum();
        gamma.powf(p) * s
    };
    let mut best: Vec<f64> = pis.iter().map(|pi| stage(pi, 1)).collect();
    for k in 2..=x.window() {
        best = pis
            .iter()
            .map(|b| {
                let inflow = pis
                    .iter()
                    .zip(&best)
                    .map(|(a, cost)| cost + switch(a, b))
                    .fold(f64::INFINITY, f64::min);
                inflow + stage(b, k)
            })
            .collect();
    }
    best.into_iter().fold(f64::INFINITY, f64::min).powf(1.0 / p)
}

/// Canonical form of a set for equality up to labelling.
pub fn canonical(s: &TrajectorySet) -> Vec<(usize, Vec<Vec<u64>>)> {
    let mut v: Vec<(usize, Vec<Vec<u64>>)> = s
        .trajectories()
        .iter()
        .map(|t| (t.start(), t.states().iter().map(|x| x.iter().map(|a| a.to_bits()).collect()).collect()))
        .collect();
    v.sort();
    v
}
