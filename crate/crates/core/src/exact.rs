//! Hard assignments between two trajectory sets and the exact
//! multi-dimensional assignment metric.
//!
//! The exact metric is a shortest path through a trellis whose states at
//! every time step are all assignment vectors: the stage cost is the
//! localization/missed/false cost of the assignment and the transition cost
//! is the switching cost between consecutive assignments. It is solved with
//! a backward Viterbi recursion. [`brute_force_metric`] enumerates every
//! assignment sequence and exists to check the recursion.

use serde::Serialize;

use crate::error::{MetricError, Result};
use crate::lp::{assignment_to_weights, decompose, CostBreakdown};
use crate::trajcore::{check_compatible, MetricParams, TrajectorySet};

pub const DEFAULT_MAX_ASSIGNMENTS: u128 = 1_000_000;
pub const DEFAULT_MAX_SEQUENCES: u128 = 2_000_000;

/// Relative slack under which two path costs are treated as tied.
const TIE_RTOL: f64 = 1e-11;

/// `π`: for every trajectory of `X`, the index (1-based) of the trajectory of
/// `Y` it is assigned to, or 0 if unassigned. Nonzero entries are distinct.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct AssignmentVector(Vec<usize>);

impl AssignmentVector {
    pub fn new(entries: Vec<usize>, ny: usize) -> Result<Self> {
        let mut seen = vec![false; ny + 1];
        for (i, &j) in entries.iter().enumerate() {
            if j > ny {
                return Err(MetricError::Domain(format!(
                    "entry {i} assigns to {j} but only {ny} targets exist"
                )));
            }
            if j > 0 {
                if seen[j] {
                    return Err(MetricError::Domain(format!(
                        "target {j} assigned more than once"
                    )));
                }
                seen[j] = true;
            }
        }
        Ok(AssignmentVector(entries))
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest target index referenced, 0 if none.
    pub fn max_target(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

/// `|Π_{X,Y}| = Σ_k C(nx,k) C(ny,k) k!`, saturating.
pub fn assignment_count(nx: usize, ny: usize) -> u128 {
    let mut total: u128 = 0;
    for k in 0..=nx.min(ny) {
        let term = binomial(nx, k)
            .saturating_mul(binomial(ny, k))
            .saturating_mul(factorial(k));
        total = total.saturating_add(term);
    }
    total
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    r
}

fn factorial(k: usize) -> u128 {
    (1..=k as u128).fold(1u128, |a, b| a.saturating_mul(b))
}

pub fn enumerate_assignments(nx: usize, ny: usize) -> Result<Vec<AssignmentVector>> {
    enumerate_assignments_capped(nx, ny, DEFAULT_MAX_ASSIGNMENTS)
}

/// Every assignment vector in lexicographic order.
pub fn enumerate_assignments_capped(
    nx: usize,
    ny: usize,
    cap: u128,
) -> Result<Vec<AssignmentVector>> {
    let size = assignment_count(nx, ny);
    if size > cap {
        return Err(MetricError::StateSpaceTooLarge { size, cap });
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut current = vec![0usize; nx];
    let mut used = vec![false; ny + 1];
    fill(0, &mut current, &mut used, &mut out);
    Ok(out)
}

fn fill(i: usize, cur: &mut [usize], used: &mut [bool], out: &mut Vec<AssignmentVector>) {
    if i == cur.len() {
        out.push(AssignmentVector(cur.to_vec()));
        return;
    }
    for j in 0..used.len() {
        if j > 0 && used[j] {
            continue;
        }
        cur[i] = j;
        if j > 0 {
            used[j] = true;
        }
        fill(i + 1, cur, used, out);
        if j > 0 {
            used[j] = false;
        }
    }
}

/// `D^k`: p-th powers of the base metric, `(nx+1) × (ny+1)`, row `nx` and
/// column `ny` standing for "unassigned". Indices here are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    nx: usize,
    ny: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_fn(nx: usize, ny: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity((nx + 1) * (ny + 1));
        for i in 0..=nx {
            for j in 0..=ny {
                data.push(f(i, j));
            }
        }
        CostMatrix { nx, ny, data }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.ny + 1) + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

pub fn cost_matrix(
    x: &TrajectorySet,
    y: &TrajectorySet,
    k: usize,
    params: &MetricParams,
) -> Result<CostMatrix> {
    check_compatible(x, y)?;
    let window = x.window();
    if k < 1 || k > window {
        return Err(MetricError::Domain(format!(
            "time step {k} outside window [1, {window}]"
        )));
    }
    Ok(cost_matrix_unchecked(x, y, k, params))
}

fn cost_matrix_unchecked(
    x: &TrajectorySet,
    y: &TrajectorySet,
    k: usize,
    params: &MetricParams,
) -> CostMatrix {
    let xs = x.states_at(k);
    let ys = y.states_at(k);
    let (nx, ny) = (xs.len(), ys.len());
    CostMatrix::from_fn(nx, ny, |i, j| {
        let a = if i < nx { xs[i] } else { None };
        let b = if j < ny { ys[j] } else { None };
        params.base_cost_p(a, b)
    })
}

/// Cost matrices for every time step `1..=T` (index 0 holds `k = 1`).
pub fn cost_matrices(
    x: &TrajectorySet,
    y: &TrajectorySet,
    params: &MetricParams,
) -> Result<Vec<CostMatrix>> {
    x.validate()?;
    y.validate()?;
    check_compatible(x, y)?;
    Ok((1..=x.window())
        .map(|k| cost_matrix_unchecked(x, y, k, params))
        .collect())
}

/// Localization plus missed/false cost of assignment `pi` under `d`.
pub fn loc_cost(d: &CostMatrix, pi: &AssignmentVector) -> Result<f64> {
    if pi.len() != d.nx || pi.max_target() > d.ny {
        return Err(MetricError::Shape(format!(
            "assignment of length {} (max target {}) against a {}x{} cost matrix",
            pi.len(),
            pi.max_target(),
            d.nx + 1,
            d.ny + 1
        )));
    }
    Ok(loc_cost_unchecked(d, pi.entries()))
}

fn loc_cost_unchecked(d: &CostMatrix, pi: &[usize]) -> f64 {
    let mut hit = vec![false; d.ny];
    let mut total = 0.0;
    for (i, &j) in pi.iter().enumerate() {
        if j == 0 {
            total += d.get(i, d.ny);
        } else {
            hit[j - 1] = true;
            total += d.get(i, j - 1);
        }
    }
    for (j, h) in hit.into_iter().enumerate() {
        if !h {
            total += d.get(d.nx, j);
        }
    }
    total
}

/// Number of switches (full = 1, half = 0.5) between two assignments.
fn switch_units(a: &[usize], b: &[usize]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&u, &v)| {
            if u == v {
                0.0
            } else if u != 0 && v != 0 {
                1.0
            } else {
                0.5
            }
        })
        .sum()
}

/// `γ^p Σ_i s(π_i^k, π_i^{k+1})`.
pub fn switch_cost(
    a: &AssignmentVector,
    b: &AssignmentVector,
    params: &MetricParams,
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(MetricError::Shape(format!(
            "assignment lengths differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(params.gamma().powf(params.p()) * switch_units(a.entries(), b.entries()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactConfig {
    /// Refuse when `|Π_{X,Y}|` exceeds this.
    pub max_assignments: u128,
    /// Brute force refuses when `|Π|^T` exceeds this.
    pub max_sequences: u128,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            max_assignments: DEFAULT_MAX_ASSIGNMENTS,
            max_sequences: DEFAULT_MAX_SEQUENCES,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactResult {
    pub value: f64,
    pub raw_cost: f64,
    pub per_time_assignments: Vec<AssignmentVector>,
    pub decomposition: CostBreakdown,
}

/// Stage costs for every state at every time step: `stage[k][s]`.
fn stage_costs(costs: &[CostMatrix], states: &[AssignmentVector]) -> Vec<Vec<f64>> {
    costs
        .iter()
        .map(|d| states.iter().map(|s| loc_cost_unchecked(d, s.entries())).collect())
        .collect()
}

fn finish(
    x: &TrajectorySet,
    y: &TrajectorySet,
    params: &MetricParams,
    costs: &[CostMatrix],
    path: Vec<AssignmentVector>,
) -> Result<ExactResult> {
    let gp = params.gamma().powf(params.p());
    let mut raw = 0.0;
    for (d, pi) in costs.iter().zip(&path) {
        raw += loc_cost_unchecked(d, pi.entries());
    }
    for w in path.windows(2) {
        raw += gp * switch_units(w[0].entries(), w[1].entries());
    }
    let weights: Vec<_> = path
        .iter()
        .map(|pi| assignment_to_weights(pi, y.len()))
        .collect();
    let decomposition = decompose(&weights, x, y, params)?;
    Ok(ExactResult {
        value: raw.powf(1.0 / params.p()),
        raw_cost: raw,
        per_time_assignments: path,
        decomposition,
    })
}

pub fn exact_metric(
    x: &TrajectorySet,
    y: &TrajectorySet,
    params: &MetricParams,
) -> Result<ExactResult> {
    exact_metric_with(x, y, params, &ExactConfig::default())
}

/// Exact metric by Viterbi over the assignment trellis.
///
/// Among equal-cost optimal paths the lexicographically smallest assignment
/// sequence is returned.
pub fn exact_metric_with(
    x: &TrajectorySet,
    y: &TrajectorySet,
    params: &MetricParams,
    config: &ExactConfig,
) -> Result<ExactResult> {
    let costs = cost_matrices(x, y, params)?;
    let states = enumerate_assignments_capped(x.len(), y.len(), config.max_assignments)?;
    let stage = stage_costs(&costs, &states);
    let gp = params.gamma().powf(params.p());
    let t_len = costs.len();
    let n_states = states.len();

    // Upper bound from the best constant assignment; any feasible path works.
    let upper = (0..n_states)
        .map(|s| stage.iter().map(|c| c[s]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let slack = TIE_RTOL * upper.abs().max(1.0);
    let stage_min: Vec<f64> = stage
        .iter()
        .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let mut prefix_lb = vec![0.0; t_len + 1];
    for k in 0..t_len {
        prefix_lb[k + 1] = prefix_lb[k] + stage_min[k];
    }

    let transition = TransitionTable::new(&states, gp);

    // value[k][s]: optimal cost of steps k..T starting in state s.
    let mut value = vec![vec![f64::INFINITY; n_states]; t_len];
    for s in 0..n_states {
        if prefix_lb[t_len - 1] + stage[t_len - 1][s] <= upper + slack {
            value[t_len - 1][s] = stage[t_len - 1][s];
        }
    }
    for k in (0..t_len - 1).rev() {
        let next = &value[k + 1];
        let live: Vec<usize> = (0..n_states).filter(|&s| next[s].is_finite()).collect();
        let (head, tail) = value.split_at_mut(k + 1);
        let cur = &mut head[k];
        let next = &tail[0];
        for s in 0..n_states {
            let reach = prefix_lb[k] + stage[k][s];
            // Remaining steps cost at least their stage minima.
            if reach + (prefix_lb[t_len] - prefix_lb[k + 1]) > upper + slack {
                continue;
            }
            let best = live
                .iter()
                .map(|&n| transition.cost(s, n) + next[n])
                .fold(f64::INFINITY, f64::min);
            let v = stage[k][s] + best;
            if prefix_lb[k] + v <= upper + slack {
                cur[s] = v;
            }
        }
    }

    // Forward pass: smallest state index within the tie slack at each step.
    let total = value[0].iter().copied().fold(f64::INFINITY, f64::min);
    if !total.is_finite() {
        return Err(MetricError::Solver(
            "trellis pruning removed every path".into(),
        ));
    }
    let tie = TIE_RTOL * total.abs().max(1.0);
    let mut s = (0..n_states)
        .find(|&s| value[0][s] <= total + tie)
        .expect("a minimizing state exists");
    let mut path = vec![states[s].clone()];
    let mut remaining = value[0][s];
    for k in 1..t_len {
        let target = remaining - stage[k - 1][s];
        let next = (0..n_states)
            .filter(|&n| value[k][n].is_finite())
            .find(|&n| transition.cost(s, n) + value[k][n] <= target + tie)
            .or_else(|| {
                // Fall back to the exact argmin if rounding pushed every
                // candidate above the target.
                (0..n_states)
                    .filter(|&n| value[k][n].is_finite())
                    .min_by(|&a, &b| {
                        let ca = transition.cost(s, a) + value[k][a];
                        let cb = transition.cost(s, b) + value[k][b];
                        ca.total_cmp(&cb)
                    })
            })
            .expect("a successor exists");
        remaining = value[k][next];
        s = next;
        path.push(states[s].clone());
    }
    finish(x, y, params, &costs, path)
}

/// Switching costs between trellis states, cached when the table fits.
struct TransitionTable<'a> {
    states: &'a [AssignmentVector],
    gp: f64,
    table: Option<Vec<f64>>,
}

impl<'a> TransitionTable<'a> {
    const MAX_CACHED: usize = 4_000_000;

    fn new(states: &'a [AssignmentVector], gp: f64) -> Self {
        let n = states.len();
        let table = (n.saturating_mul(n) <= Self::MAX_CACHED).then(|| {
            let mut t = Vec::with_capacity(n * n);
            for a in states {
                for b in states {
                    t.push(gp * switch_units(a.entries(), b.entries()));
                }
            }
            t
        });
        TransitionTable { states, gp, table }
    }

    #[inline]
    fn cost(&self, a: usize, b: usize) -> f64 {
        match &self.table {
            Some(t) => t[a * self.states.len() + b],
            None => self.gp * switch_units(self.states[a].entries(), self.states[b].entries()),
        }
    }
}

pub fn brute_force_metric(
    x: &TrajectorySet,
    y: &TrajectorySet,
    params: &MetricParams,
) -> Result<ExactResult> {
    brute_force_metric_with(x, y, params, &ExactConfig::default())
}

/// Exhaustive minimization over every sequence in `Π^T`.
pub fn brute_force_metric_with(
    x: &TrajectorySet,
    y: &TrajectorySet,
    params: &MetricParams,
    config: &ExactConfig,
) -> Result<ExactResult> {
    let costs = cost_matrices(x, y, params)?;
    let states = enumerate_assignments_capped(x.len(), y.len(), config.max_assignments)?;
    let t_len = costs.len();
    let size = (states.len() as u128)
        .checked_pow(t_len as u32)
        .unwrap_or(u128::MAX);
    if size > config.max_sequences {
        return Err(MetricError::StateSpaceTooLarge { size, cap: config.max_sequences });
    }
    let stage = stage_costs(&costs, &states);
    let gp = params.gamma().powf(params.p());

    let mut best_cost = f64::INFINITY;
    let mut best_path: Vec<usize> = Vec::new();
    let mut path = vec![0usize; t_len];
    // Odometer over all sequences in lexicographic order.
    loop {
        let mut cost = stage[0][path[0]];
        for k in 1..t_len {
            cost += stage[k][path[k]]
                + gp * switch_units(states[path[k - 1]].entries(), states[path[k]].entries());
        }
        if cost < best_cost - TIE_RTOL * best_cost.abs().max(1.0) || best_path.is_empty() {
            best_cost = cost;
            best_path = path.clone();
        }
        let mut k = t_len;
        loop {
            if k == 0 {
                let chosen = best_path.iter().map(|&s| states[s].clone()).collect();
                return finish(x, y, params, &costs, chosen);
            }
            k -= 1;
            path[k] += 1;
            if path[k] < states.len() {
                break;
            }
            path[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajcore::Trajectory;

    fn av(v: &[usize]) -> AssignmentVector {
        AssignmentVector(v.to_vec())
    }

    fn line(start: usize, ys: &[f64]) -> Trajectory {
        Trajectory::new(start, ys.iter().map(|&v| vec![v]).collect()).unwrap()
    }

    #[test]
    fn enumerate_small_cases() {
        assert_eq!(enumerate_assignments(1, 1).unwrap(), vec![av(&[0]), av(&[1])]);
        assert_eq!(
            enumerate_assignments(2, 1).unwrap(),
            vec![av(&[0, 0]), av(&[0, 1]), av(&[1, 0])]
        );
        assert_eq!(enumerate_assignments(2, 2).unwrap().len(), 7);
        assert_eq!(enumerate_assignments(0, 3).unwrap(), vec![av(&[])]);
    }

    #[test]
    fn enumeration_matches_count_formula() {
        for nx in 0..=4 {
            for ny in 0..=4 {
                let all = enumerate_assignments(nx, ny).unwrap();
                assert_eq!(all.len() as u128, assignment_count(nx, ny));
                let mut sorted = all.clone();
                sorted.sort();
                sorted.dedup();
                assert_eq!(sorted, all, "lexicographic and duplicate-free");
                for a in &all {
                    AssignmentVector::new(a.entries().to_vec(), ny).unwrap();
                }
            }
        }
    }

    #[test]
    fn enumeration_cap() {
        let err = enumerate_assignments_capped(3, 3, 10).unwrap_err();
        assert!(matches!(err, MetricError::StateSpaceTooLarge { size: 34, cap: 10 }));
    }

    #[test]
    fn assignment_vector_rejects_duplicates() {
        assert!(AssignmentVector::new(vec![1, 1], 2).is_err());
        assert!(AssignmentVector::new(vec![3], 2).is_err());
        assert!(AssignmentVector::new(vec![0, 0, 2], 2).is_ok());
    }

    #[test]
    fn cost_matrix_entries() {
        let x = TrajectorySet::new(3, 1, vec![line(1, &[0.0, 0.0])]).unwrap();
        let y = TrajectorySet::new(3, 1, vec![line(2, &[0.3, 0.3])]).unwrap();
        let p1 = MetricParams::new(5.0, 1.0, 1.0).unwrap();
        let d1 = cost_matrix(&x, &y, 1, &p1).unwrap();
        assert_eq!(d1.get(0, 0), 2.5, "X present, Y absent");
        assert_eq!(d1.get(1, 1), 0.0);
        let d3 = cost_matrix(&x, &y, 3, &p1).unwrap();
        assert_eq!(d3.get(1, 1), 0.0, "both absent");
        assert_eq!(d3.get(0, 1), 0.0);
        let p2 = MetricParams::new(5.0, 1.0, 2.0).unwrap();
        let d2 = cost_matrix(&x, &y, 2, &p2).unwrap();
        assert!((d2.get(0, 0) - 0.09).abs() < 1e-15);
        assert_eq!(d2.get(0, 1), 12.5);
        assert!(cost_matrix(&x, &y, 4, &p1).is_err());
    }

    #[test]
    fn loc_cost_cases() {
        let params = MetricParams::new(5.0, 1.0, 1.0).unwrap();
        let x = TrajectorySet::new(1, 1, vec![line(1, &[0.0]), line(1, &[10.0])]).unwrap();
        let y = TrajectorySet::new(1, 1, vec![line(1, &[0.2]), line(1, &[10.2])]).unwrap();
        let d = cost_matrix(&x, &y, 1, &params).unwrap();
        assert!((loc_cost(&d, &av(&[1, 2])).unwrap() - 0.4).abs() < 1e-12);

        let x = TrajectorySet::new(1, 1, vec![line(1, &[0.0])]).unwrap();
        let y = TrajectorySet::new(1, 1, vec![line(1, &[0.2])]).unwrap();
        let d = cost_matrix(&x, &y, 1, &params).unwrap();
        assert_eq!(loc_cost(&d, &av(&[0])).unwrap(), 5.0);
        assert!(loc_cost(&d, &av(&[0, 0])).is_err());
        assert!(loc_cost(&d, &av(&[2])).is_err());
    }

    #[test]
    fn switch_cost_cases() {
        let p1 = MetricParams::new(1.0, 10.0, 1.0).unwrap();
        let p2 = MetricParams::new(1.0, 10.0, 2.0).unwrap();
        assert_eq!(switch_cost(&av(&[1, 2]), &av(&[1, 2]), &p1).unwrap(), 0.0);
        assert_eq!(switch_cost(&av(&[1]), &av(&[2]), &p1).unwrap(), 10.0);
        assert_eq!(switch_cost(&av(&[1]), &av(&[0]), &p2).unwrap(), 50.0);
        assert!(switch_cost(&av(&[1]), &av(&[1, 0]), &p1).is_err());
    }

    #[test]
    fn identical_sets_are_zero() {
        let params = MetricParams::new(5.0, 2.0, 1.0).unwrap();
        let x = TrajectorySet::new(
            4,
            1,
            vec![line(1, &[0.0, 1.0, 2.0]), line(2, &[5.0, 5.0, 5.0])],
        )
        .unwrap();
        let r = exact_metric(&x, &x, &params).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn empty_sets_are_zero() {
        let params = MetricParams::new(5.0, 2.0, 1.0).unwrap();
        let e = TrajectorySet::empty(3, 1).unwrap();
        let r = exact_metric(&e, &e, &params).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.per_time_assignments.len(), 3);
    }

    #[test]
    fn one_sided_empty() {
        let params = MetricParams::new(5.0, 2.0, 1.0).unwrap();
        let e = TrajectorySet::empty(3, 1).unwrap();
        let x = TrajectorySet::new(3, 1, vec![line(2, &[1.0, 1.0])]).unwrap();
        let r = exact_metric(&x, &e, &params).unwrap();
        assert!((r.raw_cost - 5.0).abs() < 1e-12);
        assert!((r.decomposition.missed - 5.0).abs() < 1e-12);
        let r = exact_metric(&e, &x, &params).unwrap();
        assert!((r.decomposition.false_ - 5.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_cap() {
        let params = MetricParams::new(5.0, 2.0, 1.0).unwrap();
        let x = TrajectorySet::new(10, 1, vec![line(1, &[0.0]), line(1, &[1.0])]).unwrap();
        let cfg = ExactConfig { max_sequences: 1000, ..ExactConfig::default() };
        assert!(matches!(
            brute_force_metric_with(&x, &x, &params, &cfg),
            Err(MetricError::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn viterbi_cap() {
        let params = MetricParams::new(5.0, 2.0, 1.0).unwrap();
        let x = TrajectorySet::new(1, 1, vec![line(1, &[0.0]), line(1, &[1.0])]).unwrap();
        let cfg = ExactConfig { max_assignments: 3, ..ExactConfig::default() };
        let err = exact_metric_with(&x, &x, &params, &cfg).unwrap_err();
        assert!(err.to_string().contains("use the LP or ADMM solver"));
    }
}
