//! Consensus ADMM for the LP relaxation.
//!
//! The weights of time step `k` appear in two blocks: as `W^k` in block `k`
//! and as the copy `Ŵ^k` in block `k - 1`, which holds the switching bound
//! between the two steps. Both are pulled towards a consensus matrix `Z^k`.
//! Each iteration solves every block approximately, averages the copies into
//! `Z`, and takes a dual ascent step on the multipliers `α` (for `W - Z`) and
//! `β` (for `Ŵ - Z`). Work per iteration is linear in the window length.

mod qp;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MetricError, Result};
use crate::exact::{cost_matrices, CostMatrix};
use crate::lp::{decompose, lp_metric, weights_objective, CostBreakdown, WeightMatrix};
use crate::trajcore::{MetricParams, TrajectorySet};

pub use qp::{project_polytope, qp_block_solve, BlockPoint, BlockQp, QuadTerm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmConfig {
    pub rho: f64,
    pub max_admm_iters: usize,
    pub max_qp_iters: usize,
    /// Both residuals must fall below this times `√((nx+1)(ny+1))`.
    pub residual_factor: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig { rho: 2.0, max_admm_iters: 100, max_qp_iters: 5, residual_factor: 0.5 }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(MetricError::InvalidParams(format!("rho must be positive, got {}", self.rho)));
        }
        if self.max_admm_iters == 0 || self.max_qp_iters == 0 {
            return Err(MetricError::InvalidParams("iteration caps must be positive".into()));
        }
        if !(self.residual_factor.is_finite() && self.residual_factor > 0.0) {
            return Err(MetricError::InvalidParams(format!(
                "residual factor must be positive, got {}",
                self.residual_factor
            )));
        }
        Ok(())
    }

    pub fn threshold(&self, nx: usize, ny: usize) -> f64 {
        self.residual_factor * (((nx + 1) * (ny + 1)) as f64).sqrt()
    }
}

/// Iterates of the consensus ADMM.
///
/// Time steps are 0-based here. `w` has one matrix per step; the consensus
/// arrays `w_hat`, `z`, `alpha`, `beta` have one per step `1..T`, stored at
/// index `k - 1`. `h[k]` and `e[k]` bound the switch between steps `k` and
/// `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub w: Vec<WeightMatrix>,
    pub w_hat: Vec<WeightMatrix>,
    pub z: Vec<WeightMatrix>,
    pub alpha: Vec<WeightMatrix>,
    pub beta: Vec<WeightMatrix>,
    pub e: Vec<f64>,
    pub h: Vec<Vec<f64>>,
    pub rho: f64,
    pub iteration: usize,
    pub z_prev: Option<Vec<WeightMatrix>>,
    /// Whether `z` already counts as an iterate, as in a warm start. When it
    /// does not, the first step has no dual residual.
    pub warm: bool,
}

fn uniform_weights(nx: usize, ny: usize) -> WeightMatrix {
    let a = 1.0 / (nx.max(ny) as f64 + 1.0);
    WeightMatrix::from_fn(nx, ny, |i, j| match (i < nx, j < ny) {
        (true, true) => a,
        (true, false) => 1.0 - ny as f64 * a,
        (false, true) => 1.0 - nx as f64 * a,
        (false, false) => 0.0,
    })
}

impl AdmmState {
    /// Every weight matrix spread evenly over the polytope, duals zero.
    pub fn uniform(t_len: usize, nx: usize, ny: usize, rho: f64) -> Self {
        AdmmState { warm: false, ..Self::from_weights(vec![uniform_weights(nx, ny); t_len], rho) }
    }

    /// Warm start from a feasible weight sequence, with copies and consensus
    /// equal to it and zero duals.
    pub fn from_weights(weights: Vec<WeightMatrix>, rho: f64) -> Self {
        let (nx, ny) = weights.first().map_or((0, 0), |w| (w.nx(), w.ny()));
        let tail: Vec<WeightMatrix> = weights.iter().skip(1).cloned().collect();
        let zero = WeightMatrix::zeros(nx, ny);
        let h: Vec<Vec<f64>> = weights
            .windows(2)
            .map(|p| {
                let mut h = Vec::with_capacity(nx * ny);
                for i in 0..nx {
                    for j in 0..ny {
                        h.push((p[0].get(i, j) - p[1].get(i, j)).abs());
                    }
                }
                h
            })
            .collect();
        AdmmState {
            e: h.iter().map(|v| v.iter().sum()).collect(),
            h,
            alpha: vec![zero.clone(); tail.len()],
            beta: vec![zero; tail.len()],
            w_hat: tail.clone(),
            z: tail,
            w: weights,
            rho,
            iteration: 0,
            z_prev: None,
            warm: true,
        }
    }

    pub fn window(&self) -> usize {
        self.w.len()
    }
}

fn sq_dist(a: &WeightMatrix, b: &WeightMatrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Primal residual `‖[W - Z; Ŵ - Z]‖₂` and dual residual
/// `ρ ‖Z_(m) - Z_(m-1)‖₂`. Without a previous `Z` snapshot the dual residual
/// is infinite.
pub fn residuals(state: &AdmmState) -> (f64, f64) {
    let mut primal = 0.0;
    for (c, z) in state.z.iter().enumerate() {
        primal += sq_dist(&state.w[c + 1], z) + sq_dist(&state.w_hat[c], z);
    }
    let dual = match &state.z_prev {
        Some(prev) => state.rho * state.z.iter().zip(prev).map(|(a, b)| sq_dist(a, b)).sum::<f64>().sqrt(),
        None => f64::INFINITY,
    };
    (primal.sqrt(), dual)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmmResult {
    pub value: f64,
    pub raw_cost: f64,
    pub weights: Vec<WeightMatrix>,
    pub decomposition: CostBreakdown,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

impl AdmmResult {
    pub fn write_trace_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        self.write_trace(file)
    }

    pub fn write_trace<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        for row in &self.trace {
            wtr.serialize(row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn block_problem(costs: &[CostMatrix], state: &AdmmState, k: usize, params: &MetricParams) -> BlockQp {
    let t_len = state.window();
    let d = costs[k].as_slice();
    let cells = d.len();
    let rho = state.rho;
    let w = if k == 0 {
        QuadTerm { linear: d.to_vec(), weight: 0.0, center: vec![0.0; cells] }
    } else {
        let a = state.alpha[k - 1].as_slice();
        QuadTerm {
            linear: d.iter().zip(a).map(|(x, y)| x + y).collect(),
            weight: rho,
            center: state.z[k - 1].as_slice().to_vec(),
        }
    };
    let v = (k + 1 < t_len).then(|| QuadTerm {
        linear: state.beta[k].as_slice().to_vec(),
        weight: rho,
        center: state.z[k].as_slice().to_vec(),
    });
    BlockQp {
        nx: costs[k].nx(),
        ny: costs[k].ny(),
        w,
        v,
        switch_weight: params.half_switch_cost(),
    }
}

/// One ADMM iteration: block solves, consensus averaging, dual ascent.
pub fn admm_step(costs: &[CostMatrix], state: &mut AdmmState, params: &MetricParams, max_qp_iters: usize) {
    let t_len = state.window();
    let rho = state.rho;
    let blocks: Vec<BlockPoint> = (0..t_len)
        .map(|k| {
            let block = block_problem(costs, state, k, params);
            let start = BlockPoint {
                w: state.w[k].clone(),
                v: (k + 1 < t_len).then(|| state.w_hat[k].clone()),
                h: state.h.get(k).cloned().unwrap_or_default(),
                e: state.e.get(k).copied().unwrap_or(0.0),
            };
            qp_block_solve(&block, &start, max_qp_iters)
        })
        .collect();
    for (k, b) in blocks.into_iter().enumerate() {
        state.w[k] = b.w;
        if let Some(v) = b.v {
            state.w_hat[k] = v;
            state.h[k] = b.h;
            state.e[k] = b.e;
        }
    }

    let prev = state.z.clone();
    for c in 0..state.z.len() {
        let w = state.w[c + 1].as_slice();
        let wh = state.w_hat[c].as_slice();
        let a = state.alpha[c].as_slice();
        let b = state.beta[c].as_slice();
        let z = state.z[c].as_mut_slice();
        for idx in 0..z.len() {
            z[idx] = 0.5 * (w[idx] + wh[idx] + a[idx] / rho + b[idx] / rho);
        }
        let z = state.z[c].as_slice().to_vec();
        for (al, (wi, zi)) in state.alpha[c].as_mut_slice().iter_mut().zip(w.iter().zip(&z)) {
            *al += rho * (wi - zi);
        }
        for (be, (wi, zi)) in state.beta[c].as_mut_slice().iter_mut().zip(wh.iter().zip(&z)) {
            *be += rho * (wi - zi);
        }
    }
    state.z_prev = (state.iteration > 0 || state.warm).then_some(prev);
    state.iteration += 1;
}

/// Feasible weight sequence read off the consensus iterates: `W^1` for the
/// first step, the projection of `Z^k` onto the polytope for the others.
pub fn extract_weights(state: &AdmmState) -> Vec<WeightMatrix> {
    let mut out = Vec::with_capacity(state.window());
    if let Some(first) = state.w.first() {
        out.push(first.clone());
    }
    out.extend(state.z.iter().map(project_polytope));
    out
}

/// Binary weights keeping the real entries above one half. Row and column
/// sums of one leave at most one such entry per row and column, so the
/// result is always a valid assignment.
pub fn round_weights(w: &WeightMatrix) -> WeightMatrix {
    let (nx, ny) = (w.nx(), w.ny());
    let mut out = WeightMatrix::zeros(nx, ny);
    let mut hit = vec![false; ny];
    for i in 0..nx {
        match (0..ny).find(|&j| w.get(i, j) > 0.5 && !hit[j]) {
            Some(j) => {
                out.set(i, j, 1.0);
                hit[j] = true;
            }
            None => out.set(i, ny, 1.0),
        }
    }
    for (j, &h) in hit.iter().enumerate() {
        if !h {
            out.set(nx, j, 1.0);
        }
    }
    out
}

/// LP relaxation metric computed by consensus ADMM.
///
/// The reported value is the smallest objective seen over the feasible
/// sequences visited: the block iterates `W`, the projected consensus `Z`
/// and its rounding. It never falls below the LP optimum. A window of one
/// step has no coupling and is handed to the LP solver.
pub fn admm_metric(
    x: &TrajectorySet,
    y: &TrajectorySet,
    params: &MetricParams,
    config: &AdmmConfig,
) -> Result<AdmmResult> {
    config.validate()?;
    let costs = cost_matrices(x, y, params)?;
    if x.window() == 1 {
        let lp = lp_metric(x, y, params)?;
        return Ok(AdmmResult {
            value: lp.value,
            raw_cost: lp.raw_cost,
            weights: lp.weights,
            decomposition: lp.decomposition,
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            converged: true,
            trace: Vec::new(),
        });
    }
    let state = AdmmState::uniform(x.window(), x.len(), y.len(), config.rho);
    admm_from_state(x, y, params, config, &costs, state)
}

/// Run ADMM from a given state, for warm starts.
pub fn admm_metric_from(
    x: &TrajectorySet,
    y: &TrajectorySet,
    params: &MetricParams,
    config: &AdmmConfig,
    state: AdmmState,
) -> Result<AdmmResult> {
    config.validate()?;
    let costs = cost_matrices(x, y, params)?;
    if state.window() != x.window()
        || state.w.iter().any(|w| w.nx() != x.len() || w.ny() != y.len())
    {
        return Err(MetricError::Shape("ADMM state does not match the sets".into()));
    }
    admm_from_state(x, y, params, config, &costs, state)
}

fn admm_from_state(
    x: &TrajectorySet,
    y: &TrajectorySet,
    params: &MetricParams,
    config: &AdmmConfig,
    costs: &[CostMatrix],
    mut state: AdmmState,
) -> Result<AdmmResult> {
    state.rho = config.rho;
    let threshold = config.threshold(x.len(), y.len());
    let mut best_weights = state.w.clone();
    let mut best = weights_objective(costs, &best_weights, params);
    let mut trace = Vec::new();
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;

    for _ in 0..config.max_admm_iters {
        admm_step(costs, &mut state, params, config.max_qp_iters);
        (primal, dual) = residuals(&state);

        let w_obj = weights_objective(costs, &state.w, params);
        if w_obj < best {
            best = w_obj;
            best_weights = state.w.clone();
        }
        let z_weights = extract_weights(&state);
        let z_obj = weights_objective(costs, &z_weights, params);
        let rounded: Vec<WeightMatrix> = z_weights.iter().map(round_weights).collect();
        let r_obj = weights_objective(costs, &rounded, params);
        if z_obj < best {
            best = z_obj;
            best_weights = z_weights;
        }
        if r_obj < best {
            best = r_obj;
            best_weights = rounded;
        }
        trace.push(TraceRow { iteration: state.iteration, primal, dual, objective: z_obj });

        if primal < threshold && dual < threshold {
            converged = true;
            break;
        }
    }

    let raw = best.max(0.0);
    let decomposition = decompose(&best_weights, x, y, params)?;
    Ok(AdmmResult {
        value: raw.powf(1.0 / params.p()),
        raw_cost: raw,
        weights: best_weights,
        decomposition,
        iterations: state.iteration,
        primal_residual: primal,
        dual_residual: dual,
        converged,
        trace,
    })
}
