//! Soft assignments and the LP relaxation of the assignment metric.
//!
//! A [`WeightMatrix`] is an `(nx+1) × (ny+1)` association matrix whose last
//! row and column stand for "unassigned". Binary weight matrices are in
//! bijection with assignment vectors; relaxing binarity to nonnegativity
//! gives a polytope over which the metric becomes a linear program.
//!
//! The LP uses, per time step `k`, the weights `W^k(i,j)`, and per pair of
//! consecutive steps a scalar `e^k` and a matrix `H^k` over the real
//! (non-dummy) entries bounding `|W^k - W^{k+1}|` from above.

mod decompose;
mod simplex;

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

pub use decompose::{decompose, CostBreakdown};
pub use simplex::{LpRow, LpSolution, RowKind, SolverStats};

use crate::error::{MetricError, Result};
use crate::exact::{cost_matrices, AssignmentVector, CostMatrix};
use crate::trajcore::{MetricParams, TrajectorySet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightMatrix {
    nx: usize,
    ny: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        WeightMatrix { nx, ny, data: vec![0.0; (nx + 1) * (ny + 1)] }
    }

    pub fn from_fn(nx: usize, ny: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut w = Self::zeros(nx, ny);
        for i in 0..=nx {
            for j in 0..=ny {
                w.data[i * (ny + 1) + j] = f(i, j);
            }
        }
        w
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nx = rows.len().checked_sub(1).ok_or_else(|| {
            MetricError::Shape("weight matrix needs at least one row".into())
        })?;
        let ny = rows[0].len().checked_sub(1).ok_or_else(|| {
            MetricError::Shape("weight matrix needs at least one column".into())
        })?;
        if rows.iter().any(|r| r.len() != ny + 1) {
            return Err(MetricError::Shape("ragged weight matrix".into()));
        }
        Ok(WeightMatrix { nx, ny, data: rows.concat() })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Entry `(i, j)`, 0-based; `i == nx` / `j == ny` is the unassigned side.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.ny + 1) + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * (self.ny + 1) + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.ny + 1).map(<[f64]>::to_vec).collect()
    }

    pub fn is_binary(&self, tol: f64) -> bool {
        self.data.iter().all(|&v| v.abs() <= tol || (v - 1.0).abs() <= tol)
    }

    /// Check the relaxed-polytope constraints: unit real-row and real-column
    /// sums, zero corner, nonnegativity.
    pub fn check_feasible(&self, tol: f64) -> std::result::Result<(), String> {
        let (nx, ny) = (self.nx, self.ny);
        for i in 0..nx {
            let s: f64 = (0..=ny).map(|j| self.get(i, j)).sum();
            if (s - 1.0).abs() > tol {
                return Err(format!("row {} sums to {s}", i + 1));
            }
        }
        for j in 0..ny {
            let s: f64 = (0..=nx).map(|i| self.get(i, j)).sum();
            if (s - 1.0).abs() > tol {
                return Err(format!("column {} sums to {s}", j + 1));
            }
        }
        if self.get(nx, ny).abs() > tol {
            return Err(format!("corner entry is {}", self.get(nx, ny)));
        }
        if let Some(v) = self.data.iter().find(|&&v| v < -tol) {
            return Err(format!("negative entry {v}"));
        }
        Ok(())
    }

    /// `tr(Dᵀ W)`
    pub fn dot(&self, d: &CostMatrix) -> f64 {
        self.data.iter().zip(d.as_slice()).map(|(w, c)| w * c).sum()
    }

    /// `Σ_{i≤nx, j≤ny} |W(i,j) - V(i,j)|` over the real entries.
    pub fn real_l1_distance(&self, other: &WeightMatrix) -> f64 {
        let mut total = 0.0;
        for i in 0..self.nx {
            for j in 0..self.ny {
                total += (self.get(i, j) - other.get(i, j)).abs();
            }
        }
        total
    }
}

/// Binary weight matrix of an assignment vector against `ny` targets.
pub fn assignment_to_weights(pi: &AssignmentVector, ny: usize) -> WeightMatrix {
    let nx = pi.len();
    let mut w = WeightMatrix::zeros(nx, ny);
    let mut hit = vec![false; ny];
    for (i, &j) in pi.entries().iter().enumerate() {
        if j == 0 {
            w.set(i, ny, 1.0);
        } else {
            w.set(i, j - 1, 1.0);
            hit[j - 1] = true;
        }
    }
    for (j, h) in hit.into_iter().enumerate() {
        if !h {
            w.set(nx, j, 1.0);
        }
    }
    w
}

/// Inverse of [`assignment_to_weights`]; fails on non-binary or infeasible input.
pub fn weights_to_assignment(w: &WeightMatrix) -> Result<AssignmentVector> {
    const TOL: f64 = 1e-9;
    if !w.is_binary(TOL) {
        return Err(MetricError::InfeasibleWeights("weight matrix is not binary".into()));
    }
    w.check_feasible(TOL).map_err(MetricError::InfeasibleWeights)?;
    let entries = (0..w.nx)
        .map(|i| {
            (0..w.ny)
                .find(|&j| w.get(i, j) > 0.5)
                .map_or(0, |j| j + 1)
        })
        .collect();
    AssignmentVector::new(entries, w.ny)
}

/// Index map for the LP variables. Time steps are 0-based here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LpLayout {
    pub t_len: usize,
    pub nx: usize,
    pub ny: usize,
}

impl LpLayout {
    fn cells(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    fn w_block(&self) -> usize {
        self.t_len * self.cells()
    }

    pub fn w(&self, k: usize, i: usize, j: usize) -> usize {
        k * self.cells() + i * (self.ny + 1) + j
    }

    pub fn e(&self, k: usize) -> usize {
        self.w_block() + k * (1 + self.nx * self.ny)
    }

    pub fn h(&self, k: usize, i: usize, j: usize) -> usize {
        self.e(k) + 1 + i * self.ny + j
    }

    /// `T(nx+1)(ny+1) + (T-1)(1 + nx·ny)`
    pub fn num_vars(&self) -> usize {
        self.w_block() + self.t_len.saturating_sub(1) * (1 + self.nx * self.ny)
    }

    pub fn var_name(&self, v: usize) -> String {
        if v < self.w_block() {
            let k = v / self.cells();
            let r = v % self.cells();
            format!("w_{}_{}_{}", k + 1, r / (self.ny + 1) + 1, r % (self.ny + 1) + 1)
        } else {
            let off = v - self.w_block();
            let per = 1 + self.nx * self.ny;
            let k = off / per;
            let r = off % per;
            if r == 0 {
                format!("e_{}", k + 1)
            } else {
                let c = r - 1;
                format!("h_{}_{}_{}", k + 1, c / self.ny + 1, c % self.ny + 1)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub layout: LpLayout,
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
}

impl LpProblem {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// CPLEX LP text format; readable by GLPK, HiGHS, CBC and CPLEX.
    pub fn to_lp_format(&self) -> String {
        let l = &self.layout;
        let mut s = String::new();
        let _ = writeln!(s, "\\ sets-of-trajectories LP: T={} nx={} ny={}", l.t_len, l.nx, l.ny);
        let _ = writeln!(s, "Minimize");
        let terms: Vec<(usize, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(j, &c)| (j, c))
            .collect();
        s.push_str(" obj:");
        if terms.is_empty() {
            s.push_str(" 0 ");
            s.push_str(&l.var_name(0));
        }
        write_terms(&mut s, l, &terms);
        s.push('\n');
        let _ = writeln!(s, "Subject To");
        for (r, row) in self.rows.iter().enumerate() {
            let _ = write!(s, " c{}:", r + 1);
            write_terms(&mut s, l, &row.coeffs);
            let op = match row.kind {
                RowKind::Eq => "=",
                RowKind::Ge => ">=",
                RowKind::Le => "<=",
            };
            let _ = writeln!(s, " {op} {:?}", row.rhs);
        }
        let _ = writeln!(s, "Bounds");
        for v in 0..self.num_vars() {
            let _ = writeln!(s, " {} >= 0", l.var_name(v));
        }
        let _ = writeln!(s, "End");
        s
    }

    pub fn write_lp(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_lp_format())?;
        Ok(())
    }
}

fn write_terms(s: &mut String, l: &LpLayout, terms: &[(usize, f64)]) {
    for (n, &(j, c)) in terms.iter().enumerate() {
        let sign = if c < 0.0 { "-" } else if n == 0 { "" } else { "+" };
        let _ = write!(s, " {sign} {:?} {}", c.abs(), l.var_name(j));
        if n % 8 == 7 {
            s.push_str("\n  ");
        }
    }
}

/// LP whose optimum is the p-th power of the relaxed metric.
pub fn build_lp(x: &TrajectorySet, y: &TrajectorySet, params: &MetricParams) -> Result<LpProblem> {
    let costs = cost_matrices(x, y, params)?;
    Ok(build_lp_from_costs(&costs, params))
}

pub(crate) fn build_lp_from_costs(costs: &[CostMatrix], params: &MetricParams) -> LpProblem {
    let (nx, ny) = (costs[0].nx(), costs[0].ny());
    let layout = LpLayout { t_len: costs.len(), nx, ny };
    let mut objective = vec![0.0; layout.num_vars()];
    let mut rows = Vec::new();
    let half_switch = params.half_switch_cost();

    for (k, d) in costs.iter().enumerate() {
        for i in 0..=nx {
            for j in 0..=ny {
                objective[layout.w(k, i, j)] = d.get(i, j);
            }
        }
        for j in 0..ny {
            rows.push(LpRow {
                coeffs: (0..=nx).map(|i| (layout.w(k, i, j), 1.0)).collect(),
                kind: RowKind::Eq,
                rhs: 1.0,
            });
        }
        for i in 0..nx {
            rows.push(LpRow {
                coeffs: (0..=ny).map(|j| (layout.w(k, i, j), 1.0)).collect(),
                kind: RowKind::Eq,
                rhs: 1.0,
            });
        }
        rows.push(LpRow {
            coeffs: vec![(layout.w(k, nx, ny), 1.0)],
            kind: RowKind::Eq,
            rhs: 0.0,
        });
    }
    for k in 0..layout.t_len.saturating_sub(1) {
        objective[layout.e(k)] = half_switch;
        let mut e_row = vec![(layout.e(k), 1.0)];
        for i in 0..nx {
            for j in 0..ny {
                let h = layout.h(k, i, j);
                e_row.push((h, -1.0));
                rows.push(LpRow {
                    coeffs: vec![(h, 1.0), (layout.w(k, i, j), -1.0), (layout.w(k + 1, i, j), 1.0)],
                    kind: RowKind::Ge,
                    rhs: 0.0,
                });
                rows.push(LpRow {
                    coeffs: vec![(h, 1.0), (layout.w(k, i, j), 1.0), (layout.w(k + 1, i, j), -1.0)],
                    kind: RowKind::Ge,
                    rhs: 0.0,
                });
            }
        }
        rows.push(LpRow { coeffs: e_row, kind: RowKind::Ge, rhs: 0.0 });
    }
    LpProblem { layout, objective, rows }
}

pub fn solve_lp(prob: &LpProblem) -> Result<LpSolution> {
    simplex::solve(&prob.objective, &prob.rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct LpResult {
    pub value: f64,
    pub raw_cost: f64,
    pub weights: Vec<WeightMatrix>,
    pub decomposition: CostBreakdown,
    pub solver_stats: SolverStats,
}

/// Objective of a weight sequence: `Σ tr(Dᵀ W^k) + (γ^p/2) Σ |W^k - W^{k+1}|`.
pub fn weights_objective(costs: &[CostMatrix], weights: &[WeightMatrix], params: &MetricParams) -> f64 {
    let loc: f64 = weights.iter().zip(costs).map(|(w, d)| w.dot(d)).sum();
    let sw: f64 = weights.windows(2).map(|p| p[0].real_l1_distance(&p[1])).sum();
    loc + params.half_switch_cost() * sw
}

/// The LP relaxation metric.
pub fn lp_metric(x: &TrajectorySet, y: &TrajectorySet, params: &MetricParams) -> Result<LpResult> {
    let costs = cost_matrices(x, y, params)?;
    let prob = build_lp_from_costs(&costs, params);
    let sol = solve_lp(&prob)?;
    let l = prob.layout;
    let weights: Vec<WeightMatrix> = (0..l.t_len)
        .map(|k| WeightMatrix::from_fn(l.nx, l.ny, |i, j| sol.values[l.w(k, i, j)]))
        .collect();
    // Roundoff far below the pivoting tolerance would otherwise survive the
    // p-th root as a visibly nonzero distance.
    let scale: f64 = prob.objective.iter().map(|c| c.abs()).sum();
    let raw = if sol.objective <= 1e-12 * scale.max(1.0) { 0.0 } else { sol.objective };
    let decomposition = decompose(&weights, x, y, params)?;
    Ok(LpResult {
        value: raw.powf(1.0 / params.p()),
        raw_cost: raw,
        weights,
        decomposition,
        solver_stats: sol.stats,
    })
}
