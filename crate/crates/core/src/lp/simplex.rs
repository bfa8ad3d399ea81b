//! Dense revised simplex for `min cᵀx` subject to linear rows and `x ≥ 0`.
//!
//! The basis inverse is stored densely and updated with product-form pivots;
//! the constraint matrix is kept column-sparse. Pricing is Dantzig's rule,
//! switching to Bland's rule after a run of degenerate pivots and back again
//! after the first pivot that makes progress.

use serde::Serialize;

use crate::error::{MetricError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowKind {
    Eq,
    /// `a·x ≥ rhs`
    Ge,
    /// `a·x ≤ rhs`
    Le,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SolverStats {
    pub iterations: usize,
    pub pivots: usize,
    pub degenerate_pivots: usize,
    pub bland_pivots: usize,
    pub reinversions: usize,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    pub values: Vec<f64>,
    pub stats: SolverStats,
}

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 50;
const REINVERT_EVERY: usize = 2000;

/// Solve `min objective·x` over `rows`, all variables nonnegative.
pub fn solve(objective: &[f64], rows: &[LpRow]) -> Result<LpSolution> {
    let mut tab = Tableau::new(objective, rows)?;
    tab.run()?;
    let values = tab.primal_values();
    let objective_value = objective.iter().zip(&values).map(|(c, x)| c * x).sum();
    Ok(LpSolution { objective: objective_value, values, stats: tab.stats })
}

struct Tableau {
    m: usize,
    n_orig: usize,
    n_total: usize,
    first_artificial: usize,
    /// Sparse columns of the standard-form matrix (original, slack, artificial).
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    x_b: Vec<f64>,
    stats: SolverStats,
    opt_tol: f64,
    max_iterations: usize,
}

impl Tableau {
    fn new(objective: &[f64], rows: &[LpRow]) -> Result<Self> {
        let n_orig = objective.len();
        let m = rows.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_orig];
        let mut b = Vec::with_capacity(m);
        let mut slack_of_row: Vec<Option<(usize, f64)>> = vec![None; m];

        for (r, row) in rows.iter().enumerate() {
            let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
            for &(j, v) in &row.coeffs {
                if j >= n_orig {
                    return Err(MetricError::Solver(format!(
                        "row {r} references undeclared variable {j}"
                    )));
                }
                if v != 0.0 {
                    cols[j].push((r, sign * v));
                }
            }
            b.push(sign * row.rhs);
            let slack = match row.kind {
                RowKind::Eq => None,
                RowKind::Ge => Some(-sign),
                RowKind::Le => Some(sign),
            };
            if let Some(s) = slack {
                let j = cols.len();
                cols.push(vec![(r, s)]);
                slack_of_row[r] = Some((j, s));
            }
        }

        let first_artificial = cols.len();
        let mut basis = Vec::with_capacity(m);
        for r in 0..m {
            match slack_of_row[r] {
                Some((j, s)) if s > 0.0 => basis.push(j),
                _ => {
                    let j = cols.len();
                    cols.push(vec![(r, 1.0)]);
                    basis.push(j);
                }
            }
        }
        let n_total = cols.len();
        let mut is_basic = vec![false; n_total];
        for &j in &basis {
            is_basic[j] = true;
        }
        let mut cost = vec![0.0; n_total];
        cost[..n_orig].copy_from_slice(objective);
        let scale = objective.iter().fold(1.0f64, |a, c| a.max(c.abs()));

        let mut binv = vec![0.0; m * m];
        for r in 0..m {
            binv[r * m + r] = 1.0;
        }
        Ok(Tableau {
            m,
            n_orig,
            n_total,
            first_artificial,
            cols,
            x_b: b.clone(),
            b,
            cost,
            basis,
            is_basic,
            binv,
            stats: SolverStats::default(),
            opt_tol: 1e-9 * scale,
            max_iterations: 50 * (m + n_total) + 10_000,
        })
    }

    fn run(&mut self) -> Result<()> {
        let has_artificial = self.basis.iter().any(|&j| j >= self.first_artificial);
        if has_artificial {
            let phase1: Vec<f64> = (0..self.n_total)
                .map(|j| if j >= self.first_artificial { 1.0 } else { 0.0 })
                .collect();
            self.optimize(&phase1, true, 1e-9)?;
            let infeasibility: f64 = self
                .basis
                .iter()
                .zip(&self.x_b)
                .filter(|(&j, _)| j >= self.first_artificial)
                .map(|(_, &v)| v)
                .sum();
            if infeasibility > 1e-7 {
                return Err(MetricError::Solver(format!(
                    "problem is infeasible (phase-one residual {infeasibility:.3e})"
                )));
            }
            self.drive_out_artificials();
        }
        let cost = self.cost.clone();
        self.optimize(&cost, false, self.opt_tol)?;
        self.reinvert()?;
        Ok(())
    }

    fn primal_values(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n_orig];
        for (r, &j) in self.basis.iter().enumerate() {
            if j < self.n_orig {
                x[j] = self.x_b[r].max(0.0);
            }
        }
        x
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &j) in self.basis.iter().enumerate() {
            let c = cost[j];
            if c != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yi, &bi) in y.iter_mut().zip(row) {
                    *yi += c * bi;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, cost: &[f64], y: &[f64], j: usize) -> f64 {
        cost[j] - self.cols[j].iter().map(|&(r, v)| y[r] * v).sum::<f64>()
    }

    /// `B⁻¹ a_j`
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut u = vec![0.0; m];
        for &(i, v) in &self.cols[j] {
            for (r, ur) in u.iter_mut().enumerate() {
                *ur += self.binv[r * m + i] * v;
            }
        }
        u
    }

    fn optimize(&mut self, cost: &[f64], phase_one: bool, tol: f64) -> Result<()> {
        let mut y = self.duals(cost);
        let mut streak = 0usize;
        let mut since_reinvert = 0usize;
        loop {
            self.stats.iterations += 1;
            if self.stats.iterations > self.max_iterations {
                return Err(MetricError::Solver(format!(
                    "iteration cap {} exceeded",
                    self.max_iterations
                )));
            }
            let bland = streak >= DEGENERATE_STREAK;
            let limit = if phase_one { self.n_total } else { self.first_artificial };

            let mut entering = None;
            let mut best = -tol;
            for j in 0..limit {
                if self.is_basic[j] {
                    continue;
                }
                let d = self.reduced_cost(cost, &y, j);
                if d < best {
                    entering = Some((j, d));
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some((q, dq)) = entering else {
                return Ok(());
            };

            let u = self.ftran(q);
            let mut leave: Option<usize> = None;
            let mut theta = f64::INFINITY;
            for r in 0..self.m {
                if u[r] > PIVOT_TOL {
                    let ratio = self.x_b[r].max(0.0) / u[r];
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            if ratio < theta - 1e-12 {
                                true
                            } else if ratio <= theta + 1e-12 {
                                if bland {
                                    self.basis[r] < self.basis[l]
                                } else {
                                    u[r] > u[l]
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        theta = theta.min(ratio);
                        leave = Some(r);
                    }
                }
            }
            let Some(r) = leave else {
                return Err(MetricError::Solver("problem is unbounded".into()));
            };
            let theta = self.x_b[r].max(0.0) / u[r];

            self.pivot(r, q, &u, theta);
            self.stats.pivots += 1;
            if bland {
                self.stats.bland_pivots += 1;
            }
            if theta <= 1e-12 {
                self.stats.degenerate_pivots += 1;
                streak += 1;
            } else {
                streak = 0;
            }

            since_reinvert += 1;
            if since_reinvert >= REINVERT_EVERY {
                self.reinvert()?;
                y = self.duals(cost);
                since_reinvert = 0;
            } else {
                // y' = y + (d_q / u_r) · (row r of the new B⁻¹ scaled back).
                let m = self.m;
                let step = dq;
                let row = &self.binv[r * m..(r + 1) * m];
                for (yi, &bi) in y.iter_mut().zip(row) {
                    *yi += step * bi;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize, u: &[f64], theta: f64) {
        let m = self.m;
        for (i, xi) in self.x_b.iter_mut().enumerate() {
            *xi -= theta * u[i];
            if *xi < 0.0 && *xi > -FEAS_TOL {
                *xi = 0.0;
            }
        }
        self.x_b[r] = theta;

        let piv = u[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (row_r, after) = rest.split_at_mut(m);
        for v in row_r.iter_mut() {
            *v /= piv;
        }
        for (i, &ui) in u.iter().enumerate() {
            if i == r || ui == 0.0 {
                continue;
            }
            let row = if i < r {
                &mut before[i * m..(i + 1) * m]
            } else {
                &mut after[(i - r - 1) * m..(i - r) * m]
            };
            for (v, &pr) in row.iter_mut().zip(row_r.iter()) {
                *v -= ui * pr;
            }
        }

        let out = self.basis[r];
        self.is_basic[out] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
    }

    /// Pivot basic artificials at zero level out of the basis where possible.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.m {
            if self.basis[r] < self.first_artificial {
                continue;
            }
            let m = self.m;
            let candidate = (0..self.first_artificial).find(|&j| {
                !self.is_basic[j]
                    && self.cols[j]
                        .iter()
                        .map(|&(i, v)| self.binv[r * m + i] * v)
                        .sum::<f64>()
                        .abs()
                        > 1e-7
            });
            if let Some(q) = candidate {
                let u = self.ftran(q);
                self.pivot(r, q, &u, 0.0);
                self.stats.pivots += 1;
                self.stats.degenerate_pivots += 1;
            }
            // Otherwise the row is redundant and the artificial stays at zero.
        }
    }

    /// Rebuild `B⁻¹` from scratch by Gauss-Jordan elimination.
    fn reinvert(&mut self) -> Result<()> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (c, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[j] {
                a[r * m + c] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for r in 0..m {
            inv[r * m + r] = 1.0;
        }
        for col in 0..m {
            let piv_row = (col..m)
                .max_by(|&i, &k| a[i * m + col].abs().total_cmp(&a[k * m + col].abs()))
                .unwrap_or(col);
            let piv = a[piv_row * m + col];
            if piv.abs() < 1e-12 {
                return Err(MetricError::Solver("basis became singular".into()));
            }
            if piv_row != col {
                for k in 0..m {
                    a.swap(piv_row * m + k, col * m + k);
                    inv.swap(piv_row * m + k, col * m + k);
                }
            }
            let inv_piv = 1.0 / piv;
            for k in 0..m {
                a[col * m + k] *= inv_piv;
                inv[col * m + k] *= inv_piv;
            }
            for i in 0..m {
                if i == col {
                    continue;
                }
                let f = a[i * m + col];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    a[i * m + k] -= f * a[col * m + k];
                    inv[i * m + k] -= f * inv[col * m + k];
                }
            }
        }
        // Rows of `inv` are indexed by basis position because column c of B
        // holds basic variable basis[c].
        self.binv = inv;
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            let v: f64 = row.iter().zip(&self.b).map(|(x, y)| x * y).sum();
            self.x_b[r] = if v < 0.0 && v > -FEAS_TOL { 0.0 } else { v };
        }
        self.stats.reinversions += 1;
        Ok(())
    }
}
