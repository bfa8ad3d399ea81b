//! Per-block quadratic programs of the consensus ADMM.
//!
//! A block holds the weights `W` of one time step, optionally a copy `V` of
//! the next step's weights, and the bound `H ≥ |W - V|` on their real
//! entries. Because `e` only appears with a positive coefficient and under
//! `e ≥ ΣH`, it is eliminated as `e = ΣH`. The objective is
//!
//! `⟨a, W⟩ + qw/2 ‖W - cw‖² + ⟨b, V⟩ + qv/2 ‖V - cv‖² + g ΣH`
//!
//! over `W, V` in the relaxed assignment polytope.

use crate::lp::WeightMatrix;

/// Quadratic part attached to one weight matrix of a block.
#[derive(Debug, Clone)]
pub struct QuadTerm {
    pub linear: Vec<f64>,
    pub weight: f64,
    pub center: Vec<f64>,
}

impl QuadTerm {
    fn value(&self, x: &[f64]) -> f64 {
        let mut lin = 0.0;
        let mut sq = 0.0;
        for ((&xi, &l), &c) in x.iter().zip(&self.linear).zip(&self.center) {
            lin += l * xi;
            sq += (xi - c) * (xi - c);
        }
        lin + 0.5 * self.weight * sq
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (((o, &xi), &l), &c) in out.iter_mut().zip(x).zip(&self.linear).zip(&self.center) {
            *o = l + self.weight * (xi - c);
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockQp {
    pub nx: usize,
    pub ny: usize,
    pub w: QuadTerm,
    pub v: Option<QuadTerm>,
    /// Coefficient of `ΣH`, the half-switch cost `γ^p/2`.
    pub switch_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockPoint {
    pub w: WeightMatrix,
    pub v: Option<WeightMatrix>,
    /// Real-entry bounds, row-major `nx × ny`.
    pub h: Vec<f64>,
    pub e: f64,
}

impl BlockPoint {
    pub fn new(w: WeightMatrix, v: Option<WeightMatrix>) -> Self {
        let mut p = BlockPoint { h: vec![0.0; w.nx() * w.ny()], e: 0.0, w, v };
        p.tighten();
        p
    }

    /// Lower `H` and `e` to the smallest feasible values.
    fn tighten(&mut self) {
        let (nx, ny) = (self.w.nx(), self.w.ny());
        if let Some(v) = &self.v {
            for i in 0..nx {
                for j in 0..ny {
                    self.h[i * ny + j] = (self.w.get(i, j) - v.get(i, j)).abs();
                }
            }
        } else {
            self.h.iter_mut().for_each(|h| *h = 0.0);
        }
        self.e = self.h.iter().sum();
    }
}

impl BlockQp {
    pub fn objective(&self, p: &BlockPoint) -> f64 {
        let mut f = self.w.value(p.w.as_slice()) + self.switch_weight * p.e;
        if let (Some(q), Some(v)) = (&self.v, &p.v) {
            f += q.value(v.as_slice());
        }
        f
    }
}

const DYKSTRA_TOL: f64 = 1e-12;
const DYKSTRA_MAX_SWEEPS: usize = 400;
pub(crate) const FEASIBILITY_TOL: f64 = 1e-10;
const RESTORE_MAX_SWEEPS: usize = 10_000;

/// Approximately minimize a block QP from a feasible `start` using at most
/// `max_iters` projected-gradient steps with exact line search.
///
/// The returned point is feasible and its objective is never above the
/// objective at `start`.
pub fn qp_block_solve(block: &BlockQp, start: &BlockPoint, max_iters: usize) -> BlockPoint {
    let (nx, ny) = (block.nx, block.ny);
    let cells = (nx + 1) * (ny + 1);
    let has_v = block.v.is_some() && start.v.is_some();
    let curv = block.w.weight.max(block.v.as_ref().map_or(0.0, |q| q.weight));
    let step = if curv > 0.0 { 1.0 / curv } else { 1.0 };

    let mut cur = start.clone();
    cur.tighten();
    let mut gw = vec![0.0; cells];
    let mut gv = vec![0.0; cells];

    for _ in 0..max_iters {
        block.w.gradient(cur.w.as_slice(), &mut gw);
        let mut trial_w: Vec<f64> = cur.w.as_slice().iter().zip(&gw).map(|(x, g)| x - step * g).collect();
        let mut trial_v = None;
        let mut trial_h: Vec<f64> = cur.h.iter().map(|h| h - step * block.switch_weight).collect();
        if has_v {
            let q = block.v.as_ref().expect("checked");
            let v = cur.v.as_ref().expect("checked");
            q.gradient(v.as_slice(), &mut gv);
            trial_v = Some(
                v.as_slice()
                    .iter()
                    .zip(&gv)
                    .map(|(x, g)| x - step * g)
                    .collect::<Vec<f64>>(),
            );
        }
        project_block(nx, ny, &mut trial_w, trial_v.as_deref_mut(), &mut trial_h);

        // Direction d = projected point - current point.
        let dw: Vec<f64> = trial_w.iter().zip(cur.w.as_slice()).map(|(a, b)| a - b).collect();
        let dh: Vec<f64> = trial_h.iter().zip(&cur.h).map(|(a, b)| a - b).collect();
        let dv: Option<Vec<f64>> = trial_v.as_ref().map(|tv| {
            tv.iter()
                .zip(cur.v.as_ref().expect("v present").as_slice())
                .map(|(a, b)| a - b)
                .collect()
        });

        let mut slope = dot(&gw, &dw) + block.switch_weight * dh.iter().sum::<f64>();
        let mut curvature = block.w.weight * dot(&dw, &dw);
        if let (Some(dv), Some(q)) = (&dv, &block.v) {
            slope += dot(&gv, dv);
            curvature += q.weight * dot(dv, dv);
        }
        if slope >= 0.0 {
            break;
        }
        let t = if curvature > 0.0 { (-slope / curvature).min(1.0) } else { 1.0 };

        let before = block.objective(&cur);
        let mut next = cur.clone();
        axpy(next.w.as_mut_slice(), t, &dw);
        if let (Some(v), Some(dv)) = (next.v.as_mut(), &dv) {
            axpy(v.as_mut_slice(), t, dv);
        }
        axpy(&mut next.h, t, &dh);
        for h in next.h.iter_mut() {
            *h = h.max(0.0);
        }
        restore_feasibility(&mut next);
        if block.objective(&next) <= before {
            cur = next;
        } else {
            break;
        }
    }
    cur
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], t: f64, d: &[f64]) {
    for (yi, di) in y.iter_mut().zip(d) {
        *yi += t * di;
    }
}

/// Make `p` exactly feasible: alternate affine projection and clipping on
/// `W` (and `V`), then raise `H`, `e` to their tight values.
fn restore_feasibility(p: &mut BlockPoint) {
    let (nx, ny) = (p.w.nx(), p.w.ny());
    restore_polytope(nx, ny, p.w.as_mut_slice());
    if let Some(v) = p.v.as_mut() {
        restore_polytope(nx, ny, v.as_mut_slice());
    }
    p.tighten();
}

pub(crate) fn restore_polytope(nx: usize, ny: usize, x: &mut [f64]) {
    for _ in 0..RESTORE_MAX_SWEEPS {
        clip(x);
        if affine_violation(nx, ny, x) <= FEASIBILITY_TOL {
            return;
        }
        project_affine(nx, ny, x);
    }
    clip(x);
}

fn clip(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn affine_violation(nx: usize, ny: usize, x: &[f64]) -> f64 {
    let m = ny + 1;
    let mut worst = x[nx * m + ny].abs();
    for i in 0..nx {
        let s: f64 = x[i * m..(i + 1) * m].iter().sum();
        worst = worst.max((s - 1.0).abs());
    }
    for j in 0..ny {
        let s: f64 = (0..=nx).map(|i| x[i * m + j]).sum();
        worst = worst.max((s - 1.0).abs());
    }
    worst
}

/// Euclidean projection onto the affine hull of the polytope: unit sums of
/// the real rows and real columns, zero corner.
pub(crate) fn project_affine(nx: usize, ny: usize, x: &mut [f64]) {
    let m = ny + 1;
    let row_res: Vec<f64> = (0..nx)
        .map(|i| x[i * m..(i + 1) * m].iter().sum::<f64>() - 1.0)
        .collect();
    let col_res: Vec<f64> = (0..ny)
        .map(|j| (0..=nx).map(|i| x[i * m + j]).sum::<f64>() - 1.0)
        .collect();
    // Gram matrix [[(ny+1)I, 1], [1, (nx+1)I]] solved through the sums of
    // the row and column multipliers.
    let (fx, fy) = (nx as f64, ny as f64);
    let rr: f64 = row_res.iter().sum();
    let rc: f64 = col_res.iter().sum();
    let det = fx + fy + 1.0;
    let s_row = (rr * (fx + 1.0) - fx * rc) / det;
    let s_col = ((fy + 1.0) * rc - fy * rr) / det;
    let lam_row: Vec<f64> = row_res.iter().map(|r| (r - s_col) / (fy + 1.0)).collect();
    let lam_col: Vec<f64> = col_res.iter().map(|r| (r - s_row) / (fx + 1.0)).collect();
    for i in 0..=nx {
        for j in 0..=ny {
            let mut delta = 0.0;
            if i < nx {
                delta += lam_row[i];
            }
            if j < ny {
                delta += lam_col[j];
            }
            x[i * m + j] -= delta;
        }
    }
    x[nx * m + ny] = 0.0;
}

/// Project `(u, h)` onto the cone `h ≥ √2 |u|`.
fn project_cone_2d(u: f64, h: f64) -> (f64, f64) {
    let s2 = std::f64::consts::SQRT_2;
    if h >= s2 * u.abs() {
        return (u, h);
    }
    if h <= -u.abs() / s2 {
        return (0.0, 0.0);
    }
    let sign = if u >= 0.0 { 1.0 } else { -1.0 };
    // Unit ray (sign, √2)/√3.
    let r = (sign / 3f64.sqrt(), s2 / 3f64.sqrt());
    let t = u * r.0 + h * r.1;
    (t * r.0, t * r.1)
}

/// Project `(w, v, h)` onto `h ≥ |w - v|`.
fn project_abs_epigraph(w: f64, v: f64, h: f64) -> (f64, f64, f64) {
    let s2 = std::f64::consts::SQRT_2;
    let u = (w - v) / s2;
    let mid = (w + v) / s2;
    let (u, h) = project_cone_2d(u, h);
    ((mid + u) / s2, (mid - u) / s2, h)
}

/// Dykstra's alternating projection onto the block feasible set: the affine
/// rows and nonnegativity of `W` and `V`, and `H ≥ |W - V|`.
pub(crate) fn project_block(nx: usize, ny: usize, w: &mut [f64], mut v: Option<&mut [f64]>, h: &mut [f64]) {
    let cells = (nx + 1) * (ny + 1);
    let m = ny + 1;
    let n_sets = if v.is_some() { 3 } else { 2 };
    let dim = if v.is_some() { 2 * cells + nx * ny } else { cells };
    let mut x = vec![0.0; dim];
    x[..cells].copy_from_slice(w);
    if let Some(v) = v.as_deref() {
        x[cells..2 * cells].copy_from_slice(v);
        x[2 * cells..].copy_from_slice(h);
    }
    let mut incr = vec![vec![0.0; dim]; n_sets];
    let mut prev = x.clone();
    let mut y = vec![0.0; dim];

    for _ in 0..DYKSTRA_MAX_SWEEPS {
        for (s, inc) in incr.iter_mut().enumerate() {
            for ((yi, xi), pi) in y.iter_mut().zip(&x).zip(inc.iter()) {
                *yi = xi + pi;
            }
            match s {
                0 => {
                    project_affine(nx, ny, &mut y[..cells]);
                    if n_sets == 3 {
                        project_affine(nx, ny, &mut y[cells..2 * cells]);
                    }
                }
                1 => {
                    let upto = if n_sets == 3 { 2 * cells } else { cells };
                    clip(&mut y[..upto]);
                }
                _ => {
                    for i in 0..nx {
                        for j in 0..ny {
                            let a = i * m + j;
                            let b = cells + a;
                            let c = 2 * cells + i * ny + j;
                            let (pw, pv, ph) = project_abs_epigraph(y[a], y[b], y[c]);
                            y[a] = pw;
                            y[b] = pv;
                            y[c] = ph;
                        }
                    }
                }
            }
            for (((pi, xi), yi), _) in inc.iter_mut().zip(x.iter_mut()).zip(&y).zip(0..) {
                *pi += *xi - *yi;
                *xi = *yi;
            }
        }
        let change = x
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change <= DYKSTRA_TOL {
            break;
        }
        prev.copy_from_slice(&x);
    }

    w.copy_from_slice(&x[..cells]);
    restore_polytope(nx, ny, w);
    if let Some(v) = v.as_deref_mut() {
        v.copy_from_slice(&x[cells..2 * cells]);
        restore_polytope(nx, ny, v);
        for i in 0..nx {
            for j in 0..ny {
                let k = i * ny + j;
                h[k] = x[2 * cells + k].max((w[i * m + j] - v[i * m + j]).abs());
            }
        }
    }
}

/// Euclidean projection of a matrix onto the relaxed assignment polytope.
pub fn project_polytope(a: &WeightMatrix) -> WeightMatrix {
    let mut out = a.clone();
    let (nx, ny) = (a.nx(), a.ny());
    let mut h = Vec::new();
    project_block(nx, ny, out.as_mut_slice(), None, &mut h);
    out
}
