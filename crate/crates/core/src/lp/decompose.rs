use serde::Serialize;

use super::WeightMatrix;
use crate::error::{MetricError, Result};
use crate::trajcore::{check_compatible, MetricParams, TrajectorySet};

/// Split of the p-th power cost into its four sources.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub localization: f64,
    pub missed: f64,
    #[serde(rename = "false")]
    pub false_: f64,
    pub switching: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.localization + self.missed + self.false_ + self.switching
    }
}

const FEASIBILITY_TOL: f64 = 1e-7;

/// Attribute the cost of a weight sequence to localization, missed targets,
/// false targets and switches.
///
/// Mass on a pair whose states both exist counts as localization, even when
/// the distance is cut off. A live ground-truth state paired with a dead or
/// unassigned estimate is a missed target, the mirror case a false target.
pub fn decompose(
    weights: &[WeightMatrix],
    x: &TrajectorySet,
    y: &TrajectorySet,
    params: &MetricParams,
) -> Result<CostBreakdown> {
    check_compatible(x, y)?;
    if weights.len() != x.window() {
        return Err(MetricError::Shape(format!(
            "{} weight matrices for a window of {}",
            weights.len(),
            x.window()
        )));
    }
    let (nx, ny) = (x.len(), y.len());
    let unmatched = params.unmatched_cost();
    let mut out = CostBreakdown::default();
    for (k0, w) in weights.iter().enumerate() {
        if w.nx() != nx || w.ny() != ny {
            return Err(MetricError::Shape(format!(
                "weight matrix {} is {}x{}, expected {}x{}",
                k0 + 1,
                w.nx() + 1,
                w.ny() + 1,
                nx + 1,
                ny + 1
            )));
        }
        w.check_feasible(FEASIBILITY_TOL)
            .map_err(|e| MetricError::InfeasibleWeights(format!("step {}: {e}", k0 + 1)))?;
        let k = k0 + 1;
        let xs = x.states_at(k);
        let ys = y.states_at(k);
        for i in 0..=nx {
            let xi = if i < nx { xs[i] } else { None };
            for j in 0..=ny {
                let mass = w.get(i, j);
                if mass == 0.0 {
                    continue;
                }
                let yj = if j < ny { ys[j] } else { None };
                match (xi, yj) {
                    (Some(_), Some(_)) => {
                        out.localization += mass * params.base_cost_p(xi, yj);
                    }
                    (Some(_), None) => out.missed += mass * unmatched,
                    (None, Some(_)) => out.false_ += mass * unmatched,
                    (None, None) => {}
                }
            }
        }
    }
    let sw: f64 = weights.windows(2).map(|p| p[0].real_l1_distance(&p[1])).sum();
    out.switching = params.half_switch_cost() * sw;
    Ok(out)
}
