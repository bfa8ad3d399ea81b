use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::admm::{admm_metric, AdmmConfig};
use crate::error::{MetricError, Result};
use crate::exact::{brute_force_metric, exact_metric};
use crate::lp::{lp_metric, CostBreakdown};
use crate::trajcore::{MetricParams, TrajectorySet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver {
    Viterbi,
    BruteForce,
    Lp,
    Admm(AdmmConfig),
}

impl Solver {
    pub fn name(&self) -> &'static str {
        match self {
            Solver::Viterbi => "viterbi",
            Solver::BruteForce => "brute-force",
            Solver::Lp => "lp",
            Solver::Admm(_) => "admm",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "viterbi" | "exact" => Ok(Solver::Viterbi),
            "brute-force" | "oracle" => Ok(Solver::BruteForce),
            "lp" => Ok(Solver::Lp),
            "admm" => Ok(Solver::Admm(AdmmConfig::default())),
            other => Err(MetricError::InvalidParams(format!("unknown solver {other:?}"))),
        }
    }
}

/// Solver-independent summary of one metric evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct MetricResult {
    pub solver: String,
    pub value: f64,
    pub raw_cost: f64,
    pub decomposition: CostBreakdown,
    /// Assignment vector per time step, for the exact solvers.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assignments: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

pub fn compute_metric(
    x: &TrajectorySet,
    y: &TrajectorySet,
    params: &MetricParams,
    solver: &Solver,
) -> Result<MetricResult> {
    let name = solver.name().to_string();
    match solver {
        Solver::Viterbi | Solver::BruteForce => {
            let r = if *solver == Solver::Viterbi {
                exact_metric(x, y, params)?
            } else {
                brute_force_metric(x, y, params)?
            };
            Ok(MetricResult {
                solver: name,
                value: r.value,
                raw_cost: r.raw_cost,
                decomposition: r.decomposition,
                assignments: Some(r.per_time_assignments.iter().map(|a| a.entries().to_vec()).collect()),
                iterations: None,
                converged: None,
            })
        }
        Solver::Lp => {
            let r = lp_metric(x, y, params)?;
            Ok(MetricResult {
                solver: name,
                value: r.value,
                raw_cost: r.raw_cost,
                decomposition: r.decomposition,
                assignments: None,
                iterations: Some(r.solver_stats.iterations),
                converged: Some(true),
            })
        }
        Solver::Admm(cfg) => {
            let r = admm_metric(x, y, params, cfg)?;
            Ok(MetricResult {
                solver: name,
                value: r.value,
                raw_cost: r.raw_cost,
                decomposition: r.decomposition,
                assignments: None,
                iterations: Some(r.iterations),
                converged: Some(r.converged),
            })
        }
    }
}
