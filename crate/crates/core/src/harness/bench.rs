use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::mc::{CompensatedSum, PairModel, PairSampler, ScenarioPairSampler};
use super::scenario::{mix_seed, ScenarioConfig};
use super::MetricSpec;
use crate::admm::AdmmConfig;
use crate::error::{MetricError, Result};
use crate::solver::{compute_metric, Solver};

/// Version written in the first column of every benchmark CSV row.
pub const BENCH_CSV_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchGrid {
    pub t_values: Vec<usize>,
    pub n_max_values: Vec<usize>,
    pub solvers: Vec<String>,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub admm: AdmmConfig,
    /// Scenario settings other than `n_max`, `window` and `seed`.
    #[serde(default)]
    pub scenario: ScenarioConfig,
}

fn default_reps() -> usize {
    10
}

impl BenchGrid {
    pub fn solvers(&self) -> Result<Vec<Solver>> {
        self.solvers
            .iter()
            .map(|s| {
                s.parse::<Solver>().map(|solver| match solver {
                    Solver::Admm(_) => Solver::Admm(self.admm),
                    other => other,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub version: u32,
    pub solver: String,
    pub t: usize,
    pub n_max: usize,
    pub reps: usize,
    pub completed: usize,
    pub mean_runtime_s: f64,
    pub mean_value: f64,
    pub error: String,
}

impl BenchRow {
    pub fn is_complete(&self) -> bool {
        self.completed == self.reps
    }
}

/// Sampler for one grid cell. Seeds depend on `(seed, t, n_max)` only, so
/// every solver sees the same instances.
pub fn cell_sampler(grid: &BenchGrid, t: usize, n_max: usize) -> ScenarioPairSampler {
    let scenario = ScenarioConfig { n_max, window: t, ..grid.scenario.clone() };
    ScenarioPairSampler {
        x: scenario.clone(),
        y: scenario,
        model: PairModel::Independent,
        seed: mix_seed(mix_seed(grid.seed, t as u64), n_max as u64),
    }
}

/// Mean runtime and value of each solver over every `(T, n_max)` cell.
pub fn benchmark_scaling(grid: &BenchGrid) -> Result<Vec<BenchRow>> {
    if grid.t_values.is_empty() || grid.n_max_values.is_empty() || grid.solvers.is_empty() {
        return Err(MetricError::InvalidParams("benchmark grid is empty".into()));
    }
    if grid.reps == 0 {
        return Err(MetricError::InvalidParams("reps must be positive".into()));
    }
    let params = grid.metric.params()?;
    let solvers = grid.solvers()?;
    let mut rows = Vec::new();
    for &n_max in &grid.n_max_values {
        for &t in &grid.t_values {
            let sampler = cell_sampler(grid, t, n_max);
            let pairs = (0..grid.reps as u64)
                .map(|r| sampler.sample(r))
                .collect::<Result<Vec<_>>>()?;
            for solver in &solvers {
                let mut time = CompensatedSum::default();
                let mut value = CompensatedSum::default();
                let mut completed = 0;
                let mut error = String::new();
                for (x, y) in &pairs {
                    let start = Instant::now();
                    let outcome = compute_metric(x, y, &params, solver);
                    let elapsed = start.elapsed().as_secs_f64();
                    match outcome {
                        Ok(r) => {
                            completed += 1;
                            time.add(elapsed);
                            value.add(r.value);
                        }
                        Err(e) => {
                            if error.is_empty() {
                                error = e.to_string();
                            }
                        }
                    }
                }
                let denom = completed.max(1) as f64;
                rows.push(BenchRow {
                    version: BENCH_CSV_VERSION,
                    solver: solver.name().to_string(),
                    t,
                    n_max,
                    reps: grid.reps,
                    completed,
                    mean_runtime_s: if completed > 0 { time.total() / denom } else { f64::NAN },
                    mean_value: if completed > 0 { value.total() / denom } else { f64::NAN },
                    error,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}
