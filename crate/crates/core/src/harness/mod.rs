//! Scenario generation, Monte Carlo estimation and solver benchmarks.

mod bench;
mod mc;
mod scenario;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::trajcore::MetricParams;

pub use bench::{benchmark_scaling, cell_sampler, write_bench_csv, BenchGrid, BenchRow, BENCH_CSV_VERSION};
pub use mc::{rfs_metric_mc, summarize, McEstimate, PairModel, PairSampler, ScenarioPairSampler};
pub use scenario::{generate_scenario, mix_seed, ScenarioConfig};

/// Metric parameters as read from configuration files. Defaults to the
/// simulation set-up `c = 1`, `γ = 10`, `p = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub c: f64,
    pub gamma: f64,
    pub p: f64,
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec { c: 1.0, gamma: 10.0, p: 2.0 }
    }
}

impl MetricSpec {
    pub fn params(&self) -> Result<MetricParams> {
        MetricParams::new(self.c, self.gamma, self.p)
    }
}
