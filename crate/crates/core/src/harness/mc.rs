use serde::{Deserialize, Serialize};

use super::scenario::{generate_scenario, mix_seed, ScenarioConfig};
use crate::error::Result;
use crate::solver::{compute_metric, Solver};
use crate::trajcore::{MetricParams, TrajectorySet};

/// Source of `(X, Y)` pairs. Sample `i` must depend only on `i`, so the
/// estimate does not depend on evaluation order.
pub trait PairSampler {
    fn sample(&self, index: u64) -> Result<(TrajectorySet, TrajectorySet)>;
}

impl<F> PairSampler for F
where
    F: Fn(u64) -> Result<(TrajectorySet, TrajectorySet)>,
{
    fn sample(&self, index: u64) -> Result<(TrajectorySet, TrajectorySet)> {
        self(index)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairModel {
    /// `X` and `Y` drawn independently from their scenarios.
    #[default]
    Independent,
    /// `Y` is a copy of `X`.
    Identical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPairSampler {
    pub x: ScenarioConfig,
    pub y: ScenarioConfig,
    pub model: PairModel,
    pub seed: u64,
}

impl PairSampler for ScenarioPairSampler {
    fn sample(&self, index: u64) -> Result<(TrajectorySet, TrajectorySet)> {
        let x = generate_scenario(&self.x.with_seed(mix_seed(self.seed, 2 * index)))?;
        let y = match self.model {
            PairModel::Independent => generate_scenario(&self.y.with_seed(mix_seed(self.seed, 2 * index + 1)))?,
            PairModel::Identical => x.clone(),
        };
        Ok((x, y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    /// `(E[d^p])^{1/p}` estimated by the sample mean.
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub skipped: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

/// Neumaier summation.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Mean and delta-method standard error of `m^{1/p}` from samples of `d^p`.
pub fn summarize(raw: &[f64], p: f64) -> (f64, f64) {
    let n = raw.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut s = CompensatedSum::default();
    raw.iter().for_each(|&v| s.add(v));
    let mean = s.total() / n as f64;
    let value = mean.powf(1.0 / p);
    if n < 2 {
        return (value, 0.0);
    }
    let mut sq = CompensatedSum::default();
    raw.iter().for_each(|&v| sq.add((v - mean) * (v - mean)));
    let sd = (sq.total() / (n - 1) as f64).sqrt();
    if sd == 0.0 || mean <= 0.0 {
        return (value, 0.0);
    }
    let se_mean = sd / (n as f64).sqrt();
    (value, mean.powf(1.0 / p - 1.0) * se_mean / p)
}

/// Monte Carlo estimate of the metric between two random trajectory sets.
/// Samples whose evaluation fails are skipped and counted.
pub fn rfs_metric_mc(
    sampler: &dyn PairSampler,
    params: &MetricParams,
    num_samples: usize,
    solver: &Solver,
) -> Result<McEstimate> {
    let mut raw = Vec::with_capacity(num_samples);
    let mut errors = Vec::new();
    for i in 0..num_samples as u64 {
        let outcome = sampler
            .sample(i)
            .and_then(|(x, y)| compute_metric(&x, &y, params, solver));
        match outcome {
            Ok(r) => raw.push(r.raw_cost),
            Err(e) => errors.push(format!("sample {i}: {e}")),
        }
    }
    let (value, std_error) = summarize(&raw, params.p());
    Ok(McEstimate { value, std_error, samples: raw.len(), skipped: errors.len(), errors })
}
