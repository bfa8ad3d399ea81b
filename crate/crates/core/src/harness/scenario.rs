use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{MetricError, Result};
use crate::trajcore::{Trajectory, TrajectorySet};

/// Random trajectory sets: a uniform number of targets, uniform start times,
/// Gaussian births around uniformly drawn means, geometric lifetimes and a
/// random-walk motion model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_max: usize,
    pub window: usize,
    pub state_dim: usize,
    pub birth_mean_low: Vec<f64>,
    pub birth_mean_high: Vec<f64>,
    /// Diagonal of the birth covariance.
    pub birth_var: Vec<f64>,
    pub survival_prob: f64,
    /// Diagonal of the process noise covariance.
    pub process_var: Vec<f64>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_max: 4,
            window: 20,
            state_dim: 2,
            birth_mean_low: vec![0.0, 0.0],
            birth_mean_high: vec![20.0, 20.0],
            birth_var: vec![5.0, 5.0],
            survival_prob: 0.999,
            process_var: vec![0.1, 0.01],
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn new(n_max: usize, window: usize, seed: u64) -> Self {
        ScenarioConfig { n_max, window, seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MetricError::InvalidParams(msg));
        if self.n_max == 0 {
            return bad("n_max must be at least 1".into());
        }
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        if self.state_dim == 0 {
            return bad("state_dim must be at least 1".into());
        }
        if !(self.survival_prob > 0.0 && self.survival_prob <= 1.0) {
            return bad(format!("survival_prob must be in (0, 1], got {}", self.survival_prob));
        }
        for (name, v) in [
            ("birth_mean_low", &self.birth_mean_low),
            ("birth_mean_high", &self.birth_mean_high),
            ("birth_var", &self.birth_var),
            ("process_var", &self.process_var),
        ] {
            if v.len() != self.state_dim {
                return bad(format!("{name} has {} entries, state_dim is {}", v.len(), self.state_dim));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return bad(format!("{name} has non-finite entries"));
            }
        }
        if self.birth_var.iter().chain(&self.process_var).any(|&v| v < 0.0) {
            return bad("variances must be nonnegative".into());
        }
        if self.birth_mean_low.iter().zip(&self.birth_mean_high).any(|(a, b)| a > b) {
            return bad("birth_mean_low exceeds birth_mean_high".into());
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ScenarioConfig { seed, ..self.clone() }
    }
}

/// SplitMix64 finalizer, used to derive independent seeds from one root.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream 0 draws the cardinality, stream `i + 1` the `i`-th trajectory, so
/// each trajectory depends only on the seed and its index.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, mean: f64, var: f64) -> f64 {
    if var == 0.0 {
        return mean;
    }
    Normal::new(mean, var.sqrt()).expect("finite variance").sample(rng)
}

pub fn generate_scenario(config: &ScenarioConfig) -> Result<TrajectorySet> {
    config.validate()?;
    let n = stream(config.seed, 0).random_range(1..=config.n_max);
    let trajectories = (0..n)
        .map(|i| generate_trajectory(config, &mut stream(config.seed, i as u64 + 1)))
        .collect::<Result<Vec<_>>>()?;
    TrajectorySet::new(config.window, config.state_dim, trajectories)
}

fn generate_trajectory(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Trajectory> {
    let start = rng.random_range(1..=config.window);
    let mut state: Vec<f64> = (0..config.state_dim)
        .map(|d| {
            let (lo, hi) = (config.birth_mean_low[d], config.birth_mean_high[d]);
            let mean = if hi > lo { rng.random_range(lo..hi) } else { lo };
            gaussian(rng, mean, config.birth_var[d])
        })
        .collect();
    let mut states = vec![state.clone()];
    for _ in start..config.window {
        if config.survival_prob < 1.0 && !rng.random_bool(config.survival_prob) {
            break;
        }
        for (d, s) in state.iter_mut().enumerate() {
            *s = gaussian(rng, *s, config.process_var[d]);
        }
        states.push(state.clone());
    }
    Trajectory::new(start, states)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_set() {
        let c = ScenarioConfig::new(4, 10, 42);
        assert_eq!(generate_scenario(&c).unwrap(), generate_scenario(&c).unwrap());
        assert_ne!(generate_scenario(&c).unwrap(), generate_scenario(&c.with_seed(43)).unwrap());
    }

    #[test]
    fn no_death_runs_to_the_end() {
        let c = ScenarioConfig { survival_prob: 1.0, ..ScenarioConfig::new(3, 5, 7) };
        for seed in 0..50 {
            let set = generate_scenario(&c.with_seed(seed)).unwrap();
            for t in set.trajectories() {
                assert_eq!(t.end(), 5);
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(generate_scenario(&ScenarioConfig { n_max: 0, ..Default::default() }).is_err());
        assert!(generate_scenario(&ScenarioConfig { survival_prob: 0.0, ..Default::default() }).is_err());
        assert!(generate_scenario(&ScenarioConfig { state_dim: 3, ..Default::default() }).is_err());
    }

    #[test]
    fn mixed_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| mix_seed(5, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
