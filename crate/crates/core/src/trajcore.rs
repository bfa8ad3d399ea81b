//! Trajectories, sets of trajectories and the single-time-step base metric.
//!
//! Time steps are 1-based: a trajectory with `start = ω` and `ν` states is
//! alive on `ω..=ω+ν-1`. A set carries the evaluation window `T`; every
//! member must end at or before `T`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{MetricError, Result, Violation};

/// State of a single trajectory at one time step: empty or a single vector.
pub type PointSetAtTime<'a> = Option<&'a [f64]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    start: usize,
    states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(start: usize, states: Vec<Vec<f64>>) -> Result<Self> {
        if start < 1 {
            return Err(MetricError::Domain(format!(
                "trajectory start {start} is before time step 1"
            )));
        }
        let Some(first) = states.first() else {
            return Err(MetricError::Domain("trajectory has no states".into()));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(MetricError::Domain("state vectors must be non-empty".into()));
        }
        if let Some(bad) = states.iter().position(|s| s.len() != dim) {
            return Err(MetricError::Domain(format!(
                "state {bad} has dimension {} but the first state has {dim}",
                states[bad].len()
            )));
        }
        Ok(Trajectory { start, states })
    }

    /// Start time ω.
    pub fn start(&self) -> usize {
        self.start
    }

    /// Number of states ν.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Last time step the trajectory is alive, `ω + ν - 1`.
    pub fn end(&self) -> usize {
        self.start + self.states.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    /// State at time `k`, without window checks.
    pub fn state_at(&self, k: usize) -> PointSetAtTime<'_> {
        if k >= self.start && k < self.start + self.states.len() {
            Some(&self.states[k - self.start])
        } else {
            None
        }
    }

    /// Same trajectory with every state mapped through `f`.
    pub fn map_states(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Trajectory {
        Trajectory {
            start: self.start,
            states: self.states.iter().map(|s| f(s)).collect(),
        }
    }

    /// Same states, new start time.
    pub fn with_start(&self, start: usize) -> Trajectory {
        Trajectory { start, states: self.states.clone() }
    }
}

/// `τ^k(X)`: the state of `traj` at time `k` within a window of length `window`.
pub fn tau(traj: &Trajectory, k: usize, window: usize) -> Result<PointSetAtTime<'_>> {
    if k < 1 || k > window {
        return Err(MetricError::Domain(format!(
            "time step {k} outside window [1, {window}]"
        )));
    }
    Ok(traj.state_at(k))
}

/// A finite, ordered collection of trajectories observed over `1..=window`.
///
/// Order matters only for reporting assignments; metric values do not depend
/// on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySet {
    window: usize,
    state_dim: usize,
    trajectories: Vec<Trajectory>,
}

impl TrajectorySet {
    pub fn new(window: usize, state_dim: usize, trajectories: Vec<Trajectory>) -> Result<Self> {
        let set = TrajectorySet { window, state_dim, trajectories };
        set.validate()?;
        Ok(set)
    }

    pub fn empty(window: usize, state_dim: usize) -> Result<Self> {
        Self::new(window, state_dim, Vec::new())
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let violations = validate_set(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(MetricError::Validation(violations))
        }
    }

    /// States of all trajectories at time `k`, in set order.
    pub fn states_at(&self, k: usize) -> Vec<PointSetAtTime<'_>> {
        self.trajectories.iter().map(|t| t.state_at(k)).collect()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let set: TrajectorySet = serde_json::from_str(s)?;
        set.validate()?;
        Ok(set)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    /// Set with trajectories reordered by `order` (a permutation of indices).
    pub fn permuted(&self, order: &[usize]) -> TrajectorySet {
        TrajectorySet {
            window: self.window,
            state_dim: self.state_dim,
            trajectories: order.iter().map(|&i| self.trajectories[i].clone()).collect(),
        }
    }

    /// Mirror the time axis: step `k` becomes `window + 1 - k`.
    pub fn time_reversed(&self) -> TrajectorySet {
        let trajectories = self
            .trajectories
            .iter()
            .map(|t| {
                let mut states = t.states.clone();
                states.reverse();
                Trajectory { start: self.window + 1 - t.end(), states }
            })
            .collect();
        TrajectorySet { window: self.window, state_dim: self.state_dim, trajectories }
    }

    /// Shift every trajectory by `offset` steps and widen the window to `window`.
    pub fn time_shifted(&self, offset: usize, window: usize) -> Result<TrajectorySet> {
        let trajectories = self
            .trajectories
            .iter()
            .map(|t| t.with_start(t.start + offset))
            .collect();
        TrajectorySet::new(window, self.state_dim, trajectories)
    }

    pub fn translated(&self, shift: &[f64]) -> TrajectorySet {
        let trajectories = self
            .trajectories
            .iter()
            .map(|t| t.map_states(|s| s.iter().zip(shift).map(|(a, b)| a + b).collect()))
            .collect();
        TrajectorySet { window: self.window, state_dim: self.state_dim, trajectories }
    }

    /// Union of two sets over the same window.
    pub fn union(&self, other: &TrajectorySet) -> Result<TrajectorySet> {
        check_compatible(self, other)?;
        let mut trajectories = self.trajectories.clone();
        trajectories.extend(other.trajectories.iter().cloned());
        Ok(TrajectorySet { window: self.window, state_dim: self.state_dim, trajectories })
    }
}

/// Report every invariant violation of `set`; empty means well-formed.
pub fn validate_set(set: &TrajectorySet) -> Vec<Violation> {
    let mut out = Vec::new();
    if set.window == 0 {
        out.push(Violation::ZeroWindow);
    }
    if set.state_dim == 0 {
        out.push(Violation::ZeroStateDim);
    }
    for (index, t) in set.trajectories.iter().enumerate() {
        if t.states.is_empty() {
            out.push(Violation::EmptyStates { index });
        }
        if t.start < 1 {
            out.push(Violation::StartBeforeOne { index, start: t.start });
        }
        if !t.states.is_empty() {
            let end = t.start + t.states.len() - 1;
            if end > set.window {
                out.push(Violation::ExceedsWindow { index, end, window: set.window });
            }
        }
        for (step, s) in t.states.iter().enumerate() {
            if s.len() != set.state_dim {
                out.push(Violation::StateDimMismatch {
                    index,
                    step,
                    expected: set.state_dim,
                    found: s.len(),
                });
            } else if s.iter().any(|v| !v.is_finite()) {
                out.push(Violation::NonFiniteState { index, step });
            }
        }
    }
    out
}

pub(crate) fn check_compatible(x: &TrajectorySet, y: &TrajectorySet) -> Result<()> {
    if x.window != y.window {
        return Err(MetricError::Domain(format!(
            "sets have different windows ({} vs {})",
            x.window, y.window
        )));
    }
    if x.state_dim != y.state_dim && !x.is_empty() && !y.is_empty() {
        return Err(MetricError::Domain(format!(
            "sets have different state dimensions ({} vs {})",
            x.state_dim, y.state_dim
        )));
    }
    Ok(())
}

/// Metric on the single-target state space used inside the base metric.
#[derive(Clone, Default)]
pub enum BaseDistance {
    #[default]
    Euclidean,
    /// Any metric on ℝ^N supplied as a pure function.
    Custom {
        name: String,
        f: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
    },
}

impl BaseDistance {
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        BaseDistance::Custom { name: name.into(), f: Arc::new(f) }
    }

    pub fn name(&self) -> &str {
        match self {
            BaseDistance::Euclidean => "euclidean",
            BaseDistance::Custom { name, .. } => name,
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            BaseDistance::Euclidean => x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            BaseDistance::Custom { f, .. } => f(x, y),
        }
    }
}

impl fmt::Debug for BaseDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BaseDistance({})", self.name())
    }
}

/// Cut-off `c`, switch penalty `gamma`, exponent `p` and the base distance.
#[derive(Debug, Clone)]
pub struct MetricParams {
    c: f64,
    gamma: f64,
    p: f64,
    base: BaseDistance,
}

impl MetricParams {
    pub fn new(c: f64, gamma: f64, p: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(MetricError::InvalidParams(format!("c must be positive, got {c}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(MetricError::InvalidParams(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(MetricError::InvalidParams(format!(
                "p must satisfy 1 <= p < inf, got {p}"
            )));
        }
        Ok(MetricParams { c, gamma, p, base: BaseDistance::Euclidean })
    }

    pub fn with_base(mut self, base: BaseDistance) -> Self {
        self.base = base;
        self
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn base(&self) -> &BaseDistance {
        &self.base
    }

    /// `c^p / 2`: p-th power of the cost of a state paired with nothing.
    pub fn unmatched_cost(&self) -> f64 {
        self.c.powf(self.p) / 2.0
    }

    /// `γ^p / 2`: p-th power cost of a half switch.
    pub fn half_switch_cost(&self) -> f64 {
        self.gamma.powf(self.p) / 2.0
    }

    /// p-th power of the base metric between two point sets.
    pub(crate) fn base_cost_p(&self, x: PointSetAtTime<'_>, y: PointSetAtTime<'_>) -> f64 {
        match (x, y) {
            (Some(a), Some(b)) => self.c.min(self.base.eval(a, b)).powf(self.p),
            (None, None) => 0.0,
            _ => self.unmatched_cost(),
        }
    }

    pub fn echo(&self) -> ParamsEcho {
        ParamsEcho {
            c: self.c,
            gamma: self.gamma,
            p: self.p,
            base: self.base.name().to_string(),
        }
    }
}

/// Serializable copy of the parameters, written alongside every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsEcho {
    pub c: f64,
    pub gamma: f64,
    pub p: f64,
    pub base: String,
}

/// Base metric between two point sets of cardinality at most one.
pub fn base_distance(
    x: PointSetAtTime<'_>,
    y: PointSetAtTime<'_>,
    params: &MetricParams,
) -> Result<f64> {
    match (x, y) {
        (Some(a), Some(b)) => {
            if a.len() != b.len() {
                return Err(MetricError::Domain(format!(
                    "state dimensions differ ({} vs {})",
                    a.len(),
                    b.len()
                )));
            }
            Ok(params.c.min(params.base.eval(a, b)))
        }
        (None, None) => Ok(0.0),
        _ => Ok(params.c / 2f64.powf(1.0 / params.p)),
    }
}
