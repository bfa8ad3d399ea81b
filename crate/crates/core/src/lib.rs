//! Metrics on finite sets of trajectories for evaluating multi-target
//! trackers.
//!
//! Three routes compute the distance between a ground-truth set and an
//! estimated set:
//!
//! * [`exact`]: the multi-dimensional assignment metric, solved exactly by
//!   Viterbi over assignment vectors (small sets only).
//! * [`lp`]: its linear-programming relaxation, itself a metric and a lower
//!   bound on the exact value, solved with an in-crate revised simplex.
//! * [`admm`]: the same relaxation solved by consensus ADMM whose cost per
//!   iteration grows linearly with the window length.
//!
//! [`harness`] generates random scenarios, estimates the metric between
//! random sets by Monte Carlo, and times the solvers.

pub mod admm;
pub mod error;
pub mod exact;
pub mod harness;
pub mod lp;
pub mod solver;
pub mod trajcore;

pub use admm::{admm_metric, AdmmConfig, AdmmResult, AdmmState};
pub use error::{MetricError, Result, Violation};
pub use exact::{
    brute_force_metric, exact_metric, AssignmentVector, CostMatrix, ExactConfig, ExactResult,
};
pub use lp::{lp_metric, CostBreakdown, LpResult, WeightMatrix};
pub use solver::{compute_metric, MetricResult, Solver};
pub use trajcore::{
    base_distance, tau, validate_set, BaseDistance, MetricParams, Trajectory, TrajectorySet,
};
