//! Risk-aware intervention planning for an assistive robot.
//!
//! A patient's motion through a room is predicted with a per-goal mixture of
//! Gaussian processes, the predicted trajectories are scored by a fall-risk
//! model, and the robot picks when and where to hand over a walker by
//! maximizing a probability-of-optimality objective built from the expected
//! fall score and its conditional value at risk.
//!
//! Module map:
//!
//! * [`room`] room geometry and spatial queries
//! * [`gp`] Gaussian-process regression on one-step motion deltas
//! * [`intent`] recursive Bayesian goal inference
//! * [`predict`] Monte Carlo trajectory rollouts from the GP mixture
//! * [`risk`] expected value, worst case, VaR and CVaR on weighted samples
//! * [`fallmodel`] parametric fall-score surrogate
//! * [`patientgen`] optimization-based synthetic patient trajectories
//! * [`planner`] objective assembly, deterministic search and CEM
//! * [`harness`] configuration, scenario simulation and batch evaluation

pub mod error;
pub mod fallmodel;
pub mod gp;
pub mod harness;
pub mod intent;
pub mod patientgen;
pub mod planner;
pub mod predict;
pub mod risk;
pub mod room;
pub mod seeding;

pub use error::{Error, Result};
pub use room::{Point2, Rect, RoomLayout, Trajectory};
