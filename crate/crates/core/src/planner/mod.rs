//! Intervention planning.
//!
//! A candidate intervention is a pose and a number of steps from now at which
//! the robot offers the walker. Its log-probability of optimality is the sum
//! of a patient term, computed from predicted trajectories and per-step fall
//! score statistics, and a robot term that penalizes travel distance.

mod cem;
mod deterministic;
mod objective;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fallmodel::FallParams;
use crate::intent::IntentBelief;
use crate::predict::GpMixture;
use crate::risk::RiskConfig;
use crate::room::{Point2, RoomLayout};

pub use cem::{cem_maximize, elite_count, kl_diag, CemConfig, CemOutcome, DiagGaussian};
pub use deterministic::plan_deterministic;
pub use objective::{
    objective, patient_log_optimality, robot_log_optimality, step_penalty, GoalScores, PlanningProblem,
};

/// How the robot chooses an intervention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Never intervene.
    None,
    /// Exhaustive search along the mean prediction for the most likely goal.
    Deterministic,
    /// CEM on the expected fall score only.
    Expected,
    /// CEM on CVaR only.
    Cvar,
    /// CEM on expected score plus `beta` times CVaR.
    ExpectedCvar,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::None,
        Method::Deterministic,
        Method::Expected,
        Method::Cvar,
        Method::ExpectedCvar,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Deterministic => "deterministic",
            Method::Expected => "expected",
            Method::Cvar => "cvar",
            Method::ExpectedCvar => "expected_cvar",
        }
    }

    pub fn intervenes(&self) -> bool {
        *self != Method::None
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (expected one of none, deterministic, expected, cvar, expected_cvar)")))
    }
}

/// How per-step optimalities combine over time for one goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// `exp(-sum_t penalty_t)`: a product of per-step probabilities.
    #[default]
    Product,
    /// `sum_t exp(-penalty_t)`.
    LiteralSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterventionCandidate {
    pub pose: Point2,
    /// Steps from now.
    pub time_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub method: Method,
    /// Weight of robot travel distance.
    pub rho: f64,
    /// Distance (m) within which the patient can take the walker.
    pub reach_eps: f64,
    /// m/s
    pub robot_speed: f64,
    /// Seconds per step.
    pub dt: f64,
    /// Prediction horizon in steps.
    pub horizon: usize,
    /// Sampled trajectories per goal.
    pub rollouts: usize,
    pub risk: RiskConfig,
    pub aggregation: Aggregation,
    pub cem: CemConfig,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            method: Method::ExpectedCvar,
            rho: 0.05,
            reach_eps: 0.4,
            robot_speed: 0.8,
            dt: 0.4,
            horizon: 40,
            rollouts: 50,
            risk: RiskConfig::default(),
            aggregation: Aggregation::Product,
            cem: CemConfig::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.rho >= 0.0) || !(self.reach_eps >= 0.0) {
            return bad("planner.rho and planner.reach_eps must be >= 0".into());
        }
        if !(self.robot_speed > 0.0) || !(self.dt > 0.0) {
            return bad("planner.robot_speed and planner.dt must be positive".into());
        }
        if self.horizon < 1 || self.rollouts < 1 {
            return bad("planner.horizon and planner.rollouts must be >= 1".into());
        }
        self.risk.validate()?;
        self.cem.validate()
    }
}

/// Log-optimality split by source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    /// Per goal: log weight plus that goal's patient log-optimality.
    pub per_goal: Vec<(String, f64)>,
    /// Log-sum-exp of `per_goal`.
    pub patient_log: f64,
    pub robot_log: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionPlan {
    pub candidate: InterventionCandidate,
    /// `patient_log + robot_log`; `-inf` when infeasible.
    pub log_objective: f64,
    pub breakdown: Breakdown,
    pub feasible: bool,
}

/// Everything a planning call reads.
#[derive(Debug, Clone, Copy)]
pub struct PlanInputs<'a> {
    pub belief: &'a IntentBelief,
    pub mixture: &'a GpMixture,
    pub layout: &'a RoomLayout,
    pub fall: &'a FallParams,
    /// Current patient state.
    pub start: Point2,
    pub robot_pose: Point2,
}

/// Plans with `cfg.method`; `None` for [`Method::None`].
pub fn plan(inputs: &PlanInputs, cfg: &PlannerConfig, seed: u64) -> Result<Option<InterventionPlan>> {
    match cfg.method {
        Method::None => Ok(None),
        Method::Deterministic => plan_deterministic(inputs, cfg).map(Some),
        _ => plan_cem(inputs, cfg, seed).map(Some),
    }
}

/// Floor (m) on the positional std of the default initial distribution.
pub const INIT_MIN_SPREAD: f64 = 0.5;

/// CEM over `(x, y, I)` on a [`PlanningProblem`] built with `seed`.
///
/// Runs `cfg.cem.restarts` independent searches and keeps the best point.
/// Even-numbered runs start from the configured initial distribution, or by
/// default from the spread of the predicted positions; odd-numbered runs
/// start from the whole room.
pub fn plan_cem(inputs: &PlanInputs, cfg: &PlannerConfig, seed: u64) -> Result<InterventionPlan> {
    let problem = PlanningProblem::new(inputs, cfg, seed)?;
    let spread = problem.predicted_spread(INIT_MIN_SPREAD);
    let focused = DiagGaussian {
        mean: cfg.cem.init_mean.unwrap_or(spread.mean),
        std: cfg.cem.init_std.unwrap_or(spread.std),
    };
    let b = *inputs.layout.bounds();
    let h = problem.horizon() as f64;
    let room = DiagGaussian {
        mean: [b.center().x, b.center().y, 0.5 * h],
        std: [0.5 * b.width(), 0.5 * b.height(), 0.5 * h],
    };
    let mut best: Option<([f64; 3], f64)> = None;
    for r in 0..cfg.cem.restarts {
        let init = if r % 2 == 0 { focused } else { room };
        let outcome = cem_maximize(
            |z| {
                let cand = problem.candidate_from(z);
                let v = problem.log_objective(&cand);
                v.is_finite()
                    .then(|| ([cand.pose.x, cand.pose.y, cand.time_index as f64], v))
            },
            init,
            &cfg.cem,
            crate::seeding::derive_seed(seed, 0xCE + r as u64),
        );
        if let Some((z, v)) = outcome.best {
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((z, v));
            }
        }
    }
    Ok(match best {
        Some((z, _)) => problem.evaluate(&problem.candidate_from(&z)),
        None => problem.infeasible_plan(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{train_mixture, training_data, Experiment};

    fn with_inputs<R>(f: impl FnOnce(&PlanInputs) -> R) -> R {
        let exp = Experiment::default_assets();
        let mix = train_mixture(&exp, &training_data(&exp, 4).unwrap()).unwrap();
        let belief = IntentBelief::uniform(exp.layout.goal_ids()).unwrap();
        let inputs = PlanInputs {
            belief: &belief,
            mixture: &mix,
            layout: &exp.layout,
            fall: &exp.fall,
            start: exp.layout.initial_pose("chair").unwrap(),
            robot_pose: exp.layout.robot_dock(),
        };
        f(&inputs)
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(format!("{m:>6}").trim(), m.as_str());
        }
        assert!("cvar ".parse::<Method>().is_err());
        assert!(!Method::None.intervenes() && Method::Cvar.intervenes());
    }

    #[test]
    fn cem_plan_is_consistent_and_reproducible() {
        with_inputs(|inputs| {
            let cfg = PlannerConfig { rollouts: 20, ..PlannerConfig::default() };
            let a = plan(inputs, &cfg, 8).unwrap().unwrap();
            assert_eq!(Some(a.clone()), plan(inputs, &cfg, 8).unwrap());
            assert!(a.feasible);
            let again = objective(&a.candidate, inputs, &cfg, 8).unwrap();
            assert!((a.log_objective - again).abs() < 1e-9);
            let sum = a.breakdown.patient_log + a.breakdown.robot_log;
            assert!((a.log_objective - sum).abs() < 1e-12);
            assert!(plan(inputs, &PlannerConfig { method: Method::None, ..cfg }, 8).unwrap().is_none());
        });
    }

    #[test]
    fn samples_snap_to_reachable_times() {
        with_inputs(|inputs| {
            let cfg = PlannerConfig { rollouts: 5, ..PlannerConfig::default() };
            let problem = PlanningProblem::new(inputs, &cfg, 1).unwrap();
            let dock = inputs.robot_pose;
            let c = problem.candidate_from(&[dock.x, dock.y, -3.2]);
            assert_eq!(c.time_index, 0);
            // 1.6 m at 0.32 m per step needs 5 steps.
            let c = problem.candidate_from(&[dock.x - 1.6, dock.y, 2.0]);
            assert_eq!(c.time_index, 5);
            assert!(problem.log_objective(&c).is_finite());
            let c = problem.candidate_from(&[dock.x - 1.6, dock.y, 9.4]);
            assert_eq!(c.time_index, 9);
            let c = problem.candidate_from(&[100.0, -100.0, 1e9]);
            assert!(inputs.layout.bounds().contains(&c.pose));
            assert_eq!(c.time_index, cfg.horizon);
        });
    }

    #[test]
    fn initial_spread_covers_predictions() {
        with_inputs(|inputs| {
            let cfg = PlannerConfig { rollouts: 5, ..PlannerConfig::default() };
            let problem = PlanningProblem::new(inputs, &cfg, 1).unwrap();
            let d = problem.predicted_spread(INIT_MIN_SPREAD);
            assert!(inputs.layout.bounds().contains(&Point2::new(d.mean[0], d.mean[1])));
            assert!(d.std[0] >= INIT_MIN_SPREAD && d.std[1] >= INIT_MIN_SPREAD);
            assert_eq!([d.mean[2], d.std[2]], [20.0, 20.0]);
            let huge = problem.predicted_spread(50.0);
            assert_eq!([huge.std[0], huge.std[1]], [50.0, 50.0]);
        });
    }
}
