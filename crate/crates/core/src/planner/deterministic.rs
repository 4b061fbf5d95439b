use crate::error::Result;
use crate::fallmodel::{score_unaided, FallParams};
use crate::predict::mean_rollout;
use crate::room::{Point2, RoomLayout};

use super::objective::robot_log_optimality;
use super::{Breakdown, InterventionCandidate, InterventionPlan, PlanInputs, PlannerConfig};

/// Exhaustive search along the mean prediction for the most likely goal.
///
/// Every state `t` of the mean rollout is a candidate with pose `traj[t]` and
/// time `t`. Its cost is the summed unaided score before `t`, the aided score
/// from `t` on, plus `rho` times robot travel. The cheapest feasible
/// candidate wins; ties go to the earliest step.
pub fn plan_deterministic(inputs: &PlanInputs, cfg: &PlannerConfig) -> Result<InterventionPlan> {
    let goal = inputs.belief.map_goal();
    let traj = mean_rollout(inputs.mixture, inputs.layout, goal, inputs.start, cfg.horizon)?;
    let best = best_along(&traj, inputs.layout, inputs.fall, &inputs.robot_pose, cfg);
    Ok(match best {
        Some((candidate, patient_cost, robot_log)) => InterventionPlan {
            candidate,
            log_objective: -patient_cost + robot_log,
            breakdown: Breakdown {
                per_goal: vec![(goal.to_string(), -patient_cost)],
                patient_log: -patient_cost,
                robot_log,
            },
            feasible: true,
        },
        None => InterventionPlan {
            candidate: InterventionCandidate { pose: inputs.robot_pose, time_index: cfg.horizon },
            log_objective: f64::NEG_INFINITY,
            breakdown: Breakdown {
                per_goal: Vec::new(),
                patient_log: f64::NEG_INFINITY,
                robot_log: f64::NEG_INFINITY,
            },
            feasible: false,
        },
    })
}

/// Cheapest feasible candidate on `traj` as `(candidate, patient cost,
/// robot log-optimality)`.
fn best_along(
    traj: &[Point2],
    layout: &RoomLayout,
    fall: &FallParams,
    robot_pose: &Point2,
    cfg: &PlannerConfig,
) -> Option<(InterventionCandidate, f64, f64)> {
    let unaided: Vec<f64> = traj.iter().map(|s| score_unaided(s, layout, fall)).collect();
    let aided: Vec<f64> = unaided.iter().map(|s| fall.aid(*s)).collect();

    // prefix[t] = sum of unaided[..t], suffix[t] = sum of aided[t..]
    let n = traj.len();
    let mut prefix = vec![0.0; n + 1];
    let mut suffix = vec![0.0; n + 1];
    for t in 0..n {
        prefix[t + 1] = prefix[t] + unaided[t];
    }
    for t in (0..n).rev() {
        suffix[t] = suffix[t + 1] + aided[t];
    }

    let mut best: Option<(InterventionCandidate, f64, f64)> = None;
    for (t, pose) in traj.iter().enumerate() {
        let cand = InterventionCandidate { pose: *pose, time_index: t };
        let robot_log = robot_log_optimality(&cand, robot_pose, cfg);
        if !robot_log.is_finite() || !layout.is_free(pose) {
            continue;
        }
        let patient_cost = prefix[t] + suffix[t];
        if best.map_or(true, |(_, c, r)| patient_cost - robot_log < c - r) {
            best = Some((cand, patient_cost, robot_log));
        }
    }
    best
}
