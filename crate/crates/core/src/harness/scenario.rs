use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fallmodel::score_unaided;
use crate::intent::{self, IntentBelief};
use crate::patientgen::{self, PatientGenConfig};
use crate::planner::{self, InterventionCandidate, Method, PlanInputs};
use crate::predict::GpMixture;
use crate::room::Point2;
use crate::seeding::derive_seed;

use super::Experiment;

// Seed streams derived from the scenario seed.
const STREAM_GOAL: u64 = 1;
const STREAM_PATH: u64 = 2;
const STREAM_AIDED_PATH: u64 = 3;
const STREAM_PLAN: u64 = 1 << 32;

/// One simulated episode.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    /// Initial pose name.
    pub pose: String,
    pub method: Method,
    /// Fixed true goal; otherwise drawn from the prior.
    pub true_goal: Option<String>,
    pub seed: u64,
    /// Walker placed at this pose and time from the start, planner disabled.
    pub forced: Option<InterventionCandidate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Intervention {
    /// Walker position when the patient took it.
    pub pose: Point2,
    /// Step at which the patient took it.
    pub time: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub pose: String,
    pub method: Method,
    pub goal: String,
    pub seed: u64,
    /// Realized patient states, one per step.
    pub states: Vec<Point2>,
    /// Walker position at each step.
    pub robot: Vec<Point2>,
    pub scores: Vec<f64>,
    pub aided: Vec<bool>,
    /// Goal ids in belief column order.
    pub goal_ids: Vec<String>,
    /// Belief after each step's observation, ordered as `goal_ids`.
    pub beliefs: Vec<Vec<f64>>,
    pub intervention: Option<Intervention>,
    pub mean_score: f64,
    pub max_score: f64,
}

fn sample_goal(prior: &IntentBelief, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_GOAL));
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = "";
    for (g, p) in prior.iter() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = g;
        if u < acc {
            return g.to_string();
        }
    }
    last.to_string()
}

/// Simulates one episode.
///
/// The patient walks a generated path toward the true goal. Each step the
/// robot observes the patient, updates the goal belief, replans every
/// `replan_stride` steps and drives straight toward the planned pose. The
/// patient takes the walker once the planned time has come and the walker is
/// within `reach_eps`; from then on the remaining path is regenerated without
/// support attraction and scored as aided. The episode ends when the patient
/// reaches the goal or after `max_steps`.
pub fn run_scenario(exp: &Experiment, mixture: &GpMixture, spec: &ScenarioSpec) -> Result<ScenarioResult> {
    let layout = &exp.layout;
    let cfg = &exp.config;
    let start = layout
        .initial_pose(&spec.pose)
        .ok_or_else(|| Error::Config(format!("unknown initial pose `{}`", spec.pose)))?;
    let icfg = exp.intent_config()?;
    let goal = match spec.true_goal.as_ref().or(cfg.scenario.true_goal.as_ref()) {
        Some(g) => g.clone(),
        None => sample_goal(&icfg.prior, spec.seed),
    };
    let goal_at = layout.goal(&goal).ok_or_else(|| Error::UnknownGoal(goal.clone()))?.at;
    let mut path = patientgen::generate(start, &goal, layout, &cfg.patientgen, derive_seed(spec.seed, STREAM_PATH))?.states;

    let mut pcfg = cfg.planner.clone();
    pcfg.method = spec.method;
    let step_len = pcfg.robot_speed * pcfg.dt;

    let mut belief = icfg.prior.clone();
    let goal_ids: Vec<String> = belief.goals().map(str::to_string).collect();
    let mut robot = spec.forced.map_or(layout.robot_dock(), |c| c.pose);
    // Target pose and absolute step of the current plan.
    let mut plan: Option<(Point2, usize)> = spec.forced.map(|c| (c.pose, c.time_index));
    let mut intervention = None;

    let mut out = ScenarioResult {
        pose: spec.pose.clone(),
        method: spec.method,
        goal,
        seed: spec.seed,
        states: Vec::new(),
        robot: Vec::new(),
        scores: Vec::new(),
        aided: Vec::new(),
        goal_ids,
        beliefs: Vec::new(),
        intervention: None,
        mean_score: 0.0,
        max_score: 0.0,
    };

    let mut t = 0;
    loop {
        let p = path[t];
        if t > 0 {
            belief = intent::update(&belief, &path[t - 1], &p, mixture, &icfg)?.belief;
        }
        if intervention.is_none() {
            if let Some((_, at)) = plan {
                if t >= at && robot.distance(&p) <= pcfg.reach_eps {
                    intervention = Some(Intervention { pose: robot, time: t });
                    let aided_cfg = PatientGenConfig { support_weight: 0.0, ..cfg.patientgen };
                    let rest = patientgen::generate_toward(
                        p,
                        goal_at,
                        &out.goal,
                        layout,
                        &aided_cfg,
                        derive_seed(spec.seed, STREAM_AIDED_PATH),
                    )?;
                    path.truncate(t);
                    path.extend(rest.states);
                }
            }
        }
        let unaided = score_unaided(&p, layout, &exp.fall);
        let aided = intervention.is_some();
        out.states.push(p);
        out.robot.push(robot);
        out.scores.push(if aided { exp.fall.aid(unaided) } else { unaided });
        out.aided.push(aided);
        out.beliefs.push(belief.iter().map(|(_, v)| v).collect());

        if t + 1 >= path.len() || t >= cfg.scenario.max_steps {
            break;
        }
        let replan = spec.method.intervenes()
            && spec.forced.is_none()
            && intervention.is_none()
            && t % cfg.scenario.replan_stride == 0;
        if replan {
            let inputs = PlanInputs {
                belief: &belief,
                mixture,
                layout,
                fall: &exp.fall,
                start: p,
                robot_pose: robot,
            };
            let result = planner::plan(&inputs, &pcfg, derive_seed(spec.seed, STREAM_PLAN + t as u64))?;
            plan = result.filter(|r| r.feasible).map(|r| (r.candidate.pose, t + r.candidate.time_index));
        }
        if let (Some((target, _)), None) = (plan, intervention) {
            robot = robot.step_toward(&target, step_len);
        }
        t += 1;
    }

    out.intervention = intervention;
    out.mean_score = out.scores.iter().sum::<f64>() / out.scores.len() as f64;
    out.max_score = out.scores.iter().copied().fold(0.0, f64::max);
    Ok(out)
}
