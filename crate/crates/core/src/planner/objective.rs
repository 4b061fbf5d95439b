use crate::error::Result;
use crate::fallmodel::{score_unaided, FallParams};
use crate::predict::{predict_all, TrajectoryEnsemble};
use crate::risk::uniform_mean_cvar;
use crate::room::{Point2, RoomLayout};

use super::cem::DiagGaussian;
use super::{Aggregation, Breakdown, InterventionCandidate, InterventionPlan, Method, PlanInputs, PlannerConfig};

/// Penalty for one step given the mean and CVaR of its fall scores.
pub fn step_penalty(cfg: &PlannerConfig, mean: f64, cvar: f64) -> f64 {
    match cfg.method {
        Method::Cvar => cvar,
        Method::ExpectedCvar => mean + cfg.risk.beta * cvar,
        Method::None | Method::Deterministic | Method::Expected => mean,
    }
}

/// `-rho * distance` if the robot covers the distance in `time_index` steps,
/// `-inf` otherwise.
pub fn robot_log_optimality(cand: &InterventionCandidate, robot_pose: &Point2, cfg: &PlannerConfig) -> f64 {
    let dist = robot_pose.distance(&cand.pose);
    let range = cand.time_index as f64 * cfg.dt * cfg.robot_speed;
    if dist <= range + 1e-9 {
        -(cfg.rho * dist)
    } else {
        f64::NEG_INFINITY
    }
}

/// Sampled trajectories for one goal with their fall scores precomputed.
#[derive(Debug, Clone)]
pub struct GoalScores {
    goal: String,
    weight: f64,
    states: Vec<Vec<Point2>>,
    unaided: Vec<Vec<f64>>,
    aided: Vec<Vec<f64>>,
}

impl GoalScores {
    pub fn from_ensemble(e: &TrajectoryEnsemble, layout: &RoomLayout, fall: &FallParams) -> Self {
        assert!(!e.is_empty(), "empty trajectory ensemble");
        let unaided: Vec<Vec<f64>> = e
            .trajectories
            .iter()
            .map(|tr| tr.iter().map(|s| score_unaided(s, layout, fall)).collect())
            .collect();
        let aided = unaided.iter().map(|row| row.iter().map(|s| fall.aid(*s)).collect()).collect();
        Self {
            goal: e.goal.clone(),
            weight: e.weight,
            states: e.trajectories.clone(),
            unaided,
            aided,
        }
    }

    pub fn goal(&self) -> &str {
        &self.goal
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Number of states per trajectory.
    pub fn steps(&self) -> usize {
        self.states[0].len()
    }

    /// Log-optimality of this goal alone (weight not included).
    fn log_optimality(&self, cand: &InterventionCandidate, cfg: &PlannerConfig, buf: &mut Vec<f64>) -> f64 {
        let grab: Vec<usize> = self
            .states
            .iter()
            .map(|tr| intervention_step(tr, cand, cfg.reach_eps))
            .collect();
        let mut total = 0.0;
        let mut sum_exp = 0.0;
        for t in 0..self.steps() {
            buf.clear();
            buf.extend(grab.iter().enumerate().map(|(k, g)| {
                if t < *g {
                    self.unaided[k][t]
                } else {
                    self.aided[k][t]
                }
            }));
            let (mean, cvar) = uniform_mean_cvar(buf, cfg.risk.tail);
            let p = step_penalty(cfg, mean, cvar);
            total += p;
            sum_exp += (-p).exp();
        }
        match cfg.aggregation {
            Aggregation::Product => -total,
            Aggregation::LiteralSum => sum_exp.ln(),
        }
    }
}

/// First step at or after `cand.time_index` at which `states` is within
/// `reach_eps` of the candidate pose; `states.len()` if never.
fn intervention_step(states: &[Point2], cand: &InterventionCandidate, reach_eps: f64) -> usize {
    let r2 = reach_eps * reach_eps;
    (cand.time_index..states.len())
        .find(|t| states[*t].distance_sq(&cand.pose) <= r2)
        .unwrap_or(states.len())
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn patient_terms(goals: &[GoalScores], cand: &InterventionCandidate, cfg: &PlannerConfig) -> (Vec<(String, f64)>, f64) {
    let mut buf = Vec::new();
    let per_goal: Vec<(String, f64)> = goals
        .iter()
        .map(|g| {
            let v = if g.weight > 0.0 {
                g.weight.ln() + g.log_optimality(cand, cfg, &mut buf)
            } else {
                f64::NEG_INFINITY
            };
            (g.goal.clone(), v)
        })
        .collect();
    let total = log_sum_exp(per_goal.iter().map(|(_, v)| *v));
    (per_goal, total)
}

/// Log probability that the patient's future is optimal given the
/// intervention, mixing goals by ensemble weight.
pub fn patient_log_optimality(
    ensembles: &[TrajectoryEnsemble],
    cand: &InterventionCandidate,
    layout: &RoomLayout,
    fall: &FallParams,
    cfg: &PlannerConfig,
) -> f64 {
    assert!(!ensembles.is_empty(), "no trajectory ensembles");
    let goals: Vec<GoalScores> = ensembles.iter().map(|e| GoalScores::from_ensemble(e, layout, fall)).collect();
    patient_terms(&goals, cand, cfg).1
}

/// One planning call's frozen predictions. Every candidate is scored against
/// the same sampled trajectories.
#[derive(Debug, Clone)]
pub struct PlanningProblem<'a> {
    layout: &'a RoomLayout,
    goals: Vec<GoalScores>,
    robot_pose: Point2,
    cfg: PlannerConfig,
}

impl<'a> PlanningProblem<'a> {
    pub fn new(inputs: &PlanInputs<'a>, cfg: &PlannerConfig, seed: u64) -> Result<Self> {
        let ensembles = predict_all(
            inputs.mixture,
            inputs.layout,
            inputs.belief,
            inputs.start,
            cfg.horizon,
            cfg.rollouts,
            seed,
        )?;
        Ok(Self::from_ensembles(&ensembles, inputs.layout, inputs.fall, inputs.robot_pose, cfg))
    }

    pub fn from_ensembles(
        ensembles: &[TrajectoryEnsemble],
        layout: &'a RoomLayout,
        fall: &FallParams,
        robot_pose: Point2,
        cfg: &PlannerConfig,
    ) -> Self {
        assert!(!ensembles.is_empty(), "no trajectory ensembles");
        Self {
            layout,
            goals: ensembles.iter().map(|e| GoalScores::from_ensemble(e, layout, fall)).collect(),
            robot_pose,
            cfg: cfg.clone(),
        }
    }

    pub fn goals(&self) -> &[GoalScores] {
        &self.goals
    }

    /// Largest meaningful time index.
    pub fn horizon(&self) -> usize {
        self.goals[0].steps() - 1
    }

    /// Snaps a continuous `(x, y, I)` sample to a candidate: position clamped
    /// to the bounds, time rounded, raised to the robot's earliest arrival
    /// step when that is within the horizon, and clamped to `[0, horizon]`.
    pub fn candidate_from(&self, z: &[f64; 3]) -> InterventionCandidate {
        let pose = self.layout.clamp_to_bounds(&Point2::new(z[0], z[1]));
        let h = self.horizon();
        let mut i = if z[2].is_finite() { z[2].round().clamp(0.0, h as f64) as usize } else { 0 };
        let earliest = self.earliest_arrival(&pose);
        if earliest <= h {
            i = i.max(earliest);
        }
        InterventionCandidate { pose, time_index: i }
    }

    /// Fewest steps the robot needs to reach `pose`.
    pub fn earliest_arrival(&self, pose: &Point2) -> usize {
        let per_step = self.cfg.dt * self.cfg.robot_speed;
        let steps = (self.robot_pose.distance(pose) - 1e-9) / per_step;
        steps.ceil().clamp(0.0, usize::MAX as f64) as usize
    }

    /// Belief-weighted mean and std of the predicted positions, with the
    /// time axis centered on half the horizon. Positional std is at least
    /// `min_spread`.
    pub fn predicted_spread(&self, min_spread: f64) -> DiagGaussian {
        let (mut w_sum, mut m, mut sq) = (0.0, [0.0; 2], [0.0; 2]);
        for g in &self.goals {
            let n = (g.states.len() * g.steps()) as f64;
            for p in g.states.iter().flatten() {
                let w = g.weight / n;
                w_sum += w;
                m[0] += w * p.x;
                m[1] += w * p.y;
                sq[0] += w * p.x * p.x;
                sq[1] += w * p.y * p.y;
            }
        }
        let h = self.horizon() as f64;
        if !(w_sum > 0.0) {
            let b = self.layout.bounds();
            return DiagGaussian {
                mean: [b.center().x, b.center().y, 0.5 * h],
                std: [0.5 * b.width(), 0.5 * b.height(), 0.5 * h],
            };
        }
        let mut out = DiagGaussian { mean: [0.0, 0.0, 0.5 * h], std: [0.0, 0.0, 0.5 * h] };
        for d in 0..2 {
            let mean = m[d] / w_sum;
            out.mean[d] = mean;
            out.std[d] = (sq[d] / w_sum - mean * mean).max(0.0).sqrt().max(min_spread);
        }
        out
    }

    pub fn log_objective(&self, cand: &InterventionCandidate) -> f64 {
        self.evaluate(cand).log_objective
    }

    pub fn evaluate(&self, cand: &InterventionCandidate) -> InterventionPlan {
        let robot_log = robot_log_optimality(cand, &self.robot_pose, &self.cfg);
        let placeable = self.layout.is_free(&cand.pose) && cand.time_index <= self.horizon();
        if !placeable || !robot_log.is_finite() {
            return InterventionPlan {
                candidate: *cand,
                log_objective: f64::NEG_INFINITY,
                breakdown: Breakdown {
                    per_goal: Vec::new(),
                    patient_log: f64::NEG_INFINITY,
                    robot_log,
                },
                feasible: false,
            };
        }
        let (per_goal, patient_log) = patient_terms(&self.goals, cand, &self.cfg);
        InterventionPlan {
            candidate: *cand,
            log_objective: patient_log + robot_log,
            breakdown: Breakdown { per_goal, patient_log, robot_log },
            feasible: true,
        }
    }

    /// Placeholder plan when nothing feasible was found: robot stays put.
    pub fn infeasible_plan(&self) -> InterventionPlan {
        let mut p = self.evaluate(&InterventionCandidate { pose: self.robot_pose, time_index: self.horizon() });
        p.feasible = false;
        p.log_objective = f64::NEG_INFINITY;
        p
    }
}

/// Log-optimality of `cand`, predicting with `seed`.
pub fn objective(cand: &InterventionCandidate, inputs: &PlanInputs, cfg: &PlannerConfig, seed: u64) -> Result<f64> {
    Ok(PlanningProblem::new(inputs, cfg, seed)?.log_objective(cand))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::{EmpiricalDist, RiskConfig};
    use crate::room::{Goal, Rect};

    /// One support at the origin; fall scores depend on distance only.
    fn layout() -> RoomLayout {
        RoomLayout::new(
            Rect::new(Point2::new(-5.0, -5.0), Point2::new(5.0, 5.0)),
            vec![],
            vec![Point2::new(0.0, 0.0)],
            vec![Goal { id: "g".into(), at: Point2::new(3.0, 0.0) }],
            vec![],
            None,
        )
        .unwrap()
    }

    fn ensemble(goal: &str, weight: f64, trajectories: Vec<Vec<Point2>>) -> TrajectoryEnsemble {
        TrajectoryEnsemble { goal: goal.into(), trajectories, weight }
    }

    fn line(y: f64, xs: &[f64]) -> Vec<Point2> {
        xs.iter().map(|x| Point2::new(*x, y)).collect()
    }

    #[test]
    fn robot_term() {
        let cfg = PlannerConfig { rho: 0.5, dt: 0.5, robot_speed: 1.0, ..PlannerConfig::default() };
        let at = |x: f64, i: usize| InterventionCandidate { pose: Point2::new(x, 0.0), time_index: i };
        let robot = Point2::new(0.0, 0.0);
        assert_eq!(robot_log_optimality(&at(0.0, 0), &robot, &cfg), 0.0);
        assert_eq!(robot_log_optimality(&at(10.0, 10), &robot, &cfg), f64::NEG_INFINITY);
        assert!((robot_log_optimality(&at(2.0, 4), &robot, &cfg) + 1.0).abs() < 1e-15);
        let free = PlannerConfig { rho: 0.0, ..cfg };
        assert_eq!(robot_log_optimality(&at(2.0, 4), &robot, &free), 0.0);
    }

    #[test]
    fn no_aid_effect_means_candidate_does_not_matter() {
        let l = layout();
        let fall = FallParams { aided_scale: 1.0, aided_floor: 0.0, ..FallParams::default() };
        let e = [ensemble("g", 1.0, vec![line(0.5, &[0.0, 0.5, 1.0, 1.5]), line(-0.3, &[0.2, 0.9, 1.6, 2.3])])];
        let cfg = PlannerConfig::default();
        let base = patient_log_optimality(&e, &InterventionCandidate { pose: Point2::new(0.0, 0.5), time_index: 0 }, &l, &fall, &cfg);
        for (x, i) in [(0.5, 1), (1.6, 2), (4.0, 3)] {
            let c = InterventionCandidate { pose: Point2::new(x, 0.5), time_index: i };
            assert_eq!(patient_log_optimality(&e, &c, &l, &fall, &cfg), base);
        }
    }

    #[test]
    fn zero_scores_give_probability_one() {
        // Every state sits on the support.
        let l = layout();
        let e = [ensemble("g", 1.0, vec![vec![Point2::default(); 4]; 3])];
        let c = InterventionCandidate { pose: Point2::new(1.0, 1.0), time_index: 2 };
        for method in [Method::Expected, Method::Cvar, Method::ExpectedCvar] {
            let cfg = PlannerConfig { method, ..PlannerConfig::default() };
            let fall = FallParams { aided_floor: 0.0, ..FallParams::default() };
            assert_eq!(patient_log_optimality(&e, &c, &l, &fall, &cfg), 0.0);
        }
    }

    #[test]
    fn expected_equals_expected_cvar_without_cvar_weight() {
        let l = layout();
        let fall = FallParams::default();
        let e = [
            ensemble("a", 0.3, vec![line(0.5, &[0.0, 0.7, 1.4, 2.1]), line(1.5, &[0.0, 0.4, 0.8, 1.2])]),
            ensemble("b", 0.7, vec![line(-1.0, &[0.0, -0.7, -1.4, -2.1]), line(0.2, &[0.3, 0.3, 0.3, 0.3])]),
        ];
        let c = InterventionCandidate { pose: Point2::new(0.8, 0.5), time_index: 1 };
        let risk = RiskConfig { beta: 0.0, ..RiskConfig::default() };
        let a = PlannerConfig { method: Method::Expected, risk, ..PlannerConfig::default() };
        let b = PlannerConfig { method: Method::ExpectedCvar, risk, ..PlannerConfig::default() };
        assert_eq!(patient_log_optimality(&e, &c, &l, &fall, &a), patient_log_optimality(&e, &c, &l, &fall, &b));
    }

    #[test]
    fn breakdown_sums_to_objective() {
        let l = layout();
        let fall = FallParams::default();
        let e = [
            ensemble("a", 0.25, vec![line(0.5, &[0.0, 0.7, 1.4]), line(1.5, &[0.0, 0.4, 0.8])]),
            ensemble("b", 0.75, vec![line(-1.0, &[0.0, -0.7, -1.4]), line(0.2, &[0.3, 0.3, 0.3])]),
        ];
        let cfg = PlannerConfig { dt: 1.0, ..PlannerConfig::default() };
        let p = PlanningProblem::from_ensembles(&e, &l, &fall, Point2::new(1.0, 0.0), &cfg);
        let plan = p.evaluate(&InterventionCandidate { pose: Point2::new(0.7, 0.5), time_index: 1 });
        assert!(plan.feasible);
        let b = &plan.breakdown;
        assert!((b.patient_log + b.robot_log - plan.log_objective).abs() < 1e-15);
        let lse = b.per_goal.iter().map(|(_, v)| v.exp()).sum::<f64>().ln();
        assert!((lse - b.patient_log).abs() < 1e-12);
        assert_eq!(b.per_goal.iter().map(|(g, _)| g.as_str()).collect::<Vec<_>>(), ["a", "b"]);

        // In an obstacle-free room only arrival time matters for feasibility.
        let late = p.evaluate(&InterventionCandidate { pose: Point2::new(-4.0, 0.0), time_index: 1 });
        assert!(!late.feasible);
        assert_eq!(late.log_objective, f64::NEG_INFINITY);
    }

    #[test]
    fn grabbing_requires_reach_after_planned_time() {
        let states = line(0.0, &[0.0, 1.0, 2.0, 3.0]);
        let c = |x: f64, i: usize| InterventionCandidate { pose: Point2::new(x, 0.3), time_index: i };
        assert_eq!(intervention_step(&states, &c(1.0, 0), 0.4), 1);
        assert_eq!(intervention_step(&states, &c(1.0, 2), 0.4), 4);
        assert_eq!(intervention_step(&states, &c(1.0, 0), 0.2), 4);
        assert_eq!(intervention_step(&states, &c(3.0, 3), 0.4), 3);
    }

    #[test]
    fn risk_aversion_never_raises_cvar_on_fixture() {
        // Two futures: one hugs the support, one walks away from it.
        let l = layout();
        let fall = FallParams::default();
        let e = [ensemble(
            "g",
            1.0,
            vec![line(0.3, &[0.0, 0.3, 0.6, 0.9, 1.2]), line(0.0, &[0.0, -1.0, -2.0, -3.0, -4.0])],
        )];
        let eval_cvar = |cand: &InterventionCandidate| -> f64 {
            let g = GoalScores::from_ensemble(&e[0], &l, &fall);
            let grab: Vec<usize> = g.states.iter().map(|s| intervention_step(s, cand, 0.4)).collect();
            (0..g.steps())
                .map(|t| {
                    let v: Vec<f64> = (0..2).map(|k| if t < grab[k] { g.unaided[k][t] } else { g.aided[k][t] }).collect();
                    EmpiricalDist::uniform(v).unwrap().cvar(0.1)
                })
                .sum()
        };
        let mut cands = Vec::new();
        for x in -8..=8 {
            for y in -4..=4 {
                for i in 0..=4 {
                    cands.push(InterventionCandidate { pose: Point2::new(x as f64 * 0.5, y as f64 * 0.5), time_index: i });
                }
            }
        }
        let best = |beta: f64| -> InterventionCandidate {
            let cfg = PlannerConfig {
                rho: 0.0,
                robot_speed: 100.0,
                risk: RiskConfig { beta, ..RiskConfig::default() },
                ..PlannerConfig::default()
            };
            let p = PlanningProblem::from_ensembles(&e, &l, &fall, Point2::default(), &cfg);
            let mut top = (cands[0], f64::NEG_INFINITY);
            for c in &cands {
                let v = p.log_objective(c);
                if v > top.1 {
                    top = (*c, v);
                }
            }
            top.0
        };
        let (c0, c10) = (best(0.0), best(10.0));
        assert!(eval_cvar(&c10) <= eval_cvar(&c0) + 1e-9, "{c0:?} vs {c10:?}");
    }
}
