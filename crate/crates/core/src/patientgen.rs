//! Synthetic patient trajectories.
//!
//! A patient walking to a goal is modeled as minimizing, over a fixed number
//! of waypoints,
//!
//! ```text
//! J = sum_t |z_t - goal|^2 + support_weight * d_t^2
//!   + smoothing * sum_t |z_{t+1} - 2 z_t + z_{t-1}|^2
//! ```
//!
//! where `d_t` is the distance to the nearest support, subject to a per-step
//! length limit and obstacle avoidance. The waypoints start on the shortest
//! obstacle-free polyline and are refined by projected gradient descent. A
//! small seeded perturbation is added afterwards so that repeated draws
//! differ.

use std::io::Write;
use std::path::Path;

use petgraph::algo::astar;
use petgraph::graph::UnGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::room::{Point2, RoomLayout, Trajectory};
use crate::seeding::derive_seed;


#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatientGenConfig {
    /// Weight of the squared support-distance term.
    pub support_weight: f64,
    /// Most steps a single trajectory may take.
    pub horizon: usize,
    /// Steps allowed relative to walking the shortest route at `max_step`.
    pub time_slack: f64,
    /// Longest allowed step (m).
    pub max_step: f64,
    /// Weight of the squared second-difference term.
    pub smoothing: f64,
    /// Seconds per step.
    pub dt: f64,
    /// Std dev of the per-waypoint perturbation (m).
    pub noise_std: f64,
    /// Std dev of the perturbation applied to the goal point (m).
    pub endpoint_jitter: f64,
    /// Clearance kept from obstacles when pushing waypoints out (m).
    pub clearance: f64,
    /// Gradient iterations.
    pub iterations: usize,
}

impl Default for PatientGenConfig {
    fn default() -> Self {
        Self {
            support_weight: 0.6,
            horizon: 120,
            time_slack: 1.3,
            max_step: 0.2,
            smoothing: 1.0,
            dt: 0.4,
            noise_std: 0.05,
            endpoint_jitter: 0.05,
            clearance: 0.15,
            iterations: 250,
        }
    }
}

impl PatientGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::Config("patientgen.horizon must be >= 1".into()));
        }
        if !(self.time_slack >= 1.0) {
            return Err(Error::Config("patientgen.time_slack must be >= 1".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::Config("patientgen.max_step must be positive".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("patientgen.dt must be positive".into()));
        }
        if self.support_weight < 0.0 || self.smoothing < 0.0 || self.noise_std < 0.0 || self.endpoint_jitter < 0.0 {
            return Err(Error::Config("patientgen weights and noise levels must be >= 0".into()));
        }
        Ok(())
    }
}

/// One observed step `state -> state + delta` toward `goal`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub state: Point2,
    pub delta: Point2,
    pub goal: String,
    pub trajectory_id: usize,
    pub t: usize,
}

/// Value of the generator objective for `states[0]` fixed and the rest free.
pub fn path_cost(states: &[Point2], goal: &Point2, layout: &RoomLayout, cfg: &PatientGenConfig) -> f64 {
    let mut j = 0.0;
    for s in states.iter().skip(1) {
        j += s.distance_sq(goal);
        if let Some((_, d)) = layout.nearest_support(s) {
            j += cfg.support_weight * d * d;
        }
    }
    for w in states.windows(3) {
        let acc = w[2] - w[1] * 2.0 + w[0];
        j += cfg.smoothing * (acc.x * acc.x + acc.y * acc.y);
    }
    j
}

fn path_gradient(states: &[Point2], goal: &Point2, layout: &RoomLayout, cfg: &PatientGenConfig) -> Vec<Point2> {
    let n = states.len();
    let mut g = vec![Point2::default(); n];
    for t in 1..n {
        let s = states[t];
        g[t] = g[t] + (s - *goal) * 2.0;
        if let Some((sup, _)) = layout.nearest_support(&s) {
            g[t] = g[t] + (s - sup) * (2.0 * cfg.support_weight);
        }
    }
    for t in 1..n.saturating_sub(1) {
        let acc = states[t + 1] - states[t] * 2.0 + states[t - 1];
        let a = acc * (2.0 * cfg.smoothing);
        g[t - 1] = g[t - 1] + a;
        g[t] = g[t] - a * 2.0;
        g[t + 1] = g[t + 1] + a;
    }
    g[0] = Point2::default();
    g[n - 1] = Point2::default();
    g
}

/// Waypoints every `max_step` along the straight segment, padded with the
/// goal up to `horizon` steps. Ignores obstacles.
pub fn straight_line(start: Point2, goal: Point2, max_step: f64, horizon: usize) -> Vec<Point2> {
    let mut out = Vec::with_capacity(horizon + 1);
    let mut s = start;
    out.push(s);
    for _ in 0..horizon {
        s = s.step_toward(&goal, max_step);
        out.push(s);
    }
    out
}

/// Shortest obstacle-free polyline from `start` to `goal` through the
/// corners of the clearance-inflated obstacles.
fn shortest_polyline(start: Point2, goal: Point2, layout: &RoomLayout, clearance: f64) -> Option<Vec<Point2>> {
    let mut nodes = vec![start, goal];
    for o in layout.obstacles() {
        for c in o.inflate(clearance).corners() {
            if layout.is_free(&c) {
                nodes.push(c);
            }
        }
    }
    let mut graph = UnGraph::<Point2, f64>::new_undirected();
    let idx: Vec<_> = nodes.iter().map(|p| graph.add_node(*p)).collect();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if layout.segment_free(&nodes[i], &nodes[j]) {
                graph.add_edge(idx[i], idx[j], nodes[i].distance(&nodes[j]));
            }
        }
    }
    let (_, path) = astar(
        &graph,
        idx[0],
        |n| n == idx[1],
        |e| *e.weight(),
        |n| graph[n].distance(&goal),
    )?;
    Some(path.into_iter().map(|n| graph[n]).collect())
}

/// Walks the polyline at `max_step` per step, then stays at its end.
fn resample(poly: &[Point2], max_step: f64, horizon: usize) -> Vec<Point2> {
    let mut out = Vec::with_capacity(horizon + 1);
    let mut pos = poly[0];
    let mut seg = 1;
    out.push(pos);
    for _ in 0..horizon {
        let mut budget = max_step;
        while seg < poly.len() && budget > 0.0 {
            let d = pos.distance(&poly[seg]);
            if d <= budget {
                budget -= d;
                pos = poly[seg];
                seg += 1;
            } else {
                pos = pos.step_toward(&poly[seg], budget);
                budget = 0.0;
            }
        }
        out.push(pos);
    }
    out
}

/// Step constraints for waypoint `t` of a path whose last waypoint is
/// pinned at `target` after `h` steps.
struct Limits<'a> {
    layout: &'a RoomLayout,
    target: Point2,
    h: usize,
    max_step: f64,
}

impl Limits<'_> {
    /// Moves toward `want` from `prev` as far as the step length and the
    /// remaining-steps reach of the target allow.
    fn step(&self, prev: Point2, want: Point2, t: usize) -> Point2 {
        if t == self.h {
            return self.target;
        }
        let reach = (self.h - t) as f64 * self.max_step;
        let c = prev.step_toward(&want, self.max_step);
        if c.distance(&self.target) <= reach {
            return c;
        }
        // Shrink toward the point that heads straight for the target.
        let safe = prev.step_toward(&self.target, self.max_step);
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if safe.lerp(&c, mid).distance(&self.target) <= reach {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        safe.lerp(&c, lo)
    }

    fn ok(&self, prev: &Point2, p: &Point2) -> bool {
        self.layout.is_free(p) && self.layout.segment_free(prev, p)
    }
}

/// Makes `proposal` feasible given the previous (feasible) `current` path:
/// obstacle push-out, step-length and reach limits and segment checks,
/// falling back to the current waypoint where needed. `None` if even that
/// leaves a blocked step.
fn project(proposal: &[Point2], current: &[Point2], lim: &Limits, clearance: f64) -> Option<Vec<Point2>> {
    let mut out = Vec::with_capacity(proposal.len());
    out.push(current[0]);
    for t in 1..proposal.len() {
        let prev = out[t - 1];
        let cand = lim.step(prev, lim.layout.push_out(&proposal[t], clearance), t);
        let next = if lim.ok(&prev, &cand) {
            cand
        } else {
            let fallback = lim.step(prev, current[t], t);
            if !lim.ok(&prev, &fallback) {
                return None;
            }
            fallback
        };
        out.push(next);
    }
    Some(out)
}

fn waypoints(
    start: Point2,
    target: Point2,
    layout: &RoomLayout,
    cfg: &PatientGenConfig,
) -> std::result::Result<Vec<Point2>, &'static str> {
    let poly = shortest_polyline(start, target, layout, cfg.clearance).ok_or("no obstacle-free route")?;
    let length: f64 = poly.windows(2).map(|w| w[0].distance(&w[1])).sum();
    let needed = (length / cfg.max_step - 1e-9).ceil().max(1.0) as usize;
    if needed > cfg.horizon {
        return Err("goal not reachable within the step horizon");
    }
    let h = ((needed as f64 * cfg.time_slack).ceil() as usize).clamp(needed, cfg.horizon);
    let lim = Limits { layout, target, h, max_step: cfg.max_step };
    let mut states = resample(&poly, cfg.max_step, h);
    states[h] = target;
    let mut cost = path_cost(&states, &target, layout, cfg);
    let mut lr = 0.05;
    for _ in 0..cfg.iterations {
        let g = path_gradient(&states, &target, layout, cfg);
        let proposal: Vec<Point2> = states.iter().zip(&g).map(|(s, d)| *s - *d * lr).collect();
        let cand = project(&proposal, &states, &lim, cfg.clearance);
        let c = cand.as_ref().map_or(f64::INFINITY, |p| path_cost(p, &target, layout, cfg));
        if let Some(cand) = cand.filter(|_| c < cost) {
            states = cand;
            cost = c;
            lr = (lr * 1.2).min(0.2);
        } else {
            lr *= 0.5;
            if lr < 1e-6 {
                break;
            }
        }
    }
    Ok(states)
}

/// Locally optimal waypoints from `start` ending exactly at `target`,
/// without perturbation or truncation. The number of steps is the shortest
/// route length over `max_step`, stretched by `time_slack`.
pub fn optimize_waypoints(start: Point2, target: Point2, layout: &RoomLayout, cfg: &PatientGenConfig) -> Result<Vec<Point2>> {
    waypoints(start, target, layout, cfg).map_err(|reason| Error::Generation {
        start,
        goal: target.to_string(),
        reason: reason.to_string(),
    })
}

/// Replaces everything after the first state within two steps of the end
/// with a straight approach. Removes the loitering the optimizer produces
/// where goal and support pulls balance, if the approach is collision-free.
fn straighten_final_approach(states: Vec<Point2>, layout: &RoomLayout, max_step: f64) -> Vec<Point2> {
    let end = *states.last().expect("nonempty path");
    let Some(s) = states.iter().position(|p| p.distance(&end) <= 2.0 * max_step) else {
        return states;
    };
    let from = states[s];
    if s + 1 >= states.len() || !layout.segment_free(&from, &end) {
        return states;
    }
    let n = ((from.distance(&end) / max_step) - 1e-9).ceil().max(1.0) as usize;
    let mut out = states[..=s].to_vec();
    out.extend((1..=n).map(|k| if k == n { end } else { from.lerp(&end, k as f64 / n as f64) }));
    out
}

fn truncate_at_arrival(states: &[Point2], goal: &Point2, max_step: f64) -> Option<Vec<Point2>> {
    let arrival = states.iter().position(|s| s.distance(goal) <= max_step)?;
    Some(states[..=arrival].to_vec())
}

/// Generates one perturbed trajectory from `start` to the goal `goal_id`,
/// ending at the first state within `max_step` of the goal.
pub fn generate(
    start: Point2,
    goal_id: &str,
    layout: &RoomLayout,
    cfg: &PatientGenConfig,
    seed: u64,
) -> Result<Trajectory> {
    let goal = layout
        .goal(goal_id)
        .ok_or_else(|| Error::UnknownGoal(goal_id.to_string()))?
        .at;
    generate_toward(start, goal, goal_id, layout, cfg, seed)
}

/// As [`generate`] but toward an explicit point; `label` names it in errors.
pub fn generate_toward(
    start: Point2,
    goal: Point2,
    label: &str,
    layout: &RoomLayout,
    cfg: &PatientGenConfig,
    seed: u64,
) -> Result<Trajectory> {
    let fail = |reason: &str| Error::Generation {
        start,
        goal: label.to_string(),
        reason: reason.to_string(),
    };
    if !layout.is_free(&start) {
        return Err(fail("start is not in free space"));
    }
    if !layout.is_free(&goal) {
        return Err(fail("goal is not in free space"));
    }
    if start.distance(&goal) <= cfg.max_step {
        return Trajectory::new(vec![start], cfg.dt);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };
    let mut jitter = Point2::new(normal(), normal()) * cfg.endpoint_jitter;
    if jitter.norm() > 0.5 * cfg.max_step {
        jitter = jitter * (0.5 * cfg.max_step / jitter.norm());
    }
    let target = {
        let t = goal + jitter;
        if layout.is_free(&t) {
            t
        } else {
            goal
        }
    };
    let states = waypoints(start, target, layout, cfg).map_err(fail)?;
    let lim = Limits { layout, target, h: states.len() - 1, max_step: cfg.max_step };
    let states = if cfg.noise_std > 0.0 {
        let noisy: Vec<Point2> = states
            .iter()
            .enumerate()
            .map(|(t, s)| {
                if t == 0 {
                    *s
                } else {
                    *s + Point2::new(normal(), normal()) * cfg.noise_std
                }
            })
            .collect();
        project(&noisy, &states, &lim, cfg.clearance).unwrap_or(states)
    } else {
        states
    };
    let states = straighten_final_approach(states, layout, cfg.max_step);
    let states = truncate_at_arrival(&states, &goal, cfg.max_step)
        .ok_or_else(|| fail("goal not reached within the step horizon"))?;
    Trajectory::new(states, cfg.dt)
}

/// One-step training pairs from `n_per_pair` trajectories for every
/// (initial pose, goal) pair, in pose-major, goal-minor order.
pub fn generate_dataset(
    layout: &RoomLayout,
    n_per_pair: usize,
    cfg: &PatientGenConfig,
    seed: u64,
) -> Result<Vec<TrainingSample>> {
    assert!(n_per_pair >= 1, "n_per_pair must be >= 1");
    let mut out = Vec::new();
    let mut trajectory_id = 0;
    for (pi, pose) in layout.initial_poses().iter().enumerate() {
        for (gi, goal) in layout.goals().iter().enumerate() {
            for rep in 0..n_per_pair {
                let stream = ((pi as u64) << 40) | ((gi as u64) << 20) | rep as u64;
                let traj = generate(pose.at, &goal.id, layout, cfg, derive_seed(seed, stream))?;
                out.extend(traj.deltas().enumerate().map(|(t, (state, delta))| TrainingSample {
                    state,
                    delta,
                    goal: goal.id.clone(),
                    trajectory_id,
                    t,
                }));
                trajectory_id += 1;
            }
        }
    }
    Ok(out)
}

/// Writes the dataset as CSV: `x,y,dx,dy,goal,trajectory_id,t`.
pub fn write_dataset_csv(samples: &[TrainingSample], path: &Path) -> Result<()> {
    let io = |e: std::io::Error| Error::file(path, e);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(w, "x,y,dx,dy,goal,trajectory_id,t").map_err(io)?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            s.state.x, s.state.y, s.delta.x, s.delta.y, s.goal, s.trajectory_id, s.t
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_dataset_csv(path: &Path) -> Result<Vec<TrainingSample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "x,y,dx,dy,goal,trajectory_id,t" => {}
        _ => return Err(Error::file(path, "missing dataset header")),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = || Error::file(path, format!("malformed row {}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad());
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
            let int = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
            Ok(TrainingSample {
                state: Point2::new(num(f[0])?, num(f[1])?),
                delta: Point2::new(num(f[2])?, num(f[3])?),
                goal: f[4].trim().to_string(),
                trajectory_id: int(f[5])?,
                t: int(f[6])?,
            })
        })
        .collect()
}
