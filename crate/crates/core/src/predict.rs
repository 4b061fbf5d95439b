//! Per-goal GP motion mixture and Monte Carlo trajectory rollouts.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{FitConfig, Gaussian1, GpHyperparams, GpModel};
use crate::intent::IntentBelief;
use crate::patientgen::TrainingSample;
use crate::room::{Point2, RoomLayout};
use crate::seeding::{derive_seed, name_hash};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Independent x and y displacement models for one goal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoordModels {
    pub x: GpModel,
    pub y: GpModel,
}

impl CoordModels {
    /// Predictive distributions of the next displacement from `at`.
    pub fn step_distribution(&self, at: &Point2) -> (Gaussian1, Gaussian1) {
        (self.x.predict_observation(at), self.y.predict_observation(at))
    }

    /// Log density of observing the move `from -> to`.
    pub fn log_likelihood(&self, from: &Point2, to: &Point2) -> f64 {
        let (gx, gy) = self.step_distribution(from);
        gx.log_pdf(to.x - from.x) + gy.log_pdf(to.y - from.y)
    }

    pub fn mean_step(&self, at: &Point2) -> Point2 {
        Point2::new(self.x.predict_mean(at), self.y.predict_mean(at))
    }
}

/// Goal-indexed motion models.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpMixture {
    pub schema_version: u32,
    pub by_goal: BTreeMap<String, CoordModels>,
}

/// How the mixture is fitted from a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub init: GpHyperparams,
    pub fit: FitConfig,
    /// Per-goal cap on training pairs; larger sets are thinned by a fixed
    /// stride.
    pub max_points: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            init: GpHyperparams::default(),
            fit: FitConfig::default(),
            max_points: 120,
        }
    }
}

fn thin<T: Clone>(items: &[T], cap: usize) -> Vec<T> {
    if items.len() <= cap || cap == 0 {
        return items.to_vec();
    }
    (0..cap)
        .map(|i| items[i * items.len() / cap].clone())
        .collect()
}

impl GpMixture {
    /// Fits one (x, y) model pair per goal from tagged one-step samples.
    pub fn train<'a>(
        samples: &[TrainingSample],
        goals: impl IntoIterator<Item = &'a str>,
        cfg: &TrainConfig,
    ) -> Result<Self> {
        let mut by_goal = BTreeMap::new();
        for goal in goals {
            let mine: Vec<&TrainingSample> = samples.iter().filter(|s| s.goal == goal).collect();
            let mine = thin(&mine, cfg.max_points);
            if mine.len() < 2 {
                return Err(Error::TrainingData(format!(
                    "goal `{goal}` has {} training pairs, need at least 2",
                    mine.len()
                )));
            }
            let inputs: Vec<Point2> = mine.iter().map(|s| s.state).collect();
            let dx: Vec<f64> = mine.iter().map(|s| s.delta.x).collect();
            let dy: Vec<f64> = mine.iter().map(|s| s.delta.y).collect();
            let x = GpModel::fit(inputs.clone(), dx, cfg.init, &cfg.fit)?;
            let y = GpModel::fit(inputs, dy, cfg.init, &cfg.fit)?;
            by_goal.insert(goal.to_string(), CoordModels { x, y });
        }
        Ok(Self {
            schema_version: MODEL_SCHEMA_VERSION,
            by_goal,
        })
    }

    pub fn models(&self, goal: &str) -> Result<&CoordModels> {
        self.by_goal
            .get(goal)
            .ok_or_else(|| Error::MissingModel(goal.to_string()))
    }

    pub fn goals(&self) -> impl Iterator<Item = &str> {
        self.by_goal.keys().map(String::as_str)
    }

    /// Checks that every layout goal has a model pair.
    pub fn covers(&self, layout: &RoomLayout) -> Result<()> {
        for g in layout.goal_ids() {
            self.models(g)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::file(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let m: GpMixture = serde_json::from_str(&text).map_err(|e| Error::file(path, e))?;
        if m.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::file(
                path,
                format!("unsupported model schema_version {}", m.schema_version),
            ));
        }
        Ok(m)
    }
}

/// `k` sampled futures for one goal, all starting at the same state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub goal: String,
    /// Each trajectory has `horizon + 1` states; index 0 is the current one.
    pub trajectories: Vec<Vec<Point2>>,
    /// Probability of this goal.
    pub weight: f64,
}

impl TrajectoryEnsemble {
    pub fn horizon(&self) -> usize {
        self.trajectories.first().map_or(0, |t| t.len().saturating_sub(1))
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

/// Samples `k` open-loop rollouts of `horizon` steps toward `goal`.
///
/// Each step draws the x and y displacements independently from the goal's
/// predictive distributions at the current sampled state. States are clamped
/// into the room bounds. Trajectory `i` depends only on `(seed, goal, i)`.
pub fn rollout(
    mixture: &GpMixture,
    layout: &RoomLayout,
    goal: &str,
    start: Point2,
    horizon: usize,
    k: usize,
    seed: u64,
) -> Result<TrajectoryEnsemble> {
    assert!(horizon >= 1 && k >= 1, "rollout needs horizon >= 1 and k >= 1");
    let models = mixture.models(goal)?;
    let goal_seed = derive_seed(seed, name_hash(goal));
    let trajectories = (0..k)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(goal_seed, i as u64));
            let mut states = Vec::with_capacity(horizon + 1);
            let mut s = start;
            states.push(s);
            for _ in 0..horizon {
                let (gx, gy) = models.step_distribution(&s);
                let nx: f64 = rng.sample(StandardNormal);
                let ny: f64 = rng.sample(StandardNormal);
                let next = Point2::new(s.x + gx.mean + gx.std_dev() * nx, s.y + gy.mean + gy.std_dev() * ny);
                s = layout.clamp_to_bounds(&next);
                states.push(s);
            }
            states
        })
        .collect();
    Ok(TrajectoryEnsemble {
        goal: goal.to_string(),
        trajectories,
        weight: 1.0,
    })
}

/// Rollouts for every goal in `belief`, weighted by its probability.
pub fn predict_all(
    mixture: &GpMixture,
    layout: &RoomLayout,
    belief: &IntentBelief,
    start: Point2,
    horizon: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<TrajectoryEnsemble>> {
    belief
        .iter()
        .map(|(goal, p)| {
            let mut e = rollout(mixture, layout, goal, start, horizon, k, seed)?;
            e.weight = p;
            Ok(e)
        })
        .collect()
}

/// Noise-free rollout following the posterior mean displacement.
pub fn mean_rollout(
    mixture: &GpMixture,
    layout: &RoomLayout,
    goal: &str,
    start: Point2,
    horizon: usize,
) -> Result<Vec<Point2>> {
    let models = mixture.models(goal)?;
    let mut states = Vec::with_capacity(horizon + 1);
    let mut s = start;
    states.push(s);
    for _ in 0..horizon {
        s = layout.clamp_to_bounds(&(s + models.mean_step(&s)));
        states.push(s);
    }
    Ok(states)
}
