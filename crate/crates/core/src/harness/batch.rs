use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::planner::Method;
use crate::predict::GpMixture;
use crate::risk::EmpiricalDist;
use crate::seeding::{derive_seed, name_hash};

use super::scenario::{run_scenario, ScenarioResult, ScenarioSpec};
use super::Experiment;

/// Tail level of the reported CVaR column.
pub const REPORT_TAIL: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub pose: String,
    pub method: Method,
    /// Mean over scenarios of the per-scenario mean fall score.
    pub mean: f64,
    /// CVaR at [`REPORT_TAIL`] of the same per-scenario means.
    pub cvar10: f64,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    /// Ordered by pose, then method, as requested.
    pub rows: Vec<SummaryRow>,
    /// Ordered by pose, method, then scenario index.
    pub scenarios: Vec<ScenarioResult>,
}

impl BatchReport {
    pub fn row(&self, pose: &str, method: Method) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.pose == pose && r.method == method)
    }
}

/// Seed of scenario `index` for `pose`. Independent of the method, so every
/// method sees the same true goal and patient path up to its intervention.
pub fn scenario_seed(master: u64, pose: &str, index: usize) -> u64 {
    derive_seed(derive_seed(master, name_hash(pose)), index as u64)
}

/// Runs `n_scenarios` episodes for every (pose, method) pair and summarizes
/// the per-scenario mean fall scores.
pub fn run_batch(
    exp: &Experiment,
    mixture: &GpMixture,
    poses: &[String],
    methods: &[Method],
    n_scenarios: usize,
    seed: u64,
) -> Result<BatchReport> {
    if n_scenarios < 1 {
        return Err(Error::Config("n_scenarios must be >= 1".into()));
    }
    mixture.covers(&exp.layout)?;
    let mut jobs = Vec::new();
    for pose in poses {
        for method in methods {
            for i in 0..n_scenarios {
                jobs.push((pose.clone(), *method, i));
            }
        }
    }
    let results: Vec<Result<ScenarioResult>> = jobs
        .par_iter()
        .map(|(pose, method, i)| {
            let spec = ScenarioSpec {
                pose: pose.clone(),
                method: *method,
                true_goal: None,
                seed: scenario_seed(seed, pose, *i),
                forced: None,
            };
            run_scenario(exp, mixture, &spec).map_err(|e| Error::Scenario { index: *i, source: Box::new(e) })
        })
        .collect();
    let scenarios = results.into_iter().collect::<Result<Vec<_>>>()?;

    let rows = scenarios
        .chunks(n_scenarios)
        .map(|chunk| {
            let means: Vec<f64> = chunk.iter().map(|s| s.mean_score).collect();
            let dist = EmpiricalDist::uniform(means).expect("at least one scenario");
            SummaryRow {
                pose: chunk[0].pose.clone(),
                method: chunk[0].method,
                mean: dist.expected(),
                cvar10: dist.cvar(REPORT_TAIL),
                n: chunk.len(),
            }
        })
        .collect();
    Ok(BatchReport { rows, scenarios })
}
