use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

use super::batch::BatchReport;
use super::scenario::ScenarioResult;

/// `t,x,y,score,aided,belief_<goal>...`, one row per step.
pub fn scenario_csv(r: &ScenarioResult) -> String {
    let mut s = String::from("t,x,y,score,aided");
    for g in &r.goal_ids {
        write!(s, ",belief_{g}").unwrap();
    }
    s.push('\n');
    for t in 0..r.states.len() {
        write!(s, "{},{},{},{},{}", t, r.states[t].x, r.states[t].y, r.scores[t], u8::from(r.aided[t])).unwrap();
        for b in &r.beliefs[t] {
            write!(s, ",{b}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// `pose,method,mean,cvar10,n`, one row per (pose, method).
pub fn summary_csv(report: &BatchReport) -> String {
    let mut s = String::from("pose,method,mean,cvar10,n\n");
    for r in &report.rows {
        writeln!(s, "{},{},{},{},{}", r.pose, r.method, r.mean, r.cvar10, r.n).unwrap();
    }
    s
}

/// What produced a set of output files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config_sha256: &str, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_sha256: config_sha256.to_string(),
            seed,
            files: Vec::new(),
        }
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::file(path, e))
}

pub fn scenario_file_name(r: &ScenarioResult, index: usize) -> String {
    format!("{}_{}_{:03}.csv", r.pose, r.method, index)
}

/// Writes `summary.csv`, per-scenario CSVs under `scenarios/` and
/// `manifest.json` into `dir`.
pub fn write_batch(dir: &Path, report: &BatchReport, n_scenarios: usize, mut manifest: Manifest) -> Result<()> {
    write_file(&dir.join("summary.csv"), &summary_csv(report))?;
    manifest.files.push("summary.csv".into());
    for (k, r) in report.scenarios.iter().enumerate() {
        let name = format!("scenarios/{}", scenario_file_name(r, k % n_scenarios));
        write_file(&dir.join(&name), &scenario_csv(r))?;
        manifest.files.push(name);
    }
    write_manifest(dir, &manifest)
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::file(dir, e))?;
    write_file(&dir.join("manifest.json"), &(text + "\n"))
}
