//! Experiment configuration, scenario simulation, batch evaluation and
//! result files.

mod batch;
mod config;
mod report;
mod scenario;

pub use batch::{run_batch, scenario_seed, BatchReport, SummaryRow, REPORT_TAIL};
pub use config::{
    BatchSection, Experiment, ExperimentConfig, IntentSection, RoomFile, ScenarioSection, TrainSection,
    CONFIG_SCHEMA_VERSION, DEFAULT_EXPERIMENT, DEFAULT_ROOM,
};
pub use report::{scenario_csv, scenario_file_name, summary_csv, write_batch, write_file, write_manifest, Manifest};
pub use scenario::{run_scenario, Intervention, ScenarioResult, ScenarioSpec};

use crate::error::Result;
use crate::patientgen::{generate_dataset, TrainingSample};
use crate::predict::GpMixture;

/// Training pairs for the experiment's layout and generator settings.
pub fn training_data(exp: &Experiment, seed: u64) -> Result<Vec<TrainingSample>> {
    generate_dataset(&exp.layout, exp.config.train.n_per_pair, &exp.config.patientgen, seed)
}

/// Fits the per-goal motion models.
pub fn train_mixture(exp: &Experiment, samples: &[TrainingSample]) -> Result<GpMixture> {
    GpMixture::train(samples, exp.layout.goal_ids(), &exp.config.train.model)
}
