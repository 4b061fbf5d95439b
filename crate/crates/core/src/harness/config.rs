use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fallmodel::FallParams;
use crate::intent::{IntentBelief, IntentConfig};
use crate::patientgen::PatientGenConfig;
use crate::planner::{Method, PlannerConfig};
use crate::predict::TrainConfig;
use crate::room::RoomLayout;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_EXPERIMENT: &str = include_str!("../../assets/experiment.toml");
pub const DEFAULT_ROOM: &str = include_str!("../../assets/room.toml");

/// Room file: the layout plus the fall-score parameters tied to it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoomFile {
    pub schema_version: u32,
    #[serde(flatten)]
    pub layout: RoomLayout,
    #[serde(default)]
    pub fall: FallParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    /// Trajectories per (initial pose, goal) pair in the training set.
    pub n_per_pair: usize,
    #[serde(flatten)]
    pub model: TrainConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            n_per_pair: 4,
            model: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntentSection {
    pub forgetting: f64,
    pub prob_floor: f64,
    /// Prior over goals; uniform when absent.
    pub prior: Option<BTreeMap<String, f64>>,
}

impl Default for IntentSection {
    fn default() -> Self {
        Self {
            forgetting: 0.1,
            prob_floor: 1e-6,
            prior: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSection {
    pub max_steps: usize,
    /// Replan every this many steps.
    pub replan_stride: usize,
    /// Fixed true goal; sampled from the prior when absent.
    pub true_goal: Option<String>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            max_steps: 150,
            replan_stride: 1,
            true_goal: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchSection {
    pub n_scenarios: usize,
    /// Initial pose names; every pose of the layout when empty.
    pub poses: Vec<String>,
    pub methods: Vec<Method>,
}

impl Default for BatchSection {
    fn default() -> Self {
        Self {
            n_scenarios: 20,
            poses: Vec::new(),
            methods: Method::ALL.to_vec(),
        }
    }
}

/// Experiment file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Room file, relative to the experiment file.
    pub layout: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub patientgen: PatientGenConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub intent: IntentSection,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub batch: BatchSection,
}

/// A validated experiment with its room resolved.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub layout: RoomLayout,
    pub fall: FallParams,
    /// Hex SHA-256 over the experiment and room file contents.
    pub config_hash: String,
}

fn parse<T: serde::de::DeserializeOwned>(text: &str, origin: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::file(origin, e.to_string().trim_end()))
}

fn check_schema(found: u32, origin: &Path) -> Result<()> {
    if found != CONFIG_SCHEMA_VERSION {
        return Err(Error::file(
            origin,
            format!("unsupported schema_version {found} (expected {CONFIG_SCHEMA_VERSION})"),
        ));
    }
    Ok(())
}

impl Experiment {
    /// Reads an experiment file and the room file it names.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let config: ExperimentConfig = parse(&text, path)?;
        let room_path = path.parent().unwrap_or(Path::new(".")).join(&config.layout);
        let room_text = std::fs::read_to_string(&room_path).map_err(|e| Error::file(&room_path, e))?;
        Self::from_strs(&text, path, &room_text, &room_path)
    }

    /// The embedded default room and experiment.
    pub fn default_assets() -> Self {
        Self::from_strs(
            DEFAULT_EXPERIMENT,
            Path::new("<default experiment.toml>"),
            DEFAULT_ROOM,
            Path::new("<default room.toml>"),
        )
        .expect("embedded assets are valid")
    }

    /// Parses both files from text. The origins only label errors.
    pub fn from_strs(experiment: &str, experiment_origin: &Path, room: &str, room_origin: &Path) -> Result<Self> {
        let config: ExperimentConfig = parse(experiment, experiment_origin)?;
        check_schema(config.schema_version, experiment_origin)?;
        let room_file: RoomFile = parse(room, room_origin)?;
        check_schema(room_file.schema_version, room_origin)?;
        room_file.fall.validate().map_err(|e| Error::file(room_origin, e))?;

        let mut hasher = Sha256::new();
        hasher.update(b"experiment\n");
        hasher.update(experiment.as_bytes());
        hasher.update(b"\nroom\n");
        hasher.update(room.as_bytes());
        let config_hash = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();

        let exp = Experiment {
            config,
            layout: room_file.layout,
            fall: room_file.fall,
            config_hash,
        };
        exp.validate().map_err(|e| Error::file(experiment_origin, e))?;
        Ok(exp)
    }

    fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.patientgen.validate()?;
        c.planner.validate()?;
        self.intent_config()?;
        if c.train.n_per_pair < 1 {
            return Err(Error::Config("train.n_per_pair must be >= 1".into()));
        }
        if c.scenario.max_steps < 1 || c.scenario.replan_stride < 1 {
            return Err(Error::Config("scenario.max_steps and scenario.replan_stride must be >= 1".into()));
        }
        if let Some(g) = &c.scenario.true_goal {
            if self.layout.goal(g).is_none() {
                return Err(Error::Config(format!("scenario.true_goal: unknown goal `{g}`")));
            }
        }
        for p in &c.batch.poses {
            if self.layout.initial_pose(p).is_none() {
                return Err(Error::Config(format!("batch.poses: unknown initial pose `{p}`")));
            }
        }
        if c.batch.n_scenarios < 1 {
            return Err(Error::Config("batch.n_scenarios must be >= 1".into()));
        }
        Ok(())
    }

    /// Prior from the config, or uniform over the layout goals.
    pub fn prior(&self) -> Result<IntentBelief> {
        match &self.config.intent.prior {
            None => IntentBelief::uniform(self.layout.goal_ids()),
            Some(p) => {
                for g in p.keys() {
                    if self.layout.goal(g).is_none() {
                        return Err(Error::Config(format!("intent.prior: unknown goal `{g}`")));
                    }
                }
                // Goals left out of the prior get zero mass.
                IntentBelief::new(self.layout.goal_ids().map(|g| (g, p.get(g).copied().unwrap_or(0.0))))
            }
        }
    }

    pub fn intent_config(&self) -> Result<IntentConfig> {
        IntentConfig::new(self.config.intent.forgetting, self.prior()?, self.config.intent.prob_floor)
    }

    /// Batch poses, defaulting to every initial pose of the layout.
    pub fn batch_poses(&self) -> Vec<String> {
        if self.config.batch.poses.is_empty() {
            self.layout.initial_poses().iter().map(|p| p.name.clone()).collect()
        } else {
            self.config.batch.poses.clone()
        }
    }
}
