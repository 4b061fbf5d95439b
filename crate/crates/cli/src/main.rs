use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use riskplan::harness::{
    self, run_batch, run_scenario, scenario_csv, scenario_file_name, write_batch, write_file, write_manifest,
    Experiment, Manifest, ScenarioSpec,
};
use riskplan::intent::IntentBelief;
use riskplan::patientgen::{read_dataset_csv, write_dataset_csv};
use riskplan::planner::{self, Method, PlanInputs};
use riskplan::predict::GpMixture;

#[derive(Parser)]
#[command(name = "riskplan", version, about = "Fall-risk-aware walker delivery planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment TOML; the built-in default room and experiment if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the experiment's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    /// Trained model JSON; trained from scratch if omitted.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic training dataset (dataset.csv).
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the per-goal GP motion models (model.json).
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV from gen-data; generated on the fly if omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// One planning call from an initial pose with the prior belief.
    Plan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "expected_cvar")]
        method: Method,
        /// Initial pose name; the first batch pose if omitted.
        #[arg(long)]
        pose: Option<String>,
    },
    /// Simulate one scenario and write its per-step CSV.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "expected_cvar")]
        method: Method,
        #[arg(long)]
        pose: Option<String>,
        /// True goal; drawn from the prior if omitted.
        #[arg(long)]
        goal: Option<String>,
    },
    /// Every configured pose and method over n scenarios.
    Batch {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// Restrict to one method.
        #[arg(long)]
        method: Option<Method>,
        /// Scenarios per (pose, method); the experiment's value if omitted.
        #[arg(long)]
        n: Option<usize>,
    },
}

fn load_experiment(config: &Option<PathBuf>) -> Result<Experiment> {
    match config {
        Some(p) => Ok(Experiment::load(p)?),
        None => Ok(Experiment::default_assets()),
    }
}

fn seed_of(common: &Common, exp: &Experiment) -> u64 {
    common.seed.unwrap_or(exp.config.seed)
}

fn load_or_train(model: &ModelArgs, exp: &Experiment, seed: u64) -> Result<GpMixture> {
    let mixture = match &model.model {
        Some(p) => GpMixture::load(p)?,
        None => {
            eprintln!("no --model given; training from freshly generated data");
            let data = harness::training_data(exp, seed)?;
            harness::train_mixture(exp, &data)?
        }
    };
    mixture.covers(&exp.layout)?;
    Ok(mixture)
}

fn pose_or_first(pose: &Option<String>, exp: &Experiment) -> Result<String> {
    match pose {
        Some(p) => Ok(p.clone()),
        None => match exp.batch_poses().into_iter().next() {
            Some(p) => Ok(p),
            None => bail!("the layout defines no initial poses"),
        },
    }
}

fn finish(dir: &Path, command: &str, exp: &Experiment, seed: u64, files: Vec<String>) -> Result<()> {
    let mut m = Manifest::new(command, &exp.config_hash, seed);
    m.files = files;
    write_manifest(dir, &m)?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let started = Instant::now();
    match cli.command {
        Command::GenData { common } => {
            let exp = load_experiment(&common.config)?;
            let seed = seed_of(&common, &exp);
            let data = harness::training_data(&exp, seed)?;
            std::fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
            write_dataset_csv(&data, &common.out.join("dataset.csv"))?;
            finish(&common.out, "gen-data", &exp, seed, vec!["dataset.csv".into()])?;
            println!("{} training pairs -> {}", data.len(), common.out.join("dataset.csv").display());
        }
        Command::Train { common, data } => {
            let exp = load_experiment(&common.config)?;
            let seed = seed_of(&common, &exp);
            let samples = match &data {
                Some(p) => read_dataset_csv(p)?,
                None => harness::training_data(&exp, seed)?,
            };
            let mixture = harness::train_mixture(&exp, &samples)?;
            std::fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
            mixture.save(&common.out.join("model.json"))?;
            finish(&common.out, "train", &exp, seed, vec!["model.json".into()])?;
            for g in mixture.goals() {
                let m = mixture.models(g)?;
                println!("{g}: x {:?}", m.x.hyperparams());
                println!("{g}: y {:?}", m.y.hyperparams());
            }
        }
        Command::Plan { common, model, method, pose } => {
            let exp = load_experiment(&common.config)?;
            let seed = seed_of(&common, &exp);
            let mixture = load_or_train(&model, &exp, seed)?;
            let pose = pose_or_first(&pose, &exp)?;
            let start = exp.layout.initial_pose(&pose).with_context(|| format!("unknown initial pose `{pose}`"))?;
            let belief: IntentBelief = exp.prior()?;
            let inputs = PlanInputs {
                belief: &belief,
                mixture: &mixture,
                layout: &exp.layout,
                fall: &exp.fall,
                start,
                robot_pose: exp.layout.robot_dock(),
            };
            let mut cfg = exp.config.planner.clone();
            cfg.method = method;
            match planner::plan(&inputs, &cfg, seed)? {
                Some(p) => println!("{}", serde_json::to_string_pretty(&p)?),
                None => println!("method `none` never intervenes"),
            }
        }
        Command::Run { common, model, method, pose, goal } => {
            let exp = load_experiment(&common.config)?;
            let seed = seed_of(&common, &exp);
            let mixture = load_or_train(&model, &exp, seed)?;
            let spec = ScenarioSpec {
                pose: pose_or_first(&pose, &exp)?,
                method,
                true_goal: goal,
                seed,
                forced: None,
            };
            let r = run_scenario(&exp, &mixture, &spec)?;
            let name = scenario_file_name(&r, 0);
            write_file(&common.out.join(&name), &scenario_csv(&r))?;
            finish(&common.out, "run", &exp, seed, vec![name.clone()])?;
            println!(
                "goal {} | {} steps | mean score {:.4} | max {:.4} | intervention {}",
                r.goal,
                r.states.len(),
                r.mean_score,
                r.max_score,
                r.intervention.map_or("none".to_string(), |i| format!("at step {} near {}", i.time, i.pose)),
            );
            println!("-> {}", common.out.join(name).display());
        }
        Command::Batch { common, model, method, n } => {
            let exp = load_experiment(&common.config)?;
            let seed = seed_of(&common, &exp);
            let mixture = load_or_train(&model, &exp, seed)?;
            let n = n.unwrap_or(exp.config.batch.n_scenarios);
            let methods = match method {
                Some(m) => vec![m],
                None => exp.config.batch.methods.clone(),
            };
            let report = run_batch(&exp, &mixture, &exp.batch_poses(), &methods, n, seed)?;
            write_batch(&common.out, &report, n, Manifest::new("batch", &exp.config_hash, seed))?;
            println!("{:<12} {:<14} {:>8} {:>8} {:>4}", "pose", "method", "mean", "cvar10", "n");
            for r in &report.rows {
                println!("{:<12} {:<14} {:>8.4} {:>8.4} {:>4}", r.pose, r.method, r.mean, r.cvar10, r.n);
            }
            println!("-> {}", common.out.join("summary.csv").display());
        }
    }
    eprintln!("done in {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}
