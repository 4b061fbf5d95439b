//! End-to-end use of the library with configuration files on disk.

use riskplan::harness::{self, run_batch, write_batch, Experiment, Manifest};
use riskplan::planner::Method;
use riskplan::predict::{predict_all, GpMixture};
use riskplan::room::Point2;

const ROOM: &str = r#"
schema_version = 1
supports = [[1.0, 0.2], [3.0, 2.8]]
robot_dock = [2.0, 2.2]

[bounds]
min = [0.0, 0.0]
max = [4.0, 3.0]

[[obstacles]]
min = [1.8, 1.2]
max = [2.2, 1.8]

[[goals]]
id = "east"
at = [3.6, 1.5]

[[goals]]
id = "west"
at = [0.4, 1.5]

[[initial_poses]]
name = "south"
at = [2.0, 0.4]

[[initial_poses]]
name = "north"
at = [2.0, 2.6]
"#;

fn experiment_text(seed: u64, n: usize) -> String {
    format!(
        r#"
schema_version = 1
layout = "rooms/small.toml"
seed = {seed}

[train]
n_per_pair = 2
max_points = 40

[intent]
prior = {{ east = 0.7, west = 0.3 }}

[planner]
rollouts = 10
horizon = 20

[planner.cem]
restarts = 1

[scenario]
max_steps = 40

[batch]
n_scenarios = {n}
methods = ["none", "deterministic", "expected_cvar"]
"#
    )
}

fn write_config(dir: &std::path::Path, seed: u64, n: usize) -> std::path::PathBuf {
    std::fs::create_dir_all(dir.join("rooms")).unwrap();
    std::fs::write(dir.join("rooms/small.toml"), ROOM).unwrap();
    let path = dir.join("exp.toml");
    std::fs::write(&path, experiment_text(seed, n)).unwrap();
    path
}

#[test]
fn custom_room_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let exp = Experiment::load(&write_config(dir.path(), 4, 3)).unwrap();
    assert_eq!(exp.layout.goal_ids().collect::<Vec<_>>(), vec!["east", "west"]);
    assert_eq!(exp.config.planner.horizon, 20);
    assert_eq!(exp.config.planner.cem.n_samples, 100);
    let prior = exp.prior().unwrap();
    assert!((prior.get("east") - 0.7).abs() < 1e-15);

    // Same content, same hash; any edit changes it.
    let again = Experiment::load(&dir.path().join("exp.toml")).unwrap();
    assert_eq!(exp.config_hash, again.config_hash);
    let other = Experiment::load(&write_config(&dir.path().join("x"), 5, 3)).unwrap();
    assert_ne!(exp.config_hash, other.config_hash);

    let data = harness::training_data(&exp, 4).unwrap();
    // 2 poses x 2 goals x 2 repetitions.
    let ids: std::collections::BTreeSet<usize> = data.iter().map(|s| s.trajectory_id).collect();
    assert_eq!(ids.len(), 8);
    let mixture = harness::train_mixture(&exp, &data).unwrap();

    let model_path = dir.path().join("model.json");
    mixture.save(&model_path).unwrap();
    let loaded = GpMixture::load(&model_path).unwrap();
    let belief = exp.prior().unwrap();
    let start = Point2::new(2.0, 0.4);
    let a = predict_all(&mixture, &exp.layout, &belief, start, 10, 3, 1).unwrap();
    let b = predict_all(&loaded, &exp.layout, &belief, start, 10, 3, 1).unwrap();
    assert_eq!(a, b);

    let methods = exp.config.batch.methods.clone();
    let report = run_batch(&exp, &mixture, &exp.batch_poses(), &methods, 3, exp.config.seed).unwrap();
    assert_eq!(report.rows.len(), 2 * methods.len());
    for pose in exp.batch_poses() {
        let none = report.row(&pose, Method::None).unwrap();
        assert!(none.mean <= none.cvar10 + 1e-12);
        for s in report.scenarios.iter().filter(|s| s.pose == pose && s.method == Method::None) {
            assert!(s.intervention.is_none());
        }
    }
    let out = dir.path().join("out");
    write_batch(&out, &report, 3, Manifest::new("batch", &exp.config_hash, exp.config.seed)).unwrap();
    let names: Vec<String> = std::fs::read_dir(out.join("scenarios"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 2 * methods.len() * 3);
    assert!(names.contains(&"north_expected_cvar_002.csv".to_string()));
}

#[test]
fn bad_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), 1, 2);
    let text = std::fs::read_to_string(&path).unwrap();
    for (from, to) in [
        ("schema_version = 1", "schema_version = 2"),
        ("rollouts = 10", "rollouts = 0"),
        ("restarts = 1", "restarts = 0"),
        ("rooms/small.toml", "rooms/missing.toml"),
        ("east = 0.7", "attic = 0.7"),
    ] {
        std::fs::write(&path, text.replacen(from, to, 1)).unwrap();
        assert!(Experiment::load(&path).and_then(|e| e.prior().map(|_| ())).is_err(), "{to}");
    }
}
