use std::fs;
use std::path::Path;

use bicl::{parse_seeds, run_command, sig6, write_metrics_csv, ExperimentConfig, METRICS_HEADER, SUMMARY_HEADER};
use bicl_core::env::generate::{generate_graph, Density};
use bicl_core::env::route::{Adversary, RouteEnvConfig};
use bicl_core::learners::LearnerSettings;
use bicl_core::{Backend, GraphEnvConfig, MetricsRecord, TrainConfig};

fn tiny_route_config() -> ExperimentConfig {
    let mut route = RouteEnvConfig::with_adversaries(
        2,
        vec![Adversary {
            center: 5.0,
            radius: 3.0,
            intensity: 1.0,
        }],
    );
    route.route_length = 10.0;
    route.target_position = 10.0;
    route.horizon = 6;
    let mut train = TrainConfig::new(Backend::RouteActorCritic);
    train.episodes = 4;
    train.steps_per_episode = 6;
    train.batch = 4;
    train.warmup = 4;
    train.eval_every = 2;
    train.eval_rollouts = 2;
    train.learner = LearnerSettings {
        hidden: vec![4],
        ..LearnerSettings::default()
    };
    ExperimentConfig {
        label: "tiny".into(),
        output_dir: "unused".into(),
        route: Some(route),
        graph: None,
        train,
    }
}

fn tiny_graph_config() -> ExperimentConfig {
    let mut c = tiny_route_config();
    c.route = None;
    c.graph = Some(generate_graph(5, 3, Density::Sparse, 2).unwrap());
    c.train.backend = Backend::GraphVdn;
    c
}

fn write_config(dir: &Path, config: &ExperimentConfig) -> String {
    let path = dir.join("config.json");
    let mut config = config.clone();
    config.output_dir = dir.join("runs");
    config.write(&path).unwrap();
    path.to_string_lossy().into_owned()
}

fn record(episode: usize, x: f64) -> MetricsRecord {
    MetricsRecord {
        episode,
        c_k: 0.024_723_526_470_339_388,
        train_return: -x,
        rl_reward: x * 1.000_001_234,
        t_reward: x,
        r_gap: x * 1.234e-6,
        il_loss: 1.0 / 3.0,
        value_loss: 12_345_678.9,
        wall_ms: 17,
    }
}

#[test]
fn help_exits_zero() {
    assert_eq!(run_command(&["--help"]), 0);
    assert_eq!(run_command(&["train", "--help"]), 0);
}

#[test]
fn unknown_subcommand_exits_two() {
    assert_eq!(run_command(&["frobnicate"]), 2);
    assert_eq!(run_command::<&str>(&[]), 2);
    assert_eq!(run_command(&["train"]), 2);
}

#[test]
fn malformed_configs_fail() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(run_command(&["train", "--config", bad.to_str().unwrap()]), 1);

    let mut both = tiny_route_config();
    both.graph = tiny_graph_config().graph;
    let path = write_config(dir.path(), &both);
    assert_ne!(run_command(&["train", "--config", &path]), 0);

    let mut neither = tiny_route_config();
    neither.route = None;
    let path = write_config(dir.path(), &neither);
    assert_ne!(run_command(&["train", "--config", &path]), 0);

    let unknown = dir.path().join("unknown.json");
    let mut v = serde_json::to_value(tiny_route_config()).unwrap();
    v["surprise"] = serde_json::json!(1);
    fs::write(&unknown, v.to_string()).unwrap();
    assert_eq!(run_command(&["train", "--config", unknown.to_str().unwrap()]), 1);

    let missing = dir.path().join("missing.json");
    assert_eq!(run_command(&["train", "--config", missing.to_str().unwrap()]), 1);

    let mut mismatch = tiny_route_config();
    mismatch.train.backend = Backend::GraphVdn;
    let path = write_config(dir.path(), &mismatch);
    assert_eq!(run_command(&["train", "--config", &path]), 1);
    assert!(!dir.path().join("runs").exists(), "a rejected config must not create run directories");
}

#[test]
fn metrics_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    write_metrics_csv(&[], &empty).unwrap();
    assert_eq!(fs::read_to_string(&empty).unwrap(), METRICS_HEADER.join(",") + "\n");
    assert_eq!(
        METRICS_HEADER.join(","),
        "episode,c_k,train_return,rl_reward,t_reward,r_gap,il_loss,value_loss,wall_ms"
    );

    let one = dir.path().join("one.csv");
    write_metrics_csv(&[record(50, 93.651_234_9)], &one).unwrap();
    let text = fs::read_to_string(&one).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.ends_with('\n') && !text.contains('\r'));

    let missing = dir.path().join("no/such/dir/x.csv");
    assert!(write_metrics_csv(&[], &missing).is_err());
}

#[test]
fn metrics_csv_round_trips_six_digits() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let records: Vec<_> = [93.651_234_9, -0.000_123_456_789, 0.0, 4.2e7, -11.5]
        .iter()
        .enumerate()
        .map(|(k, &x)| record(k * 50, x))
        .collect();
    write_metrics_csv(&records, &path).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers, METRICS_HEADER);
    let close = |a: f64, b: f64| (a - b).abs() <= 5e-6 * a.abs().max(b.abs()) || a == b;
    for (row, rec) in reader.records().zip(&records) {
        let row = row.unwrap();
        let f = |i: usize| row[i].parse::<f64>().unwrap();
        assert_eq!(row[0].parse::<usize>().unwrap(), rec.episode);
        for (i, want) in [
            rec.c_k,
            rec.train_return,
            rec.rl_reward,
            rec.t_reward,
            rec.r_gap,
            rec.il_loss,
            rec.value_loss,
        ]
        .into_iter()
        .enumerate()
        {
            assert!(close(f(i + 1), want), "column {} {} vs {want}", i + 1, &row[i + 1]);
        }
        assert_eq!(row[8].parse::<u64>().unwrap(), rec.wall_ms);
    }
}

#[test]
fn sig6_keeps_six_significant_digits() {
    assert_eq!(sig6(0.0), "0");
    assert_eq!(sig6(93.651_234_9), "93.6512");
    assert_eq!(sig6(-0.38), "-0.38");
    assert_eq!(sig6(1_234_567.0), "1234570");
}

#[test]
fn sweep_writes_one_row_per_job() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &tiny_route_config());
    let out = dir.path().join("out");
    let code = run_command(&[
        "sweep",
        "--config",
        &path,
        "--c-values",
        "0,1,5,10,50",
        "--seeds",
        "1..2",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let summary = out.join("sweep/summary.csv");
    let mut reader = csv::Reader::from_path(&summary).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), SUMMARY_HEADER);
    let rows: Vec<_> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 10);
    let mut keys: Vec<(String, String)> = rows.iter().map(|r| (r[0].to_string(), r[1].to_string())).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 10);
    for r in &rows {
        let run = out.join(format!("sweep/c-{}/seed-{}", &r[0], &r[1]));
        assert!(run.join("metrics.csv").exists(), "{}", run.display());
        assert!(run.join("config.json").exists());
        let t: f64 = r[3].parse().unwrap();
        let rl: f64 = r[4].parse().unwrap();
        let gap: f64 = r[5].parse().unwrap();
        assert!((gap - (rl - t)).abs() <= 1e-5 * rl.abs().max(1.0));
    }
}

#[test]
fn bad_sweep_arguments_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &tiny_route_config());
    assert_eq!(run_command(&["sweep", "--config", &path, "--c-values", "1,x", "--seeds", "1"]), 2);
    assert_eq!(run_command(&["sweep", "--config", &path, "--seeds", "5..1"]), 2);
    assert_eq!(run_command(&["eval", "--snapshot", ".", "--rollouts", "0"]), 2);
}

#[test]
fn seed_lists_and_ranges() {
    assert_eq!(parse_seeds("1,2").unwrap(), vec![1, 2]);
    assert_eq!(parse_seeds("1..5").unwrap(), vec![1, 2, 3, 4, 5]);
    assert_eq!(parse_seeds("0, 3..4").unwrap(), vec![0, 3, 4]);
    assert!(parse_seeds("").is_err());
    assert!(parse_seeds("a").is_err());
}

#[test]
fn train_is_reproducible_and_evaluable() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &tiny_route_config());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        assert_eq!(run_command(&["train", "--config", &path, "--seed", "7", "--output", out.to_str().unwrap()]), 0);
    }
    let ma = fs::read(a.join("metrics.csv")).unwrap();
    assert_eq!(ma, fs::read(b.join("metrics.csv")).unwrap());
    assert_eq!(String::from_utf8(ma).unwrap().lines().count(), 3);

    let resolved = ExperimentConfig::load(&a.join("config.json")).unwrap();
    assert_eq!(resolved.train.seed, 7);
    let rerun = dir.path().join("c");
    let resolved_path = a.join("config.json");
    assert_eq!(
        run_command(&["train", "--config", resolved_path.to_str().unwrap(), "--output", rerun.to_str().unwrap()]),
        0
    );
    assert_eq!(fs::read(rerun.join("metrics.csv")).unwrap(), fs::read(a.join("metrics.csv")).unwrap());

    let snapshot = a.join("snapshot");
    assert_eq!(run_command(&["eval", "--snapshot", snapshot.to_str().unwrap(), "--rollouts", "3"]), 0);
    let r1 = bicl::eval_snapshot(&snapshot, 3, 0, None).unwrap();
    let r2 = bicl::eval_snapshot(&snapshot, 3, 0, None).unwrap();
    assert_eq!(r1, r2);
    assert!(r1.rl_reward >= r1.t_reward - 1e-9);
}

#[test]
fn compare_reports_both_learners() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &tiny_graph_config());
    let out = dir.path().join("out");
    assert_eq!(run_command(&["compare", "--config", &path, "--seeds", "3,4", "--output", out.to_str().unwrap()]), 0);
    let mut reader = csv::Reader::from_path(out.join("compare/compare.csv")).unwrap();
    let rows: Vec<_> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    let mut learners: Vec<_> = rows.iter().map(|r| r[1].to_string()).collect();
    learners.sort();
    learners.dedup();
    assert_eq!(learners.len(), 2);
    for r in &rows {
        assert!(out.join(format!("compare/{}/seed-{}/metrics.csv", &r[1], &r[0])).exists());
    }
}

#[test]
fn gen_graph_writes_instance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("graphs/g.json");
    let code = run_command(&[
        "gen-graph",
        "--nodes",
        "6",
        "--robots",
        "3",
        "--density",
        "dense",
        "--seed",
        "11",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let parsed: GraphEnvConfig = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(parsed, generate_graph(6, 3, Density::Dense, 11).unwrap());
    assert_eq!(parsed.nodes(), 6);
    assert_eq!(run_command(&["gen-graph", "--nodes", "6", "--robots", "3", "--density", "medium"]), 2);
}
