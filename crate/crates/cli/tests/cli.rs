use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gut_core::config::{Manifest, RunConfig, Subcommand};
use tempfile::TempDir;

fn gutsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gutsim"))
        .args(args)
        .arg(format!("--run.output_dir={}", out.display()))
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn topology_reports_ring_spectral_gap() {
    let dir = TempDir::new().unwrap();
    let o = gutsim(
        &["topology", "--topology.kind=ring", "--topology.n=16"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("spectral.json")).unwrap())
            .unwrap();
    let rho = doc["rho"].as_f64().unwrap();
    let closed_form = 1.0 - (1.0 + 2.0 * (std::f64::consts::PI / 8.0).cos()) / 3.0;
    assert!((rho - closed_form).abs() < 1e-10);
    assert!((rho - 0.050756).abs() < 2e-5);

    let csv = fs::read_to_string(dir.path().join("topology.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 16);
    for row in rows {
        let values: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(values.len(), 16);
        let nonzero: Vec<f64> = values.into_iter().filter(|v| *v != 0.0).collect();
        assert_eq!(nonzero.len(), 3);
        assert!(nonzero.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-16));
    }
}

#[test]
fn equivalence_with_defaults_passes() {
    let dir = TempDir::new().unwrap();
    let o = gutsim(&["equivalence"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("max deviation"));
    assert!(text.contains("≤ 1e-8"));
    assert!(text.contains("PASS"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("equivalence.json")).unwrap())
            .unwrap();
    assert!(report["max_deviation"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn equivalence_with_zero_tolerance_fails() {
    let dir = TempDir::new().unwrap();
    let o = gutsim(&["equivalence", "--run.tol=0"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn validate_flags_large_mu() {
    let dir = TempDir::new().unwrap();
    let o = gutsim(
        &[
            "validate",
            "--algorithm.mu=0.9",
            "--topology.kind=ring",
            "--topology.n=16",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((doc["mu_max"].as_f64().unwrap() - 0.0012074).abs() < 1e-6);
    assert!((doc["eta_max"].as_f64().unwrap() - 0.007251).abs() < 5e-6);
    assert_eq!(doc["mu_ok"], false);

    let o = gutsim(
        &["validate", "--algorithm.mu=0.001", "--algorithm.eta=0.007"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn config_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let o = gutsim(
        &["topology", "--topology.kind=ring", "--topology.size=4"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("topology.size"));
    assert!(err.contains("topology.n") && err.contains("run.seeds"));

    let o = gutsim(&["topology", "--topology.kind=ring"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("topology.n"));

    let o = gutsim(
        &["topology", "--topology.kind=ring", "--topology.n=2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));

    let o = gutsim(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# ring of eight\ntopology.kind=ring\ntopology.n=8\nalgorithm.mu=0.5\n",
    )
    .unwrap();
    let o = gutsim(
        &[
            "validate",
            &format!("--config={}", cfg.display()),
            "--algorithm.mu=0.0005",
        ],
        dir.path(),
    );
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["mu"].as_f64(), Some(0.0005));
    let manifest =
        Manifest::from_json(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest.config["topology.n"], "8");
}

#[test]
fn manifest_reparses_to_the_same_config() {
    let dir = TempDir::new().unwrap();
    let o = gutsim(
        &[
            "consensus",
            "--consensus.method=qg-gutm",
            "--algorithm.mu=0.3",
            "--algorithm.beta=0.7",
            "--topology.n=12",
            "--run.rounds=20",
            "--run.seeds=5,6",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest =
        Manifest::from_json(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    let flags: Vec<(String, String)> = [
        ("consensus.method", "qg-gutm"),
        ("algorithm.mu", "0.3"),
        ("algorithm.beta", "0.7"),
        ("topology.n", "12"),
        ("run.rounds", "20"),
        ("run.seeds", "5,6"),
        ("run.output_dir", dir.path().to_str().unwrap()),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let direct = RunConfig::resolve(Subcommand::Consensus, "", &flags).unwrap();
    assert_eq!(manifest.config().unwrap(), direct);
    assert_eq!(manifest.seeds, vec![5, 6]);
    assert!(manifest.outputs.contains(&"consensus.csv".to_string()));
}

#[test]
fn consensus_csv_is_byte_identical_across_runs() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = [
        "consensus",
        "--consensus.method=gut",
        "--algorithm.mu=0.1",
        "--run.rounds=300",
    ];
    assert_eq!(gutsim(&args, a.path()).status.code(), Some(0));
    assert_eq!(gutsim(&args, b.path()).status.code(), Some(0));
    let csv_a = fs::read(a.path().join("consensus.csv")).unwrap();
    let csv_b = fs::read(b.path().join("consensus.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let text = String::from_utf8(csv_a).unwrap();
    assert!(text.starts_with(
        "round,consensus_error,mean_loss,avg_model_loss,avg_model_accuracy,eta,comm_scalars\n"
    ));
    assert_eq!(text.lines().count(), 302);
    let svg = fs::read_to_string(a.path().join("consensus.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("gossip"));
}

#[test]
fn train_csv_is_independent_of_thread_count() {
    let common = [
        "train",
        "--algorithm.kind=QG-GUTm",
        "--algorithm.mu=0.05",
        "--algorithm.eta=0.1",
        "--problem.kind=softmax",
        "--problem.d=6",
        "--problem.classes=4",
        "--problem.samples=400",
        "--problem.test_samples=100",
        "--partition.alpha=0.1",
        "--topology.n=8",
        "--run.rounds=30",
        "--run.seeds=1,2,3",
    ];
    let one = TempDir::new().unwrap();
    let eight = TempDir::new().unwrap();
    let mut a: Vec<&str> = common.to_vec();
    a.push("--run.threads=1");
    let mut b: Vec<&str> = common.to_vec();
    b.push("--run.threads=8");
    let oa = gutsim(&a, one.path());
    let ob = gutsim(&b, eight.path());
    assert_eq!(oa.status.code(), Some(0), "{}", stderr(&oa));
    assert_eq!(ob.status.code(), Some(0), "{}", stderr(&ob));
    for seed in [1, 2, 3] {
        let name = format!("trace_seed{seed}.csv");
        assert_eq!(
            fs::read(one.path().join(&name)).unwrap(),
            fs::read(eight.path().join(&name)).unwrap(),
            "{name}"
        );
    }
    assert!(one.path().join("summary.json").exists());
    assert!(one.path().join("train.svg").exists());
}

#[test]
fn divergent_training_exits_two() {
    let dir = TempDir::new().unwrap();
    let o = gutsim(
        &[
            "train",
            "--algorithm.kind=DSGD",
            "--algorithm.eta=50",
            "--run.decay=false",
            "--topology.n=4",
            "--run.rounds=2000",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"));
    assert!(dir.path().join("trace_seed1.csv").exists());
}

#[test]
fn partition_emits_histogram_and_skew() {
    let dir = TempDir::new().unwrap();
    let o = gutsim(
        &[
            "partition",
            "--partition.alpha=0.5",
            "--topology.n=5",
            "--problem.classes=4",
            "--problem.samples=200",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("partition.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("agent,class_0,class_1,class_2,class_3")
    );
    let total: usize = csv
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').skip(1).map(|v| v.parse::<usize>().unwrap()))
        .sum();
    assert_eq!(total, 200);
    assert!(stdout(&o).lines().any(|l| l.starts_with("skew=")));

    let o = gutsim(
        &[
            "partition",
            "--partition.alpha=0.001",
            "--topology.n=16",
            "--problem.classes=2",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("alpha=0.001"));
}

#[test]
fn unwritable_output_directory_exits_one() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let o = gutsim(
        &["topology", "--topology.kind=ring", "--topology.n=4"],
        &blocker.join("out"),
    );
    assert_eq!(o.status.code(), Some(1));
}
