use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kt_core::DataMatrix;
use kt_harness::io::{save_matrix, MatrixFormat};
use kt_harness::tasks::ClusterTaskSpec;
use nalgebra::DMatrix;

fn kt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kt"))
        .args(args)
        .current_dir(dir)
        .env_remove("KT_SEED")
        .output()
        .expect("kt runs")
}

fn write_labels(path: &Path, labels: &[usize]) {
    let m = DMatrix::from_iterator(1, labels.len(), labels.iter().map(|&l| l as f64));
    save_matrix(path, &DataMatrix::new(m).unwrap(), MatrixFormat::Csv).unwrap();
}

fn write_task(dir: &Path) {
    let spec = ClusterTaskSpec {
        dim: 8,
        source_classes: 12,
        target_classes: 4,
        n_source: 200,
        n_target_pool: 40,
        n_test: 120,
        merged_source: true,
        ..ClusterTaskSpec::default()
    };
    let task = spec.generate(4).unwrap();
    for (name, split) in [("source", &task.source), ("target", &task.target_pool), ("test", &task.target_test)] {
        save_matrix(&dir.join(format!("{name}_x.csv")), &split.data.x, MatrixFormat::Csv).unwrap();
        write_labels(&dir.join(format!("{name}_y.csv")), &split.labels);
    }
    fs::write(
        dir.join("kt.toml"),
        r#"
        [data]
        target_x = "target_x.csv"
        target_y = "target_y.csv"
        test_x = "test_x.csv"
        test_y = "test_y.csv"

        [eval]
        metrics = ["accuracy"]
        "#,
    )
    .unwrap();
}

#[test]
fn train_transfer_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_task(d);
    let out = kt(d, &["--config", "kt.toml", "--out", "src.json", "train", "--x", "source_x.csv", "--y", "source_y.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for variant in ["projected", "translated", "combined"] {
        let model = format!("{variant}.json");
        let out = kt(d, &["--config", "kt.toml", "--out", &model, "transfer", "--source-model", "src.json", "--variant", variant]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let scores = format!("{variant}.jsonl");
        let out = kt(d, &["--config", "kt.toml", "--out", &scores, "eval", "--model", &model]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let line: serde_json::Value = serde_json::from_str(fs::read_to_string(d.join(&scores)).unwrap().trim()).unwrap();
        assert_eq!(line["metric"], "accuracy");
        let acc = line["value"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
        assert!(acc > 0.5, "{variant} accuracy {acc}");
    }
}

#[test]
fn transfer_rejects_non_transfer_variant() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_task(d);
    let out = kt(d, &["--config", "kt.toml", "--out", "src.json", "train", "--x", "source_x.csv", "--y", "source_y.csv"]);
    assert!(out.status.success());
    let out = kt(d, &["--config", "kt.toml", "transfer", "--source-model", "src.json", "--variant", "baseline"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_input_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("x.csv"), "1,2\n3,oops\n").unwrap();
    fs::write(d.join("y.csv"), "0\n1\n").unwrap();
    let out = kt(d, &["train", "--x", "x.csv", "--y", "y.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("x.csv") && err.contains("line 2"), "{err}");
}

fn experiment_config(d: &Path) {
    fs::write(
        d.join("kt.toml"),
        r#"
        seed = 1
        [synthetic]
        kind = "clusters"
        dim = 8
        source_classes = 8
        target_classes = 4
        n_source = 120
        n_target_pool = 40
        n_test = 80
        merged_source = true
        [sweep]
        n_t = [10, 20, 40]
        seeds = [0, 1]
        variants = ["baseline", "translated"]
        metrics = ["accuracy"]
        "#,
    )
    .unwrap();
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    experiment_config(d);
    let digest = |extra: &[&str], env: Option<&str>, out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_kt"));
        cmd.current_dir(d).env_remove("KT_SEED");
        if let Some(s) = env {
            cmd.env("KT_SEED", s);
        }
        let o = cmd.args(["--config", "kt.toml", "--out", out]).args(extra).arg("experiment").output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(d.join(out).join("digest.txt")).unwrap()
    };
    let file = digest(&[], None, "a");
    let env2 = digest(&[], Some("2"), "b");
    let flag2 = digest(&["--seed", "2"], Some("9"), "c");
    let env1 = digest(&[], Some("1"), "d");
    assert_ne!(file, env2);
    assert_eq!(env2, flag2);
    assert_eq!(file, env1);
}

#[test]
fn experiment_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    experiment_config(d);
    let out = kt(d, &["--config", "kt.toml", "experiment"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = d.join("experiment-report");
    let jsonl = fs::read_to_string(report.join("report.jsonl")).unwrap();
    assert_eq!(jsonl.lines().filter(|l| l.contains("\"type\":\"run\"")).count(), 12);
    let csv = fs::read_to_string(report.join("curves.csv")).unwrap();
    assert!(csv.starts_with("curve_id,n_t,mean,stderr,fit_a,fit_b,fit_r2"));
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
}

#[test]
fn failed_cells_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    experiment_config(d);
    let out = kt(d, &["--config", "kt.toml", "experiment"]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(d.join("kt.toml")).unwrap().replace("[10, 20, 40]", "[10, 41]");
    fs::write(d.join("kt.toml"), text).unwrap();
    let out = kt(d, &["--config", "kt.toml", "experiment"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scaling_subcommand_extrapolates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("x,y\n");
    for k in 3..=8 {
        let x = (1u32 << k) as f64;
        csv.push_str(&format!("{x},{}\n", 0.05 * x.log2() + 0.3));
    }
    fs::write(d.join("curve.csv"), csv).unwrap();
    fs::write(d.join("kt.toml"), "[scaling]\nfit_points = 5\nextrapolate_to = [1024]\n").unwrap();
    let out = kt(d, &["--config", "kt.toml", "--out", "pred.csv", "scaling", "--input", "curve.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("x = 256"), "{stdout}");
    let pred = fs::read_to_string(d.join("pred.csv")).unwrap();
    let rows: Vec<Vec<f64>> = pred
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert!((rows[0][1] - 0.7).abs() < 1e-12);
    assert!((rows[1][1] - 0.8).abs() < 1e-12);
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("kt.toml"), "[sweep]\nbogus = 1\n").unwrap();
    let out = kt(d, &["--config", "kt.toml", "experiment"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

