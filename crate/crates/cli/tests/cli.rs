use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn tage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tage"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

/// Runs `command` with the smoke config in `dir`.
fn smoke(dir: &Path, command: &[&str]) -> Output {
    let conf = config("smoke.conf");
    let mut args = vec![
        "--config",
        conf.to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(command);
    tage(&args)
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(smoke(d, &["gen-data"]));
    ok(smoke(d, &["pretrain"]));
    // The explainer needs neither labels nor heads.
    ok(smoke(d, &["train-explainer"]));
    let body = ok(smoke(d, &["explain", "--condition", "one-hot:5", "--graph", "3"]));
    assert!(body.starts_with("edge,u,v,score\n"));
    assert!(body.lines().count() > 1);
    ok(smoke(d, &["train-downstream"]));
    ok(smoke(d, &["explain", "--condition", "downstream:1"]));
    ok(smoke(d, &["evaluate"]));
    ok(smoke(d, &["sweep"]));
    ok(smoke(d, &["report"]));

    for f in [
        "data.txt",
        "encoder.ckpt",
        "explainer.ckpt",
        "head.task0.ckpt",
        "head.task2.ckpt",
        "pretrain_log.csv",
        "explainer_log.csv",
        "downstream_log.task1.csv",
        "explain.csv",
        "metrics.csv",
        "sweep.csv",
        "report.csv",
        "timing.txt",
    ] {
        assert!(d.join(f).exists(), "{f} missing");
    }

    let metrics = fs::read_to_string(d.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(
        lines.next().unwrap(),
        "task,method,k_percent,sparsity,sparsity_retained,fidelity_mean,fidelity_std,auc"
    );
    // Three tasks, three methods.
    assert_eq!(lines.count(), 9);
    let sweep = fs::read_to_string(d.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 2 + 9 * 2);
    let timing = fs::read_to_string(d.join("timing.txt")).unwrap();
    assert!(timing.contains("training_invocations=1\n"));
}

#[test]
fn stamps_share_the_config_hash() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let conf = config("smoke.conf");
    let show = |dir: &Path| ok(tage(&["--config", conf.to_str().unwrap(), "--out-dir", dir.to_str().unwrap(), "show-config"]));
    let hash = |text: &str| text.lines().find(|l| l.starts_with("# config_hash")).unwrap().to_string();
    assert_eq!(hash(&show(a.path())), hash(&show(b.path())));
    let other = ok(tage(&["--config", conf.to_str().unwrap(), "--seed", "8", "show-config"]));
    assert_ne!(hash(&show(a.path())), hash(&other));
    assert!(other.contains("seed = 8\n"));

    ok(smoke(a.path(), &["gen-data"]));
    let stamp = fs::read_to_string(a.path().join("data.txt.stamp")).unwrap();
    assert!(stamp.starts_with(&format!("# config_hash={} seed=7", hash(&show(a.path())).trim_start_matches("# config_hash = "))));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Missing upstream artifacts.
    assert_eq!(code(smoke(d, &["pretrain"])), 3);
    assert_eq!(code(smoke(d, &["explain", "--condition", "uniform"])), 3);
    // Configuration problems.
    assert_eq!(code(smoke(d, &["--set", "no.such.key=1", "gen-data"])), 2);
    assert_eq!(code(smoke(d, &["--set", "data.path=/definitely/missing", "gen-data"])), 2);
    assert_eq!(code(tage(&["--out-dir", d.to_str().unwrap(), "gen-data"])), 2);
    assert_eq!(code(tage(&["no-such-command"])), 2);
    assert_eq!(code(smoke(d, &["explain", "--condition", "sideways"])), 2);

    ok(smoke(d, &["gen-data"]));
    ok(smoke(d, &["pretrain"]));
    ok(smoke(d, &["train-explainer"]));
    // Heads are needed for downstream conditions only.
    assert_eq!(code(smoke(d, &["explain", "--condition", "downstream:0"])), 3);
    assert_eq!(code(smoke(d, &["explain", "--condition", "one-hot:99"])), 2);
    assert_eq!(code(smoke(d, &["--set", "eval.tasks=7", "evaluate"])), 2);
}

#[test]
fn node_level_data_from_a_container() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = [
        "--seed",
        "3",
        "--out-dir",
        d.to_str().unwrap(),
        "--set",
        "data.kind=ba-shapes",
        "--set",
        "ba.base_nodes=60",
        "--set",
        "ba.houses=6",
        "--set",
        "encoder.kind=gcn",
        "--set",
        "encoder.hidden=8,8",
        "--set",
        "pretrain.route=supervised",
        "--set",
        "pretrain.epochs=20",
        "--set",
        "explainer.max_steps=3",
        "--set",
        "eval.max_instances=6",
    ];
    let run = |cmd: &[&str]| {
        let mut a = base.to_vec();
        a.extend_from_slice(cmd);
        tage(&a)
    };
    ok(run(&["gen-data"]));
    ok(run(&["pretrain"]));
    ok(run(&["train-explainer"]));
    let body = ok(run(&["explain", "--condition", "downstream:0", "--target", "65"]));
    assert!(body.lines().count() > 1);
    ok(run(&["evaluate"]));
    assert_eq!(code(run(&["report"])), 2);

    // The same data read back through data.path.
    let other = tempfile::tempdir().unwrap();
    let path = d.join("data.txt");
    let mut a = base.to_vec();
    let data_path = format!("data.path={}", path.display());
    let out_dir = other.path().to_str().unwrap();
    a[3] = out_dir;
    a.extend_from_slice(&["--set", &data_path, "pretrain"]);
    ok(tage(&a));
    let body = |dir: &Path| {
        let text = fs::read_to_string(dir.join("pretrain_log.csv")).unwrap();
        text.lines().skip(1).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(body(d), body(other.path()));
}
