use std::path::Path;
use std::process::{Command, Output};

use landing_core::bundle::QBundle;
use landing_core::cli::{Manifest, EXIT_NON_CONVERGENCE, EXIT_RUNTIME, EXIT_USAGE};
use landing_core::Config;

fn landing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_landing"))
        .args(args)
        .env_remove("LANDING_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn derive_machine_output() {
    let o = landing(&["derive", "--preset", "sim-rpm-0.8", "--machine"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let value = |key: &str| -> f64 {
        out.lines()
            .find_map(|l| l.strip_prefix(&format!("{key}=")))
            .unwrap_or_else(|| panic!("{key} missing"))
            .parse()
            .unwrap()
    };
    assert!((value("f_ag") - 11.459).abs() < 1e-3);
    assert_eq!(value("n_cs"), 4.0);
    assert!((value("step4.p_goal") - 0.8f64.powi(8) / 3.0).abs() < 1e-12);
    assert!(landing(&["derive", "--preset", "hardware-rpm-0.4"]).status.success());
}

#[test]
fn usage_and_config_errors_exit_one() {
    assert_eq!(landing(&[]).status.code(), Some(EXIT_USAGE));
    assert_eq!(landing(&["derive"]).status.code(), Some(EXIT_USAGE));
    assert_eq!(landing(&["derive", "--preset", "nope"]).status.code(), Some(EXIT_USAGE));
    assert_eq!(landing(&["frobnicate"]).status.code(), Some(EXIT_USAGE));
    assert_eq!(landing(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    let mut text = Config::preset("hardware-rpm-0.4").unwrap().to_toml_string();
    text.push_str("\n[extra]\nkey = 1\n");
    std::fs::write(&cfg, text).unwrap();
    let o = landing(&["derive", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
}

#[test]
fn config_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hw.toml");
    std::fs::write(&cfg, Config::preset("hardware-rpm-0.4").unwrap().to_toml_string()).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_landing"))
        .args(["derive", "--machine"])
        .env("LANDING_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("n_cs=3"));
}

#[test]
fn train_eval_inspect_and_rerun_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs");
    let o = landing(&[
        "train",
        "--preset",
        "hardware-rpm-0.4",
        "--seed",
        "3,4",
        "--jobs",
        "2",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let seed3 = out.join("seed-3");
    for f in ["bundle.qlb", "episodes.csv", "manifest.toml"] {
        assert!(seed3.join(f).is_file(), "{f}");
    }
    assert!(out.join("seed-4/bundle.qlb").is_file());

    let log = std::fs::read_to_string(seed3.join("episodes.csv")).unwrap();
    assert_eq!(log.lines().next().unwrap(), "step,episode,outcome,reward,steps,epsilon");
    let manifest: Manifest = toml::from_str(&std::fs::read_to_string(seed3.join("manifest.toml")).unwrap()).unwrap();
    assert_eq!(manifest.seed, 3);
    assert_eq!(manifest.steps.len(), 4);
    assert_eq!(
        log.lines().count() - 1,
        manifest.steps.iter().map(|s| s.episodes).sum::<usize>()
    );

    let again = dir.path().join("again");
    let o = landing(&[
        "train",
        "--manifest",
        path(&seed3.join("manifest.toml")),
        "--out",
        path(&again),
    ]);
    assert!(o.status.success());
    assert_eq!(
        std::fs::read(seed3.join("bundle.qlb")).unwrap(),
        std::fs::read(again.join("seed-3/bundle.qlb")).unwrap()
    );

    let o = landing(&["inspect", "--bundle", path(&seed3.join("bundle.qlb"))]);
    assert!(o.status.success());
    let report = stdout(&o);
    assert!(report.contains("n_cs 3") && report.contains("converged"));
    assert_eq!(report.lines().count(), 2 + 4);

    let results = dir.path().join("eval");
    let traj = dir.path().join("traj");
    let o = landing(&[
        "eval",
        "--preset",
        "hardware-rpm-0.4",
        "--bundle",
        path(&seed3.join("bundle.qlb")),
        "--trials",
        "4",
        "--noise",
        "both",
        "--out",
        path(&results),
        "--trajectories",
        path(&traj),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(results.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
    assert!(csv.contains("seed-3 noisy,RPM 0.4,4,"));
    assert_eq!(
        std::fs::read_to_string(results.join("results.txt")).unwrap(),
        stdout(&o)
    );
    assert_eq!(std::fs::read_dir(&traj).unwrap().count(), 2 * 4 * 4);
}

#[test]
fn corrupt_bundle_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("x.qlb");
    std::fs::write(&b, b"QLBUNDLE garbage").unwrap();
    assert_eq!(
        landing(&["inspect", "--bundle", path(&b)]).status.code(),
        Some(EXIT_RUNTIME)
    );
    let missing = dir.path().join("missing.qlb");
    assert_eq!(
        landing(&["inspect", "--bundle", path(&missing)]).status.code(),
        Some(EXIT_RUNTIME)
    );
}

#[test]
fn non_convergence_exits_three_with_partial_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = Config::preset("hardware-rpm-0.4").unwrap();
    // full exploration for the whole cap: the window can never reach 96%
    config.training.episode_cap = 120;
    let cfg = dir.path().join("capped.toml");
    std::fs::write(&cfg, config.to_toml_string()).unwrap();
    let out = dir.path().join("out");
    let o = landing(&["train", "--config", path(&cfg), "--seed", "1", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(EXIT_NON_CONVERGENCE));
    let b = QBundle::load(&out.join("seed-1/bundle.qlb")).unwrap();
    assert!(!b.converged);
    assert_eq!(b.tables.len(), 1);
    assert!(b.tables[0].total_visits() > 0);
    let manifest = std::fs::read_to_string(out.join("seed-1/manifest.toml")).unwrap();
    assert!(manifest.contains("non-converged at step 0 after 120 episodes"));
}

#[test]
fn geometry_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("hw");
    assert!(landing(&["train", "--preset", "hardware-rpm-0.4", "--out", path(&out)])
        .status
        .success());
    let o = landing(&[
        "eval",
        "--preset",
        "sim-rpm-0.8",
        "--bundle",
        path(&out.join("seed-0/bundle.qlb")),
    ]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_cs"));
}
