use std::path::Path;
use std::process::{Command, Output};

fn lgvi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgvi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_prints_csv_without_a_path() {
    let o = lgvi(&["run", "--steps=5", "--p=3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("k,t,h,f,f_gap,E,ortho_err,solver_iters,wall_s\n"));
    assert_eq!(out.lines().count(), 7);
    assert!(stderr(&o).contains("5 steps"));
}

#[test]
fn run_reads_config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "[integrator]\nmethod = \"elgvi\"\nh0 = 0.02\n[run]\nsteps = 7\n",
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let o = lgvi(&["run", "-c", arg(&cfg), "-o", arg(&csv), "--run.steps=4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 6);
    // fixed step from the file
    assert!(text
        .lines()
        .nth(2)
        .unwrap()
        .contains(",2.0000000000000000e-2,"));
}

#[test]
fn exit_codes() {
    assert_eq!(lgvi(&["run", "--bogus=1"]).status.code(), Some(2));
    assert_eq!(lgvi(&["run", "--p=0", "--steps=2"]).status.code(), Some(2));
    assert_eq!(
        lgvi(&["run", "-c", "/nonexistent.toml"]).status.code(),
        Some(2)
    );
    assert_eq!(lgvi(&["rates", "/nonexistent.csv"]).status.code(), Some(2));
    assert_eq!(lgvi(&["frobnicate"]).status.code(), Some(2));
    let o = lgvi(&["run", "--steps=2", "-o", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("named options go before"));
    // a lightly damped quadratic swings through a turning point where the step equation has no root
    let o = lgvi(&[
        "run",
        "--objective=quadratic",
        "--initial_point=[3.0, 1.0, -1.0]",
        "--steps=100",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("stopped early"));
    // the rows before the failure are still written
    assert!(stdout(&o).lines().count() > 2);
}

#[test]
fn rates_fits_a_written_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p4.csv");
    let o = lgvi(&["run", "-o", arg(&csv), "--p=4", "--t_final=3"]);
    assert_eq!(o.status.code(), Some(0));
    let o = lgvi(&["rates", arg(&csv)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let slope: f64 = stdout(&o).trim().parse().unwrap();
    assert!(slope < -3.7, "{slope}");
    let o = lgvi(&["rates", arg(&csv), "--series", "h-t", "--window", "1,3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).trim().parse::<f64>().unwrap() < 0.0);
    assert_eq!(
        lgvi(&["rates", arg(&csv), "--window", "1,2,3"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn sweep_writes_runs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = lgvi(&[
        "sweep",
        "--p",
        "2,4",
        "--h0",
        "0.1",
        "--seeds",
        "1,2",
        "--out-dir",
        arg(dir.path()),
        "--steps=10",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 5);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary, stdout(&o));
    assert!(dir.path().join("run_p4_h0.1_s2.csv").exists());
}

#[test]
fn compare_reports_each_method() {
    let dir = tempfile::tempdir().unwrap();
    let aligned = dir.path().join("aligned.csv");
    let summary = dir.path().join("summary.csv");
    let o = lgvi(&[
        "compare",
        "--methods",
        "elgvi,splt,rk4",
        "--samples",
        "30",
        "--out",
        arg(&aligned),
        "--summary",
        arg(&summary),
        "--h0=0.01",
        "--t_final=2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for m in ["elgvi", "splt", "rk4"] {
        assert!(stdout(&o).contains(m));
    }
    assert_eq!(
        std::fs::read_to_string(&aligned).unwrap().lines().count(),
        31
    );
    assert_eq!(
        std::fs::read_to_string(&summary).unwrap().lines().count(),
        4
    );
    // Runge-Kutta is not set up for the pose problem
    let o = lgvi(&[
        "compare",
        "--methods",
        "rk4",
        "--objective=pose",
        "--steps=2",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_then_pose_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.toml");
    let o = lgvi(&["synth", "-o", arg(&scene), "--seed=3", "--n_features=60"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(std::fs::read_to_string(&scene)
        .unwrap()
        .contains("[ground_truth]"));
    let traj = dir.path().join("pose.csv");
    let o = lgvi(&["pose", "-f", arg(&scene), "-o", arg(&traj), "--steps=3000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = stdout(&o);
    assert!(report.contains("features              60"), "{report}");
    let rot: f64 = report
        .lines()
        .find(|l| l.starts_with("rotation error"))
        .and_then(|l| l.split_whitespace().nth(2))
        .unwrap()
        .parse()
        .unwrap();
    assert!(rot < 1e-2, "{report}");
    assert_eq!(
        std::fs::read_to_string(&traj).unwrap().lines().count(),
        3002
    );
}

#[test]
fn pose_rejects_malformed_feature_file() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("bad.toml");
    std::fs::write(
        &scene,
        "K = [500.0, 0.0, 320.0, 0.0, 500.0, 240.0, 0.0, 0.0, 1.0]\n[[features]]\npixel = [1.0]\nworld = [0.0, 0.0, 5.0]\n",
    )
    .unwrap();
    let o = lgvi(&["pose", "-f", arg(&scene)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("features[0].pixel"), "{}", stderr(&o));
}

#[test]
fn identical_invocations_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let o = lgvi(&["run", "-o", arg(path), "--p=6", "--steps=200", "--seed=5"]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
