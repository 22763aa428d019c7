use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const DROP: &str = r#"
schema_version = 1
name = "drop"

[simulation]
h_m = 0.1
domain_min_m = [0.0, 0.0, 0.0]
domain_max_m = [1.0, 1.0, 1.0]
end_time_s = 0.03

[output]
frames_per_second = 100

[[materials]]
name = "sand"
kind = "drucker_prager"
density_kg_m3 = 1500.0
youngs_modulus_pa = 1e5
poisson_ratio = 0.3
friction_angle_deg = 30.0

[[bodies]]
material = "sand"
min_m = [0.3, 0.4, 0.2]
max_m = [0.6, 0.6, 0.5]
velocity_m_s = [0.3, 0.0, 0.0]

[[boundaries]]
kind = "half_space"
point_m = [0.0, 0.0, 0.2]
normal = [0.0, 0.0, 1.0]
friction = 0.4
"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparse-mpm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn write_drop(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("drop.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run(config: &Path, backend: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", path_str(config), "--backend", backend, "--out", path_str(out)];
    args.extend_from_slice(extra);
    bin(&args)
}

#[test]
fn validate_config_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_drop(dir.path(), DROP);
    let out = bin(&["validate-config", path_str(&good)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("hash_capacity"));

    let bad = write_drop(dir.path(), &DROP.replace("h_m = 0.1", "h_m = -0.1"));
    assert_eq!(bin(&["validate-config", path_str(&bad)]).status.code(), Some(2));

    let unknown = write_drop(dir.path(), &DROP.replace("end_time_s", "endtime_s"));
    assert_eq!(bin(&["validate-config", path_str(&unknown)]).status.code(), Some(2));

    assert_eq!(bin(&["run", "/nonexistent/scenario.toml"]).status.code(), Some(2));
}

#[test]
fn shipped_scenarios_validate() {
    for name in ["sliding_box", "granular_collapse", "localized_flow", "terrain_slide"] {
        let p = scenarios().join(format!("{name}.toml"));
        let out = bin(&["validate-config", path_str(&p)]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn oracle_prints_sliding_distance() {
    let out = bin(&["oracle", "sliding-box", "--theta-deg", "30"]);
    assert!(out.status.success());
    let d: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((d - 1.3146).abs() < 1e-3, "{d}");

    let out = bin(&["oracle", "sliding-box", "--theta-deg", "10"]);
    let d: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert_eq!(d, 0.0);
}

#[test]
fn deterministic_runs_agree_across_backends_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_drop(dir.path(), DROP);
    let mut frames = Vec::new();
    for backend in ["dense", "scan", "hash"] {
        let out_dir = dir.path().join(backend);
        let out = run(&config, backend, &out_dir, &["--deterministic"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out_dir.join("metrics.csv").exists());
        frames.push(fs::read(out_dir.join("frame_000003.csv")).unwrap());
    }
    assert_eq!(frames[0], frames[1]);
    assert_eq!(frames[0], frames[2]);

    let report = dir.path().join("report.csv");
    let out = bin(&[
        "compare",
        path_str(&dir.path().join("dense/metrics.csv")),
        path_str(&dir.path().join("hash/metrics.csv")),
        "--out",
        path_str(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.starts_with("quantity,baseline,candidate,ratio"));
    assert!(text.contains("speedup"));
    assert!(text.contains("memory_reduction"));
}

#[test]
fn compare_rejects_different_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_drop(dir.path(), DROP);
    assert!(run(&a, "dense", &dir.path().join("a"), &["--max-steps", "2"]).status.success());
    let b = write_drop(dir.path(), &DROP.replace("friction = 0.4", "friction = 0.5"));
    assert!(run(&b, "hash", &dir.path().join("b"), &["--max-steps", "2"]).status.success());
    let out = bin(&[
        "compare",
        path_str(&dir.path().join("a/metrics.csv")),
        path_str(&dir.path().join("b/metrics.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn heightfield_scenario_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenarios().join("terrain_slide.toml");
    let out = run(&config, "hash", dir.path(), &["--max-steps", "5", "--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().filter(|l| l.starts_with("step,")).count(), 5);
}
