use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn drmic(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drmic"))
        .args(args)
        .current_dir(dir)
        .env_remove("DRMIC_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn field(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("no `{key}` in\n{text}"));
    line[key.len()..].split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn build_twice_gives_identical_mps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("scalar.toml");
    for out in ["a.mps", "b.mps"] {
        let o = drmic(&["build", "--config", cfg.to_str().unwrap(), "--out", out], dir.path());
        assert!(o.status.success(), "{o:?}");
    }
    let a = std::fs::read(dir.path().join("a.mps")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, std::fs::read(dir.path().join("b.mps")).unwrap());
    let o = drmic(&["build", "--config", cfg.to_str().unwrap(), "--out", "c.lp", "--lp"], dir.path());
    assert!(o.status.success());
}

#[test]
fn certify_agrees_with_solve_on_inventory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("inventory.toml");
    let cfg = cfg.to_str().unwrap();
    let o = drmic(&["solve", "--config", cfg, "--policy-out", "policy.txt"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let objective = field(&stdout(&o), "objective");
    let o = drmic(&["certify", "--config", cfg, "--policy", "policy.txt", "--draws", "1000"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let out = stdout(&o);
    assert!(field(&out, "difference").abs() <= 1e-6);
    assert!((field(&out, "oracle") - objective).abs() <= 1e-6);
}

#[test]
fn certify_rejects_a_wrong_policy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("scalar.toml");
    let cfg = cfg.to_str().unwrap();
    let o = drmic(&["solve", "--config", cfg, "--policy-out", "policy.txt"], dir.path());
    assert!(o.status.success());
    // Ordering a fixed 10 units breaks the order cap of 6.
    let text = std::fs::read_to_string(dir.path().join("policy.txt")).unwrap();
    let edited: String = text
        .lines()
        .map(|l| if l.starts_with("y0_1_1 ") { "y0_1_1 10".to_string() } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(dir.path().join("bad.txt"), edited).unwrap();
    let o = drmic(&["certify", "--config", cfg, "--policy", "bad.txt", "--draws", "100"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{o:?}");
}

#[test]
fn bench_refinement_does_not_increase_cost() {
    let dir = tempfile::tempdir().unwrap();
    let o = drmic(
        &["bench", "--horizon", "2", "--segments", "1,2", "--samples", "10", "--seed", "3", "--out-dir", "out"],
        dir.path(),
    );
    assert!(o.status.success(), "{o:?}");
    let mut rdr = csv_rows(&dir.path().join("out/open_loop.csv"));
    assert_eq!(rdr.remove(0), ["T", "p", "objective", "bound", "gap", "time_s", "status"]);
    let obj: Vec<f64> = rdr.iter().map(|r| r[2].parse().unwrap()).collect();
    let slack: Vec<f64> = rdr.iter().map(|r| (r[2].parse::<f64>().unwrap() - r[3].parse::<f64>().unwrap()).abs()).collect();
    assert!(obj[1] <= obj[0] + 2.0 * slack[0].max(slack[1]), "{obj:?}");
    assert!(dir.path().join("out/summary.txt").exists());
}

#[test]
fn bench_closed_loop_writes_every_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let o = drmic(
        &["bench", "--horizon", "2", "--segments", "1", "--samples", "5", "--closed-loop", "--sims", "3", "--threads", "1", "--out-dir", "."],
        dir.path(),
    );
    assert!(o.status.success(), "{o:?}");
    let rows = csv_rows(&dir.path().join("closed_loop.csv"));
    assert_eq!(rows.len(), 4);
    assert!(stdout(&o).contains("sims=3 failed=0"));
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn radius_of_shifted_points() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.csv", "0,0\n1,1\n");
    write(dir.path(), "b.csv", "0.5,0\n1,2\n");
    let o = drmic(&["radius", "a.csv", "b.csv"], dir.path());
    assert!(o.status.success());
    assert!((stdout(&o).trim().parse::<f64>().unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[model]\npreset = \"inventory\"\ncolour = 3\n");
    let o = drmic(&["solve", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let both = write(dir.path(), "both.toml", "[model]\npreset = \"inventory\"\n[model.system]\n");
    assert_eq!(drmic(&["solve", "--config", both.to_str().unwrap()], dir.path()).status.code(), Some(2));

    let infeasible = std::fs::read_to_string(config("scalar.toml")).unwrap().replace("rhs = 6.0", "rhs = -1.0");
    let infeasible = write(dir.path(), "infeasible.toml", &infeasible);
    assert_eq!(drmic(&["solve", "--config", infeasible.to_str().unwrap()], dir.path()).status.code(), Some(3));

    let limited = std::fs::read_to_string(config("inventory.toml")).unwrap().replace("gap = 1e-4", "gap = 0.0\nnode_limit = 1");
    let limited = write(dir.path(), "limited.toml", &limited);
    assert_eq!(drmic(&["solve", "--config", limited.to_str().unwrap()], dir.path()).status.code(), Some(4));
}

#[test]
fn output_directory_follows_config_then_environment() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("scalar.toml")).unwrap();
    let cfg = write(dir.path(), "s.toml", &text);
    let o = drmic(&["solve", "--config", cfg.to_str().unwrap()], Path::new("/"));
    assert!(o.status.success(), "{o:?}");
    assert!(dir.path().join("out/policy.txt").exists());

    let env_dir = dir.path().join("env");
    let o = Command::new(env!("CARGO_BIN_EXE_drmic"))
        .args(["solve", "--config", cfg.to_str().unwrap()])
        .env("DRMIC_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(env_dir.join("policy.txt").exists());
}

#[test]
fn external_solver_command_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("scalar.toml")).unwrap().replace(
        "[output]",
        &format!("[solver]\nexternal = '\"{}\" solve-mps {{model}} {{solution}}'\n\n[output]", env!("CARGO_BIN_EXE_drmic")),
    );
    let cfg = write(dir.path(), "ext.toml", &text);
    let internal = drmic(&["solve", "--config", config("scalar.toml").to_str().unwrap(), "--policy-out", "p.txt"], dir.path());
    let external = drmic(&["solve", "--config", cfg.to_str().unwrap(), "--policy-out", "q.txt"], dir.path());
    assert!(external.status.success(), "{external:?}");
    let out = stdout(&external);
    assert!(out.contains("external"));
    assert!((field(&out, "objective") - field(&stdout(&internal), "objective")).abs() < 1e-9);
    assert!(field(&out, "violation") < 1e-7);
}

#[test]
fn every_ambiguity_family_certifies() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["scalar.toml", "mixed_moment.toml", "event_wise.toml"] {
        let cfg = config(name);
        let cfg = cfg.to_str().unwrap();
        let o = drmic(&["solve", "--config", cfg, "--policy-out", "policy.txt"], dir.path());
        assert!(o.status.success(), "{name}: {o:?}");
        let o = drmic(&["certify", "--config", cfg, "--policy", "policy.txt", "--draws", "1000"], dir.path());
        assert!(o.status.success(), "{name}: {o:?}");
        let out = stdout(&o);
        assert_eq!(out.contains("(upper bound)"), name == "mixed_moment.toml");
        assert!(field(&out, "difference").abs() <= 1e-6, "{name}: {out}");
    }
}

#[test]
fn moment_bounds_lower_the_scalar_worst_case() {
    let dir = tempfile::tempdir().unwrap();
    let obj = |name: &str| {
        let o = drmic(&["solve", "--config", config(name).to_str().unwrap(), "--policy-out", "p.txt"], dir.path());
        field(&stdout(&o), "objective")
    };
    assert!(obj("mixed_moment.toml") <= obj("scalar.toml") + 1e-9);
}

#[test]
fn disjoint_moment_bounds_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("mixed_moment.toml"))
        .unwrap()
        .replace("moment_upper = [1.9, 1.6]", "moment_upper = [1.5, 1.2]");
    let cfg = write(dir.path(), "m.toml", &text);
    let o = drmic(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("moment bounds"));
}
