use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn wayforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wayforge")).args(args).output().expect("binary runs")
}

fn bundled(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel).to_string_lossy().into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn plan_straight_two_waypoints_is_the_segment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_string_lossy().into_owned();
    let o = wayforge(&["plan", "-c", &bundled("configs/straight.toml"), "-o", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o);
    assert!(line.starts_with("energy f_l="), "{line}");
    assert!(line.trim_end().ends_with("length_m=10.0"), "{line}");
    let plan = std::fs::read_to_string(tmp.path().join("plan.txt")).unwrap();
    assert!(plan.lines().any(|l| l.starts_with("# created_unix_ms ")));
    assert!(tmp.path().join("trace.csv").exists());
}

#[test]
fn track_straight_on_path_stays_on_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_string_lossy().into_owned();
    let cfg = bundled("configs/straight.toml");
    assert_eq!(wayforge(&["plan", "-c", &cfg, "-o", &out]).status.code(), Some(0));
    let plan = tmp.path().join("plan.txt").to_string_lossy().into_owned();
    let o = wayforge(&["track", "-c", &cfg, "--plan", &plan, "-o", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(summary["max_center_mm"].as_f64().unwrap() <= 1.0);
    assert_eq!(summary["reached_goal"], serde_json::Value::Bool(true));
    let on_disk = std::fs::read_to_string(tmp.path().join("summary.json")).unwrap();
    assert_eq!(on_disk, stdout(&o));
    let log = std::fs::read_to_string(tmp.path().join("log.csv")).unwrap();
    assert!(log.starts_with("step,t,x,y,theta,"));
}

#[test]
fn track_offset_converges_within_200_steps() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_string_lossy().into_owned();
    let cfg = bundled("configs/track_offset.toml");
    assert_eq!(wayforge(&["plan", "-c", &cfg, "-o", &out]).status.code(), Some(0));
    let plan = tmp.path().join("plan.txt").to_string_lossy().into_owned();
    let o = wayforge(&["track", "-c", &cfg, "--plan", &plan, "-o", &out]);
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(summary["convergence_step"].as_u64().unwrap() <= 200, "{summary}");
}

#[test]
fn plan_endpoint_mismatch_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = write(tmp.path(), "plan.txt", "1 2\n6 2\n10 2.5\n");
    let o = wayforge(&["track", "-c", &bundled("configs/straight.toml"), "--plan", &plan, "-o", &tmp.path().to_string_lossy()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("goal"));
}

#[test]
fn delta_l_out_of_range_exits_2_naming_field() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = bundled("scenarios/straight.scn");
    let cfg = write(tmp.path(), "run.toml", &format!("scenario = {scn:?}\n[planner]\ndelta_l = 1.2\n"));
    let o = wayforge(&["plan", "-c", &cfg, "-o", &tmp.path().to_string_lossy()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("delta_l") && err.contains("[0, 1]"), "{err}");
}

#[test]
fn invalid_scenario_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.scn", "bounds: 0 0 10 10\nstart: 1 1 0\ngoal: 5 5\nobstacle: 5 5 1\n");
    let cfg = write(tmp.path(), "run.toml", "scenario = \"bad.scn\"\n");
    let o = wayforge(&["plan", "-c", &cfg, "-o", &tmp.path().to_string_lossy()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("goal inside inflated obstacle"), "{}", stderr(&o));
}

#[test]
fn sweep_budgets_out_of_order_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = bundled("scenarios/cluttered.scn");
    let cfg = write(tmp.path(), "run.toml", &format!("scenario = {scn:?}\n[sweep]\nbudgets = [300, 100]\n"));
    let o = wayforge(&["sweep", "-c", &cfg, "-o", &tmp.path().to_string_lossy()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_single_run_has_matching_median_row() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = bundled("scenarios/cluttered.scn");
    let cfg = write(tmp.path(), "run.toml", &format!("scenario = {scn:?}\n[sweep]\nbudgets = [50]\nseeds = [3]\n"));
    let o = wayforge(&["sweep", "-c", &cfg, "-o", &tmp.path().to_string_lossy(), "--jobs", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    let value = |l: &str| l.rsplit(',').next().unwrap().to_string();
    assert!(lines[1].starts_with("50,3,"));
    assert!(lines[2].starts_with("50,median,"));
    assert_eq!(value(lines[1]), value(lines[2]));
}

#[test]
fn fuzzy_eval_prints_output_and_rules() {
    let o = wayforge(&["fuzzy", "eval", "--angle", "-10", "--center", "-100"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let out: f64 = text.lines().next().unwrap().strip_prefix("output ").unwrap().parse().unwrap();
    assert!(out < 0.0);
    assert_eq!(text.lines().filter(|l| l.starts_with("rule ")).count(), 3);
}

#[test]
fn config_defaults_parse_back() {
    let o = wayforge(&["config", "--defaults"]);
    assert_eq!(o.status.code(), Some(0));
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.toml", &stdout(&o));
    assert!(wayforge::config::RunConfig::load(Path::new(&cfg)).is_ok());
}

#[test]
fn unknown_command_exits_2() {
    assert_eq!(wayforge(&["launch"]).status.code(), Some(2));
}
