use std::path::Path;
use std::process::{Command, Output};

use meadsr::harness::CSV_HEADER;

const QUICK: &str = "node_count = 20\narea_m = 500,500\nconnections = 3\nsim_duration_s = 30\n";

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meadsr-sim")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("plan.cfg");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows_with_seed<'a>(csv: &'a str, label: &'a str) -> impl Iterator<Item = &'a str> + 'a {
    csv.lines().skip(1).filter(move |l| l.split(',').nth(3) == Some(label))
}

#[test]
fn missing_config_exits_2() {
    let o = sim(&["--config", "/nonexistent/plan.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read"));
}

#[test]
fn bad_values_and_unknown_keys_exit_2_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    for (body, needle) in [
        ("node_count = -1\n", "line 1"),
        ("# header\npause_times = 0\nbogus = 3\n", "line 3: unknown key"),
        ("pause_times = 0, x\n", "line 1"),
    ] {
        let cfg = write_config(dir.path(), body);
        let o = sim(&["--config", &cfg, "--quiet"]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "{body}: {err}");
    }
}

#[test]
fn sweep_produces_rows_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{QUICK}pause_times = 0,30,60\nseed_count = 5\n"));
    let out = dir.path().join("results.csv");
    let o = sim(&["--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().next(), Some(CSV_HEADER));
    let per_seed = csv.lines().skip(1).filter(|l| l.split(',').nth(3).unwrap().parse::<u64>().is_ok()).count();
    assert_eq!(per_seed, 30);
    assert_eq!(rows_with_seed(&csv, "mean").count(), 6);
    assert_eq!(rows_with_seed(&csv, "std").count(), 6);
    for line in csv.lines() {
        assert_eq!(line.split(',').count(), 12, "{line}");
    }
    // DSR has no wait window.
    assert!(csv.lines().filter(|l| l.starts_with("dsr,")).all(|l| l.split(',').nth(2) == Some("")));
}

#[test]
fn wait_time_axis_gives_one_group_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{QUICK}protocols = mea-dsr\npause_times = 0\nwait_times = 0.01,0.03,0.05\nseed_count = 2\n"),
    );
    let o = sim(&["--config", &cfg, "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    let waits: Vec<&str> = rows_with_seed(&csv, "mean").map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(waits, vec!["0.01", "0.03", "0.05"]);
}

#[test]
fn output_is_independent_of_parallelism_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{QUICK}pause_times = 0,600\nseed_count = 3\n"));
    let a = sim(&["--config", &cfg, "--quiet", "--parallel", "1"]);
    let b = sim(&["--config", &cfg, "--quiet", "--parallel", "4"]);
    let c = sim(&["--config", &cfg, "--quiet"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn overrides_and_trace_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{QUICK}pause_times = 60\n"));
    let traces = dir.path().join("traces");
    let o = sim(&[
        "--config",
        &cfg,
        "--protocol",
        "dsr",
        "--seed-count",
        "2",
        "--trace-dir",
        traces.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    assert!(csv.lines().skip(1).all(|l| l.starts_with("dsr,60,,")));
    assert_eq!(csv.lines().count(), 1 + 2 + 2);
    let mut names: Vec<String> =
        std::fs::read_dir(&traces).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, vec!["dsr_p60_s1.jsonl", "dsr_p60_s2.jsonl"]);
    let text = std::fs::read_to_string(traces.join(&names[0])).unwrap();
    assert!(text.starts_with("{\"ev\":\"header\""));
    meadsr::EventTrace::read_jsonl(&text).unwrap();
    // Progress goes to standard error.
    assert!(String::from_utf8_lossy(&o.stderr).contains("dsr pause=60 seed=1"));
}

#[test]
fn unknown_protocol_flag_is_a_usage_error() {
    let o = sim(&["--protocol", "aodv"]);
    assert_eq!(o.status.code(), Some(2));
}
