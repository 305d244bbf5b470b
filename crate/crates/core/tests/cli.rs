use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_colbreak"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = r#"{
  "l": 16,
  "kernel": {"family": "product", "A": 1.0},
  "daughter": {"family": "discrete-uniform"},
  "initial": {"mode": "monodisperse", "size": 8, "mass": 1.0},
  "t_end": 1.0,
  "n_outputs": 5,
  "tail_r": [4, 8]
}"#;

#[test]
fn simulate_writes_trajectory_and_moments() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = scenarios().join("s1_shatter.json");
    let o = run(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let mut rdr = csv::Reader::from_path(out.join("moments.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["t", "M0", "M1", "M2", "tail_2", "tail_32"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        let m1: f64 = r[2].parse().unwrap();
        assert!((m1 - 1.0).abs() <= 1e-6);
    }

    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("t,i,w_i"));
    assert_eq!(lines.count(), 5 * 64);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&run(&["simulate", "--config", &cfg, "--out", s(&a)])), 0);
    assert_eq!(code(&run(&["simulate", "--config", &cfg, "--out", s(&b)])), 0);
    for f in ["trajectory.csv", "moments.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn written_numbers_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL);
    let out = dir.path().join("o");
    assert_eq!(code(&run(&["simulate", "--config", &cfg, "--out", s(&out)])), 0);
    let text = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    for line in text.lines().skip(1) {
        let value = line.rsplit(',').next().unwrap();
        let x: f64 = value.parse().unwrap();
        assert_eq!(format!("{x:.16e}"), value);
    }
}

#[test]
fn size_beyond_truncation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &SMALL.replace("\"size\": 8", "\"size\": 17"));
    let o = run(&["simulate", "--config", &cfg, "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json:5:"), "{err}");
}

#[test]
fn negative_explicit_entry_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL.replace(
        r#"{"mode": "monodisperse", "size": 8, "mass": 1.0}"#,
        r#"{"mode": "explicit", "w": [0.5, -0.1, 0.2]}"#,
    );
    let cfg = write(dir.path(), "neg.json", &body);
    assert_eq!(code(&run(&["simulate", "--config", &cfg, "--out", s(dir.path())])), 2);
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "typo.json", &SMALL.replace("\"t_end\"", "\"t_final\""));
    let o = run(&["simulate", "--config", &cfg, "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("typo.json:6:") && err.contains("t_final"), "{err}");
}

#[test]
fn exhausted_step_budget_is_an_integrator_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "short.json", &SMALL.replace("\"t_end\": 1.0", "\"t_end\": 1.0, \"max_steps\": 3"));
    let out = dir.path().join("o");
    assert_eq!(code(&run(&["simulate", "--config", &cfg, "--out", s(&out)])), 3);
    // the partial trajectory is still written
    assert!(out.join("trajectory.csv").exists());
}

#[test]
fn standard_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenarios().join("standard_suite.json");
    let o = run(&["verify", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let mut rdr = csv::Reader::from_path(dir.path().join("report.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["check", "scenario", "pass", "worst_violation", "tolerance", "paper_ref"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert!(rows.len() > 20);
    assert!(rows.iter().all(|r| &r[2] != "false"));
    for name in ["s1_shatter", "s2_pure_monomer", "s3_large_time", "s4_support", "s5_monotonicity", "s6_continuity", "s7_truncation"] {
        assert!(rows.iter().any(|r| &r[1] == name), "{name}");
    }
}

#[test]
fn remark_uniform_daughter_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenarios().join("remark_uniform.json");
    let o = run(&["verify", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(code(&o), 1);
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.lines().any(|l| l.starts_with("daughter_validation,remark_uniform,false")), "{report}");
}

#[test]
fn empty_check_list_gives_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "none.json", SMALL);
    let o = run(&["verify", "--config", &cfg, "--out", s(dir.path())]);
    assert_eq!(code(&o), 0);
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(report, "check,scenario,pass,worst_violation,tolerance,paper_ref\n");
}

#[test]
fn inline_suite_reports_each_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let a = SMALL.replace("\"l\": 16", "\"name\": \"a\", \"l\": 16").replace("\"tail_r\": [4, 8]", "\"checks\": [{\"check\": \"mass_conservation\"}]");
    let b = a.replace("\"name\": \"a\"", "\"name\": \"b\"");
    let cfg = write(dir.path(), "suite.json", &format!("{{\"scenarios\": [{a}, {b}]}}"));
    let o = run(&["verify", "--config", &cfg, "--out", s(dir.path())]);
    assert_eq!(code(&o), 0);
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.contains("mass_conservation,a,true") && report.contains("mass_conservation,b,true"), "{report}");
}

#[test]
fn converge_reports_decreasing_delta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenarios().join("s7_truncation.json");
    let o = run(&["converge", "--config", s(&cfg), "--l", "32,64,128", "--out", s(dir.path())]);
    assert_eq!(code(&o), 0);
    let mut rdr = csv::Reader::from_path(dir.path().join("convergence.csv")).unwrap();
    let rows: Vec<(usize, f64)> = rdr.records().map(|r| {
        let r = r.unwrap();
        (r[0].parse().unwrap(), r[1].parse().unwrap())
    }).collect();
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), [32, 64, 128]);
    assert!(rows[1].1 <= rows[0].1 && rows[2].1 <= rows[1].1);
}

#[test]
fn converge_single_size() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenarios().join("s7_truncation.json");
    assert_eq!(code(&run(&["converge", "--config", s(&cfg), "--l", "32", "--out", s(dir.path())])), 0);
    let text = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn converge_exact_truncation_case_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenarios().join("s7_exact_truncation.json");
    assert_eq!(code(&run(&["converge", "--config", s(&cfg), "--l", "8,16", "--out", s(dir.path())])), 0);
}

#[test]
fn converge_rejects_unsorted_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenarios().join("s7_truncation.json");
    assert_eq!(code(&run(&["converge", "--config", s(&cfg), "--l", "64,32", "--out", s(dir.path())])), 2);
    assert_eq!(code(&run(&["converge", "--config", s(&cfg), "--l", "16", "--out", s(dir.path())])), 2);
}

#[test]
fn validate_flags_table_violations() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "k.csv", "i,j,value\n1,1,1.0\n1,2,2.0\n2,1,3.0\n2,2,4.0\n");
    let body = r#"{"l": 2, "kernel": {"family": "user-table", "path": "k.csv"},
 "daughter": {"family": "monomer-shatter"},
 "initial": {"mode": "monodisperse", "size": 2}}"#;
    let cfg = write(dir.path(), "table.json", body);
    let o = run(&["validate", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("kernel_validation"));
    assert_eq!(code(&run(&["validate", "--config", s(&scenarios().join("s5_monotonicity.json"))])), 0);
}

#[test]
fn breakup_table_scenario_runs() {
    let dir = tempfile::tempdir().unwrap();
    // every collision shatters into monomers except (2,2) -> 3 + 1, which
    // creates a cluster larger than either partner
    let mut table = String::from("i,j,s,value\n");
    for p in 1..=4 {
        for q in 1..=4 {
            if (p, q) == (2, 2) {
                table.push_str("2,2,1,1\n2,2,3,1\n");
            } else {
                table.push_str(&format!("{p},{q},1,{}\n", p + q));
            }
        }
    }
    write(dir.path(), "b.csv", &table);
    let body = r#"{"l": 4, "kernel": {"family": "constant", "A": 1.0},
 "breakup_table": {"path": "b.csv", "l_max": 4},
 "initial": {"mode": "monodisperse", "size": 2},
 "t_end": 1.0,
 "checks": [{"check": "mass_conservation"}, {"check": "support_invariance"}]}"#;
    let cfg = write(dir.path(), "bt.json", body);
    let o = run(&["verify", "--config", &cfg, "--out", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.contains("support_invariance,bt,inapplicable"), "{report}");
}

#[test]
fn missing_config_file() {
    let o = run(&["validate", "--config", "/nonexistent/config.json"]);
    assert_eq!(code(&o), 2);
}
