//! Subcommand drivers. Each returns the process exit code.
//!
//! Exit codes: 0 success, 1 failed checks or validation violations,
//! 2 configuration or output errors, 3 integrator failure.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::config::{self, validate_l_values, ConfigError, ScenarioSpec};
use crate::integrator::{IntegrateError, Trajectory};
use crate::scenario::ScenarioError;
use crate::verify::{self, CheckReport, Outcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INTEGRATOR: i32 = 3;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const MOMENTS_FILE: &str = "moments.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";

/// 17 significant digits; parses back to the same `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn config_failure(e: &ConfigError) -> i32 {
    eprintln!("error: {e}");
    EXIT_CONFIG
}

fn io_failure(path: &Path, e: std::io::Error) -> i32 {
    eprintln!("error: cannot write {}: {e}", path.display());
    EXIT_CONFIG
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<(), i32> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| io_failure(&path, e))
}

/// Rows `t,i,w_i` for every snapshot.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,i,w_i\n");
    for s in traj.snapshots() {
        let t = fmt_num(s.time());
        for (n, &w) in s.concentrations().iter().enumerate() {
            let _ = writeln!(out, "{t},{},{}", n + 1, fmt_num(w));
        }
    }
    out
}

/// Rows `t,M0,M1,M2,tail_r...` for every snapshot.
pub fn moments_csv(traj: &Trajectory, tail_r: &[usize]) -> String {
    let mut out = String::from("t,M0,M1,M2");
    for r in tail_r {
        let _ = write!(out, ",tail_{r}");
    }
    out.push('\n');
    for s in traj.snapshots() {
        let _ = write!(
            out,
            "{},{},{},{}",
            fmt_num(s.time()),
            fmt_num(s.moment(0.0)),
            fmt_num(s.mass()),
            fmt_num(s.moment(2.0))
        );
        for &r in tail_r {
            // indices were validated against l when the config was read
            let tail = s.tail_mass(r).unwrap_or(f64::NAN);
            let _ = write!(out, ",{}", fmt_num(tail));
        }
        out.push('\n');
    }
    out
}

pub fn run_simulate(config: &Path, out: &Path) -> i32 {
    let spec = match config::load_scenario(config) {
        Ok(s) => s,
        Err(e) => return config_failure(&e),
    };
    let (traj, code) = match spec.scenario.run() {
        Ok(t) => (t, EXIT_OK),
        Err(IntegrateError::MaxSteps { t, partial }) => {
            eprintln!("error: max_steps exhausted at t = {t}; writing the partial trajectory");
            (*partial, EXIT_INTEGRATOR)
        }
        Err(e) => {
            eprintln!("error: integration failed: {e}");
            return EXIT_INTEGRATOR;
        }
    };
    if let Err(c) = write_file(out, TRAJECTORY_FILE, &trajectory_csv(&traj)) {
        return c;
    }
    if let Err(c) = write_file(out, MOMENTS_FILE, &moments_csv(&traj, &spec.tail_r)) {
        return c;
    }
    let stats = traj.stats();
    println!(
        "{}: {} snapshots, {} accepted / {} rejected steps, termination {:?}",
        spec.scenario.name,
        traj.snapshots().len(),
        stats.accepted,
        stats.rejected,
        traj.termination()
    );
    code
}

fn report_row(out: &mut String, scenario: &str, r: &CheckReport) {
    let pass = match r.outcome {
        Outcome::Pass => "true",
        Outcome::Fail => "false",
        Outcome::Inapplicable(_) => "inapplicable",
    };
    let _ = writeln!(
        out,
        "{},{},{},{},{},\"{}\"",
        r.name,
        scenario,
        pass,
        fmt_num(r.worst.value),
        fmt_num(r.tolerance),
        r.reference.replace('"', "\"\"")
    );
}

fn scenario_reports(spec: &ScenarioSpec) -> Vec<CheckReport> {
    match verify::run_checks(&spec.scenario) {
        Ok(r) => r,
        Err(e) => {
            // the scenario could not be carried out: report it as a failed row
            let reference = match e {
                ScenarioError::Integrate(_) => "integration completes within max_steps",
                _ => "scenario can be evaluated",
            };
            eprintln!("error: scenario {}: {e}", spec.scenario.name);
            vec![CheckReport {
                name: "integration",
                outcome: Outcome::Fail,
                worst: verify::Worst { value: f64::INFINITY, time: None, index: None },
                tolerance: 0.0,
                reference,
            }]
        }
    }
}

pub fn run_verify(config: &Path, out: &Path) -> i32 {
    let specs = match config::load_suite(config) {
        Ok(s) => s,
        Err(e) => return config_failure(&e),
    };
    let results: Vec<Vec<CheckReport>> = specs.par_iter().map(scenario_reports).collect();
    let mut csv = String::from("check,scenario,pass,worst_violation,tolerance,paper_ref\n");
    let mut failed = 0usize;
    for (spec, reports) in specs.iter().zip(&results) {
        for r in reports {
            println!("{:<12} {r}", spec.scenario.name);
            report_row(&mut csv, &spec.scenario.name, r);
            failed += r.failed() as usize;
        }
    }
    if let Err(c) = write_file(out, REPORT_FILE, &csv) {
        return c;
    }
    if failed > 0 {
        eprintln!("{failed} check(s) failed");
        EXIT_CHECK_FAILED
    } else {
        EXIT_OK
    }
}

pub fn run_converge(config: &Path, l_values: &[usize], out: &Path) -> i32 {
    let spec = match config::load_scenario(config) {
        Ok(s) => s,
        Err(e) => return config_failure(&e),
    };
    if let Err(m) = validate_l_values(l_values, spec.scenario.initial.support()) {
        eprintln!("error: --l: {m}");
        return EXIT_CONFIG;
    }
    let report = match verify::truncation_convergence(&spec.scenario, l_values, spec.scenario.integration.t_end) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return match e {
                ScenarioError::Integrate(_) => EXIT_INTEGRATOR,
                _ => EXIT_CONFIG,
            };
        }
    };
    let mut csv = String::from("l,delta\n");
    for &(l, d) in &report.rows {
        let _ = writeln!(csv, "{l},{}", fmt_num(d));
        println!("l = {l:<6} delta = {d:.6e}");
    }
    if let Err(c) = write_file(out, CONVERGENCE_FILE, &csv) {
        return c;
    }
    if report.monotone() {
        EXIT_OK
    } else {
        eprintln!("delta grows by more than a factor {} between consecutive sizes", report.slack);
        EXIT_CHECK_FAILED
    }
}

pub fn run_validate(config: &Path) -> i32 {
    let specs = match config::load_suite(config) {
        Ok(s) => s,
        Err(e) => return config_failure(&e),
    };
    let mut bad = false;
    for spec in &specs {
        for r in verify::validate_scenario(&spec.scenario) {
            println!("{:<12} {r}", spec.scenario.name);
            bad |= r.failed();
        }
    }
    if bad {
        EXIT_CHECK_FAILED
    } else {
        EXIT_OK
    }
}
