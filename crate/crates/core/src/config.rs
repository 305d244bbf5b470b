//! JSON configuration for scenarios and verification suites.
//!
//! A scenario file:
//!
//! ```json
//! {
//!   "name": "shatter",
//!   "l": 64,
//!   "kernel": {"family": "product", "A": 1.0},
//!   "daughter": {"family": "monomer-shatter"},
//!   "initial": {"mode": "monodisperse", "size": 32, "mass": 1.0},
//!   "rtol": 1e-8,
//!   "t_end": 10.0,
//!   "n_outputs": 100,
//!   "tail_r": [2, 32],
//!   "checks": [{"check": "mass_conservation"}]
//! }
//! ```
//!
//! A suite file is `{"scenarios": [...]}` whose entries are inline scenario
//! objects or paths to scenario files. Relative paths (scenario files and
//! CSV tables) resolve against the directory of the file naming them.
//! Unknown keys are errors. Every error carries `path:line:column`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use serde_json::value::RawValue;

use crate::integrator::{IntegrateError, IntegrationConfig};
use crate::kernels::table::{load_breakup, load_daughter, load_kernel};
use crate::kernels::{CollisionKernel, DaughterDistribution, Dominance, PowerBound};
use crate::scenario::{CheckSpec, Model, Scenario, WeightSpec};
use crate::state::InitialData;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.path.display(), self.line, self.column, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerBoundCfg {
    #[serde(rename = "A")]
    a: f64,
    gamma: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
enum KernelCfg {
    Product {
        #[serde(rename = "A")]
        a: f64,
    },
    Power {
        #[serde(rename = "A")]
        a: f64,
        gamma: f64,
    },
    Constant {
        #[serde(rename = "A")]
        a: f64,
    },
    UserTable {
        path: PathBuf,
        l_max: Option<usize>,
        #[serde(rename = "A1")]
        a1: Option<f64>,
        power_bound: Option<PowerBoundCfg>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
enum DaughterCfg {
    DiscreteUniform,
    MonomerShatter,
    BinarySplit,
    PaperRemarkUniform,
    UserTable {
        path: PathBuf,
        j_max: Option<usize>,
        k_max: Option<usize>,
        beta0: f64,
        beta1: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BreakupCfg {
    path: PathBuf,
    l_max: Option<usize>,
}

fn unit_mass() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
enum InitialCfg {
    Explicit {
        w: Vec<f64>,
    },
    Monodisperse {
        size: usize,
        #[serde(default = "unit_mass")]
        mass: f64,
    },
    Geometric {
        ratio: f64,
        #[serde(default = "unit_mass")]
        mass: f64,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum WeightName {
    Dlvp,
}

/// A weight is an exponent `p` (for `G(z) = z^p`) or `"dlvp"`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum WeightCfg {
    Exponent(f64),
    Named(WeightName),
}

impl From<WeightCfg> for WeightSpec {
    fn from(w: WeightCfg) -> Self {
        match w {
            WeightCfg::Exponent(p) => WeightSpec::Power(p),
            WeightCfg::Named(WeightName::Dlvp) => WeightSpec::Dlvp,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
enum CheckCfg {
    MassConservation,
    TailMonotonicity,
    GmomentMonotone { weight: WeightCfg },
    DissipationIdentity { weight: WeightCfg },
    ContinuousDependence { size: usize, delta: f64 },
    SupportInvariance,
    LargeTime { tol_mass: f64 },
    TruncationConvergence { l_values: Vec<usize> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioCfg {
    name: Option<String>,
    l: usize,
    kernel: KernelCfg,
    daughter: Option<DaughterCfg>,
    breakup_table: Option<BreakupCfg>,
    initial: InitialCfg,
    rtol: Option<f64>,
    atol: Option<f64>,
    t_end: Option<f64>,
    output_times: Option<Vec<f64>>,
    n_outputs: Option<usize>,
    max_steps: Option<usize>,
    steady_eps: Option<f64>,
    negative_clip: Option<f64>,
    #[serde(default)]
    tail_r: Vec<usize>,
    #[serde(default)]
    checks: Vec<CheckCfg>,
    check_tol: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteCfg<'a> {
    #[serde(borrow)]
    scenarios: Vec<&'a RawValue>,
}

/// A validated scenario plus its output options.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    /// Tail masses written to the moment file.
    pub tail_r: Vec<usize>,
    pub source: PathBuf,
}

/// Where a piece of JSON text sits inside its file.
struct Source<'a> {
    path: &'a Path,
    text: &'a str,
    /// Line and column of `text[0]` within the file, zero-based line.
    line0: usize,
    col0: usize,
}

impl Source<'_> {
    fn error_at(&self, line: usize, column: usize, message: impl Into<String>) -> ConfigError {
        // serde_json reports one-based lines
        let column = if line <= 1 { column + self.col0 } else { column };
        ConfigError { path: self.path.to_path_buf(), line: self.line0 + line.max(1), column, message: message.into() }
    }

    fn serde_error(&self, e: serde_json::Error) -> ConfigError {
        self.error_at(e.line(), e.column(), e.to_string())
    }

    /// Anchors a semantic error at the first occurrence of `"key"`.
    fn key_error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let needle = format!("\"{key}\"");
        match self.text.find(&needle) {
            Some(pos) => {
                let (line, column) = line_col(self.text, pos);
                self.error_at(line, column, message)
            }
            None => self.error_at(1, 1, message),
        }
    }

    fn dir(&self) -> &Path {
        self.path.parent().unwrap_or_else(|| Path::new("."))
    }
}

/// One-based line and column of byte offset `pos`.
fn line_col(text: &str, pos: usize) -> (usize, usize) {
    let before = &text[..pos];
    let line = before.matches('\n').count() + 1;
    let column = pos - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, column)
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError {
        path: path.to_path_buf(),
        line: 0,
        column: 0,
        message: format!("cannot read config: {e}"),
    })
}

fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

/// Loads a single scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioSpec, ConfigError> {
    let text = read(path)?;
    parse_scenario(path, &text)
}

/// Parses scenario JSON; `path` anchors errors and relative table paths.
pub fn parse_scenario(path: &Path, text: &str) -> Result<ScenarioSpec, ConfigError> {
    scenario_from(&Source { path, text, line0: 0, col0: 0 })
}

/// Loads a suite file, or a single scenario file as a one-entry suite.
pub fn load_suite(path: &Path) -> Result<Vec<ScenarioSpec>, ConfigError> {
    let text = read(path)?;
    parse_suite(path, &text)
}

pub fn parse_suite(path: &Path, text: &str) -> Result<Vec<ScenarioSpec>, ConfigError> {
    let top = Source { path, text, line0: 0, col0: 0 };
    let probe: serde_json::Value = serde_json::from_str(text).map_err(|e| top.serde_error(e))?;
    if probe.get("scenarios").is_none() {
        return Ok(vec![scenario_from(&top)?]);
    }
    let suite: SuiteCfg = serde_json::from_str(text).map_err(|e| top.serde_error(e))?;
    let mut out = Vec::with_capacity(suite.scenarios.len());
    for raw in suite.scenarios {
        let sub = raw.get();
        // RawValue borrows from `text`, so the offset locates the entry
        let offset = sub.as_ptr() as usize - text.as_ptr() as usize;
        let (line, column) = line_col(text, offset);
        let src = Source { path, text: sub, line0: line - 1, col0: column - 1 };
        if sub.trim_start().starts_with('"') {
            let rel: String = serde_json::from_str(sub).map_err(|e| src.serde_error(e))?;
            out.push(load_scenario(&resolve(top.dir(), Path::new(&rel)))?);
        } else {
            out.push(scenario_from(&src)?);
        }
    }
    Ok(out)
}

fn scenario_from(src: &Source) -> Result<ScenarioSpec, ConfigError> {
    let cfg: ScenarioCfg = serde_json::from_str(src.text).map_err(|e| src.serde_error(e))?;
    let l = cfg.l;
    if l == 0 {
        return Err(src.key_error("l", "l must be at least 1"));
    }

    let kernel = build_kernel(src, &cfg.kernel, l)?;
    let model = match (&cfg.daughter, &cfg.breakup_table) {
        (Some(d), None) => Model::Daughter(build_daughter(src, d, l)?),
        (None, Some(b)) => {
            let table = load_breakup(&resolve(src.dir(), &b.path), b.l_max)
                .map_err(|e| src.key_error("breakup_table", e.to_string()))?;
            if table.l_max() < l {
                return Err(src.key_error(
                    "breakup_table",
                    format!("breakup table covers sizes up to {}, l = {l}", table.l_max()),
                ));
            }
            Model::Breakup(Arc::new(table))
        }
        (Some(_), Some(_)) => return Err(src.key_error("breakup_table", "give either daughter or breakup_table, not both")),
        (None, None) => return Err(src.error_at(1, 1, "missing fragmentation model: daughter or breakup_table")),
    };

    let initial = match &cfg.initial {
        InitialCfg::Explicit { w } => {
            if w.len() > l {
                return Err(src.key_error("w", format!("explicit data has {} entries, l = {l}", w.len())));
            }
            let mut w = w.clone();
            w.resize(l, 0.0);
            InitialData::explicit(w)
        }
        InitialCfg::Monodisperse { size, mass } => InitialData::monodisperse(l, *size, *mass),
        InitialCfg::Geometric { ratio, mass } => InitialData::geometric(l, *ratio, *mass),
    }
    .map_err(|e| src.key_error("initial", e.to_string()))?;

    let defaults = IntegrationConfig::default();
    let mut integration = IntegrationConfig {
        rtol: cfg.rtol.unwrap_or(defaults.rtol),
        atol: cfg.atol.unwrap_or(defaults.atol),
        t_end: cfg.t_end.unwrap_or(defaults.t_end),
        output_times: cfg.output_times.clone().unwrap_or_default(),
        max_steps: cfg.max_steps.unwrap_or(defaults.max_steps),
        steady_eps: cfg.steady_eps,
        negative_clip: cfg.negative_clip,
    };
    match (cfg.n_outputs, &cfg.output_times) {
        (Some(_), Some(_)) => return Err(src.key_error("n_outputs", "give either n_outputs or output_times, not both")),
        (Some(0), None) => return Err(src.key_error("n_outputs", "n_outputs must be positive")),
        (Some(n), None) => integration = integration.with_uniform_outputs(n),
        _ => {}
    }
    if let Err(IntegrateError::InvalidConfig(msg)) = integration.validate() {
        let key = ["rtol", "atol", "t_end", "max_steps", "output_times", "steady_eps", "negative_clip"]
            .into_iter()
            .find(|k| msg.starts_with(k) || (*k == "output_times" && msg.starts_with("output")))
            .unwrap_or("t_end");
        return Err(src.key_error(key, msg));
    }

    for &r in &cfg.tail_r {
        if r == 0 || r > l {
            return Err(src.key_error("tail_r", format!("tail index {r} outside 1..={l}")));
        }
    }
    if let Some(tol) = cfg.check_tol {
        if !(tol.is_finite() && tol >= 0.0) {
            return Err(src.key_error("check_tol", format!("check_tol must be nonnegative, got {tol}")));
        }
    }

    let mut checks = Vec::with_capacity(cfg.checks.len());
    for c in &cfg.checks {
        checks.push(build_check(src, c, &initial)?);
    }

    let name = cfg.name.clone().unwrap_or_else(|| {
        src.path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
    });
    let mut scenario = Scenario::new(name, kernel, model, initial, integration);
    scenario.checks = checks;
    scenario.check_tol = cfg.check_tol;
    Ok(ScenarioSpec { scenario, tail_r: cfg.tail_r, source: src.path.to_path_buf() })
}

fn build_kernel(src: &Source, cfg: &KernelCfg, l: usize) -> Result<CollisionKernel, ConfigError> {
    let err = |e: crate::kernels::KernelError| src.key_error("kernel", e.to_string());
    match cfg {
        KernelCfg::Product { a } => CollisionKernel::product(*a).map_err(err),
        KernelCfg::Power { a, gamma } => CollisionKernel::power(*a, *gamma).map_err(err),
        KernelCfg::Constant { a } => CollisionKernel::constant(*a).map_err(err),
        KernelCfg::UserTable { path, l_max, a1, power_bound } => {
            let table = load_kernel(&resolve(src.dir(), path), *l_max).map_err(err)?;
            if table.l_max() < l {
                return Err(src.key_error("kernel", format!("kernel table covers sizes up to {}, l = {l}", table.l_max())));
            }
            let mut k = CollisionKernel::from_table(table);
            if let Some(a1) = a1 {
                if !(a1.is_finite() && *a1 > 0.0) {
                    return Err(src.key_error("A1", format!("A1 must be positive, got {a1}")));
                }
                k = k.with_quad_bound(*a1);
            }
            if let Some(pb) = power_bound {
                if !(pb.a.is_finite() && pb.a > 0.0 && (0.0..=1.0).contains(&pb.gamma)) {
                    return Err(src.key_error("power_bound", "power_bound needs A > 0 and gamma in [0, 1]"));
                }
                k = k.with_power_bound(Some(PowerBound { a_gamma: pb.a, gamma: pb.gamma }));
            }
            Ok(k)
        }
    }
}

fn build_daughter(src: &Source, cfg: &DaughterCfg, l: usize) -> Result<DaughterDistribution, ConfigError> {
    Ok(match cfg {
        DaughterCfg::DiscreteUniform => DaughterDistribution::discrete_uniform(),
        DaughterCfg::MonomerShatter => DaughterDistribution::monomer_shatter(),
        DaughterCfg::BinarySplit => DaughterDistribution::binary_split(),
        DaughterCfg::PaperRemarkUniform => DaughterDistribution::naive_uniform(),
        DaughterCfg::UserTable { path, j_max, k_max, beta0, beta1 } => {
            let table = load_daughter(&resolve(src.dir(), path), *j_max, *k_max)
                .map_err(|e| src.key_error("daughter", e.to_string()))?;
            let d = DaughterDistribution::from_table(table, Dominance { beta0: *beta0, beta1: *beta1 });
            if !d.covers(l) {
                return Err(src.key_error("daughter", format!("daughter table does not cover l = {l}")));
            }
            d
        }
    })
}

fn build_check(src: &Source, cfg: &CheckCfg, initial: &InitialData) -> Result<CheckSpec, ConfigError> {
    let l = initial.size();
    Ok(match cfg {
        CheckCfg::MassConservation => CheckSpec::MassConservation,
        CheckCfg::TailMonotonicity => CheckSpec::TailMonotonicity,
        CheckCfg::GmomentMonotone { weight } => CheckSpec::GMoment((*weight).into()),
        CheckCfg::DissipationIdentity { weight } => CheckSpec::DissipationIdentity((*weight).into()),
        CheckCfg::ContinuousDependence { size, delta } => {
            if *size == 0 || *size > l {
                return Err(src.key_error("continuous_dependence", format!("perturbed size {size} outside 1..={l}")));
            }
            if let Err(e) = initial.perturbed(*size, *delta) {
                return Err(src.key_error("continuous_dependence", e.to_string()));
            }
            CheckSpec::ContinuousDependence { size: *size, delta: *delta }
        }
        CheckCfg::SupportInvariance => CheckSpec::SupportInvariance,
        CheckCfg::LargeTime { tol_mass } => {
            if !(tol_mass.is_finite() && *tol_mass > 0.0) {
                return Err(src.key_error("tol_mass", format!("tol_mass must be positive, got {tol_mass}")));
            }
            CheckSpec::LargeTime { tol_mass: *tol_mass }
        }
        CheckCfg::TruncationConvergence { l_values } => {
            validate_l_values(l_values, initial.support()).map_err(|m| src.key_error("l_values", m))?;
            CheckSpec::TruncationConvergence { l_values: l_values.clone() }
        }
    })
}

/// Truncation sizes must be strictly increasing and cover the initial support.
pub fn validate_l_values(l_values: &[usize], support: usize) -> Result<(), String> {
    if l_values.is_empty() {
        return Err("truncation size list is empty".into());
    }
    if l_values.windows(2).any(|p| p[1] <= p[0]) {
        return Err(format!("truncation sizes {l_values:?} are not strictly increasing"));
    }
    if l_values[0] < support.max(1) {
        return Err(format!("smallest truncation size {} is below the initial support {support}", l_values[0]));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHATTER: &str = r#"{
  "name": "shatter",
  "l": 64,
  "kernel": {"family": "product", "A": 1.0},
  "daughter": {"family": "monomer-shatter"},
  "initial": {"mode": "monodisperse", "size": 32, "mass": 1.0},
  "rtol": 1e-8,
  "t_end": 1.0,
  "n_outputs": 4,
  "checks": [{"check": "mass_conservation"}, {"check": "gmoment_monotone", "weight": "dlvp"}]
}"#;

    fn parse(text: &str) -> Result<ScenarioSpec, ConfigError> {
        parse_scenario(Path::new("test.json"), text)
    }

    #[test]
    fn parses_full_scenario() {
        let spec = parse(SHATTER).unwrap();
        let s = &spec.scenario;
        assert_eq!(s.name, "shatter");
        assert_eq!(s.size(), 64);
        assert_eq!(s.initial.concentrations()[31], 1.0 / 32.0);
        assert_eq!(s.integration.output_times, vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(s.checks, vec![CheckSpec::MassConservation, CheckSpec::GMoment(WeightSpec::Dlvp)]);
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let text = SHATTER.replace("\"rtol\"", "\"rtoll\"");
        let e = parse(&text).unwrap_err();
        assert_eq!(e.line, 7, "{e}");
        assert!(e.message.contains("rtoll"), "{e}");
    }

    #[test]
    fn size_beyond_truncation_is_anchored() {
        let text = SHATTER.replace("\"size\": 32", "\"size\": 65");
        let e = parse(&text).unwrap_err();
        assert_eq!(e.line, 6, "{e}");
    }

    #[test]
    fn negative_explicit_entry() {
        let text = r#"{"l": 3, "kernel": {"family": "constant", "A": 1},
 "daughter": {"family": "binary-split"},
 "initial": {"mode": "explicit", "w": [1.0, -0.5, 0.0]}}"#;
        let e = parse(text).unwrap_err();
        assert_eq!(e.line, 3, "{e}");
    }

    #[test]
    fn both_models_rejected() {
        let text = r#"{"l": 3, "kernel": {"family": "constant", "A": 1},
 "daughter": {"family": "binary-split"}, "breakup_table": {"path": "x.csv"},
 "initial": {"mode": "monodisperse", "size": 2}}"#;
        assert!(parse(text).is_err());
    }

    #[test]
    fn bad_output_time_is_anchored() {
        let text = r#"{"l": 3, "kernel": {"family": "constant", "A": 1},
 "daughter": {"family": "binary-split"},
 "initial": {"mode": "monodisperse", "size": 2},
 "t_end": 1.0,
 "output_times": [0.5, 2.0]}"#;
        let e = parse(text).unwrap_err();
        assert_eq!(e.line, 5, "{e}");
    }

    #[test]
    fn suite_entries_report_file_lines() {
        let text = format!("{{\"scenarios\": [\n{},\n{}\n]}}", SHATTER, SHATTER.replace("\"l\": 64", "\"l\": 64, \"bogus\": 1"));
        let e = parse_suite(Path::new("suite.json"), &text).unwrap_err();
        // the offending key of the second entry sits on line 15 of the suite
        assert_eq!(e.line, 15, "{e}");
        let ok = parse_suite(Path::new("suite.json"), &format!("{{\"scenarios\": [{SHATTER}]}}")).unwrap();
        assert_eq!(ok.len(), 1);
    }

    #[test]
    fn single_scenario_is_a_suite() {
        assert_eq!(parse_suite(Path::new("s.json"), SHATTER).unwrap().len(), 1);
    }

    #[test]
    fn weight_exponent() {
        let text = SHATTER.replace("\"weight\": \"dlvp\"", "\"weight\": 1.5");
        let spec = parse(&text).unwrap();
        assert_eq!(spec.scenario.checks[1], CheckSpec::GMoment(WeightSpec::Power(1.5)));
    }

    #[test]
    fn l_values_validation() {
        assert!(validate_l_values(&[32, 64], 32).is_ok());
        assert!(validate_l_values(&[64, 32], 8).is_err());
        assert!(validate_l_values(&[8, 16], 9).is_err());
        assert!(validate_l_values(&[], 1).is_err());
    }
}
