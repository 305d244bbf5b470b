//! Conservation laws, monotonicity and stability statements as checks on
//! computed states and trajectories.
//!
//! Every check returns a [`CheckReport`]. A check whose hypotheses are not met
//! (a weight outside the convex class, a kernel without a power bound, a
//! mass-transferring breakup table, ...) reports [`Outcome::Inapplicable`]
//! instead of failing.

use std::fmt;

use rayon::prelude::*;

use crate::integrator::{IntegrationConfig, Trajectory};
use crate::kernels::{validate_breakup, validate_daughter, validate_kernel, CollisionKernel, DaughterDistribution, ValidationReport};
use crate::rhs::{rhs_b_form, ModelForm};
use crate::scenario::{CheckSpec, Model, Scenario, ScenarioError, WeightSpec};
use crate::state::{build_dlvp_weight, ClusterState, MomentWeight};

pub const REF_MASS: &str = "total mass sum_i i w_i is conserved";
pub const REF_TAIL: &str = "tail masses sum_{i>=r} i w_i never increase";
pub const REF_GMOMENT: &str = "sum_i G(i) w_i never increases for convex G with concave G'";
pub const REF_DISSIPATION: &str = "G-moment rate equals minus a nonnegative dissipation sum";
pub const REF_CONTINUITY: &str = "Gronwall bound on the mass-norm distance of two solutions";
pub const REF_SUPPORT: &str = "no cluster larger than the initial support is created";
pub const REF_LARGE_TIME: &str = "all mass ends in monomers when diagonal rates are positive";
pub const REF_CONVERGENCE: &str = "truncated solutions converge as the truncation grows";
pub const REF_KERNEL: &str = "kernel is symmetric, nonnegative, at most quadratic";
pub const REF_DAUGHTER: &str = "fragments conserve mass and satisfy the dominance bound";
pub const REF_BREAKUP: &str = "breakup table is symmetric and conserves mass";

/// Default tolerance of the dissipation identity.
pub const DISSIPATION_TOLERANCE: f64 = 1e-10;
/// Fixed tolerance of the support check, relative to the initial mass.
pub const SUPPORT_TOLERANCE: f64 = 1e-14;
/// Allowed growth factor between consecutive truncation errors.
pub const CONVERGENCE_SLACK: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Pass,
    Fail,
    Inapplicable(String),
}

/// Where the worst violation was seen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Worst {
    pub value: f64,
    pub time: Option<f64>,
    pub index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub outcome: Outcome,
    pub worst: Worst,
    pub tolerance: f64,
    pub reference: &'static str,
}

impl CheckReport {
    /// Pass iff `worst.value <= tolerance`.
    pub fn judge(name: &'static str, reference: &'static str, worst: Worst, tolerance: f64) -> Self {
        let outcome = if worst.value <= tolerance { Outcome::Pass } else { Outcome::Fail };
        Self { name, outcome, worst, tolerance, reference }
    }

    pub fn inapplicable(name: &'static str, reference: &'static str, why: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name,
            outcome: Outcome::Inapplicable(why.into()),
            worst: Worst::default(),
            tolerance,
            reference,
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    pub fn failed(&self) -> bool {
        self.outcome == Outcome::Fail
    }

    pub fn status(&self) -> &'static str {
        match self.outcome {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Inapplicable(_) => "inapplicable",
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<24} {:<12} worst={:.3e} tol={:.1e}",
            self.name,
            self.status(),
            self.worst.value,
            self.tolerance
        )?;
        if let Some(t) = self.worst.time {
            write!(f, " t={t}")?;
        }
        if let Some(i) = self.worst.index {
            write!(f, " i={i}")?;
        }
        if let Outcome::Inapplicable(why) = &self.outcome {
            write!(f, " ({why})")?;
        }
        Ok(())
    }
}

fn mass_scale(traj: &Trajectory) -> f64 {
    let m = traj.initial().mass();
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Pass iff `max_t |M1(t) - M1(0)| <= tol * M1(0)`.
pub fn check_mass_conservation(traj: &Trajectory, tol: f64) -> CheckReport {
    let m0 = traj.initial().mass();
    let scale = mass_scale(traj);
    let mut worst = Worst::default();
    for s in traj.snapshots() {
        let dev = (s.mass() - m0).abs() / scale;
        if dev > worst.value {
            worst = Worst { value: dev, time: Some(s.time()), index: None };
        }
    }
    CheckReport::judge("mass_conservation", REF_MASS, worst, tol)
}

/// Pass iff every tail mass `sum_{i>=r} i w_i`, `1 <= r <= l`, is
/// nonincreasing between every ordered pair of snapshots, within
/// `tol * M1(0)`.
pub fn check_tail_monotonicity(traj: &Trajectory, tol: f64) -> CheckReport {
    let l = traj.size();
    let scale = mass_scale(traj);
    // tails[n][r-1]
    let tails: Vec<Vec<f64>> = traj
        .snapshots()
        .iter()
        .map(|s| {
            let w = s.concentrations();
            let mut out = vec![0.0; l];
            let mut acc = 0.0;
            for i in (1..=l).rev() {
                acc += i as f64 * w[i - 1];
                out[i - 1] = acc;
            }
            out
        })
        .collect();
    let mut worst = Worst::default();
    for later in 1..tails.len() {
        for earlier in 0..later {
            for r in 0..l {
                let growth = (tails[later][r] - tails[earlier][r]) / scale;
                if growth > worst.value {
                    worst = Worst {
                        value: growth,
                        time: Some(traj.snapshots()[later].time()),
                        index: Some(r + 1),
                    };
                }
            }
        }
    }
    CheckReport::judge("tail_monotonicity", REF_TAIL, worst, tol)
}

/// Pass iff `sum G(i) w_i` is nonincreasing over all ordered snapshot pairs
/// within `tol * M_G(0)`. Inapplicable when `G` lacks class evidence.
pub fn check_gmoment_monotone(traj: &Trajectory, g: &MomentWeight, tol: f64) -> CheckReport {
    const NAME: &str = "gmoment_monotone";
    if !g.evidence().in_g1() {
        return CheckReport::inapplicable(NAME, REF_GMOMENT, format!("weight {} is outside the convex class", g.label()), tol);
    }
    let moments: Result<Vec<f64>, _> = traj.snapshots().iter().map(|s| s.g_moment(g)).collect();
    let moments = match moments {
        Ok(m) => m,
        Err(e) => return CheckReport::inapplicable(NAME, REF_GMOMENT, e.to_string(), tol),
    };
    let scale = if moments[0] > 0.0 { moments[0] } else { 1.0 };
    let mut worst = Worst::default();
    for later in 1..moments.len() {
        for earlier in 0..later {
            let growth = (moments[later] - moments[earlier]) / scale;
            if growth > worst.value {
                worst = Worst { value: growth, time: Some(traj.snapshots()[later].time()), index: None };
            }
        }
    }
    CheckReport::judge(NAME, REF_GMOMENT, worst, tol)
}

/// Both sides of the dissipation identity at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipation {
    /// `sum_i G(i) dw_i/dt`.
    pub moment_rate: f64,
    /// `sum_i G(i) |dw_i/dt|`.
    pub moment_rate_abs: f64,
    /// `sum_{j<l} sum_{k<=l-j} sum_{i<j} (G(j)/j - G(i)/i) i b(i,j;k) a(j,k) w_j w_k`.
    pub triple_sum: f64,
    /// Smallest single term of the triple sum.
    pub min_term: f64,
}

/// Evaluates both sides of the dissipation identity. The triple sum is a
/// literal loop, independent of the right-hand side code.
pub fn dissipation(
    state: &ClusterState,
    kernel: &CollisionKernel,
    d: &DaughterDistribution,
    g: &MomentWeight,
) -> Result<Dissipation, ScenarioError> {
    let l = state.size();
    if g.max_size() < l {
        return Err(ScenarioError::Invalid(format!("weight sampled to {}, state has l = {l}", g.max_size())));
    }
    let rhs = rhs_b_form(state, kernel, d)?;
    let gv = g.values();
    let moment_rate = rhs.iter().enumerate().map(|(n, r)| gv[n + 1] * r).sum();
    let moment_rate_abs = rhs.iter().enumerate().map(|(n, r)| gv[n + 1] * r.abs()).sum();

    let w = state.concentrations();
    let mut triple_sum = 0.0;
    let mut min_term = 0.0f64;
    for j in 2..l {
        let wj = w[j - 1];
        if wj == 0.0 {
            continue;
        }
        let gj = gv[j] / j as f64;
        for k in 1..=l - j {
            let flux = kernel.eval(j, k).map_err(|e| ScenarioError::Invalid(e.to_string()))? * wj * w[k - 1];
            if flux == 0.0 {
                continue;
            }
            for i in 1..j {
                let b = d.eval(i, j, k).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
                let term = (gj - gv[i] / i as f64) * i as f64 * b * flux;
                triple_sum += term;
                min_term = min_term.min(term);
            }
        }
    }
    Ok(Dissipation { moment_rate, moment_rate_abs, triple_sum, min_term })
}

/// Pass iff `|sum G(i) rhs_i + triple_sum| <= 1e-10 (|triple_sum| + sum G(i)|rhs_i|)`
/// and no term of the triple sum is negative.
pub fn check_dissipation_identity(
    state: &ClusterState,
    kernel: &CollisionKernel,
    d: &DaughterDistribution,
    g: &MomentWeight,
) -> CheckReport {
    check_dissipation_with_tolerance(state, kernel, d, g, DISSIPATION_TOLERANCE)
}

pub fn check_dissipation_with_tolerance(
    state: &ClusterState,
    kernel: &CollisionKernel,
    d: &DaughterDistribution,
    g: &MomentWeight,
    tol: f64,
) -> CheckReport {
    const NAME: &str = "dissipation_identity";
    if !g.evidence().in_g1() {
        return CheckReport::inapplicable(NAME, REF_DISSIPATION, format!("weight {} is outside the convex class", g.label()), tol);
    }
    let dis = match dissipation(state, kernel, d, g) {
        Ok(v) => v,
        Err(e) => return CheckReport::inapplicable(NAME, REF_DISSIPATION, e.to_string(), tol),
    };
    let denom = dis.triple_sum.abs() + dis.moment_rate_abs;
    let residual = (dis.moment_rate + dis.triple_sum).abs();
    let rel = if denom > 0.0 { residual / denom } else { residual };
    // a negative term is a hard failure regardless of the residual
    let value = if dis.min_term < -tol * denom.max(f64::MIN_POSITIVE) { f64::INFINITY } else { rel };
    CheckReport::judge(NAME, REF_DISSIPATION, Worst { value, time: Some(state.time()), index: None }, tol)
}

/// Mass-norm distance `sum_i i |x_i - y_i|`.
pub fn mass_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).enumerate().map(|(n, (a, b))| (n + 1) as f64 * (a - b).abs()).sum()
}

/// Gronwall factor `exp(2 A_gamma t min(M_{1+gamma}(w_in), M_{1+gamma}(w_hat_in)))`.
pub fn continuity_factor(a_gamma: f64, gamma: f64, t: f64, w_in: &ClusterState, w_hat_in: &ClusterState) -> f64 {
    let m = w_in.moment(1.0 + gamma).min(w_hat_in.moment(1.0 + gamma));
    (2.0 * a_gamma * t * m).exp()
}

/// Pass iff `||w(t) - w_hat(t)|| <= kappa(t) ||w_in - w_hat_in|| (1 + tol)` at every
/// snapshot. With identical initial data the trajectories must agree within
/// `tol * M1(0)`.
pub fn check_continuous_dependence(traj: &Trajectory, traj_hat: &Trajectory, kernel: &CollisionKernel, tol: f64) -> CheckReport {
    const NAME: &str = "continuous_dependence";
    let Some(bound) = kernel.power_bound() else {
        return CheckReport::inapplicable(NAME, REF_CONTINUITY, "kernel declares no power bound", tol);
    };
    if traj.size() != traj_hat.size() || traj.times() != traj_hat.times() {
        return CheckReport::inapplicable(NAME, REF_CONTINUITY, "trajectories do not share snapshot times", tol);
    }
    let (w0, v0) = (traj.initial(), traj_hat.initial());
    let delta_in = mass_distance(w0.concentrations(), v0.concentrations());
    let scale = mass_scale(traj);
    let mut worst = Worst::default();
    for (a, b) in traj.snapshots().iter().zip(traj_hat.snapshots()) {
        let dist = mass_distance(a.concentrations(), b.concentrations());
        let value = if delta_in > 0.0 {
            let kappa = continuity_factor(bound.a_gamma, bound.gamma, a.time(), w0, v0);
            dist / (kappa * delta_in) - 1.0
        } else {
            dist / scale
        };
        if worst.time.is_none() || value > worst.value {
            worst = Worst { value, time: Some(a.time()), index: None };
        }
    }
    CheckReport::judge(NAME, REF_CONTINUITY, worst, tol)
}

/// Pass iff `w_i(t) <= 1e-14 M1(0)` for all `i > m` at every snapshot.
pub fn check_support_invariance(traj: &Trajectory, m: usize) -> CheckReport {
    const NAME: &str = "support_invariance";
    if let ModelForm::Breakup { mass_transfer: true } = traj.form() {
        return CheckReport::inapplicable(
            NAME,
            REF_SUPPORT,
            "breakup table transfers mass; support invariance needs fragments no larger than the parent",
            SUPPORT_TOLERANCE,
        );
    }
    if traj.initial().support() > m {
        return CheckReport::inapplicable(NAME, REF_SUPPORT, format!("initial support exceeds {m}"), SUPPORT_TOLERANCE);
    }
    let scale = mass_scale(traj);
    let mut worst = Worst::default();
    for s in traj.snapshots() {
        for (n, &v) in s.concentrations().iter().enumerate().skip(m) {
            if v / scale > worst.value {
                worst = Worst { value: v / scale, time: Some(s.time()), index: Some(n + 1) };
            }
        }
    }
    CheckReport::judge(NAME, REF_SUPPORT, worst, SUPPORT_TOLERANCE)
}

/// Pass iff at the final snapshot `|w_1 - M1(0)|` and `sum_{i>=2} i w_i` are
/// both below `tol_mass * M1(0)`. Needs `a(i,i) > 0` for `2 <= i <= l`; with
/// some zero diagonal entries only the sizes `i` with `a(i,i) > 0` and
/// `2i <= l` are required to empty out.
pub fn check_large_time(traj: &Trajectory, kernel: &CollisionKernel, tol_mass: f64) -> CheckReport {
    const NAME: &str = "large_time";
    let l = traj.size();
    let mut diag = Vec::with_capacity(l);
    for i in 2..=l {
        match kernel.eval(i, i) {
            Ok(a) => diag.push((i, a)),
            Err(e) => return CheckReport::inapplicable(NAME, REF_LARGE_TIME, e.to_string(), tol_mass),
        }
    }
    let m0 = traj.initial().mass();
    let scale = mass_scale(traj);
    let last = traj.last();
    let w = last.concentrations();
    let t = Some(last.time());
    if diag.iter().all(|&(_, a)| a > 0.0) {
        let monomer_gap = (w[0] - m0).abs() / scale;
        let residual: f64 = (2..=l).map(|i| i as f64 * w[i - 1]).sum::<f64>() / scale;
        let worst = if monomer_gap >= residual {
            Worst { value: monomer_gap, time: t, index: Some(1) }
        } else {
            Worst { value: residual, time: t, index: None }
        };
        return CheckReport::judge(NAME, REF_LARGE_TIME, worst, tol_mass);
    }
    let decaying: Vec<usize> = diag.iter().filter(|&&(i, a)| a > 0.0 && 2 * i <= l).map(|&(i, _)| i).collect();
    if decaying.is_empty() {
        return CheckReport::inapplicable(NAME, REF_LARGE_TIME, "no size has a positive diagonal rate", tol_mass);
    }
    let mut worst = Worst::default();
    for i in decaying {
        let v = i as f64 * w[i - 1] / scale;
        if v > worst.value {
            worst = Worst { value: v, time: t, index: Some(i) };
        }
    }
    CheckReport::judge(NAME, REF_LARGE_TIME, worst, tol_mass)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub t_probe: f64,
    /// `(l, delta(l))` with `delta(l) = ||w^l(t) - w^{2l}(t)||` over sizes `<= l`.
    pub rows: Vec<(usize, f64)>,
    pub slack: f64,
}

impl ConvergenceReport {
    /// Largest `delta(l_{n+1}) - slack * delta(l_n)`, floored at zero.
    pub fn worst_excess(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|p| p[1].1 - self.slack * p[0].1)
            .fold(0.0, f64::max)
    }

    pub fn monotone(&self) -> bool {
        self.worst_excess() <= 0.0
    }

    pub fn to_check(&self) -> CheckReport {
        CheckReport::judge(
            "truncation_convergence",
            REF_CONVERGENCE,
            Worst { value: self.worst_excess(), time: Some(self.t_probe), index: None },
            0.0,
        )
    }
}

/// Runs the scenario at `l` and `2l` for each `l` and reports the mass-norm
/// distance of the two solutions at `t_probe`, restricted to sizes `<= l`.
pub fn truncation_convergence(scenario: &Scenario, l_values: &[usize], t_probe: f64) -> Result<ConvergenceReport, ScenarioError> {
    if l_values.windows(2).any(|p| p[1] <= p[0]) {
        return Err(ScenarioError::Invalid("truncation sizes must be strictly increasing".into()));
    }
    let support = scenario.initial.support();
    if let Some(&l0) = l_values.first() {
        if l0 < support {
            return Err(ScenarioError::Invalid(format!("initial support {support} exceeds the smallest truncation {l0}")));
        }
    }
    let cfg = IntegrationConfig {
        t_end: t_probe,
        output_times: vec![t_probe],
        steady_eps: None,
        ..scenario.integration.clone()
    };
    let rows = l_values
        .par_iter()
        .map(|&l| {
            let small = scenario.at_size(l)?;
            let large = scenario.at_size(2 * l)?;
            let (a, b) = rayon::join(
                || small.run_from(&small.initial, &cfg),
                || large.run_from(&large.initial, &cfg),
            );
            let (a, b) = (a?, b?);
            let delta = mass_distance(a.last().concentrations(), &b.last().concentrations()[..l]);
            Ok((l, delta))
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    Ok(ConvergenceReport { t_probe, rows, slack: CONVERGENCE_SLACK })
}

fn validation_check(name: &'static str, reference: &'static str, report: &ValidationReport) -> CheckReport {
    let worst = Worst { value: report.worst_excess(), time: None, index: None };
    let mut check = CheckReport::judge(name, reference, worst, 0.0);
    if !report.is_valid() {
        check.outcome = Outcome::Fail;
    }
    check
}

/// Validation of the scenario's kernel and fragmentation model over its
/// truncation size.
pub fn validate_scenario(scenario: &Scenario) -> Vec<CheckReport> {
    let l = scenario.size().max(2);
    let mut out = vec![validation_check("kernel_validation", REF_KERNEL, &validate_kernel(&scenario.kernel, l))];
    match &scenario.model {
        Model::Daughter(d) => {
            out.push(validation_check("daughter_validation", REF_DAUGHTER, &validate_daughter(d, l, l)));
        }
        Model::Breakup(t) => {
            out.push(validation_check("breakup_validation", REF_BREAKUP, &validate_breakup(t, l)));
        }
    }
    out
}

fn weight_for(spec: WeightSpec, scenario: &Scenario) -> Result<MomentWeight, ScenarioError> {
    match spec {
        WeightSpec::Power(p) => Ok(MomentWeight::power(scenario.size(), p)),
        WeightSpec::Dlvp => Ok(build_dlvp_weight(&scenario.initial, scenario.size())?),
    }
}

/// Runs the scenario and every listed check. Validation rows come first; no
/// checks means no work and an empty list.
pub fn run_checks(scenario: &Scenario) -> Result<Vec<CheckReport>, ScenarioError> {
    if scenario.checks.is_empty() {
        return Ok(Vec::new());
    }
    let mut reports = validate_scenario(scenario);
    let tol = scenario.trajectory_tolerance();
    let traj = scenario.run()?;
    for check in &scenario.checks {
        let report = match check {
            CheckSpec::MassConservation => check_mass_conservation(&traj, tol),
            CheckSpec::TailMonotonicity => check_tail_monotonicity(&traj, tol),
            CheckSpec::GMoment(spec) => check_gmoment_monotone(&traj, &weight_for(*spec, scenario)?, tol),
            CheckSpec::DissipationIdentity(spec) => match scenario.daughter() {
                None => CheckReport::inapplicable(check.name(), REF_DISSIPATION, "breakup-table model", DISSIPATION_TOLERANCE),
                Some(d) => {
                    let g = weight_for(*spec, scenario)?;
                    traj.snapshots()
                        .iter()
                        .map(|s| check_dissipation_identity(s, &scenario.kernel, d, &g))
                        .reduce(|a, b| match (&a.outcome, &b.outcome) {
                            (Outcome::Inapplicable(_), _) => a,
                            (_, Outcome::Inapplicable(_)) => b,
                            _ if b.worst.value > a.worst.value => b,
                            _ => a,
                        })
                        .expect("trajectory has at least one snapshot")
                }
            },
            CheckSpec::ContinuousDependence { size, delta } => {
                let perturbed = scenario.initial.perturbed(*size, *delta)?;
                let traj_hat = scenario.run_from(&perturbed, &scenario.integration)?;
                check_continuous_dependence(&traj, &traj_hat, &scenario.kernel, tol)
            }
            CheckSpec::SupportInvariance => check_support_invariance(&traj, scenario.initial.support()),
            CheckSpec::LargeTime { tol_mass } => check_large_time(&traj, &scenario.kernel, *tol_mass),
            CheckSpec::TruncationConvergence { l_values } => {
                truncation_convergence(scenario, l_values, scenario.integration.t_end)?.to_check()
            }
        };
        reports.push(report);
    }
    Ok(reports)
}
