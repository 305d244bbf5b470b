//! Adaptive time stepping with the Dormand–Prince 5(4) pair.
//!
//! Step size follows a PI controller on the max-norm of the embedded error
//! estimate. Requested output times are hit exactly by shortening the step
//! that would cross them. A step whose result dips below `-negative_clip`
//! anywhere is rejected like an inaccurate one; accepted steps have their
//! tiny negative entries clipped to zero.

use thiserror::Error;

use crate::kernels::{CollisionKernel, DaughterDistribution};
use crate::rhs::{DaughterSystem, ModelForm, RateSystem, RhsError, RhsWorkspace};
use crate::state::{self, ClusterState, InitialData};

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationConfig {
    pub rtol: f64,
    pub atol: f64,
    pub t_end: f64,
    /// Sorted times in `[0, t_end]` at which snapshots are recorded. The
    /// initial state and `t_end` are always recorded.
    pub output_times: Vec<f64>,
    pub max_steps: usize,
    /// Stop once `sum_i i |dw_i/dt| <= steady_eps`; `None` never stops early.
    pub steady_eps: Option<f64>,
    /// Undershoot allowed before a step is rejected; `None` means
    /// `1e-14 * M1(0)`.
    pub negative_clip: Option<f64>,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-14,
            t_end: 1.0,
            output_times: Vec::new(),
            max_steps: 1_000_000,
            steady_eps: None,
            negative_clip: None,
        }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<(), IntegrateError> {
        let bad = |msg: String| Err(IntegrateError::InvalidConfig(msg));
        if !(self.rtol.is_finite() && self.rtol > 0.0) {
            return bad(format!("rtol must be positive, got {}", self.rtol));
        }
        if !(self.atol.is_finite() && self.atol > 0.0) {
            return bad(format!("atol must be positive, got {}", self.atol));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        for (n, &t) in self.output_times.iter().enumerate() {
            if !(0.0..=self.t_end).contains(&t) {
                return bad(format!("output time {t} outside [0, {}]", self.t_end));
            }
            if n > 0 && t < self.output_times[n - 1] {
                return bad("output_times must be sorted".into());
            }
        }
        if let Some(eps) = self.steady_eps {
            if !(eps >= 0.0) {
                return bad(format!("steady_eps must be nonnegative, got {eps}"));
            }
        }
        if let Some(clip) = self.negative_clip {
            if !(clip >= 0.0) {
                return bad(format!("negative_clip must be nonnegative, got {clip}"));
            }
        }
        Ok(())
    }

    /// `n` evenly spaced snapshot times ending at `t_end`.
    pub fn with_uniform_outputs(mut self, n: usize) -> Self {
        self.output_times = (1..=n).map(|k| self.t_end * k as f64 / n as f64).collect();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ReachedEnd,
    SteadyState,
    MaxSteps,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub final_step: f64,
    pub rhs_evals: usize,
    /// Mass `sum i |w_i|` removed by clipping negative entries.
    pub clipped_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    snapshots: Vec<ClusterState>,
    stats: StepStats,
    termination: Termination,
    form: ModelForm,
}

impl Trajectory {
    /// Assembles a trajectory from existing snapshots (times strictly
    /// increasing, all of one size).
    pub fn from_snapshots(snapshots: Vec<ClusterState>, form: ModelForm) -> Result<Self, IntegrateError> {
        if snapshots.is_empty() {
            return Err(IntegrateError::InvalidConfig("trajectory needs at least one snapshot".into()));
        }
        let l = snapshots[0].size();
        for pair in snapshots.windows(2) {
            if pair[1].time() <= pair[0].time() {
                return Err(IntegrateError::InvalidConfig("snapshot times must increase".into()));
            }
            if pair[1].size() != l {
                return Err(IntegrateError::DimensionMismatch { expected: l, found: pair[1].size() });
            }
        }
        Ok(Self { snapshots, stats: StepStats::default(), termination: Termination::ReachedEnd, form })
    }

    pub fn snapshots(&self) -> &[ClusterState] {
        &self.snapshots
    }

    pub fn initial(&self) -> &ClusterState {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &ClusterState {
        self.snapshots.last().unwrap()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(ClusterState::time).collect()
    }

    pub fn size(&self) -> usize {
        self.initial().size()
    }

    pub fn stats(&self) -> &StepStats {
        &self.stats
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    pub fn form(&self) -> ModelForm {
        self.form
    }

    /// First snapshot at or after `t`.
    pub fn at(&self, t: f64) -> Option<&ClusterState> {
        self.snapshots.iter().find(|s| s.time() >= t)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("invalid integration config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("max_steps exceeded at t = {t}")]
    MaxSteps { t: f64, partial: Box<Trajectory> },
    #[error("step size underflow (h = {h:e}) at t = {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Rhs(#[from] RhsError),
}

/// True iff `sum_i i |rhs_i| <= steady_eps`.
pub fn detect_steady_state(state: &ClusterState, rhs: &[f64], steady_eps: f64) -> bool {
    debug_assert_eq!(state.size(), rhs.len());
    mass_norm(rhs) <= steady_eps
}

fn mass_norm(v: &[f64]) -> f64 {
    v.iter().enumerate().map(|(n, x)| (n + 1) as f64 * x.abs()).sum()
}

/// Integrates the daughter-form system from `w_in`.
pub fn integrate(
    w_in: &InitialData,
    kernel: &CollisionKernel,
    d: &DaughterDistribution,
    cfg: &IntegrationConfig,
) -> Result<Trajectory, IntegrateError> {
    let system = DaughterSystem::new(kernel, d, w_in.size())?;
    integrate_system(&system, w_in.concentrations(), cfg)
}

pub fn integrate_system<S: RateSystem>(
    system: &S,
    w_in: &[f64],
    cfg: &IntegrationConfig,
) -> Result<Trajectory, IntegrateError> {
    integrate_observed(system, w_in, cfg, |_, _| {})
}

// Dormand–Prince 5(4) tableau; the system is autonomous so the nodes c_i
// are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI controller
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - 0.75 * BETA;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

struct Stages {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl Stages {
    fn new(l: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; l]),
            tmp: vec![0.0; l],
            y_new: vec![0.0; l],
        }
    }
}

/// Like [`integrate_system`], calling `observer(t, w)` after every accepted
/// (and clipped) step.
pub fn integrate_observed<S: RateSystem, F: FnMut(f64, &[f64])>(
    system: &S,
    w_in: &[f64],
    cfg: &IntegrationConfig,
    mut observer: F,
) -> Result<Trajectory, IntegrateError> {
    cfg.validate()?;
    let l = system.size();
    if w_in.len() != l {
        return Err(IntegrateError::DimensionMismatch { expected: l, found: w_in.len() });
    }
    let initial = ClusterState::new(w_in.to_vec(), 0.0)
        .map_err(|e| IntegrateError::InvalidConfig(format!("initial data: {e}")))?;
    let m0 = initial.mass();
    let clip = cfg.negative_clip.unwrap_or(1e-14 * m0);

    let mut targets: Vec<f64> = cfg.output_times.iter().copied().filter(|&t| t > 0.0).collect();
    if targets.last().is_none_or(|&t| t < cfg.t_end) {
        targets.push(cfg.t_end);
    }
    targets.dedup();

    let mut ws = RhsWorkspace::new(l);
    let mut st = Stages::new(l);
    let mut y = w_in.to_vec();
    let mut t = 0.0;
    let mut stats = StepStats::default();
    let mut snapshots = vec![initial];

    system.evaluate(&y, &mut st.k[0], &mut ws);
    stats.rhs_evals += 1;

    let finish = |snapshots: Vec<ClusterState>, stats: StepStats, termination| Trajectory {
        snapshots,
        stats,
        termination,
        form: system.form(),
    };

    if let Some(eps) = cfg.steady_eps {
        if mass_norm(&st.k[0]) <= eps {
            return Ok(finish(snapshots, stats, Termination::SteadyState));
        }
    }

    let mut h = cfg.rtol.powf(0.2) / (1.0 + st.k[0].iter().map(|v| v.abs()).sum::<f64>());
    let mut err_prev: f64 = 1e-4;
    let mut next_target = 0usize;
    let mut steps = 0usize;

    while next_target < targets.len() {
        if steps >= cfg.max_steps {
            let partial = finish(snapshots, stats, Termination::MaxSteps);
            return Err(IntegrateError::MaxSteps { t, partial: Box::new(partial) });
        }
        steps += 1;

        let target = targets[next_target];
        let remaining = target - t;
        let hits_target = h >= remaining;
        let step = if hits_target { remaining } else { h };
        if step <= 16.0 * f64::EPSILON * t.abs().max(1.0) && !hits_target {
            return Err(IntegrateError::StepUnderflow { t, h: step });
        }

        dp_stages(system, &y, step, &mut st, &mut ws);
        stats.rhs_evals += 6;

        // max-norm of the scaled error estimate
        let mut err: f64 = 0.0;
        for n in 0..l {
            let e = step
                * (E1 * st.k[0][n] + E3 * st.k[2][n] + E4 * st.k[3][n] + E5 * st.k[4][n] + E6 * st.k[5][n]
                    + E7 * st.k[6][n]);
            let scale = cfg.atol + cfg.rtol * y[n].abs().max(st.y_new[n].abs());
            err = err.max((e / scale).abs());
        }
        if !err.is_finite() {
            if step <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
                return Err(IntegrateError::NonFinite { t });
            }
            stats.rejected += 1;
            h = step * MIN_FACTOR;
            continue;
        }

        let fac_err = err.powf(EXPO);
        if err > 1.0 {
            stats.rejected += 1;
            h = step / (1.0 / MIN_FACTOR).min(fac_err / SAFETY);
            continue;
        }
        let min_w = st.y_new.iter().copied().fold(f64::INFINITY, f64::min);
        if min_w < -clip {
            stats.rejected += 1;
            h = step * 0.5;
            if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
                return Err(IntegrateError::StepUnderflow { t, h });
            }
            continue;
        }

        // accept
        stats.accepted += 1;
        t = if hits_target { target } else { t + step };
        std::mem::swap(&mut y, &mut st.y_new);
        let mut clipped = 0.0;
        for (n, v) in y.iter_mut().enumerate() {
            if *v < 0.0 {
                clipped += (n + 1) as f64 * -*v;
                *v = 0.0;
            }
        }
        if clipped > 0.0 {
            stats.clipped_mass += clipped;
            system.evaluate(&y, &mut st.k[6], &mut ws);
            stats.rhs_evals += 1;
        }
        st.k.swap(0, 6);
        observer(t, &y);

        let fac = (fac_err / err_prev.powf(BETA) / SAFETY).clamp(1.0 / MAX_FACTOR, 1.0 / MIN_FACTOR);
        let h_next = step / fac;
        err_prev = err.max(1e-4);
        // a step shortened to land on an output time keeps the proposal it
        // would otherwise have used
        h = if hits_target { h_next.max(h) } else { h_next };
        stats.final_step = step;

        if hits_target {
            snapshots.push(ClusterState::new(y.clone(), t).map_err(|_| IntegrateError::NonFinite { t })?);
            next_target += 1;
        }
        if let Some(eps) = cfg.steady_eps {
            if mass_norm(&st.k[0]) <= eps {
                if !hits_target {
                    snapshots.push(ClusterState::new(y.clone(), t).map_err(|_| IntegrateError::NonFinite { t })?);
                }
                return Ok(finish(snapshots, stats, Termination::SteadyState));
            }
        }
    }
    debug_assert!(state::mass(&y).is_finite());
    Ok(finish(snapshots, stats, Termination::ReachedEnd))
}

/// Fills stages `k[1..7]` and `y_new` for one step of size `h` from `y`,
/// assuming `k[0] = f(y)`.
fn dp_stages<S: RateSystem>(system: &S, y: &[f64], h: f64, st: &mut Stages, ws: &mut RhsWorkspace) {
    let l = y.len();
    let Stages { k, tmp, y_new } = st;

    for n in 0..l {
        tmp[n] = y[n] + h * A21 * k[0][n];
    }
    system.evaluate(tmp, &mut k[1], ws);
    for n in 0..l {
        tmp[n] = y[n] + h * (A31 * k[0][n] + A32 * k[1][n]);
    }
    system.evaluate(tmp, &mut k[2], ws);
    for n in 0..l {
        tmp[n] = y[n] + h * (A41 * k[0][n] + A42 * k[1][n] + A43 * k[2][n]);
    }
    system.evaluate(tmp, &mut k[3], ws);
    for n in 0..l {
        tmp[n] = y[n] + h * (A51 * k[0][n] + A52 * k[1][n] + A53 * k[2][n] + A54 * k[3][n]);
    }
    system.evaluate(tmp, &mut k[4], ws);
    for n in 0..l {
        tmp[n] = y[n] + h * (A61 * k[0][n] + A62 * k[1][n] + A63 * k[2][n] + A64 * k[3][n] + A65 * k[4][n]);
    }
    system.evaluate(tmp, &mut k[5], ws);
    for n in 0..l {
        y_new[n] = y[n] + h * (A71 * k[0][n] + A73 * k[2][n] + A74 * k[3][n] + A75 * k[4][n] + A76 * k[5][n]);
    }
    system.evaluate(y_new, &mut k[6], ws);
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay {
        rate: f64,
    }

    impl RateSystem for Decay {
        fn size(&self) -> usize {
            1
        }
        fn form(&self) -> ModelForm {
            ModelForm::Daughter
        }
        fn evaluate(&self, w: &[f64], out: &mut [f64], _: &mut RhsWorkspace) {
            out[0] = -self.rate * w[0];
        }
    }

    #[test]
    fn exponential_decay() {
        let cfg = IntegrationConfig { rtol: 1e-10, atol: 1e-20, t_end: 2.0, ..Default::default() }
            .with_uniform_outputs(4);
        let traj = integrate_system(&Decay { rate: 3.0 }, &[1.0], &cfg).unwrap();
        assert_eq!(traj.times(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        for s in traj.snapshots() {
            let exact = (-3.0 * s.time()).exp();
            assert!((s.concentrations()[0] - exact).abs() <= 1e-8 * exact);
        }
        assert_eq!(traj.termination(), Termination::ReachedEnd);
    }

    #[test]
    fn pure_monomers_stay_put() {
        let k = CollisionKernel::product(1.0).unwrap();
        let d = DaughterDistribution::discrete_uniform();
        let mut w = vec![0.0; 16];
        w[0] = 1.0;
        let data = InitialData::explicit(w.clone()).unwrap();
        let cfg = IntegrationConfig { t_end: 5.0, ..Default::default() }.with_uniform_outputs(5);
        let traj = integrate(&data, &k, &d, &cfg).unwrap();
        assert_eq!(traj.snapshots().len(), 6);
        assert!(traj.snapshots().iter().all(|s| s.concentrations() == w.as_slice()));
    }

    #[test]
    fn zero_data_is_an_equilibrium() {
        let k = CollisionKernel::constant(1.0).unwrap();
        let d = DaughterDistribution::binary_split();
        let data = InitialData::explicit(vec![0.0; 10]).unwrap();
        let traj = integrate(&data, &k, &d, &IntegrationConfig::default()).unwrap();
        assert!(traj.last().concentrations().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn steady_state_stops_early() {
        let k = CollisionKernel::product(1.0).unwrap();
        let d = DaughterDistribution::monomer_shatter();
        let data = InitialData::monodisperse(16, 4, 1.0).unwrap();
        let cfg = IntegrationConfig { t_end: 1e6, steady_eps: Some(1e-10), ..Default::default() };
        let traj = integrate(&data, &k, &d, &cfg).unwrap();
        assert_eq!(traj.termination(), Termination::SteadyState);
        assert!(traj.last().time() < 1e6);
    }

    #[test]
    fn max_steps_returns_partial() {
        let k = CollisionKernel::product(1.0).unwrap();
        let d = DaughterDistribution::monomer_shatter();
        let data = InitialData::monodisperse(16, 8, 1.0).unwrap();
        let cfg = IntegrationConfig { t_end: 10.0, max_steps: 3, ..Default::default() };
        match integrate(&data, &k, &d, &cfg) {
            Err(IntegrateError::MaxSteps { partial, .. }) => {
                assert_eq!(partial.termination(), Termination::MaxSteps);
                assert_eq!(partial.snapshots().len(), 1);
            }
            other => panic!("expected MaxSteps, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let ok = IntegrationConfig::default();
        assert!(ok.validate().is_ok());
        assert!(IntegrationConfig { rtol: 0.0, ..ok.clone() }.validate().is_err());
        assert!(IntegrationConfig { output_times: vec![2.0], ..ok.clone() }.validate().is_err());
        assert!(IntegrationConfig { output_times: vec![0.5, 0.2], ..ok.clone() }.validate().is_err());
        assert!(IntegrationConfig { steady_eps: Some(-1.0), ..ok }.validate().is_err());
    }

    #[test]
    fn steady_state_predicate() {
        let s = ClusterState::new(vec![1.0, 0.0, 0.0], 0.0).unwrap();
        assert!(detect_steady_state(&s, &[0.0, 0.0, 0.0], 0.0));
        assert!(!detect_steady_state(&s, &[2.0, -1.0, 0.0], 1e-12));
    }
}
