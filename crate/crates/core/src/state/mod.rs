//! Cluster states, initial data and moment functionals.

mod weight;

use thiserror::Error;

pub use weight::{build_dlvp_weight, dlvp_bound, ClassEvidence, MomentWeight};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("concentration w_{index} = {value} is negative")]
    Negative { index: usize, value: f64 },
    #[error("concentration w_{index} is not finite")]
    NonFinite { index: usize },
    #[error("time {0} must be finite and nonnegative")]
    BadTime(f64),
    #[error("tail index {r} outside 1..={l}")]
    TailIndex { r: usize, l: usize },
    #[error("weight sampled up to {sampled}, state needs {needed}")]
    WeightTooShort { sampled: usize, needed: usize },
    #[error("cluster size {size} does not fit truncation l = {l}")]
    SizeBeyondTruncation { size: usize, l: usize },
    #[error("invalid initial data: {0}")]
    InvalidInitial(String),
    #[error("initial data carries no mass")]
    ZeroMass,
}

/// Concentrations `w_1..w_l` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    t: f64,
    w: Vec<f64>,
}

fn check_concentrations(w: &[f64]) -> Result<(), StateError> {
    for (n, &v) in w.iter().enumerate() {
        if !v.is_finite() {
            return Err(StateError::NonFinite { index: n + 1 });
        }
        if v < 0.0 {
            return Err(StateError::Negative { index: n + 1, value: v });
        }
    }
    Ok(())
}

impl ClusterState {
    pub fn new(w: Vec<f64>, t: f64) -> Result<Self, StateError> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(StateError::BadTime(t));
        }
        check_concentrations(&w)?;
        Ok(Self { t, w })
    }

    pub fn zeros(l: usize) -> Self {
        Self { t: 0.0, w: vec![0.0; l] }
    }

    /// Truncation size `l`.
    pub fn size(&self) -> usize {
        self.w.len()
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// `w[i-1]` is the concentration of `i`-clusters.
    pub fn concentrations(&self) -> &[f64] {
        &self.w
    }

    pub fn into_concentrations(self) -> Vec<f64> {
        self.w
    }

    /// `sum_i i^alpha w_i`.
    pub fn moment(&self, alpha: f64) -> f64 {
        self.w
            .iter()
            .enumerate()
            .map(|(n, &v)| weight_power(n + 1, alpha) * v)
            .sum()
    }

    /// Total mass `sum_i i w_i`.
    pub fn mass(&self) -> f64 {
        mass(&self.w)
    }

    /// `sum_{i >= r} i w_i`.
    pub fn tail_mass(&self, r: usize) -> Result<f64, StateError> {
        let l = self.size();
        if r == 0 || r > l {
            return Err(StateError::TailIndex { r, l });
        }
        Ok(self.w[r - 1..]
            .iter()
            .enumerate()
            .map(|(n, &v)| (n + r) as f64 * v)
            .sum())
    }

    /// `sum_i G(i) w_i`.
    pub fn g_moment(&self, g: &MomentWeight) -> Result<f64, StateError> {
        if g.max_size() < self.size() {
            return Err(StateError::WeightTooShort { sampled: g.max_size(), needed: self.size() });
        }
        let values = g.values();
        Ok(self.w.iter().enumerate().map(|(n, &v)| values[n + 1] * v).sum())
    }

    /// Largest occupied size, 0 for the empty state.
    pub fn support(&self) -> usize {
        support(&self.w)
    }
}

#[inline]
fn weight_power(i: usize, alpha: f64) -> f64 {
    match alpha {
        a if a == 0.0 => 1.0,
        a if a == 1.0 => i as f64,
        a if a == 2.0 => (i * i) as f64,
        a => (i as f64).powf(a),
    }
}

pub(crate) fn mass(w: &[f64]) -> f64 {
    w.iter().enumerate().map(|(n, &v)| (n + 1) as f64 * v).sum()
}

pub(crate) fn support(w: &[f64]) -> usize {
    w.iter().rposition(|&v| v != 0.0).map_or(0, |p| p + 1)
}

/// How an initial distribution was specified.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialMode {
    Explicit,
    Monodisperse { size: usize, mass: f64 },
    Geometric { ratio: f64, mass: f64 },
}

/// Resolved initial concentrations of length `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    mode: InitialMode,
    w: Vec<f64>,
}

impl InitialData {
    /// Takes `w` verbatim; its length is the truncation size.
    pub fn explicit(w: Vec<f64>) -> Result<Self, StateError> {
        if w.is_empty() {
            return Err(StateError::InvalidInitial("explicit data is empty".into()));
        }
        check_concentrations(&w)?;
        Ok(Self { mode: InitialMode::Explicit, w })
    }

    /// All mass `m` in clusters of one size: `w_size = m / size`.
    pub fn monodisperse(l: usize, size: usize, m: f64) -> Result<Self, StateError> {
        if size == 0 || size > l {
            return Err(StateError::SizeBeyondTruncation { size, l });
        }
        check_mass(m)?;
        let mut w = vec![0.0; l];
        w[size - 1] = m / size as f64;
        Ok(Self { mode: InitialMode::Monodisperse { size, mass: m }, w })
    }

    /// `w_i` proportional to `ratio^i` on `1..=l`, scaled to total mass `m`.
    pub fn geometric(l: usize, ratio: f64, m: f64) -> Result<Self, StateError> {
        if l == 0 {
            return Err(StateError::InvalidInitial("truncation size must be positive".into()));
        }
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(StateError::InvalidInitial(format!("geometric ratio must be positive, got {ratio}")));
        }
        check_mass(m)?;
        let mut w: Vec<f64> = (1..=l).map(|i| ratio.powi(i as i32)).collect();
        let raw = mass(&w);
        if !(raw.is_finite() && raw > 0.0) {
            return Err(StateError::InvalidInitial(format!("geometric profile with ratio {ratio} cannot be normalised")));
        }
        w.iter_mut().for_each(|v| *v *= m / raw);
        Ok(Self { mode: InitialMode::Geometric { ratio, mass: m }, w })
    }

    pub fn mode(&self) -> &InitialMode {
        &self.mode
    }

    pub fn size(&self) -> usize {
        self.w.len()
    }

    pub fn concentrations(&self) -> &[f64] {
        &self.w
    }

    pub fn mass(&self) -> f64 {
        mass(&self.w)
    }

    pub fn support(&self) -> usize {
        support(&self.w)
    }

    pub fn to_state(&self) -> ClusterState {
        ClusterState { t: 0.0, w: self.w.clone() }
    }

    /// Same data with the concentration of `size`-clusters shifted by `delta`.
    pub fn perturbed(&self, size: usize, delta: f64) -> Result<Self, StateError> {
        if size == 0 || size > self.size() {
            return Err(StateError::SizeBeyondTruncation { size, l: self.size() });
        }
        let mut w = self.w.clone();
        w[size - 1] += delta;
        check_concentrations(&w)?;
        Ok(Self { mode: InitialMode::Explicit, w })
    }

    /// Re-resolves the same specification at another truncation size.
    /// Explicit data is zero-padded (or refused if it would be cut).
    pub fn resized(&self, l: usize) -> Result<Self, StateError> {
        match self.mode {
            InitialMode::Monodisperse { size, mass } => Self::monodisperse(l, size, mass),
            InitialMode::Geometric { ratio, mass } => Self::geometric(l, ratio, mass),
            InitialMode::Explicit => {
                if self.support() > l {
                    return Err(StateError::SizeBeyondTruncation { size: self.support(), l });
                }
                let mut w = self.w.clone();
                w.resize(l, 0.0);
                Ok(Self { mode: InitialMode::Explicit, w })
            }
        }
    }
}

fn check_mass(m: f64) -> Result<(), StateError> {
    if m.is_finite() && m >= 0.0 {
        Ok(())
    } else {
        Err(StateError::InvalidInitial(format!("mass must be finite and nonnegative, got {m}")))
    }
}
