//! A complete, runnable problem description.

use std::sync::Arc;

use crate::integrator::{integrate_system, IntegrateError, IntegrationConfig, Trajectory};
use crate::kernels::{BreakupTable, CollisionKernel, DaughterDistribution};
use crate::rhs::{BreakupSystem, DaughterSystem, RhsError};
use crate::state::{InitialData, StateError};

/// Fragmentation model: daughter distribution or general breakup table.
#[derive(Debug, Clone)]
pub enum Model {
    Daughter(DaughterDistribution),
    Breakup(Arc<BreakupTable>),
}

/// Weight used by moment checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightSpec {
    Power(f64),
    /// Weight adapted to the scenario's initial data.
    Dlvp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckSpec {
    MassConservation,
    TailMonotonicity,
    GMoment(WeightSpec),
    /// Dissipation identity evaluated at every snapshot.
    DissipationIdentity(WeightSpec),
    /// Second run with `w_size` shifted by `delta`.
    ContinuousDependence { size: usize, delta: f64 },
    SupportInvariance,
    LargeTime { tol_mass: f64 },
    TruncationConvergence { l_values: Vec<usize> },
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::MassConservation => "mass_conservation",
            CheckSpec::TailMonotonicity => "tail_monotonicity",
            CheckSpec::GMoment(_) => "gmoment_monotone",
            CheckSpec::DissipationIdentity(_) => "dissipation_identity",
            CheckSpec::ContinuousDependence { .. } => "continuous_dependence",
            CheckSpec::SupportInvariance => "support_invariance",
            CheckSpec::LargeTime { .. } => "large_time",
            CheckSpec::TruncationConvergence { .. } => "truncation_convergence",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub kernel: CollisionKernel,
    pub model: Model,
    pub initial: InitialData,
    pub integration: IntegrationConfig,
    pub checks: Vec<CheckSpec>,
    /// Tolerance for trajectory-level checks; `None` means `100 * rtol`.
    pub check_tol: Option<f64>,
}

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        kernel: CollisionKernel,
        model: Model,
        initial: InitialData,
        integration: IntegrationConfig,
    ) -> Self {
        Self {
            name: name.into(),
            kernel,
            model,
            initial,
            integration,
            checks: Vec::new(),
            check_tol: None,
        }
    }

    pub fn size(&self) -> usize {
        self.initial.size()
    }

    pub fn trajectory_tolerance(&self) -> f64 {
        self.check_tol.unwrap_or(100.0 * self.integration.rtol)
    }

    pub fn daughter(&self) -> Option<&DaughterDistribution> {
        match &self.model {
            Model::Daughter(d) => Some(d),
            Model::Breakup(_) => None,
        }
    }

    pub fn run(&self) -> Result<Trajectory, IntegrateError> {
        self.run_from(&self.initial, &self.integration)
    }

    /// Integrates the scenario's model from other initial data or with other
    /// integration settings.
    pub fn run_from(&self, initial: &InitialData, cfg: &IntegrationConfig) -> Result<Trajectory, IntegrateError> {
        let l = initial.size();
        match &self.model {
            Model::Daughter(d) => {
                let system = DaughterSystem::new(&self.kernel, d, l)?;
                integrate_system(&system, initial.concentrations(), cfg)
            }
            Model::Breakup(table) => {
                let system = BreakupSystem::new(&self.kernel, Arc::clone(table), l)?;
                integrate_system(&system, initial.concentrations(), cfg)
            }
        }
    }

    /// Same scenario at truncation size `l`.
    pub fn at_size(&self, l: usize) -> Result<Scenario, ScenarioError> {
        let initial = self.initial.resized(l)?;
        if let Model::Breakup(t) = &self.model {
            if t.l_max() < l {
                return Err(RhsError::TableTooSmall { what: "breakup", l, limit: t.l_max() }.into());
            }
        }
        Ok(Scenario { initial, ..self.clone() })
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Rhs(#[from] RhsError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error("{0}")]
    Invalid(String),
}
