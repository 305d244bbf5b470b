//! Collision kernels, daughter distributions and breakup tables.
//!
//! Everything here is immutable once built. Evaluation is pure, so a single
//! kernel or distribution can be shared between any number of workers.
//!
//! Cluster sizes are 1-based throughout: `eval(1, 1)` is the monomer-monomer
//! rate.

mod breakup;
mod daughter;
mod report;
pub mod table;

use std::sync::Arc;

use thiserror::Error;

pub use breakup::{map_b_to_breakup, validate_breakup, BreakupTable, Provenance};
pub use daughter::{validate_daughter, DaughterDistribution, DaughterFamily, DaughterTable, Dominance};
pub use report::{ValidationReport, Violation, ViolationKind};

/// Relative slack used when comparing rational-valued quantities.
pub const RELATIVE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("cluster sizes start at 1, got 0")]
    ZeroIndex,
    #[error("{what} index {index} exceeds the table limit {limit}")]
    OutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("table error: {0}")]
    Table(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Product,
    Power,
    Constant,
    UserTable,
}

/// Declared constants of the bound `a(i,j) <= A_gamma * (i*j)^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBound {
    pub a_gamma: f64,
    pub gamma: f64,
}

/// Dense symmetric-by-contract rate table for sizes `1..=l_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    l_max: usize,
    values: Vec<f64>,
}

impl KernelTable {
    /// `values` is row-major: entry `(i, j)` lives at `(i-1)*l_max + (j-1)`.
    pub fn new(l_max: usize, values: Vec<f64>) -> Result<Self, KernelError> {
        if l_max == 0 {
            return Err(KernelError::InvalidParameter("kernel table needs l_max >= 1".into()));
        }
        if values.len() != l_max * l_max {
            return Err(KernelError::Table(format!(
                "expected {} entries for l_max = {l_max}, got {}",
                l_max * l_max,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(KernelError::Table(format!(
                "non-finite rate at ({}, {})",
                pos / l_max + 1,
                pos % l_max + 1
            )));
        }
        Ok(Self { l_max, values })
    }

    /// Builds a table from sparse `(i, j, value)` entries; missing entries are zero.
    pub fn from_entries(
        l_max: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, KernelError> {
        let mut values = vec![0.0; l_max * l_max];
        for (i, j, v) in entries {
            if i == 0 || j == 0 {
                return Err(KernelError::ZeroIndex);
            }
            if i > l_max || j > l_max {
                return Err(KernelError::OutOfRange {
                    what: "kernel",
                    index: i.max(j),
                    limit: l_max,
                });
            }
            values[(i - 1) * l_max + (j - 1)] = v;
        }
        Self::new(l_max, values)
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i - 1) * self.l_max + (j - 1)]
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Rate {
    Product { a: f64 },
    Power { a: f64, gamma: f64 },
    Constant { a: f64 },
    Table(Arc<KernelTable>),
}

/// Symmetric nonnegative collision rate `a(i,j)` together with its declared
/// growth constants.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionKernel {
    rate: Rate,
    quad_bound: f64,
    power_bound: Option<PowerBound>,
}

fn check_multiplier(a: f64) -> Result<(), KernelError> {
    if a.is_finite() && a > 0.0 {
        Ok(())
    } else {
        Err(KernelError::InvalidParameter(format!(
            "kernel multiplier must be positive and finite, got {a}"
        )))
    }
}

impl CollisionKernel {
    /// `a(i,j) = A*i*j`.
    pub fn product(a: f64) -> Result<Self, KernelError> {
        check_multiplier(a)?;
        Ok(Self {
            rate: Rate::Product { a },
            quad_bound: a,
            power_bound: Some(PowerBound { a_gamma: a, gamma: 1.0 }),
        })
    }

    /// `a(i,j) = A*(i*j)^gamma` with `gamma` in `[0, 1]`.
    pub fn power(a: f64, gamma: f64) -> Result<Self, KernelError> {
        check_multiplier(a)?;
        if !(0.0..=1.0).contains(&gamma) {
            return Err(KernelError::InvalidParameter(format!(
                "power kernel exponent must lie in [0, 1], got {gamma}"
            )));
        }
        Ok(Self {
            rate: Rate::Power { a, gamma },
            quad_bound: a,
            power_bound: Some(PowerBound { a_gamma: a, gamma }),
        })
    }

    /// `a(i,j) = A`.
    pub fn constant(a: f64) -> Result<Self, KernelError> {
        check_multiplier(a)?;
        Ok(Self {
            rate: Rate::Constant { a },
            quad_bound: a,
            power_bound: Some(PowerBound { a_gamma: a, gamma: 0.0 }),
        })
    }

    /// User-supplied rates. The quadratic constant defaults to the smallest
    /// value compatible with the table; no power bound is declared.
    pub fn from_table(table: KernelTable) -> Self {
        let mut quad: f64 = 0.0;
        for i in 1..=table.l_max {
            for j in 1..=table.l_max {
                quad = quad.max(table.get(i, j) / (i * j) as f64);
            }
        }
        Self {
            rate: Rate::Table(Arc::new(table)),
            quad_bound: if quad > 0.0 { quad } else { 1.0 },
            power_bound: None,
        }
    }

    /// Overrides the declared quadratic growth constant `A1`.
    pub fn with_quad_bound(mut self, a1: f64) -> Self {
        self.quad_bound = a1;
        self
    }

    pub fn with_power_bound(mut self, bound: Option<PowerBound>) -> Self {
        self.power_bound = bound;
        self
    }

    pub fn family(&self) -> KernelFamily {
        match self.rate {
            Rate::Product { .. } => KernelFamily::Product,
            Rate::Power { .. } => KernelFamily::Power,
            Rate::Constant { .. } => KernelFamily::Constant,
            Rate::Table(_) => KernelFamily::UserTable,
        }
    }

    /// Family parameters: `[A]` or `[A, gamma]`; empty for tables.
    pub fn params(&self) -> Vec<f64> {
        match self.rate {
            Rate::Product { a } | Rate::Constant { a } => vec![a],
            Rate::Power { a, gamma } => vec![a, gamma],
            Rate::Table(_) => Vec::new(),
        }
    }

    pub fn quad_bound(&self) -> f64 {
        self.quad_bound
    }

    pub fn power_bound(&self) -> Option<PowerBound> {
        self.power_bound
    }

    /// Largest size the kernel can be evaluated at, `None` when unbounded.
    pub fn l_max(&self) -> Option<usize> {
        match &self.rate {
            Rate::Table(t) => Some(t.l_max),
            _ => None,
        }
    }

    pub fn covers(&self, l: usize) -> bool {
        self.l_max().is_none_or(|m| m >= l)
    }

    pub fn eval(&self, i: usize, j: usize) -> Result<f64, KernelError> {
        if i == 0 || j == 0 {
            return Err(KernelError::ZeroIndex);
        }
        if let Rate::Table(t) = &self.rate {
            if i.max(j) > t.l_max {
                return Err(KernelError::OutOfRange {
                    what: "kernel",
                    index: i.max(j),
                    limit: t.l_max,
                });
            }
        }
        Ok(self.rate(i, j))
    }

    /// Unchecked evaluation; callers guarantee `1 <= i, j` and table coverage.
    #[inline]
    pub(crate) fn rate(&self, i: usize, j: usize) -> f64 {
        match &self.rate {
            Rate::Product { a } => a * (i * j) as f64,
            Rate::Power { a, gamma } => a * ((i * j) as f64).powf(*gamma),
            Rate::Constant { a } => *a,
            Rate::Table(t) => t.get(i, j),
        }
    }

    /// For kernels of the form `a(i,j) = c * psi(i) * psi(j)` returns `c` and
    /// `psi(1..=l)` (index 0 holds `psi(1)`).
    pub fn separable_profile(&self, l: usize) -> Option<(f64, Vec<f64>)> {
        match self.rate {
            Rate::Product { a } => Some((a, (1..=l).map(|i| i as f64).collect())),
            Rate::Power { a, gamma } => Some((a, (1..=l).map(|i| (i as f64).powf(gamma)).collect())),
            Rate::Constant { a } => Some((a, vec![1.0; l])),
            Rate::Table(_) => None,
        }
    }
}

/// Lists every violated kernel invariant over `1 <= i, j <= l_max`.
pub fn validate_kernel(kernel: &CollisionKernel, l_max: usize) -> ValidationReport {
    let mut report = ValidationReport::new("collision kernel");
    if let Some(limit) = kernel.l_max() {
        if limit < l_max {
            report.push(Violation::new(
                ViolationKind::OutOfRange,
                vec![l_max],
                l_max as f64,
                limit as f64,
            ));
            return report;
        }
    }
    let a1 = kernel.quad_bound();
    for i in 1..=l_max {
        for j in 1..=l_max {
            let a = kernel.rate(i, j);
            if !a.is_finite() {
                report.push(Violation::new(ViolationKind::NonFinite, vec![i, j], a, 0.0));
                continue;
            }
            if a < 0.0 {
                report.push(Violation::new(ViolationKind::Negative, vec![i, j], a, 0.0));
            }
            if i < j {
                let b = kernel.rate(j, i);
                if a != b {
                    report.push(Violation::new(ViolationKind::Asymmetric, vec![i, j], a, b));
                }
            }
            let quad = a1 * (i * j) as f64;
            if a > quad * (1.0 + RELATIVE_TOLERANCE) {
                report.push(Violation::new(ViolationKind::QuadraticGrowth, vec![i, j], a, quad));
            }
            if let Some(PowerBound { a_gamma, gamma }) = kernel.power_bound() {
                let bound = a_gamma * ((i * j) as f64).powf(gamma);
                if a > bound * (1.0 + RELATIVE_TOLERANCE) {
                    report.push(Violation::new(ViolationKind::PowerGrowth, vec![i, j], a, bound));
                }
            }
        }
    }
    report
}
