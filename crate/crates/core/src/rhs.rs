//! Right-hand side of the truncated breakage system.
//!
//! Only pairs `(j, k)` with `j + k <= l` collide, in the gain and the loss
//! terms alike. That restriction is what makes total mass an exact invariant
//! of the truncated system.
//!
//! Daughter form, for `1 <= i <= l`:
//!
//! ```text
//! dw_i/dt = sum_{j=i+1}^{l-1} sum_{k=1}^{l-j} b(i,j;k) a(j,k) w_j w_k
//!         - sum_{j=1}^{l-i} a(i,j) w_i w_j        (omitted for i = 1)
//! ```
//!
//! The monomer loss is dropped because `b(1,1;k) = 1`: a monomer that takes
//! part in a collision comes out of it unchanged.
//!
//! Three evaluation tiers exist for the daughter form:
//! * naive triple loop, evaluating `a` and `b` per term, O(l^3);
//! * k-independent daughters, O(l^2): with `R_j = sum_{k<=l-j} a(j,k) w_k`
//!   the gain is `sum_j b(i,j) w_j R_j` and the loss is `w_i R_i`. Separable
//!   kernels `a = c psi(j) psi(k)` get `R_j` from prefix sums in O(l);
//! * k-dependent daughters, O(l^3) over precomputed kernel rows.

use std::sync::Arc;

use thiserror::Error;

use crate::kernels::{BreakupTable, CollisionKernel, DaughterDistribution};
use crate::state::ClusterState;
use crate::sum::{dot, Compensated, COMPENSATED_ABOVE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RhsError {
    #[error("dimension mismatch: expected length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{what} table covers sizes up to {limit}, truncation needs {l}")]
    TableTooSmall { what: &'static str, l: usize, limit: usize },
    #[error("truncation size must be at least 1")]
    EmptySystem,
}

/// Which model a rate system integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelForm {
    Daughter,
    Breakup { mass_transfer: bool },
}

/// Per-worker scratch space.
#[derive(Debug, Clone, Default)]
pub struct RhsWorkspace {
    prefix: Vec<f64>,
    rows: Vec<f64>,
    flux: Vec<f64>,
}

impl RhsWorkspace {
    pub fn new(l: usize) -> Self {
        Self { prefix: vec![0.0; l + 1], rows: vec![0.0; l], flux: vec![0.0; l] }
    }

    fn fit(&mut self, l: usize) {
        if self.rows.len() != l {
            *self = Self::new(l);
        }
    }
}

/// A right-hand side the integrator can advance.
pub trait RateSystem: Sync {
    fn size(&self) -> usize;
    fn form(&self) -> ModelForm;
    /// Writes `dw/dt` at `w` into `out`. Both slices have length `size()`.
    fn evaluate(&self, w: &[f64], out: &mut [f64], ws: &mut RhsWorkspace);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhsTier {
    Naive,
    Separable,
    RowSum,
    KDependent,
}

/// Daughter-form system for a fixed truncation size.
#[derive(Debug, Clone)]
pub struct DaughterSystem {
    kernel: CollisionKernel,
    daughter: DaughterDistribution,
    l: usize,
    tier: RhsTier,
    compensated: bool,
    separable: Option<(f64, Vec<f64>)>,
    // row-major a(j,k), only for non-separable fast tiers
    kernel_matrix: Vec<f64>,
    // columns[i-1] = [b(i,j) for j in i+1..=l-1]
    columns: Vec<Vec<f64>>,
}

fn check_coverage(kernel: &CollisionKernel, l: usize) -> Result<(), RhsError> {
    if l == 0 {
        return Err(RhsError::EmptySystem);
    }
    if !kernel.covers(l) {
        return Err(RhsError::TableTooSmall { what: "kernel", l, limit: kernel.l_max().unwrap_or(0) });
    }
    Ok(())
}

fn kernel_matrix(kernel: &CollisionKernel, l: usize) -> Vec<f64> {
    let mut m = vec![0.0; l * l];
    for j in 1..=l {
        for k in 1..=l {
            m[(j - 1) * l + (k - 1)] = kernel.rate(j, k);
        }
    }
    m
}

impl DaughterSystem {
    /// Picks the fastest tier the kernel and daughter allow.
    pub fn new(kernel: &CollisionKernel, daughter: &DaughterDistribution, l: usize) -> Result<Self, RhsError> {
        let tier = if !daughter.k_independent() {
            RhsTier::KDependent
        } else if kernel.separable_profile(1).is_some() {
            RhsTier::Separable
        } else {
            RhsTier::RowSum
        };
        Self::with_tier(kernel, daughter, l, tier)
    }

    pub fn with_tier(
        kernel: &CollisionKernel,
        daughter: &DaughterDistribution,
        l: usize,
        tier: RhsTier,
    ) -> Result<Self, RhsError> {
        check_coverage(kernel, l)?;
        if !daughter.covers(l) {
            let limit = daughter.limits().map_or(0, |(j, k)| j.min(k));
            return Err(RhsError::TableTooSmall { what: "daughter", l, limit });
        }
        let tier = match tier {
            RhsTier::Naive => RhsTier::Naive,
            _ if !daughter.k_independent() => RhsTier::KDependent,
            RhsTier::Separable if kernel.separable_profile(1).is_none() => RhsTier::RowSum,
            t => t,
        };
        let separable = match tier {
            RhsTier::Separable => kernel.separable_profile(l),
            _ => None,
        };
        let kernel_matrix = match tier {
            RhsTier::RowSum | RhsTier::KDependent => kernel_matrix(kernel, l),
            _ => Vec::new(),
        };
        let columns = match tier {
            RhsTier::Separable | RhsTier::RowSum => (1..=l)
                .map(|i| (i + 1..l).map(|j| daughter.value(i, j, 1)).collect())
                .collect(),
            _ => Vec::new(),
        };
        Ok(Self {
            kernel: kernel.clone(),
            daughter: daughter.clone(),
            l,
            tier,
            compensated: l > COMPENSATED_ABOVE,
            separable,
            kernel_matrix,
            columns,
        })
    }

    pub fn tier(&self) -> RhsTier {
        self.tier
    }

    pub fn kernel(&self) -> &CollisionKernel {
        &self.kernel
    }

    pub fn daughter(&self) -> &DaughterDistribution {
        &self.daughter
    }

    /// `R_j = sum_{k=1}^{l-j} a(j,k) w_k` into `ws.rows`.
    fn partner_rates(&self, w: &[f64], ws: &mut RhsWorkspace) {
        let l = self.l;
        match &self.separable {
            Some((c, psi)) => {
                ws.prefix[0] = 0.0;
                if self.compensated {
                    let mut acc = Compensated::default();
                    for k in 1..=l {
                        acc.add(psi[k - 1] * w[k - 1]);
                        ws.prefix[k] = acc.value();
                    }
                } else {
                    let mut acc = 0.0;
                    for k in 1..=l {
                        acc += psi[k - 1] * w[k - 1];
                        ws.prefix[k] = acc;
                    }
                }
                for j in 1..=l {
                    ws.rows[j - 1] = c * psi[j - 1] * ws.prefix[l - j];
                }
            }
            None => {
                for j in 1..=l {
                    let row = &self.kernel_matrix[(j - 1) * l..(j - 1) * l + (l - j)];
                    ws.rows[j - 1] = dot(row, &w[..l - j], self.compensated);
                }
            }
        }
    }

    fn evaluate_naive(&self, w: &[f64], out: &mut [f64]) {
        let l = self.l;
        for i in 1..=l {
            let mut gain = 0.0;
            for j in i + 1..l {
                let wj = w[j - 1];
                if wj == 0.0 {
                    continue;
                }
                for k in 1..=l - j {
                    gain += self.daughter.value(i, j, k) * self.kernel.rate(j, k) * wj * w[k - 1];
                }
            }
            let mut loss = 0.0;
            if i > 1 {
                for j in 1..=l - i {
                    loss += self.kernel.rate(i, j) * w[i - 1] * w[j - 1];
                }
            }
            out[i - 1] = gain - loss;
        }
    }

    fn evaluate_k_dependent(&self, w: &[f64], out: &mut [f64], ws: &mut RhsWorkspace) {
        let l = self.l;
        self.partner_rates(w, ws);
        for i in 1..=l {
            let mut gain = Compensated::default();
            let mut plain = 0.0;
            for j in i + 1..l {
                let wj = w[j - 1];
                if wj == 0.0 {
                    continue;
                }
                let row = &self.kernel_matrix[(j - 1) * l..];
                let mut inner = 0.0;
                for k in 1..=l - j {
                    inner += self.daughter.value(i, j, k) * row[k - 1] * w[k - 1];
                }
                if self.compensated {
                    gain.add(wj * inner);
                } else {
                    plain += wj * inner;
                }
            }
            let gain = if self.compensated { gain.value() } else { plain };
            let loss = if i > 1 { w[i - 1] * ws.rows[i - 1] } else { 0.0 };
            out[i - 1] = gain - loss;
        }
    }

    fn evaluate_fast(&self, w: &[f64], out: &mut [f64], ws: &mut RhsWorkspace) {
        let l = self.l;
        self.partner_rates(w, ws);
        for j in 0..l {
            ws.flux[j] = w[j] * ws.rows[j];
        }
        for i in 1..=l {
            let col = &self.columns[i - 1];
            let gain = dot(col, &ws.flux[i..i + col.len()], self.compensated);
            let loss = if i > 1 { ws.flux[i - 1] } else { 0.0 };
            out[i - 1] = gain - loss;
        }
    }

    /// Gain and (nonpositive) loss contributions separately, naive sums.
    pub fn gain_loss(&self, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let l = self.l;
        let mut gain = vec![0.0; l];
        let mut loss = vec![0.0; l];
        for i in 1..=l {
            for j in i + 1..l {
                for k in 1..=l - j {
                    gain[i - 1] += self.daughter.value(i, j, k) * self.kernel.rate(j, k) * w[j - 1] * w[k - 1];
                }
            }
            if i > 1 {
                for j in 1..=l - i {
                    loss[i - 1] -= self.kernel.rate(i, j) * w[i - 1] * w[j - 1];
                }
            }
        }
        (gain, loss)
    }

    pub fn eval_state(&self, state: &ClusterState) -> Result<Vec<f64>, RhsError> {
        check_len(self.l, state.size())?;
        let mut out = vec![0.0; self.l];
        self.evaluate(state.concentrations(), &mut out, &mut RhsWorkspace::new(self.l));
        Ok(out)
    }
}

impl RateSystem for DaughterSystem {
    fn size(&self) -> usize {
        self.l
    }

    fn form(&self) -> ModelForm {
        ModelForm::Daughter
    }

    fn evaluate(&self, w: &[f64], out: &mut [f64], ws: &mut RhsWorkspace) {
        debug_assert_eq!(w.len(), self.l);
        debug_assert_eq!(out.len(), self.l);
        ws.fit(self.l);
        match self.tier {
            RhsTier::Naive => self.evaluate_naive(w, out),
            RhsTier::KDependent => self.evaluate_k_dependent(w, out, ws),
            RhsTier::Separable | RhsTier::RowSum => self.evaluate_fast(w, out, ws),
        }
    }
}

/// Breakup-table form. Gain of `s`-clusters is
/// `1/2 sum_{p+q<=l} B(s;p,q) a(p,q) w_p w_q`, loss is the full pair-restricted
/// collision rate (monomers included, since `B(1;1,k)` already returns them).
#[derive(Debug, Clone)]
pub struct BreakupSystem {
    table: Arc<BreakupTable>,
    l: usize,
    kernel_matrix: Vec<f64>,
    mass_transfer: bool,
}

impl BreakupSystem {
    pub fn new(kernel: &CollisionKernel, table: Arc<BreakupTable>, l: usize) -> Result<Self, RhsError> {
        check_coverage(kernel, l)?;
        if table.l_max() < l {
            return Err(RhsError::TableTooSmall { what: "breakup", l, limit: table.l_max() });
        }
        let mass_transfer = table.has_mass_transfer();
        Ok(Self { table, l, kernel_matrix: kernel_matrix(kernel, l), mass_transfer })
    }

    pub fn eval_state(&self, state: &ClusterState) -> Result<Vec<f64>, RhsError> {
        check_len(self.l, state.size())?;
        let mut out = vec![0.0; self.l];
        self.evaluate(state.concentrations(), &mut out, &mut RhsWorkspace::new(self.l));
        Ok(out)
    }
}

impl RateSystem for BreakupSystem {
    fn size(&self) -> usize {
        self.l
    }

    fn form(&self) -> ModelForm {
        ModelForm::Breakup { mass_transfer: self.mass_transfer }
    }

    fn evaluate(&self, w: &[f64], out: &mut [f64], _ws: &mut RhsWorkspace) {
        let l = self.l;
        out.iter_mut().for_each(|v| *v = 0.0);
        for p in 1..l {
            let wp = w[p - 1];
            if wp == 0.0 {
                continue;
            }
            for q in 1..=l - p {
                let f = 0.5 * self.kernel_matrix[(p - 1) * l + (q - 1)] * wp * w[q - 1];
                if f == 0.0 {
                    continue;
                }
                for (o, b) in out.iter_mut().zip(self.table.row(p, q)) {
                    *o += b * f;
                }
            }
        }
        for i in 1..=l {
            let row = &self.kernel_matrix[(i - 1) * l..(i - 1) * l + (l - i)];
            out[i - 1] -= w[i - 1] * dot(row, &w[..l - i], false);
        }
    }
}

fn check_len(expected: usize, found: usize) -> Result<(), RhsError> {
    if expected == found {
        Ok(())
    } else {
        Err(RhsError::DimensionMismatch { expected, found })
    }
}

/// Daughter-form derivative, evaluated on the fastest applicable tier.
pub fn rhs_b_form(
    state: &ClusterState,
    kernel: &CollisionKernel,
    d: &DaughterDistribution,
) -> Result<Vec<f64>, RhsError> {
    DaughterSystem::new(kernel, d, state.size())?.eval_state(state)
}

/// Daughter-form derivative by the literal triple sum.
pub fn rhs_b_form_naive(
    state: &ClusterState,
    kernel: &CollisionKernel,
    d: &DaughterDistribution,
) -> Result<Vec<f64>, RhsError> {
    DaughterSystem::with_tier(kernel, d, state.size(), RhsTier::Naive)?.eval_state(state)
}

/// Breakup-table-form derivative.
pub fn rhs_breakup_form(
    state: &ClusterState,
    kernel: &CollisionKernel,
    table: &BreakupTable,
) -> Result<Vec<f64>, RhsError> {
    BreakupSystem::new(kernel, Arc::new(table.clone()), state.size())?.eval_state(state)
}

/// `d/dt sum_i mu_i w_i` through the collision-pair identity
/// `sum_{k<l} sum_{j<=l-k} (sum_{i<k} mu_i b(i,k;j) - mu_k) a(j,k) w_j w_k`.
/// The `k = 1` term vanishes under the monomer convention and is skipped.
pub fn moment_rate_gme(
    state: &ClusterState,
    kernel: &CollisionKernel,
    d: &DaughterDistribution,
    mu: &[f64],
) -> Result<f64, RhsError> {
    let l = state.size();
    check_len(l, mu.len())?;
    check_coverage(kernel, l)?;
    let w = state.concentrations();
    let mut total = 0.0;
    for k in 2..l {
        let wk = w[k - 1];
        if wk == 0.0 {
            continue;
        }
        for j in 1..=l - k {
            let redistributed: f64 = (1..k).map(|i| mu[i - 1] * d.value(i, k, j)).sum();
            total += (redistributed - mu[k - 1]) * kernel.rate(j, k) * w[j - 1] * wk;
        }
    }
    Ok(total)
}

/// `sum_{j+k<=l} j a(j,k) w_j w_k`: mass carried by colliding clusters per
/// unit time, the natural scale for round-off in the mass balance.
pub fn gross_mass_flux(state: &ClusterState, kernel: &CollisionKernel) -> f64 {
    let l = state.size();
    let w = state.concentrations();
    let mut total = 0.0;
    for j in 1..l {
        for k in 1..=l - j {
            total += j as f64 * kernel.rate(j, k) * w[j - 1] * w[k - 1];
        }
    }
    total
}
