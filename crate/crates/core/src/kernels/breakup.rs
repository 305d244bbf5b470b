use super::daughter::DaughterDistribution;
use super::report::{ValidationReport, Violation, ViolationKind};
use super::{KernelError, RELATIVE_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    DerivedFromDaughter,
    UserSpecified,
}

/// General two-body breakup distribution `B(s; p, q)`: expected number of
/// `s`-clusters produced by a `(p, q)` collision, `1 <= s <= p + q - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakupTable {
    l_max: usize,
    // (p-1)*l_max + (q-1) -> [B(1), ..., B(p+q-1)]
    rows: Vec<Vec<f64>>,
    provenance: Provenance,
}

impl BreakupTable {
    /// Tabulates `map_b_to_breakup(d, p, q)` for all `p, q <= l_max`.
    pub fn from_daughter(d: &DaughterDistribution, l_max: usize) -> Result<Self, KernelError> {
        let mut rows = Vec::with_capacity(l_max * l_max);
        for p in 1..=l_max {
            for q in 1..=l_max {
                rows.push(map_b_to_breakup(d, p, q)?);
            }
        }
        Ok(Self { l_max, rows, provenance: Provenance::DerivedFromDaughter })
    }

    /// Builds a user table from `(p, q, s, value)` entries; missing entries are
    /// zero. The table is not symmetrised.
    pub fn from_entries(
        l_max: usize,
        entries: impl IntoIterator<Item = (usize, usize, usize, f64)>,
    ) -> Result<Self, KernelError> {
        if l_max == 0 {
            return Err(KernelError::InvalidParameter("breakup table needs l_max >= 1".into()));
        }
        let mut rows: Vec<Vec<f64>> = (1..=l_max)
            .flat_map(|p| (1..=l_max).map(move |q| vec![0.0; p + q - 1]))
            .collect();
        for (p, q, s, v) in entries {
            if p == 0 || q == 0 || s == 0 {
                return Err(KernelError::ZeroIndex);
            }
            if p > l_max || q > l_max {
                return Err(KernelError::OutOfRange { what: "breakup", index: p.max(q), limit: l_max });
            }
            if s > p + q - 1 {
                return Err(KernelError::Table(format!(
                    "product size {s} of a ({p},{q}) collision exceeds {}",
                    p + q - 1
                )));
            }
            if !v.is_finite() {
                return Err(KernelError::Table(format!("non-finite value at ({p},{q},{s})")));
            }
            rows[(p - 1) * l_max + (q - 1)][s - 1] = v;
        }
        Ok(Self { l_max, rows, provenance: Provenance::UserSpecified })
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// All products of a `(p, q)` collision, index `s - 1`.
    #[inline]
    pub(crate) fn row(&self, p: usize, q: usize) -> &[f64] {
        &self.rows[(p - 1) * self.l_max + (q - 1)]
    }

    pub fn eval(&self, s: usize, p: usize, q: usize) -> Result<f64, KernelError> {
        if s == 0 || p == 0 || q == 0 {
            return Err(KernelError::ZeroIndex);
        }
        if p.max(q) > self.l_max {
            return Err(KernelError::OutOfRange { what: "breakup", index: p.max(q), limit: self.l_max });
        }
        Ok(self.row(p, q).get(s - 1).copied().unwrap_or(0.0))
    }

    /// True if some collision yields a product bigger than both colliders.
    pub fn has_mass_transfer(&self) -> bool {
        (1..=self.l_max).any(|p| {
            (1..=self.l_max).any(|q| {
                self.row(p, q)
                    .iter()
                    .enumerate()
                    .any(|(s, &v)| s + 1 > p.max(q) && v != 0.0)
            })
        })
    }
}

/// Breakup row of the no-mass-transfer model:
/// `B(s; i, j) = [i >= s] b(s,i;j) + [j >= s] b(s,j;i)` for `s = 1..=i+j-1`.
///
/// Returned vector holds `B(s)` at index `s - 1`.
pub fn map_b_to_breakup(d: &DaughterDistribution, i: usize, j: usize) -> Result<Vec<f64>, KernelError> {
    if i == 0 || j == 0 {
        return Err(KernelError::ZeroIndex);
    }
    (1..i + j)
        .map(|s| {
            let from_i = if i >= s { d.eval(s, i, j)? } else { 0.0 };
            let from_j = if j >= s { d.eval(s, j, i)? } else { 0.0 };
            Ok(from_i + from_j)
        })
        .collect()
}

/// Checks symmetry, nonnegativity and `sum_s s B(s; p, q) = p + q` for all
/// `p, q <= l_max`.
pub fn validate_breakup(table: &BreakupTable, l_max: usize) -> ValidationReport {
    let mut report = ValidationReport::new("breakup table");
    if table.l_max < l_max {
        report.push(Violation::new(
            ViolationKind::OutOfRange,
            vec![l_max],
            l_max as f64,
            table.l_max as f64,
        ));
        return report;
    }
    for p in 1..=l_max {
        for q in 1..=l_max {
            let row = table.row(p, q);
            let mut mass = 0.0;
            for (idx, &b) in row.iter().enumerate() {
                let s = idx + 1;
                if !b.is_finite() {
                    report.push(Violation::new(ViolationKind::NonFinite, vec![s, p, q], b, 0.0));
                    continue;
                }
                if b < 0.0 {
                    report.push(Violation::new(ViolationKind::Negative, vec![s, p, q], b, 0.0));
                }
                if p < q {
                    let mirror = table.row(q, p)[idx];
                    if b != mirror {
                        report.push(Violation::new(ViolationKind::Asymmetric, vec![s, p, q], b, mirror));
                    }
                }
                mass += s as f64 * b;
            }
            let target = (p + q) as f64;
            if (mass - target).abs() > RELATIVE_TOLERANCE * target {
                report.push(Violation::new(ViolationKind::MassBalance, vec![p, q], mass, target));
            }
        }
    }
    report
}
