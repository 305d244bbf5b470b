use std::sync::Arc;

use super::report::{ValidationReport, Violation, ViolationKind};
use super::{KernelError, RELATIVE_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DaughterFamily {
    /// `b = 2/(j-1)` for every fragment size below `j`.
    DiscreteUniform,
    /// A breaking `j`-cluster turns into `j` monomers.
    MonomerShatter,
    /// Two halves; odd `j` gives one `(j-1)/2` and one `(j+1)/2` fragment.
    BinarySplit,
    /// `b = 2/j`. Bounded but loses one monomer worth of mass per event, so
    /// validation always flags it.
    NaiveUniform,
    UserTable,
}

/// Constants `(beta0, beta1)` of the dominance bound
/// `b(s,i;j) <= beta0 + beta1 * b(s,j;i)` for `s < i <= j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dominance {
    pub beta0: f64,
    pub beta1: f64,
}

/// Dense `b(i,j;k)` table for `i < j <= j_max`, `k <= k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct DaughterTable {
    j_max: usize,
    k_max: usize,
    values: Vec<f64>,
    k_independent: bool,
}

impl DaughterTable {
    /// Builds the table from `(i, j, k, value)` entries; missing entries are
    /// zero. Entries with `i >= j` are only accepted for the monomer
    /// convention `b(1,1;k) = 1`.
    pub fn from_entries(
        j_max: usize,
        k_max: usize,
        entries: impl IntoIterator<Item = (usize, usize, usize, f64)>,
    ) -> Result<Self, KernelError> {
        if j_max < 2 || k_max < 1 {
            return Err(KernelError::InvalidParameter(format!(
                "daughter table needs j_max >= 2 and k_max >= 1, got {j_max}, {k_max}"
            )));
        }
        let mut values = vec![0.0; j_max * j_max * k_max];
        for (i, j, k, v) in entries {
            if i == 0 || j == 0 || k == 0 {
                return Err(KernelError::ZeroIndex);
            }
            if !v.is_finite() {
                return Err(KernelError::Table(format!("non-finite value at ({i},{j},{k})")));
            }
            if i >= j {
                if i == 1 && j == 1 && v == 1.0 {
                    continue;
                }
                return Err(KernelError::Table(format!(
                    "fragment ({i},{j},{k}) is not smaller than its parent"
                )));
            }
            if j > j_max {
                return Err(KernelError::OutOfRange { what: "daughter j", index: j, limit: j_max });
            }
            if k > k_max {
                return Err(KernelError::OutOfRange { what: "daughter k", index: k, limit: k_max });
            }
            values[Self::offset(j_max, i, j, k)] = v;
        }
        let row = j_max * j_max;
        let k_independent = (1..k_max).all(|k| values[k * row..(k + 1) * row] == values[..row]);
        Ok(Self { j_max, k_max, values, k_independent })
    }

    #[inline]
    fn offset(j_max: usize, i: usize, j: usize, k: usize) -> usize {
        ((k - 1) * j_max + (j - 1)) * j_max + (i - 1)
    }

    #[inline]
    fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[Self::offset(self.j_max, i, j, k)]
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Form {
    DiscreteUniform,
    MonomerShatter,
    BinarySplit,
    NaiveUniform,
    Table(Arc<DaughterTable>),
}

/// Fragment distribution `b(i,j;k)`: expected number of `i`-clusters left when
/// a `j`-cluster breaks after hitting a `k`-cluster.
///
/// Outside `i < j` the distribution follows the monomer convention:
/// `b(1,1;k) = 1` (a colliding monomer comes out intact) and zero otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct DaughterDistribution {
    form: Form,
    dominance: Dominance,
}

impl DaughterDistribution {
    pub fn discrete_uniform() -> Self {
        Self { form: Form::DiscreteUniform, dominance: Dominance { beta0: 2.0, beta1: 0.0 } }
    }

    pub fn monomer_shatter() -> Self {
        Self { form: Form::MonomerShatter, dominance: Dominance { beta0: 0.0, beta1: 1.0 } }
    }

    pub fn binary_split() -> Self {
        Self { form: Form::BinarySplit, dominance: Dominance { beta0: 2.0, beta1: 0.0 } }
    }

    pub fn naive_uniform() -> Self {
        Self { form: Form::NaiveUniform, dominance: Dominance { beta0: 1.0, beta1: 0.0 } }
    }

    pub fn from_table(table: DaughterTable, dominance: Dominance) -> Self {
        Self { form: Form::Table(Arc::new(table)), dominance }
    }

    pub fn with_dominance(mut self, dominance: Dominance) -> Self {
        self.dominance = dominance;
        self
    }

    pub fn family(&self) -> DaughterFamily {
        match self.form {
            Form::DiscreteUniform => DaughterFamily::DiscreteUniform,
            Form::MonomerShatter => DaughterFamily::MonomerShatter,
            Form::BinarySplit => DaughterFamily::BinarySplit,
            Form::NaiveUniform => DaughterFamily::NaiveUniform,
            Form::Table(_) => DaughterFamily::UserTable,
        }
    }

    pub fn dominance(&self) -> Dominance {
        self.dominance
    }

    /// Whether `b(i,j;k)` ignores the partner size `k`.
    pub fn k_independent(&self) -> bool {
        match &self.form {
            Form::Table(t) => t.k_independent,
            _ => true,
        }
    }

    /// `(j_max, k_max)` for tables, `None` for the unbounded built-ins.
    pub fn limits(&self) -> Option<(usize, usize)> {
        match &self.form {
            Form::Table(t) => Some((t.j_max, t.k_max)),
            _ => None,
        }
    }

    /// True when every `b(i,j;k)` with `j, k < l` can be evaluated, which is
    /// all the truncated system of size `l` ever touches.
    pub fn covers(&self, l: usize) -> bool {
        self.limits()
            .is_none_or(|(jm, km)| jm + 1 >= l && km + 1 >= l)
    }

    pub fn eval(&self, i: usize, j: usize, k: usize) -> Result<f64, KernelError> {
        if i == 0 || j == 0 || k == 0 {
            return Err(KernelError::ZeroIndex);
        }
        if i < j {
            if let Some((jm, km)) = self.limits() {
                if j > jm {
                    return Err(KernelError::OutOfRange { what: "daughter j", index: j, limit: jm });
                }
                if k > km {
                    return Err(KernelError::OutOfRange { what: "daughter k", index: k, limit: km });
                }
            }
        }
        Ok(self.value(i, j, k))
    }

    /// Unchecked evaluation; callers guarantee positive indices and coverage.
    #[inline]
    pub(crate) fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        if i >= j {
            return if i == 1 && j == 1 { 1.0 } else { 0.0 };
        }
        match &self.form {
            Form::DiscreteUniform => 2.0 / (j - 1) as f64,
            Form::MonomerShatter => {
                if i == 1 {
                    j as f64
                } else {
                    0.0
                }
            }
            Form::BinarySplit => {
                if j.is_multiple_of(2) {
                    if 2 * i == j {
                        2.0
                    } else {
                        0.0
                    }
                } else if i == j / 2 || i == j.div_ceil(2) {
                    1.0
                } else {
                    0.0
                }
            }
            Form::NaiveUniform => 2.0 / j as f64,
            Form::Table(t) => t.get(i, j, k),
        }
    }
}

/// Checks fragment-mass balance for `2 <= j <= j_max`, `1 <= k <= k_max` and
/// the dominance bound over every index triple inside the probed range.
pub fn validate_daughter(d: &DaughterDistribution, j_max: usize, k_max: usize) -> ValidationReport {
    let mut report = ValidationReport::new("daughter distribution");
    if let Some((jm, km)) = d.limits() {
        if jm < j_max || km < k_max {
            report.push(Violation::new(
                ViolationKind::OutOfRange,
                vec![j_max, k_max],
                j_max.max(k_max) as f64,
                jm.min(km) as f64,
            ));
            return report;
        }
    }

    for k in 1..=k_max {
        for j in 2..=j_max {
            let mut mass = 0.0;
            for i in 1..j {
                let b = d.value(i, j, k);
                if !b.is_finite() {
                    report.push(Violation::new(ViolationKind::NonFinite, vec![i, j, k], b, 0.0));
                } else if b < 0.0 {
                    report.push(Violation::new(ViolationKind::Negative, vec![i, j, k], b, 0.0));
                }
                mass += i as f64 * b;
            }
            let target = j as f64;
            if (mass - target).abs() > RELATIVE_TOLERANCE * target {
                report.push(Violation::new(ViolationKind::MassBalance, vec![j, k], mass, target));
            }
        }
    }

    // b(s,i;j) <= beta0 + beta1 b(s,j;i) for s < i <= j; i and j both act as
    // parent and as partner, so they stay within both limits.
    let Dominance { beta0, beta1 } = d.dominance();
    let n = j_max.min(k_max);
    for i in 2..=n {
        for j in i..=n {
            for s in 1..i {
                let lhs = d.value(s, i, j);
                let rhs = beta0 + beta1 * d.value(s, j, i);
                if lhs > rhs + RELATIVE_TOLERANCE * rhs.abs().max(1.0) {
                    report.push(Violation::new(ViolationKind::Dominance, vec![s, i, j], lhs, rhs));
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn built_ins() -> [DaughterDistribution; 3] {
        [
            DaughterDistribution::discrete_uniform(),
            DaughterDistribution::monomer_shatter(),
            DaughterDistribution::binary_split(),
        ]
    }

    #[test]
    fn discrete_uniform_value() {
        let d = DaughterDistribution::discrete_uniform();
        let b = d.eval(1, 4, 7).unwrap();
        assert!((b - 2.0 / 3.0).abs() < 1e-15);
        // oracle: sum_{i<4} i * 2/3 = 4
        let sum: f64 = (1..4).map(|i| i as f64 * d.eval(i, 4, 7).unwrap()).sum();
        assert!((sum - 4.0).abs() < 1e-14);
    }

    #[test]
    fn monomer_shatter_values() {
        let d = DaughterDistribution::monomer_shatter();
        assert_eq!(d.eval(1, 5, 2), Ok(5.0));
        assert_eq!(d.eval(2, 5, 2), Ok(0.0));
    }

    #[test]
    fn binary_split_odd_parent() {
        let d = DaughterDistribution::binary_split();
        assert_eq!(d.eval(2, 5, 1), Ok(1.0));
        assert_eq!(d.eval(3, 5, 1), Ok(1.0));
        assert_eq!(d.eval(1, 5, 1), Ok(0.0));
        assert_eq!(d.eval(4, 8, 3), Ok(2.0));
    }

    #[test]
    fn monomer_convention() {
        for d in built_ins() {
            assert_eq!(d.eval(1, 1, 9), Ok(1.0));
            assert_eq!(d.eval(3, 3, 1), Ok(0.0));
            assert_eq!(d.eval(5, 2, 1), Ok(0.0));
        }
    }

    #[test]
    fn built_ins_validate_with_their_dominance_constants() {
        assert!(validate_daughter(&DaughterDistribution::monomer_shatter(), 32, 32).is_valid());
        assert!(validate_daughter(&DaughterDistribution::discrete_uniform(), 32, 32).is_valid());
        assert!(validate_daughter(&DaughterDistribution::binary_split(), 32, 32).is_valid());
    }

    #[test]
    fn mass_balance_holds_up_to_128() {
        for d in built_ins() {
            for j in 2..=128usize {
                for k in 1..=128 {
                    let sum: f64 = (1..j).map(|i| i as f64 * d.value(i, j, k)).sum();
                    assert!((sum - j as f64).abs() <= 1e-12 * j as f64, "{:?} j={j}", d.family());
                }
            }
        }
    }

    #[test]
    fn naive_uniform_loses_mass() {
        let d = DaughterDistribution::naive_uniform();
        let report = validate_daughter(&d, 8, 2);
        let v = report
            .violations()
            .iter()
            .find(|v| v.kind == ViolationKind::MassBalance && v.at == vec![4, 1])
            .unwrap();
        assert!((v.value - 3.0).abs() < 1e-14);
        assert_eq!(v.bound, 4.0);
    }

    #[test]
    fn monomer_shatter_is_unbounded() {
        let d = DaughterDistribution::monomer_shatter().with_dominance(Dominance { beta0: 2.0, beta1: 0.0 });
        assert!(validate_daughter(&d, 16, 16).has(ViolationKind::Dominance));
    }

    #[test]
    fn table_round_trip_and_k_dependence() {
        let entries = vec![(1, 2, 1, 2.0), (1, 2, 2, 2.0), (1, 3, 1, 3.0), (1, 3, 2, 1.0), (2, 3, 2, 1.0)];
        let t = DaughterTable::from_entries(3, 2, entries).unwrap();
        assert!(!t.k_independent);
        let d = DaughterDistribution::from_table(t, Dominance { beta0: 3.0, beta1: 0.0 });
        assert!(!d.k_independent());
        assert_eq!(d.eval(2, 3, 2), Ok(1.0));
        assert!(d.eval(1, 4, 1).is_err());
        assert!(d.eval(1, 3, 3).is_err());
        assert!(validate_daughter(&d, 3, 2).is_valid());
    }

    #[test]
    fn table_rejects_oversized_fragments() {
        assert!(DaughterTable::from_entries(4, 1, [(3, 3, 1, 1.0)]).is_err());
        assert!(DaughterTable::from_entries(4, 1, [(1, 1, 1, 1.0)]).is_ok());
    }
}
