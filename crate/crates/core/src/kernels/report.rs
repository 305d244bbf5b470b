use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Asymmetric,
    Negative,
    NonFinite,
    QuadraticGrowth,
    PowerGrowth,
    /// Fragment mass does not add up to the parent (or collider pair) mass.
    MassBalance,
    Dominance,
    /// Probe range exceeds a user table.
    OutOfRange,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Asymmetric => "asymmetric",
            ViolationKind::Negative => "negative",
            ViolationKind::NonFinite => "non-finite",
            ViolationKind::QuadraticGrowth => "quadratic-growth",
            ViolationKind::PowerGrowth => "power-growth",
            ViolationKind::MassBalance => "mass-balance",
            ViolationKind::Dominance => "dominance",
            ViolationKind::OutOfRange => "out-of-range",
        }
    }
}

/// One failed invariant. `value` is the offending quantity and `bound` what
/// it was compared against.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub at: Vec<usize>,
    pub value: f64,
    pub bound: f64,
}

impl Violation {
    pub fn new(kind: ViolationKind, at: Vec<usize>, value: f64, bound: f64) -> Self {
        Self { kind, at, value, bound }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at: Vec<String> = self.at.iter().map(ToString::to_string).collect();
        write!(
            f,
            "{} at ({}): {} vs {}",
            self.kind.as_str(),
            at.join(","),
            self.value,
            self.bound
        )
    }
}

/// Collected invariant violations. An empty report means the object is valid
/// over the probed range.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    subject: &'static str,
    violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn new(subject: &'static str) -> Self {
        Self { subject, violations: Vec::new() }
    }

    pub fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }

    pub fn subject(&self) -> &'static str {
        self.subject
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    /// Largest `value - bound` excess over all violations, 0 when valid.
    pub fn worst_excess(&self) -> f64 {
        self.violations
            .iter()
            .map(|v| match v.kind {
                ViolationKind::Asymmetric | ViolationKind::MassBalance => (v.value - v.bound).abs(),
                ViolationKind::NonFinite => f64::INFINITY,
                _ => v.value - v.bound,
            })
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "{}: ok", self.subject);
        }
        writeln!(f, "{}: {} violation(s)", self.subject, self.violations.len())?;
        for v in self.violations.iter().take(20) {
            writeln!(f, "  {v}")?;
        }
        if self.violations.len() > 20 {
            writeln!(f, "  ... {} more", self.violations.len() - 20)?;
        }
        Ok(())
    }
}
