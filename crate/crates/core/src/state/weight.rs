use super::{InitialData, StateError};

/// Checks backing membership of a sampled weight in the convex class used by
/// the moment estimates: `G(0) = 0`, `G >= 0`, `G` convex, `G'` concave and
/// `G'(0) >= 0`. All checks are discrete, on the integer samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassEvidence {
    pub zero_at_origin: bool,
    pub nonnegative: bool,
    pub convex: bool,
    pub derivative_concave: bool,
    pub derivative_nonneg_at_origin: bool,
    /// `G'` (and `G(z)/z`) grows without bound. Only asserted by
    /// constructions that know it, never inferred from finite samples.
    pub superlinear: bool,
}

impl ClassEvidence {
    pub fn in_g1(&self) -> bool {
        self.zero_at_origin
            && self.nonnegative
            && self.convex
            && self.derivative_concave
            && self.derivative_nonneg_at_origin
    }

    pub fn in_g1_infinity(&self) -> bool {
        self.in_g1() && self.superlinear
    }
}

/// Weight `G` sampled on `0..=l` together with `G'` on the same points.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentWeight {
    label: String,
    values: Vec<f64>,
    derivative: Vec<f64>,
    evidence: ClassEvidence,
    thresholds: Option<Vec<usize>>,
    data_bound: Option<f64>,
}

const SHAPE_TOLERANCE: f64 = 1e-12;

fn second_difference(v: &[f64], i: usize) -> (f64, f64) {
    let d2 = v[i + 1] - 2.0 * v[i] + v[i - 1];
    let scale = v[i + 1].abs() + 2.0 * v[i].abs() + v[i - 1].abs();
    (d2, scale)
}

fn assess(values: &[f64], derivative: &[f64], superlinear: bool) -> ClassEvidence {
    let finite = values.iter().chain(derivative).all(|v| v.is_finite());
    let n = values.len();
    let convex = finite
        && (1..n - 1).all(|i| {
            let (d2, scale) = second_difference(values, i);
            d2 >= -SHAPE_TOLERANCE * scale
        });
    let derivative_concave = finite
        && (1..n - 1).all(|i| {
            let (d2, scale) = second_difference(derivative, i);
            d2 <= SHAPE_TOLERANCE * scale
        });
    ClassEvidence {
        zero_at_origin: values[0] == 0.0,
        nonnegative: values.iter().all(|&v| v >= 0.0),
        convex,
        derivative_concave,
        derivative_nonneg_at_origin: derivative[0] >= 0.0,
        superlinear,
    }
}

impl MomentWeight {
    /// Wraps sampled `G(0..=l)` and `G'(0..=l)`; the class evidence is
    /// computed from the samples.
    pub fn from_samples(label: impl Into<String>, values: Vec<f64>, derivative: Vec<f64>) -> Self {
        assert!(values.len() >= 2, "a weight needs samples at 0 and 1 at least");
        assert_eq!(values.len(), derivative.len(), "G and G' must share sample points");
        let evidence = assess(&values, &derivative, false);
        Self { label: label.into(), values, derivative, evidence, thresholds: None, data_bound: None }
    }

    /// Samples `g` and `dg` at `0..=l`.
    pub fn from_fn(label: impl Into<String>, l: usize, g: impl Fn(f64) -> f64, dg: impl Fn(f64) -> f64) -> Self {
        let values = (0..=l).map(|i| g(i as f64)).collect();
        let derivative = (0..=l).map(|i| dg(i as f64)).collect();
        Self::from_samples(label, values, derivative)
    }

    /// `G(z) = z^p`.
    pub fn power(l: usize, p: f64) -> Self {
        let values: Vec<f64> = (0..=l)
            .map(|i| match i {
                0 => 0.0,
                _ if p == 1.0 => i as f64,
                _ if p == 2.0 => (i * i) as f64,
                _ => (i as f64).powf(p),
            })
            .collect();
        let derivative = (0..=l)
            .map(|i| match i {
                0 if p == 1.0 => 1.0,
                0 if p > 1.0 => 0.0,
                0 => f64::INFINITY,
                _ => p * (i as f64).powf(p - 1.0),
            })
            .collect::<Vec<_>>();
        let evidence = assess(&values, &derivative, p > 1.0);
        Self {
            label: format!("z^{p}"),
            values,
            derivative,
            evidence,
            thresholds: None,
            data_bound: None,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Largest sampled size.
    pub fn max_size(&self) -> usize {
        self.values.len() - 1
    }

    /// `G(i)` at index `i`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivative(&self) -> &[f64] {
        &self.derivative
    }

    pub fn evidence(&self) -> ClassEvidence {
        self.evidence
    }

    /// Threshold sizes `n_1 < n_2 < ...` at which `G'` reaches `1, 2, ...`
    /// (only for weights built from initial data).
    pub fn thresholds(&self) -> Option<&[usize]> {
        self.thresholds.as_deref()
    }

    /// Upper bound on `sum G(i) w_i^in` guaranteed by the construction.
    pub fn data_bound(&self) -> Option<f64> {
        self.data_bound
    }
}

/// Upper bound `2 * M1 * sum_k (k+1) 2^-k = 8 * M1` that the data-adapted
/// weight satisfies against its own initial data.
pub fn dlvp_bound(data: &InitialData) -> f64 {
    2.0 * data.mass() * 4.0
}

/// Builds a convex weight with concave, unbounded derivative such that
/// `sum G(i) w_i^in` stays finite, adapted to the tail decay of `data`.
///
/// Thresholds start at `n_0 = 1` and satisfy `T(n_k) <= M1 2^-k` together with
/// `n_{k+1} >= 2 n_k`, where `T(n) = sum_{i >= n} i w_i^in`. `G'` is the
/// piecewise-linear interpolant of `(0, 0), (n_1, 1), (n_2, 2), ...`, and `G`
/// its integral. Doubling thresholds keep the gaps nondecreasing, so `G'` is
/// concave.
pub fn build_dlvp_weight(data: &InitialData, l: usize) -> Result<MomentWeight, StateError> {
    if data.support() > l {
        return Err(StateError::SizeBeyondTruncation { size: data.support(), l });
    }
    let w = data.concentrations();
    // tails[r] = sum_{i >= r} i w_i, tails[len + 1] = 0
    let mut tails = vec![0.0; w.len() + 2];
    for i in (1..=w.len()).rev() {
        tails[i] = tails[i + 1] + i as f64 * w[i - 1];
    }
    let total = tails[1];
    if !(total > 0.0) {
        return Err(StateError::ZeroMass);
    }
    let tail_at = |n: usize| tails.get(n).copied().unwrap_or(0.0);

    let mut thresholds = vec![1usize];
    let mut scan = 1usize;
    while *thresholds.last().unwrap() <= l {
        let k = thresholds.len();
        let target = total * 0.5f64.powi(k as i32);
        while tail_at(scan) > target {
            scan += 1;
        }
        let next = (2 * thresholds[k - 1]).max(scan);
        thresholds.push(next);
    }

    // nodes of G': x_0 = 0, x_k = n_k
    let mut nodes = thresholds.clone();
    nodes[0] = 0;
    let mut derivative = Vec::with_capacity(l + 1);
    let mut seg = 0usize;
    for z in 0..=l {
        while nodes[seg + 1] < z {
            seg += 1;
        }
        let (x0, x1) = (nodes[seg], nodes[seg + 1]);
        derivative.push(seg as f64 + (z - x0) as f64 / (x1 - x0) as f64);
    }
    let mut values = vec![0.0; l + 1];
    for z in 1..=l {
        values[z] = values[z - 1] + 0.5 * (derivative[z - 1] + derivative[z]);
    }

    let evidence = assess(&values, &derivative, true);
    thresholds.remove(0);
    Ok(MomentWeight {
        label: "dlvp".into(),
        values,
        derivative,
        evidence,
        thresholds: Some(thresholds),
        data_bound: Some(dlvp_bound(data)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn power_weights_in_class() {
        for p in [1.0, 1.5, 2.0] {
            assert!(MomentWeight::power(64, p).evidence().in_g1(), "p = {p}");
        }
        assert!(!MomentWeight::power(64, 1.0).evidence().in_g1_infinity());
        assert!(MomentWeight::power(64, 1.5).evidence().in_g1_infinity());
        assert!(!MomentWeight::power(64, 3.0).evidence().derivative_concave);
        assert!(!MomentWeight::power(64, 0.5).evidence().in_g1());
    }

    #[test]
    fn monodisperse_monomers_double_thresholds() {
        let data = InitialData::monodisperse(20, 1, 1.0).unwrap();
        let g = build_dlvp_weight(&data, 20).unwrap();
        assert_eq!(g.thresholds().unwrap(), &[2, 4, 8, 16, 32]);
        let gm = data.to_state().g_moment(&g).unwrap();
        assert_eq!(gm, g.values()[1]);
        assert!(gm <= g.data_bound().unwrap());
        assert!(g.evidence().in_g1_infinity());
    }

    #[test]
    fn threshold_slopes_reach_integers() {
        let data = InitialData::geometric(64, 0.8, 1.0).unwrap();
        let g = build_dlvp_weight(&data, 64).unwrap();
        for (k, &n) in g.thresholds().unwrap().iter().enumerate() {
            if n <= 64 {
                assert!((g.derivative()[n] - (k + 1) as f64).abs() < 1e-12);
            }
        }
        assert_eq!(g.derivative()[0], 0.0);
    }

    #[test]
    fn zero_mass_rejected() {
        let data = InitialData::explicit(vec![0.0; 8]).unwrap();
        assert_eq!(build_dlvp_weight(&data, 8), Err(StateError::ZeroMass));
    }

    proptest! {
        #[test]
        fn dlvp_weight_is_in_class(w in proptest::collection::vec(0.0f64..1.0, 1..80), extra in 0usize..40) {
            prop_assume!(w.iter().any(|&v| v > 0.0));
            let data = InitialData::explicit(w).unwrap();
            let l = data.size() + extra;
            let g = build_dlvp_weight(&data, l).unwrap();
            prop_assert!(g.evidence().in_g1_infinity(), "{:?}", g.evidence());
            let t = g.thresholds().unwrap();
            // gaps nondecreasing
            let mut prev = t[0];
            for pair in t.windows(2) {
                prop_assert!(pair[1] - pair[0] >= prev);
                prev = pair[1] - pair[0];
            }
            let gm = data.to_state().g_moment(&build_dlvp_weight(&data, data.size()).unwrap()).unwrap();
            prop_assert!(gm.is_finite());
            prop_assert!(gm <= g.data_bound().unwrap() * (1.0 + 1e-12));
        }
    }
}
