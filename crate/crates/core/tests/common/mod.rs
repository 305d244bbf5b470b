//! Test-local oracles written directly from the model equations, sharing no
//! code with the library's evaluation paths.
#![allow(dead_code)]

use colbreak::{CollisionKernel, DaughterDistribution};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Built-in kernel family with its closed-form rate.
#[derive(Debug, Clone, Copy)]
pub enum KernelCase {
    Product(f64),
    Power(f64, f64),
    Constant(f64),
}

impl KernelCase {
    pub fn rate(self, i: usize, j: usize) -> f64 {
        let (i, j) = (i as f64, j as f64);
        match self {
            KernelCase::Product(a) => a * i * j,
            KernelCase::Power(a, g) => a * (i * j).powf(g),
            KernelCase::Constant(a) => a,
        }
    }

    pub fn build(self) -> CollisionKernel {
        match self {
            KernelCase::Product(a) => CollisionKernel::product(a).unwrap(),
            KernelCase::Power(a, g) => CollisionKernel::power(a, g).unwrap(),
            KernelCase::Constant(a) => CollisionKernel::constant(a).unwrap(),
        }
    }

    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let a = rng.gen_range(0.1..3.0);
        match rng.gen_range(0..3) {
            0 => KernelCase::Product(a),
            1 => KernelCase::Power(a, rng.gen_range(0.0..=1.0)),
            _ => KernelCase::Constant(a),
        }
    }
}

/// Built-in daughter family with its closed-form fragment counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DaughterCase {
    DiscreteUniform,
    MonomerShatter,
    BinarySplit,
}

pub const DAUGHTERS: [DaughterCase; 3] = [DaughterCase::DiscreteUniform, DaughterCase::MonomerShatter, DaughterCase::BinarySplit];

impl DaughterCase {
    /// `b(i,j;k)` for `1 <= i < j`.
    pub fn fragments(self, i: usize, j: usize, _k: usize) -> f64 {
        assert!(i < j);
        match self {
            DaughterCase::DiscreteUniform => 2.0 / (j as f64 - 1.0),
            DaughterCase::MonomerShatter => {
                if i == 1 {
                    j as f64
                } else {
                    0.0
                }
            }
            DaughterCase::BinarySplit => {
                let lo = j / 2;
                let hi = j - lo;
                (i == lo) as u8 as f64 + (i == hi) as u8 as f64
            }
        }
    }

    pub fn build(self) -> DaughterDistribution {
        match self {
            DaughterCase::DiscreteUniform => DaughterDistribution::discrete_uniform(),
            DaughterCase::MonomerShatter => DaughterDistribution::monomer_shatter(),
            DaughterCase::BinarySplit => DaughterDistribution::binary_split(),
        }
    }

    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        DAUGHTERS[rng.gen_range(0..3)]
    }
}

/// Gain minus loss for the truncated system. A breaking `j`-cluster (partner
/// `k`, `j + k <= l`) yields `b(i,j;k)` fragments of size `i < j`; a colliding
/// `i`-cluster is lost unless it is a monomer.
pub fn oracle_rhs(w: &[f64], kernel: KernelCase, d: DaughterCase) -> Vec<f64> {
    let l = w.len();
    let mut out = vec![0.0; l];
    for j in 2..=l {
        for k in 1..=l - j {
            let events = kernel.rate(j, k) * w[j - 1] * w[k - 1];
            if events == 0.0 {
                continue;
            }
            out[j - 1] -= events;
            for i in 1..j {
                out[i - 1] += d.fragments(i, j, k) * events;
            }
        }
    }
    out
}

/// Classical fixed-step fourth-order Runge–Kutta on the oracle right-hand side.
pub fn oracle_rk4(w0: &[f64], kernel: KernelCase, d: DaughterCase, t_end: f64, steps: usize) -> Vec<f64> {
    let h = t_end / steps as f64;
    let mut y = w0.to_vec();
    let axpy = |y: &[f64], k: &[f64], c: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + c * b).collect() };
    for _ in 0..steps {
        let k1 = oracle_rhs(&y, kernel, d);
        let k2 = oracle_rhs(&axpy(&y, &k1, h / 2.0), kernel, d);
        let k3 = oracle_rhs(&axpy(&y, &k2, h / 2.0), kernel, d);
        let k4 = oracle_rhs(&axpy(&y, &k3, h), kernel, d);
        for n in 0..y.len() {
            y[n] += h / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
        }
    }
    y
}

/// Random nonnegative state with random sparsity, length `l`.
pub fn random_state(rng: &mut ChaCha8Rng, l: usize) -> Vec<f64> {
    let density = rng.gen_range(0.2..=1.0);
    (0..l)
        .map(|_| if rng.gen_bool(density) { rng.gen_range(0.0..1.0) / l as f64 } else { 0.0 })
        .collect()
}

pub fn mass(w: &[f64]) -> f64 {
    w.iter().enumerate().map(|(n, v)| (n + 1) as f64 * v).sum()
}

pub fn mass_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).enumerate().map(|(n, (x, y))| (n + 1) as f64 * (x - y).abs()).sum()
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / scale).fold(0.0, f64::max)
}

/// Relative error of each component against the vector-wide scale.
pub fn componentwise_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let s = x.abs().max(y.abs());
            if s == 0.0 {
                0.0
            } else {
                (x - y).abs() / s
            }
        })
        .fold(0.0, f64::max)
}
