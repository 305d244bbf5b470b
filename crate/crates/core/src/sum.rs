//! Summation helpers.

/// Truncation sizes above this use compensated accumulation.
pub const COMPENSATED_ABOVE: usize = 1024;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.sum + self.carry
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64], compensated: bool) -> f64 {
    if compensated {
        let mut acc = Compensated::default();
        for (x, y) in a.iter().zip(b) {
            acc.add(x * y);
        }
        acc.value()
    } else {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_lost_bits() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        let mut acc = Compensated::default();
        xs.iter().for_each(|&x| acc.add(x));
        assert_eq!(acc.value(), 2.0);
        assert_eq!(xs.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn dot_agrees() {
        let a = [1.0, 2.0, 3.0];
        let b = [4.0, 5.0, 6.0];
        assert_eq!(dot(&a, &b, false), 32.0);
        assert_eq!(dot(&a, &b, true), 32.0);
    }
}
