//! Compensated summation.

use std::ops::AddAssign;

/// Neumaier's variant of Kahan summation.
///
/// Unlike plain Kahan summation it stays accurate when an addend is larger in
/// magnitude than the running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    compensation: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl AddAssign<f64> for Neumaier {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl FromIterator<f64> for Neumaier {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Neumaier::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator of `f64`.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<Neumaier>().total()
}
