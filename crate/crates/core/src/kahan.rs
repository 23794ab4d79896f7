//! Compensated (Kahan-Babuska / Neumaier) summation.
//!
//! All statistical accumulations in this crate run through [`KahanSum`] so
//! that results are accurate to a few ulps and, because accumulation is a
//! fixed left-to-right fold, bit-reproducible for a given input order.

/// Running compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `x`, capturing the rounding error of the addition.
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        // Neumaier's variant: the branch keeps the error term exact no
        // matter which operand dominates.
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Current compensated total.
    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated sum of a slice.
pub(crate) fn sum(values: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}
