//! Compensated (Kahan) summation.
//!
//! The conservation checks compare sums of many small α shares against 1 at
//! 1e-12; a plain running sum loses exactly the low bits those checks look
//! at, so every long-lived accumulator in the codebase uses this instead.

/// Running compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    compensation: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Kahan::default()
    }

    pub fn add(&mut self, v: f64) {
        let y = v - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }

    /// Compensated sum of an iterator, for one-shot use.
    pub fn sum_of(values: impl IntoIterator<Item = f64>) -> f64 {
        let mut acc = Kahan::new();
        for v in values {
            acc.add(v);
        }
        acc.value()
    }
}
