//! Dense flat parameter vector.

use crate::error::{Error, Result};

/// Dense real-valued parameter vector of fixed dimension.
///
/// Every constructor and arithmetic operation rejects non-finite entries, so
/// a `ParamVector` in hand is always finite. Arithmetic deliberately avoids
/// fused multiply-add: `a*x + y` rounds twice everywhere, which keeps
/// algebraically identical update paths bit-identical.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: "from_vec" });
        }
        Ok(ParamVector(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Exact bit-level equality, used by the degenerate-equivalence checks.
    pub fn bits_eq(&self, other: &Self) -> bool {
        self.len() == other.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    fn check_len(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(())
    }

    fn checked(values: Vec<f64>, op: &'static str) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op });
        }
        Ok(ParamVector(values))
    }

    /// `a*x + y` elementwise.
    pub fn axpy(a: f64, x: &Self, y: &Self) -> Result<Self> {
        x.check_len(y)?;
        let values = x.0.iter().zip(&y.0).map(|(xi, yi)| a * xi + yi).collect();
        Self::checked(values, "axpy")
    }

    /// `w*x + (1-w)*y` elementwise, `w` in [0, 1].
    pub fn convex_combine(w: f64, x: &Self, y: &Self) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::domain(format!(
                "convex weight must be in [0, 1], got {w}"
            )));
        }
        x.check_len(y)?;
        let values = x
            .0
            .iter()
            .zip(&y.0)
            .map(|(xi, yi)| w * xi + (1.0 - w) * yi)
            .collect();
        Self::checked(values, "convex_combine")
    }

    /// Euclidean distance `||self - other||_2`.
    pub fn l2_distance(&self, other: &Self) -> Result<f64> {
        self.check_len(other)?;
        let sq: f64 = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sq.sqrt())
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, a: f64) -> Result<Self> {
        Self::checked(self.0.iter().map(|v| a * v).collect(), "scale")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_len(other)?;
        let values = self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect();
        Self::checked(values, "add")
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_len(other)?;
        let values = self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect();
        Self::checked(values, "sub")
    }

    /// Unweighted mean of a non-empty set of equal-length vectors.
    pub fn mean<'a, I>(vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a ParamVector>,
    {
        let mut iter = vectors.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::domain("mean of an empty set of vectors"))?;
        let mut acc = first.0.clone();
        let mut count = 1usize;
        for v in iter {
            first.check_len(v)?;
            for (a, b) in acc.iter_mut().zip(&v.0) {
                *a += b;
            }
            count += 1;
        }
        let inv = 1.0 / count as f64;
        for a in acc.iter_mut() {
            *a *= inv;
        }
        Self::checked(acc, "mean")
    }
}
