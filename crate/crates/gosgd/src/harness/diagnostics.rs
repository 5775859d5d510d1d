//! Numerical cross-checks: finite-difference gradients and an empirical
//! reconstruction of the mixing weights behind a consensus value.

use crate::error::{Error, Result};
use crate::numeric::{streams, ParamVector, RandomSource};
use crate::objectives::{MiniBatch, Objective};

/// Step for central differences. Large enough to dodge cancellation, small
/// enough that the O(h²) truncation stays far below the 1e-5 oracle bound.
pub const FD_STEP: f64 = 1e-5;

/// Central finite-difference gradient of `obj` at `x` on `batch`.
pub fn finite_difference_gradient(
    obj: &dyn Objective,
    x: &ParamVector,
    batch: &MiniBatch,
    h: f64,
) -> Result<ParamVector> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::domain(format!("step must be positive, got {h}")));
    }
    let mut probe: Vec<f64> = x.values().to_vec();
    let mut grad = Vec::with_capacity(probe.len());
    for k in 0..probe.len() {
        let original = probe[k];
        probe[k] = original + h;
        let up = obj.loss(&ParamVector::from_vec(probe.clone())?, batch)?;
        probe[k] = original - h;
        let down = obj.loss(&ParamVector::from_vec(probe.clone())?, batch)?;
        probe[k] = original;
        grad.push((up - down) / (2.0 * h));
    }
    ParamVector::from_vec(grad)
}

/// Worst relative disagreement between the analytic gradient and central
/// differences, with the denominator floored at 1e-3 so near-zero components
/// compare absolutely instead of amplifying noise.
pub fn max_relative_gradient_error(
    obj: &dyn Objective,
    x: &ParamVector,
    batch: &MiniBatch,
    h: f64,
) -> Result<f64> {
    let analytic = obj.gradient(x, batch)?;
    let numeric = finite_difference_gradient(obj, x, batch, h)?;
    let mut worst = 0.0f64;
    for (a, n) in analytic.values().iter().zip(numeric.values()) {
        let scale = a.abs().max(n.abs()).max(1e-3);
        worst = worst.max((a - n).abs() / scale);
    }
    Ok(worst)
}

/// Probes `obj` at random points/batches and returns the worst relative
/// gradient error seen. This is the oracle behind the `check-grad` command.
pub fn check_gradients(
    obj: &dyn Objective,
    seed: u64,
    probes: usize,
    batch_size: usize,
) -> Result<f64> {
    if probes == 0 {
        return Err(Error::domain("need at least one probe"));
    }
    let mut rng = RandomSource::new(seed, streams::INIT);
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let x =
            ParamVector::from_vec((0..obj.dim()).map(|_| rng.uniform(-1.0, 1.0)).collect())?;
        let batch = obj.sample_batch(&mut rng, batch_size)?;
        worst = worst.max(max_relative_gradient_error(obj, &x, &batch, FD_STEP)?);
    }
    Ok(worst)
}

/// Solves least-squares for the weights λ that express `after` as a linear
/// combination of the `before` vectors — an empirical look at the mixing
/// weights the gossip protocol implicitly applies. Requires the before
/// vectors to be linearly independent (generic for random initializations
/// with dimension ≥ worker count).
pub fn empirical_mixing_weights(
    before: &[ParamVector],
    after: &ParamVector,
) -> Result<Vec<f64>> {
    let m = before.len();
    if m == 0 {
        return Err(Error::domain("need at least one basis vector"));
    }
    let dim = after.len();
    for b in before {
        if b.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: b.len(),
            });
        }
    }
    // Normal equations: G λ = b with G the Gram matrix of the before set.
    let mut gram = vec![vec![0.0f64; m]; m];
    let mut rhs = vec![0.0f64; m];
    for i in 0..m {
        for j in i..m {
            let dot = dot(&before[i], &before[j]);
            gram[i][j] = dot;
            gram[j][i] = dot;
        }
        rhs[i] = dot(&before[i], after);
    }
    solve_dense(gram, rhs)
}

fn dot(a: &ParamVector, b: &ParamVector) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x * y)
        .sum()
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty column");
        if a[pivot][col].abs() < 1e-12 {
            return Err(Error::domain(
                "mixing-weight system is singular; initial vectors are not independent",
            ));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let lead = a[col].clone();
        let lead_b = b[col];
        for row in col + 1..n {
            let factor = a[row][col] / lead[col];
            if factor == 0.0 {
                continue;
            }
            for (entry, pivot_entry) in a[row][col..].iter_mut().zip(&lead[col..]) {
                *entry -= factor * pivot_entry;
            }
            b[row] -= factor * lead_b;
        }
    }
    let mut x = vec![0.0f64; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}
