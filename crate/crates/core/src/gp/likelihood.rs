//! Exact log marginal likelihood and its analytic gradient.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::kernel::KernelSpec;
use super::GpError;

const LN_2PI: f64 = 1.8378770664093453;

/// Cholesky factorization with a diagonal-jitter fallback.
///
/// On failure, jitter starts at `1e-8 * mean(diag)` and escalates tenfold per
/// attempt up to `1e-2 * mean(diag)`. Returns the factorization and the
/// jitter that was actually added.
pub fn cholesky_with_jitter(k: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64), GpError> {
    if let Some(chol) = Cholesky::new(k.clone()) {
        return Ok((chol, 0.0));
    }
    let mean_diag = k.diagonal().mean().abs().max(f64::MIN_POSITIVE);
    let mut jitter = 1e-8 * mean_diag;
    let max_jitter = 1e-2 * mean_diag;
    while jitter <= max_jitter {
        let mut kj = k.clone();
        for i in 0..kj.nrows() {
            kj[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(kj) {
            return Ok((chol, jitter));
        }
        jitter *= 10.0;
    }
    Err(GpError::NotPositiveDefinite { max_jitter })
}

fn check_shapes(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(), GpError> {
    if x.nrows() == 0 {
        return Err(GpError::EmptyTrainingSet);
    }
    if x.nrows() != y.len() {
        return Err(GpError::ShapeMismatch {
            rows: x.nrows(),
            targets: y.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(GpError::NonFiniteData);
    }
    Ok(())
}

fn log_det_from_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Log marginal likelihood of `y` under the kernel plus observation noise.
pub fn log_marginal_likelihood(
    kernel: &KernelSpec,
    noise: f64,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<f64, GpError> {
    check_shapes(x, y)?;
    let n = x.nrows();
    let mut k = kernel.gram(x)?;
    for i in 0..n {
        k[(i, i)] += noise;
    }
    let (chol, _) = cholesky_with_jitter(&k)?;
    let alpha = chol.solve(y);
    Ok(-0.5 * y.dot(&alpha) - 0.5 * log_det_from_cholesky(&chol) - 0.5 * n as f64 * LN_2PI)
}

/// Log marginal likelihood together with its gradient with respect to
/// `[kernel params.., noise]`.
pub fn log_marginal_likelihood_with_grad(
    kernel: &KernelSpec,
    noise: f64,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(f64, DVector<f64>), GpError> {
    check_shapes(x, y)?;
    let n = x.nrows();
    let (mut k, grads) = kernel.gram_with_gradients(x)?;
    for i in 0..n {
        k[(i, i)] += noise;
    }
    let (chol, _) = cholesky_with_jitter(&k)?;
    let alpha = chol.solve(y);
    let lml = -0.5 * y.dot(&alpha) - 0.5 * log_det_from_cholesky(&chol) - 0.5 * n as f64 * LN_2PI;

    let kinv = chol.inverse();
    let mut grad = DVector::zeros(grads.len() + 1);
    for (p, dk) in grads.iter().enumerate() {
        // Both matrices are symmetric, so tr(Kinv * dK) is their elementwise
        // inner product.
        let trace: f64 = kinv.iter().zip(dk.iter()).map(|(a, b)| a * b).sum();
        let quad = (dk * &alpha).dot(&alpha);
        grad[p] = 0.5 * (quad - trace);
    }
    grad[grads.len()] = 0.5 * (alpha.dot(&alpha) - kinv.trace());
    Ok((lml, grad))
}
