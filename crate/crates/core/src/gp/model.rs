//! Fit/predict interface over the kernel, likelihood, and optimizer layers.
//!
//! Fitting standardizes inputs and targets, maximizes log marginal likelihood
//! from several restart points in log-hyperparameter space, and keeps the
//! best restart. Prediction de-standardizes back to data units and reports
//! variance inclusive of observation noise.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use super::likelihood::{cholesky_with_jitter, log_marginal_likelihood_with_grad};
use super::optimizer::{minimize, Bounds, OptimOptions, OptimResult};
use super::GpError;

/// Smallest admissible observation-noise variance in standardized units.
pub const NOISE_FLOOR: f64 = 1e-10;

const PARAM_LOWER: f64 = 1e-12;
const PARAM_UPPER: f64 = 1e12;
const RESTART_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// How one input column is scaled before entering the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnScaling {
    /// Use the column as-is.
    Identity,
    /// Divide by the column's training mean.
    DivideByMean,
}

/// Affine maps applied to training data before fitting, retained so
/// predictions can be expressed in the original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub y_mean: f64,
    pub y_std: f64,
    pub col_scales: Vec<f64>,
}

impl Standardization {
    pub fn identity(n_cols: usize) -> Self {
        Self {
            y_mean: 0.0,
            y_std: 1.0,
            col_scales: vec![1.0; n_cols],
        }
    }

    /// Derives scales from training data. The target is z-scored with the
    /// population standard deviation; a constant target falls back to unit
    /// scale. Mean-scaled columns with a near-zero mean also fall back to
    /// unit scale.
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, scaling: &[ColumnScaling]) -> Self {
        assert_eq!(scaling.len(), x.ncols(), "one scaling rule per column");
        let y_mean = y.mean();
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / y.len() as f64;
        let y_std = if var.sqrt() > 0.0 { var.sqrt() } else { 1.0 };
        let col_scales = scaling
            .iter()
            .enumerate()
            .map(|(j, s)| match s {
                ColumnScaling::Identity => 1.0,
                ColumnScaling::DivideByMean => {
                    let m = x.column(j).mean();
                    if m.abs() < 1e-12 {
                        1.0
                    } else {
                        m
                    }
                }
            })
            .collect();
        Self {
            y_mean,
            y_std,
            col_scales,
        }
    }

    pub fn scale_x(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for (j, &s) in self.col_scales.iter().enumerate() {
            for i in 0..out.nrows() {
                out[(i, j)] /= s;
            }
        }
        out
    }

    pub fn scale_y(&self, y: &DVector<f64>) -> DVector<f64> {
        y.map(|v| (v - self.y_mean) / self.y_std)
    }

    pub fn unscale_mean(&self, m: f64) -> f64 {
        m * self.y_std + self.y_mean
    }

    pub fn unscale_var(&self, v: f64) -> f64 {
        v * self.y_std * self.y_std
    }
}

/// Fit settings. `seed` drives restart initialization; everything else is
/// optimizer behavior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub n_restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub seed: u64,
    pub column_scaling: Vec<ColumnScaling>,
}

impl FitConfig {
    pub fn new(seed: u64, column_scaling: Vec<ColumnScaling>) -> Self {
        Self {
            n_restarts: 5,
            max_iters: 1000,
            grad_tol: 1e-5,
            seed,
            column_scaling,
        }
    }
}

/// Outcome of a single optimizer restart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub index: usize,
    pub log_marginal_likelihood: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

/// Per-fit record: every restart's outcome and which one was kept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub restarts: Vec<RestartOutcome>,
    pub chosen: usize,
    pub log_marginal_likelihood: f64,
}

/// Gaussian predictive marginals in data units, variance inclusive of
/// observation noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// A fitted Gaussian-process regressor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpModel {
    kernel: KernelSpec,
    noise: f64,
    standardization: Standardization,
    x_scaled: DMatrix<f64>,
    y_scaled: DVector<f64>,
}

impl GpModel {
    /// Builds a model directly from hyperparameters with no standardization,
    /// for callers that manage their own units.
    pub fn with_fixed_hyperparameters(
        kernel: KernelSpec,
        noise: f64,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
    ) -> Result<Self, GpError> {
        check_training(x, y)?;
        kernel.validate()?;
        if !(noise >= 0.0) {
            return Err(GpError::NonPositiveParam {
                name: "noise".to_string(),
                value: noise,
            });
        }
        Ok(Self {
            kernel,
            noise,
            standardization: Standardization::identity(x.ncols()),
            x_scaled: x.clone(),
            y_scaled: y.clone(),
        })
    }

    /// Standardizes the data and maximizes log marginal likelihood over the
    /// kernel hyperparameters and noise, from `config.n_restarts` starting
    /// points. Restart 0 starts at all-ones; later restarts draw
    /// log-uniformly from [1e-2, 1e2]. The best finite optimum wins, ties
    /// resolved by lowest restart index.
    pub fn fit(
        kernel_structure: &KernelSpec,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        config: &FitConfig,
    ) -> Result<(Self, FitDiagnostics), GpError> {
        check_training(x, y)?;
        let standardization = Standardization::fit(x, y, &config.column_scaling);
        let xs = standardization.scale_x(x);
        let ys = standardization.scale_y(y);

        let n_kernel = kernel_structure.param_count();
        let dim = n_kernel + 1;
        let mut lower = DVector::from_element(dim, PARAM_LOWER.ln());
        let upper = DVector::from_element(dim, PARAM_UPPER.ln());
        lower[n_kernel] = NOISE_FLOOR.ln();
        let bounds = Bounds::new(lower, upper);
        let opts = OptimOptions {
            max_iters: config.max_iters,
            grad_tol: config.grad_tol,
            memory: 10,
        };

        let outcomes: Vec<(RestartOutcome, Option<(DVector<f64>, f64)>)> = (0..config
            .n_restarts)
            .into_par_iter()
            .map(|i| {
                let theta0 = restart_start(i, config.seed, dim);
                match minimize(
                    |theta| negated_objective(kernel_structure, theta, &xs, &ys),
                    theta0,
                    &bounds,
                    &opts,
                ) {
                    Ok(OptimResult {
                        x: theta,
                        f,
                        iterations,
                        converged,
                    }) if f.is_finite() => (
                        RestartOutcome {
                            index: i,
                            log_marginal_likelihood: Some(-f),
                            iterations,
                            converged,
                            error: None,
                        },
                        Some((theta, -f)),
                    ),
                    Ok(OptimResult { iterations, converged, .. }) => (
                        RestartOutcome {
                            index: i,
                            log_marginal_likelihood: None,
                            iterations,
                            converged,
                            error: Some("non-finite objective at optimum".to_string()),
                        },
                        None,
                    ),
                    Err(e) => (
                        RestartOutcome {
                            index: i,
                            log_marginal_likelihood: None,
                            iterations: 0,
                            converged: false,
                            error: Some(e.to_string()),
                        },
                        None,
                    ),
                }
            })
            .collect();

        let mut best: Option<(usize, DVector<f64>, f64)> = None;
        for (i, (_, candidate)) in outcomes.iter().enumerate() {
            if let Some((theta, lml)) = candidate {
                let better = match &best {
                    Some((_, _, best_lml)) => lml > best_lml,
                    None => true,
                };
                if better {
                    best = Some((i, theta.clone(), *lml));
                }
            }
        }

        let restarts: Vec<RestartOutcome> = outcomes.into_iter().map(|(o, _)| o).collect();
        let Some((chosen, theta, lml)) = best else {
            let last = restarts
                .iter()
                .rev()
                .find_map(|o| o.error.clone())
                .unwrap_or_else(|| "no restarts ran".to_string());
            return Err(GpError::AllRestartsFailed {
                attempts: config.n_restarts,
                last,
            });
        };

        let h: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
        let kernel = kernel_structure.with_params(&h[..n_kernel])?;
        let noise = h[n_kernel];
        let model = Self {
            kernel,
            noise,
            standardization,
            x_scaled: xs,
            y_scaled: ys,
        };
        let diagnostics = FitDiagnostics {
            restarts,
            chosen,
            log_marginal_likelihood: lml,
        };
        Ok((model, diagnostics))
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn standardization(&self) -> &Standardization {
        &self.standardization
    }

    /// Log marginal likelihood of the training data at the fitted
    /// hyperparameters (standardized units).
    pub fn log_marginal_likelihood(&self) -> Result<f64, GpError> {
        super::likelihood::log_marginal_likelihood(
            &self.kernel,
            self.noise,
            &self.x_scaled,
            &self.y_scaled,
        )
    }

    /// Posterior predictive marginals at the rows of `x_star` (data units).
    /// Variance includes observation noise.
    pub fn predict(&self, x_star: &DMatrix<f64>) -> Result<PredictiveDistribution, GpError> {
        if x_star.ncols() != self.x_scaled.ncols() {
            return Err(GpError::ColumnOutOfRange {
                column: self.x_scaled.ncols().saturating_sub(1),
                got: x_star.ncols(),
            });
        }
        let xs = self.standardization.scale_x(x_star);
        let n = self.x_scaled.nrows();
        let mut k = self.kernel.gram(&self.x_scaled)?;
        for i in 0..n {
            k[(i, i)] += self.noise;
        }
        let (chol, _) = cholesky_with_jitter(&k)?;
        let alpha = chol.solve(&self.y_scaled);

        let k_star = self.kernel.cross(&xs, &self.x_scaled)?;
        let k_ss = self.kernel.self_diag(&xs)?;
        let w = chol.solve(&k_star.transpose());

        let m = xs.nrows();
        let mut mean = Vec::with_capacity(m);
        let mut variance = Vec::with_capacity(m);
        for i in 0..m {
            let row = k_star.row(i);
            let mean_s = row.transpose().dot(&alpha);
            let reduction = row.transpose().dot(&w.column(i).clone_owned());
            let prior = k_ss[i] + self.noise;
            // Round-off can push the reduction past the prior; clamp to a
            // tiny positive floor relative to the prior scale.
            let var_s = (prior - reduction).max(1e-15 * prior);
            mean.push(self.standardization.unscale_mean(mean_s));
            variance.push(self.standardization.unscale_var(var_s));
        }
        Ok(PredictiveDistribution { mean, variance })
    }
}

fn check_training(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(), GpError> {
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

/// Restart i's starting point in log-hyperparameter space. Restart 0 is
/// all-ones in natural units; later restarts draw log-uniformly from
/// [1e-2, 1e2] with a seed derived deterministically from the run seed.
fn restart_start(i: usize, seed: u64, dim: usize) -> DVector<f64> {
    if i == 0 {
        return DVector::zeros(dim);
    }
    let mut rng =
        ChaCha20Rng::seed_from_u64(seed.wrapping_add((i as u64).wrapping_mul(RESTART_SEED_STRIDE)));
    let (lo, hi) = ((1e-2f64).ln(), (1e2f64).ln());
    DVector::from_fn(dim, |_, _| rng.gen_range(lo..hi))
}

/// Negated log marginal likelihood over log-hyperparameters, with the chain
/// rule applied to the gradient. A Cholesky failure is reported as an
/// infinite objective so the line search retreats instead of aborting.
fn negated_objective(
    structure: &KernelSpec,
    theta: &DVector<f64>,
    xs: &DMatrix<f64>,
    ys: &DVector<f64>,
) -> Result<(f64, DVector<f64>), GpError> {
    let n_kernel = structure.param_count();
    let h: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
    let kernel = match structure.with_params(&h[..n_kernel]) {
        Ok(k) => k,
        Err(_) => return Ok((f64::INFINITY, DVector::zeros(theta.len()))),
    };
    match log_marginal_likelihood_with_grad(&kernel, h[n_kernel], xs, ys) {
        Ok((lml, grad_h)) => {
            let grad = DVector::from_fn(theta.len(), |p, _| -grad_h[p] * h[p]);
            Ok((-lml, grad))
        }
        Err(GpError::NotPositiveDefinite { .. }) => {
            Ok((f64::INFINITY, DVector::zeros(theta.len())))
        }
        Err(e) => Err(e),
    }
}
