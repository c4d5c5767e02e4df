//! Monte-Carlo calibration of the significance rule.
//!
//! If the model is honest, series drawn from its own fitted distribution
//! with no intervention should trip the 95% significance test in roughly 5%
//! of forecast months. The harness fits a reference model once, then
//! repeatedly samples full paths from it, refits on the training prefix, and
//! counts false positives on the forecast suffix.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{significance_verdict, SEASONAL_PERIOD};
use crate::gp::likelihood::cholesky_with_jitter;
use crate::gp::model::ColumnScaling;
use crate::gp::{FitConfig, GpError, GpModel, KernelSpec};

const TRIAL_SEED_STRIDE: u64 = 0xD1B5_4A32_D192_ED03;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub train_months: usize,
    pub forecast_months: usize,
    pub trials: usize,
    pub seed: u64,
    pub n_restarts: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            train_months: 50,
            forecast_months: 10,
            trials: 50,
            seed: 0,
            n_restarts: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationOutcome {
    pub trials: usize,
    pub months_total: usize,
    pub significant_months: usize,
    pub false_positive_rate: f64,
    pub per_trial_significant: Vec<usize>,
}

fn time_column(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, 1, |i, _| i as f64)
}

fn seasonal_kernel() -> KernelSpec {
    KernelSpec::new(KernelSpec::trend_with_period(0, SEASONAL_PERIOD))
        .expect("unit initial parameters are valid")
}

/// A deterministic emissions-like base series the reference model is fit to.
fn base_series(n: usize, rng: &mut ChaCha20Rng) -> DVector<f64> {
    DVector::from_fn(n, |i, _| {
        let t = i as f64;
        let noise: f64 = rng.sample::<f64, _>(StandardNormal) * 2.0;
        100.0 + 0.5 * t + 10.0 * (2.0 * std::f64::consts::PI * t / 12.0).sin() + noise
    })
}

/// Draws one path from the reference model's full joint distribution
/// (including observation noise) in data units.
fn sample_path(
    reference: &GpModel,
    x: &DMatrix<f64>,
    rng: &mut ChaCha20Rng,
) -> Result<DVector<f64>, GpError> {
    let n = x.nrows();
    let mut k = reference.kernel().gram(x)?;
    for i in 0..n {
        k[(i, i)] += reference.noise();
    }
    let (chol, _) = cholesky_with_jitter(&k)?;
    let u = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let z = chol.l() * u;
    let s = reference.standardization();
    Ok(z.map(|v| s.unscale_mean(v)))
}

/// Runs the full harness. Deterministic for a given config.
pub fn run_calibration(config: &CalibrationConfig) -> Result<CalibrationOutcome, GpError> {
    let n = config.train_months + config.forecast_months;
    let x_all = time_column(n);
    let x_train = time_column(config.train_months);
    let x_fore = DMatrix::from_fn(config.forecast_months, 1, |i, _| {
        (config.train_months + i) as f64
    });

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let base = base_series(n, &mut rng);
    let reference_config = FitConfig {
        n_restarts: config.n_restarts,
        seed: config.seed,
        ..FitConfig::new(config.seed, vec![ColumnScaling::Identity])
    };
    let (reference, _) = GpModel::fit(&seasonal_kernel(), &x_all, &base, &reference_config)?;

    let per_trial_significant: Vec<usize> = (0..config.trials)
        .into_par_iter()
        .map(|t| -> Result<usize, GpError> {
            let trial_seed = config
                .seed
                .wrapping_add((t as u64 + 1).wrapping_mul(TRIAL_SEED_STRIDE));
            let mut rng = ChaCha20Rng::seed_from_u64(trial_seed);
            let path = sample_path(&reference, &x_all, &mut rng)?;

            let y_train = DVector::from_fn(config.train_months, |i, _| path[i]);
            let observed: Vec<f64> = (0..config.forecast_months)
                .map(|i| path[config.train_months + i])
                .collect();

            let fit_config = FitConfig {
                n_restarts: config.n_restarts,
                seed: trial_seed,
                ..FitConfig::new(trial_seed, vec![ColumnScaling::Identity])
            };
            let (model, _) = GpModel::fit(&seasonal_kernel(), &x_train, &y_train, &fit_config)?;
            let prediction = model.predict(&x_fore)?;
            Ok(significance_verdict(&prediction, &observed)
                .iter()
                .filter(|&&s| s)
                .count())
        })
        .collect::<Result<_, _>>()?;

    let significant_months: usize = per_trial_significant.iter().sum();
    let months_total = config.trials * config.forecast_months;
    Ok(CalibrationOutcome {
        trials: config.trials,
        months_total,
        significant_months,
        false_positive_rate: significant_months as f64 / months_total as f64,
        per_trial_significant,
    })
}
