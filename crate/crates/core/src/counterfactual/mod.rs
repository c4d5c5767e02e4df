//! Train-on-history, forecast-the-window experiments.
//!
//! An experiment fits a GP to a target series over the training window with
//! time plus weather covariates, forecasts the study window using observed
//! covariate values, and reports per-month percent deviations of the observed
//! series from the counterfactual mean with 95% significance verdicts.

pub mod calibration;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gp::model::ColumnScaling;
use crate::gp::{FitConfig, FitDiagnostics, GpError, GpModel, KernelSpec, PredictiveDistribution};
use crate::month::{MonthRange, YearMonth};
use crate::series::{SeriesBundle, SeriesError, SeriesLabel};

/// Two-sided 95% normal quantile used for all confidence intervals.
pub const Z_95: f64 = 1.96;

/// Months per seasonal cycle; the periodic kernel's fixed period.
pub const SEASONAL_PERIOD: f64 = 12.0;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("training window {train} must end before the forecast window {forecast} starts")]
    WindowOrder {
        train: MonthRange,
        forecast: MonthRange,
    },
    #[error("target series {label} is constant over the training window; nothing to fit")]
    DegenerateTarget { label: String },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("failed to write output: {0}")]
    Io(#[from] std::io::Error),
}

/// What to fit and where to forecast.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub target: SeriesLabel,
    pub covariates: Vec<SeriesLabel>,
    pub train: MonthRange,
    pub forecast: MonthRange,
    pub seed: u64,
    pub n_restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl ExperimentSpec {
    /// The standard configuration: four years and two months of history,
    /// a ten-month forecast, weather covariates, five restarts.
    pub fn standard(target: SeriesLabel, seed: u64) -> Self {
        Self {
            target,
            covariates: vec![SeriesLabel::Hdd, SeriesLabel::Cdd],
            train: MonthRange::new(YearMonth::of(2016, 1), YearMonth::of(2020, 2)),
            forecast: MonthRange::new(YearMonth::of(2020, 3), YearMonth::of(2020, 12)),
            seed,
            n_restarts: 5,
            max_iters: 1000,
            grad_tol: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.train.end >= self.forecast.start {
            return Err(ExperimentError::WindowOrder {
                train: self.train,
                forecast: self.forecast,
            });
        }
        Ok(())
    }

    fn fit_config(&self) -> FitConfig {
        let mut scaling = vec![ColumnScaling::Identity];
        scaling.extend(std::iter::repeat(ColumnScaling::DivideByMean).take(self.covariates.len()));
        FitConfig {
            n_restarts: self.n_restarts,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            seed: self.seed,
            column_scaling: scaling,
        }
    }

    /// Time column gets bias + linear + fixed-period seasonal structure;
    /// each covariate column gets bias + linear.
    fn kernel_structure(&self) -> KernelSpec {
        let mut components = KernelSpec::trend_with_period(0, SEASONAL_PERIOD);
        for (i, _) in self.covariates.iter().enumerate() {
            components.extend(KernelSpec::trend(i + 1));
        }
        KernelSpec::new(components).expect("unit initial parameters are valid")
    }
}

/// One forecast month's comparison of observation against the
/// counterfactual predictive distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonthlyDeviation {
    pub month: YearMonth,
    pub observed: f64,
    pub predicted_mean: f64,
    pub predicted_variance: f64,
    pub percent_deviation: f64,
    pub ci_halfwidth_pct: f64,
    pub significant: bool,
}

/// Per-month deviations plus window summary statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviationReport {
    pub target: String,
    pub months: Vec<MonthlyDeviation>,
    /// Arithmetic mean of the monthly percent deviations.
    pub average_percent_deviation: f64,
    /// Mean of the predicted (counterfactual) monthly values.
    pub counterfactual_window_average: f64,
    /// Mean of the observed monthly values.
    pub observed_window_average: f64,
    pub significant_months: usize,
}

/// Everything a single experiment produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub model: GpModel,
    pub diagnostics: FitDiagnostics,
    pub prediction: PredictiveDistribution,
    pub report: DeviationReport,
}

/// Strict two-sided 95% test per month: true iff the observation falls
/// outside mean +- 1.96 sigma.
pub fn significance_verdict(dist: &PredictiveDistribution, observed: &[f64]) -> Vec<bool> {
    assert_eq!(
        dist.mean.len(),
        observed.len(),
        "one observation per forecast month"
    );
    dist.mean
        .iter()
        .zip(dist.variance.iter())
        .zip(observed.iter())
        .map(|((&m, &v), &obs)| (obs - m).abs() > Z_95 * v.sqrt())
        .collect()
}

fn design_matrix(
    bundle: &SeriesBundle,
    spec: &ExperimentSpec,
    window: MonthRange,
) -> Result<DMatrix<f64>, ExperimentError> {
    let n = window.len();
    let mut x = DMatrix::zeros(n, 1 + spec.covariates.len());
    for (i, month) in window.iter().enumerate() {
        x[(i, 0)] = month.months_since(spec.train.start) as f64;
    }
    for (j, label) in spec.covariates.iter().enumerate() {
        let series = bundle.require(*label)?.slice(window)?;
        for (i, v) in series.values().iter().enumerate() {
            x[(i, j + 1)] = *v;
        }
    }
    Ok(x)
}

/// Fits the target on the training window and scores the forecast window.
pub fn run_experiment(
    bundle: &SeriesBundle,
    spec: &ExperimentSpec,
) -> Result<ExperimentResult, ExperimentError> {
    spec.validate()?;
    let target = bundle.require(spec.target)?;
    let y_train = target.slice(spec.train)?;
    let y_observed = target.slice(spec.forecast)?;

    let mean = y_train.mean();
    if y_train.values().iter().all(|v| (v - mean).abs() < 1e-12 * mean.abs().max(1.0)) {
        return Err(ExperimentError::DegenerateTarget {
            label: target.label().to_string(),
        });
    }

    let x_train = design_matrix(bundle, spec, spec.train)?;
    let x_forecast = design_matrix(bundle, spec, spec.forecast)?;
    let y = DVector::from_column_slice(y_train.values());

    let (model, diagnostics) =
        GpModel::fit(&spec.kernel_structure(), &x_train, &y, &spec.fit_config())?;
    let prediction = model.predict(&x_forecast)?;

    let verdicts = significance_verdict(&prediction, y_observed.values());
    let months: Vec<MonthlyDeviation> = spec
        .forecast
        .iter()
        .enumerate()
        .map(|(i, month)| {
            let mean = prediction.mean[i];
            let var = prediction.variance[i];
            let obs = y_observed.values()[i];
            MonthlyDeviation {
                month,
                observed: obs,
                predicted_mean: mean,
                predicted_variance: var,
                percent_deviation: 100.0 * (obs - mean) / mean,
                ci_halfwidth_pct: 100.0 * Z_95 * var.sqrt() / mean,
                significant: verdicts[i],
            }
        })
        .collect();

    let n = months.len() as f64;
    let report = DeviationReport {
        target: target.label().to_string(),
        average_percent_deviation: months.iter().map(|m| m.percent_deviation).sum::<f64>() / n,
        counterfactual_window_average: months.iter().map(|m| m.predicted_mean).sum::<f64>() / n,
        observed_window_average: months.iter().map(|m| m.observed).sum::<f64>() / n,
        significant_months: months.iter().filter(|m| m.significant).count(),
        months,
    };

    Ok(ExperimentResult {
        spec: spec.clone(),
        model,
        diagnostics,
        prediction,
        report,
    })
}

/// Runs the per-fuel experiments (coal, gas, oil attribution) concurrently.
pub fn fuel_split_experiment(
    bundle: &SeriesBundle,
    template: &ExperimentSpec,
) -> Result<Vec<ExperimentResult>, ExperimentError> {
    let fuels = [
        SeriesLabel::EmissionsCoal,
        SeriesLabel::EmissionsGas,
        SeriesLabel::EmissionsOil,
    ];
    fuels
        .into_par_iter()
        .map(|label| {
            let spec = ExperimentSpec {
                target: label,
                ..template.clone()
            };
            run_experiment(bundle, &spec)
        })
        .collect()
}

/// Writes a deviation report as CSV with a provenance comment line.
pub fn write_report_csv<W: std::io::Write>(
    mut w: W,
    report: &DeviationReport,
    config_sha256: &str,
    seed: u64,
) -> std::io::Result<()> {
    writeln!(w, "# config_sha256={config_sha256} seed={seed}")?;
    writeln!(
        w,
        "target,month,observed,predicted_mean,ci_lower,ci_upper,percent_deviation,ci_halfwidth_pct,significant"
    )?;
    for m in &report.months {
        let half = Z_95 * m.predicted_variance.sqrt();
        writeln!(
            w,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.4},{:.4},{}",
            report.target,
            m.month,
            m.observed,
            m.predicted_mean,
            m.predicted_mean - half,
            m.predicted_mean + half,
            m.percent_deviation,
            m.ci_halfwidth_pct,
            m.significant
        )?;
    }
    writeln!(
        w,
        "{},average,{:.6},{:.6},,,{:.4},,",
        report.target, report.observed_window_average, report.counterfactual_window_average,
        report.average_percent_deviation
    )?;
    Ok(())
}

/// Writes per-month plot data: training history plus forecast with CI bounds.
pub fn write_plot_data<W: std::io::Write>(
    mut w: W,
    bundle: &SeriesBundle,
    result: &ExperimentResult,
    config_sha256: &str,
    seed: u64,
) -> Result<(), ExperimentError> {
    let spec = &result.spec;
    let target = bundle.require(spec.target)?;
    let train = target.slice(spec.train)?;

    writeln!(w, "# config_sha256={config_sha256} seed={seed}")?;
    writeln!(w, "segment,month,observed,mean,ci_lower,ci_upper")?;
    for (month, value) in train.iter() {
        writeln!(w, "train,{month},{value:.6},,,")?;
    }
    for m in &result.report.months {
        let half = Z_95 * m.predicted_variance.sqrt();
        writeln!(
            w,
            "forecast,{},{:.6},{:.6},{:.6},{:.6}",
            m.month,
            m.observed,
            m.predicted_mean,
            m.predicted_mean - half,
            m.predicted_mean + half
        )?;
    }
    Ok(())
}
