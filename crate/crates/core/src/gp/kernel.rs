//! Additive kernel composition over columns of the input matrix.
//!
//! A `KernelSpec` is a sum of terms, each reading a single input column.
//! Covariances of independent terms add, so the Gram matrix is the sum of the
//! per-term Gram matrices and the gradient with respect to any hyperparameter
//! touches exactly one term.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::GpError;

/// One additive kernel term. Variances and lengthscales are tunable;
/// the period of `StdPeriodic` is a fixed structural choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelTerm {
    /// Constant covariance `v` between any two points.
    Bias { variance: f64 },
    /// Dot-product covariance `v * x * x'` with no offset.
    Linear { variance: f64 },
    /// Standard periodic covariance
    /// `v * exp(-2 sin^2(pi |x - x'| / period) / lengthscale^2)`.
    StdPeriodic {
        variance: f64,
        lengthscale: f64,
        period: f64,
    },
}

impl KernelTerm {
    fn tunable_count(&self) -> usize {
        match self {
            KernelTerm::Bias { .. } | KernelTerm::Linear { .. } => 1,
            KernelTerm::StdPeriodic { .. } => 2,
        }
    }

    fn value(&self, a: f64, b: f64) -> f64 {
        match *self {
            KernelTerm::Bias { variance } => variance,
            KernelTerm::Linear { variance } => variance * a * b,
            KernelTerm::StdPeriodic {
                variance,
                lengthscale,
                period,
            } => {
                let s = (std::f64::consts::PI * (a - b).abs() / period).sin();
                variance * (-2.0 * s * s / (lengthscale * lengthscale)).exp()
            }
        }
    }

    /// Partial derivatives with respect to this term's tunable parameters,
    /// in the same order as `tunable_count`.
    fn grads(&self, a: f64, b: f64, out: &mut [f64]) {
        match *self {
            KernelTerm::Bias { .. } => out[0] = 1.0,
            KernelTerm::Linear { .. } => out[0] = a * b,
            KernelTerm::StdPeriodic {
                variance,
                lengthscale,
                period,
            } => {
                let s = (std::f64::consts::PI * (a - b).abs() / period).sin();
                let s2 = s * s;
                let e = (-2.0 * s2 / (lengthscale * lengthscale)).exp();
                out[0] = e;
                out[1] = variance * e * 4.0 * s2 / (lengthscale * lengthscale * lengthscale);
            }
        }
    }
}

/// A kernel term bound to one column of the input matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelComponent {
    pub column: usize,
    pub term: KernelTerm,
}

/// Sum of column-bound kernel terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    components: Vec<KernelComponent>,
}

impl KernelSpec {
    pub fn new(components: Vec<KernelComponent>) -> Result<Self, GpError> {
        let spec = Self { components };
        spec.validate()?;
        Ok(spec)
    }

    /// The composition used for one driver column: bias + linear, and
    /// optionally a periodic term with the given fixed period.
    pub fn trend(column: usize) -> Vec<KernelComponent> {
        vec![
            KernelComponent {
                column,
                term: KernelTerm::Bias { variance: 1.0 },
            },
            KernelComponent {
                column,
                term: KernelTerm::Linear { variance: 1.0 },
            },
        ]
    }

    pub fn trend_with_period(column: usize, period: f64) -> Vec<KernelComponent> {
        let mut v = Self::trend(column);
        v.push(KernelComponent {
            column,
            term: KernelTerm::StdPeriodic {
                variance: 1.0,
                lengthscale: 1.0,
                period,
            },
        });
        v
    }

    pub fn components(&self) -> &[KernelComponent] {
        &self.components
    }

    pub fn validate(&self) -> Result<(), GpError> {
        for (i, c) in self.components.iter().enumerate() {
            let check = |name: &str, value: f64| {
                if value > 0.0 && value.is_finite() {
                    Ok(())
                } else {
                    Err(GpError::NonPositiveParam {
                        name: format!("k{i}.{name}"),
                        value,
                    })
                }
            };
            match c.term {
                KernelTerm::Bias { variance } | KernelTerm::Linear { variance } => {
                    check("variance", variance)?;
                }
                KernelTerm::StdPeriodic {
                    variance,
                    lengthscale,
                    period,
                } => {
                    check("variance", variance)?;
                    check("lengthscale", lengthscale)?;
                    check("period", period)?;
                }
            }
        }
        Ok(())
    }

    fn check_columns(&self, x: &DMatrix<f64>) -> Result<(), GpError> {
        for c in &self.components {
            if c.column >= x.ncols() {
                return Err(GpError::ColumnOutOfRange {
                    column: c.column,
                    got: x.ncols(),
                });
            }
        }
        Ok(())
    }

    /// Number of tunable hyperparameters (periods excluded).
    pub fn param_count(&self) -> usize {
        self.components.iter().map(|c| c.term.tunable_count()).sum()
    }

    /// Current tunable hyperparameter values, flattened in component order.
    pub fn params(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for c in &self.components {
            match c.term {
                KernelTerm::Bias { variance } | KernelTerm::Linear { variance } => {
                    out.push(variance);
                }
                KernelTerm::StdPeriodic {
                    variance,
                    lengthscale,
                    ..
                } => {
                    out.push(variance);
                    out.push(lengthscale);
                }
            }
        }
        DVector::from_vec(out)
    }

    /// Diagnostic names aligned with `params()`.
    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.param_count());
        for (i, c) in self.components.iter().enumerate() {
            match c.term {
                KernelTerm::Bias { .. } => out.push(format!("k{i}.bias.variance")),
                KernelTerm::Linear { .. } => out.push(format!("k{i}.linear.variance")),
                KernelTerm::StdPeriodic { .. } => {
                    out.push(format!("k{i}.periodic.variance"));
                    out.push(format!("k{i}.periodic.lengthscale"));
                }
            }
        }
        out
    }

    /// A copy of this spec with tunable parameters replaced by `p`.
    pub fn with_params(&self, p: &[f64]) -> Result<Self, GpError> {
        assert_eq!(p.len(), self.param_count(), "hyperparameter vector length");
        let mut components = self.components.clone();
        let mut it = p.iter().copied();
        for c in &mut components {
            match &mut c.term {
                KernelTerm::Bias { variance } | KernelTerm::Linear { variance } => {
                    *variance = it.next().expect("length checked");
                }
                KernelTerm::StdPeriodic {
                    variance,
                    lengthscale,
                    ..
                } => {
                    *variance = it.next().expect("length checked");
                    *lengthscale = it.next().expect("length checked");
                }
            }
        }
        Self::new(components)
    }

    /// Symmetric Gram matrix over the rows of `x`.
    pub fn gram(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, GpError> {
        self.check_columns(x)?;
        let n = x.nrows();
        let mut k = DMatrix::zeros(n, n);
        for c in &self.components {
            let col = x.column(c.column);
            for i in 0..n {
                for j in i..n {
                    let v = c.term.value(col[i], col[j]);
                    k[(i, j)] += v;
                    if i != j {
                        k[(j, i)] += v;
                    }
                }
            }
        }
        Ok(k)
    }

    /// Cross-covariance between rows of `x1` and rows of `x2`.
    pub fn cross(&self, x1: &DMatrix<f64>, x2: &DMatrix<f64>) -> Result<DMatrix<f64>, GpError> {
        self.check_columns(x1)?;
        self.check_columns(x2)?;
        let mut k = DMatrix::zeros(x1.nrows(), x2.nrows());
        for c in &self.components {
            let c1 = x1.column(c.column);
            let c2 = x2.column(c.column);
            for i in 0..x1.nrows() {
                for j in 0..x2.nrows() {
                    k[(i, j)] += c.term.value(c1[i], c2[j]);
                }
            }
        }
        Ok(k)
    }

    /// Prior variances k(x, x) for each row of `x`.
    pub fn self_diag(&self, x: &DMatrix<f64>) -> Result<DVector<f64>, GpError> {
        self.check_columns(x)?;
        let mut d = DVector::zeros(x.nrows());
        for c in &self.components {
            let col = x.column(c.column);
            for i in 0..x.nrows() {
                d[i] += c.term.value(col[i], col[i]);
            }
        }
        Ok(d)
    }

    /// Gram matrix together with one gradient matrix per tunable parameter,
    /// aligned with `params()`.
    pub fn gram_with_gradients(
        &self,
        x: &DMatrix<f64>,
    ) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>), GpError> {
        self.check_columns(x)?;
        let n = x.nrows();
        let mut k = DMatrix::zeros(n, n);
        let mut grads: Vec<DMatrix<f64>> = Vec::with_capacity(self.param_count());
        let mut buf = [0.0f64; 2];
        for c in &self.components {
            let np = c.term.tunable_count();
            let base = grads.len();
            for _ in 0..np {
                grads.push(DMatrix::zeros(n, n));
            }
            let col = x.column(c.column);
            for i in 0..n {
                for j in i..n {
                    let v = c.term.value(col[i], col[j]);
                    k[(i, j)] += v;
                    if i != j {
                        k[(j, i)] += v;
                    }
                    c.term.grads(col[i], col[j], &mut buf[..np]);
                    for (p, &g) in buf[..np].iter().enumerate() {
                        grads[base + p][(i, j)] = g;
                        if i != j {
                            grads[base + p][(j, i)] = g;
                        }
                    }
                }
            }
        }
        Ok((k, grads))
    }
}
