//! Box-constrained quasi-Newton minimizer.
//!
//! Limited-memory BFGS with gradient projection onto the box and an Armijo
//! backtracking line search. The projected-gradient infinity norm is the
//! convergence measure, so points pinned to a bound register as stationary.

use nalgebra::DVector;

use super::GpError;

#[derive(Debug, Clone)]
pub struct Bounds {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl Bounds {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        assert!(
            lower.iter().zip(upper.iter()).all(|(l, u)| l <= u),
            "lower bound above upper bound"
        );
        Self { lower, upper }
    }

    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Self {
        Self::new(
            DVector::from_element(dim, lower),
            DVector::from_element(dim, upper),
        )
    }

    fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| x[i].clamp(self.lower[i], self.upper[i]))
    }
}

#[derive(Debug, Clone)]
pub struct OptimOptions {
    pub max_iters: usize,
    /// Convergence threshold on the projected-gradient infinity norm.
    pub grad_tol: f64,
    /// Number of curvature pairs retained for the two-loop recursion.
    pub memory: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            grad_tol: 1e-5,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: DVector<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn projected_gradient_norm(x: &DVector<f64>, g: &DVector<f64>, bounds: &Bounds) -> f64 {
    let stepped = bounds.project(&(x - g));
    (x - stepped).amax()
}

/// Search direction from the two-loop recursion over stored curvature pairs.
fn lbfgs_direction(g: &DVector<f64>, history: &[(DVector<f64>, DVector<f64>)]) -> DVector<f64> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y) in history.iter().rev() {
        let rho = 1.0 / y.dot(s);
        let a = rho * s.dot(&q);
        q -= y * a;
        alphas.push((rho, a));
    }
    if let Some((s, y)) = history.last() {
        q *= s.dot(y) / y.dot(y);
    }
    for ((s, y), (rho, a)) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * y.dot(&q);
        q += s * (a - b);
    }
    -q
}

/// Minimizes `f` over the box. The objective returns the value and gradient
/// together; a non-finite value is treated as an infeasible point and the
/// line search backs away from it.
pub fn minimize<F>(
    mut f: F,
    x0: DVector<f64>,
    bounds: &Bounds,
    opts: &OptimOptions,
) -> Result<OptimResult, GpError>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>), GpError>,
{
    let mut x = bounds.project(&x0);
    let (mut fx, mut gx) = f(&x)?;
    if !fx.is_finite() {
        return Err(GpError::NonFiniteObjective {
            context: "initial point".to_string(),
        });
    }

    let mut history: Vec<(DVector<f64>, DVector<f64>)> = Vec::with_capacity(opts.memory);
    let c1 = 1e-4;

    for iter in 0..opts.max_iters {
        if projected_gradient_norm(&x, &gx, bounds) < opts.grad_tol {
            return Ok(OptimResult {
                x,
                f: fx,
                iterations: iter,
                converged: true,
            });
        }

        let mut d = if history.is_empty() {
            -&gx
        } else {
            lbfgs_direction(&gx, &history)
        };
        if d.dot(&gx) >= 0.0 || d.iter().any(|v| !v.is_finite()) {
            history.clear();
            d = -&gx;
        }

        let mut t = if history.is_empty() {
            (1.0 / gx.amax().max(1e-12)).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..60 {
            let cand = bounds.project(&(&x + &d * t));
            let step = &cand - &x;
            if step.amax() == 0.0 {
                break;
            }
            let (fc, gc) = f(&cand)?;
            if fc.is_finite() && fc <= fx + c1 * gx.dot(&step) {
                accepted = Some((cand, fc, gc));
                break;
            }
            t *= 0.5;
        }

        let Some((x_new, f_new, g_new)) = accepted else {
            if history.is_empty() {
                // Even raw steepest descent cannot improve: numerically
                // stationary.
                return Ok(OptimResult {
                    x,
                    f: fx,
                    iterations: iter,
                    converged: true,
                });
            }
            history.clear();
            continue;
        };

        let s = &x_new - &x;
        let yv = &g_new - &gx;
        let sy = s.dot(&yv);
        if sy > 1e-10 * s.norm() * yv.norm() {
            if history.len() == opts.memory {
                history.remove(0);
            }
            history.push((s, yv));
        }

        x = x_new;
        fx = f_new;
        gx = g_new;
    }

    Ok(OptimResult {
        x,
        f: fx,
        iterations: opts.max_iters,
        converged: false,
    })
}
