//! Bounded Levenberg-Marquardt least squares with a numeric Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Options for [`least_squares`].
#[derive(Clone, Debug)]
pub struct LsqOptions {
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    /// Per-residual weights (inverse variances).
    pub weights: Option<Vec<f64>>,
    /// Treat the weights as true inverse variances. When false the
    /// covariance is rescaled by the reduced χ².
    pub absolute_weights: bool,
    /// Typical magnitude of each parameter, used for finite differences and
    /// the step criterion. Defaults to max(|x₀|, 1).
    pub scales: Option<Vec<f64>>,
    pub max_iterations: usize,
    /// Convergence when max_j |J_jᵀr|/(‖J_j‖‖r‖) falls below this.
    pub gtol: f64,
    /// Convergence when every relative parameter step falls below this.
    pub xtol: f64,
    /// Largest step per iteration in units of the parameter scales.
    pub max_step: Option<f64>,
}

impl Default for LsqOptions {
    fn default() -> Self {
        LsqOptions {
            lower: None,
            upper: None,
            weights: None,
            absolute_weights: false,
            scales: None,
            max_iterations: 500,
            gtol: 1e-8,
            xtol: 1e-12,
            max_step: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LsqOutcome {
    pub x: Vec<f64>,
    pub uncertainties: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// ½ Σ wᵢ rᵢ².
    pub cost: f64,
    pub dof: usize,
    /// Accepted steps.
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
    /// Cost after every accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
}

impl LsqOutcome {
    /// √(Σ wᵢ rᵢ²).
    pub fn residual_norm(&self) -> f64 {
        (2.0 * self.cost).sqrt()
    }

    pub fn chi_square(&self) -> f64 {
        2.0 * self.cost
    }

    pub fn reduced_chi_square(&self) -> f64 {
        if self.dof == 0 {
            f64::NAN
        } else {
            self.chi_square() / self.dof as f64
        }
    }
}

struct Problem<'a, F> {
    f: F,
    sqrt_w: Option<Vec<f64>>,
    lower: &'a [f64],
    upper: &'a [f64],
    evaluations: usize,
}

impl<F: Fn(&[f64]) -> Result<Vec<f64>>> Problem<'_, F> {
    /// Weighted residuals, or `None` if the model is undefined there.
    fn residuals(&mut self, x: &[f64]) -> Option<Vec<f64>> {
        self.evaluations += 1;
        let mut r = (self.f)(x).ok()?;
        if let Some(w) = &self.sqrt_w {
            if w.len() != r.len() {
                return None;
            }
            r.iter_mut().zip(w).for_each(|(ri, wi)| *ri *= wi);
        }
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn project(&self, x: &mut [f64]) {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = xi.clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Central-difference Jacobian, one-sided at bounds.
    fn jacobian(&mut self, x: &[f64], r0: &[f64], scales: &[f64]) -> Result<DMatrix<f64>> {
        let m = r0.len();
        let n = x.len();
        let mut jac = DMatrix::zeros(m, n);
        let step = f64::EPSILON.cbrt();
        for j in 0..n {
            let h = step * scales[j].max(x[j].abs() * 1e-3);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] = (x[j] + h).min(self.upper[j]);
            xm[j] = (x[j] - h).max(self.lower[j]);
            let dx = xp[j] - xm[j];
            if dx == 0.0 {
                continue;
            }
            let rp = if xp[j] == x[j] { Some(r0.to_vec()) } else { self.residuals(&xp) };
            let rm = if xm[j] == x[j] { Some(r0.to_vec()) } else { self.residuals(&xm) };
            // Fall back to a one-sided difference if one side is undefined.
            let (rp, rm, dx) = match (rp, rm) {
                (Some(p), Some(q)) => (p, q, dx),
                (Some(p), None) => (p, r0.to_vec(), xp[j] - x[j]),
                (None, Some(q)) => (r0.to_vec(), q, x[j] - xm[j]),
                (None, None) => {
                    return Err(Error::domain("least_squares", format!("model undefined around parameter {j}")))
                }
            };
            for i in 0..m {
                jac[(i, j)] = (rp[i] - rm[i]) / dx;
            }
        }
        Ok(jac)
    }
}

fn half_norm_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// Pseudo-inverse of a symmetric positive semi-definite matrix and whether
/// it was rank deficient. The matrix is equilibrated by its diagonal first so
/// that parameters in very different units do not look degenerate.
fn pseudo_inverse(a: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let d = a.diagonal().map(|v| if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 });
    let scaled = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * d[i] * d[j]);
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = smax * 1e-13 * a.nrows() as f64;
    let mut deficient = d.iter().any(|&v| v == 0.0);
    let inv_s = svd.singular_values.map(|s| {
        if s > cutoff && s > 0.0 {
            1.0 / s
        } else {
            deficient = true;
            0.0
        }
    });
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v requested");
    let inv = vt.transpose() * DMatrix::from_diagonal(&inv_s) * u.transpose();
    (DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| inv[(i, j)] * d[i] * d[j]), deficient)
}

/// Minimises ½ Σ wᵢ rᵢ(x)² subject to box bounds.
///
/// Each iteration first tries the Gauss-Newton step and falls back to
/// Marquardt damping (diagonal scaling, Nielsen's update of λ). Trial points
/// where the residual function errors or returns non-finite values are
/// rejected like uphill steps. Failure to converge is reported in the outcome
/// rather than returned as an error.
pub fn least_squares<F>(residuals: F, init: &[f64], opts: &LsqOptions) -> Result<LsqOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = init.len();
    if n == 0 {
        return Err(Error::InsufficientData("no parameters to fit".into()));
    }
    let lower = opts.lower.clone().unwrap_or_else(|| vec![f64::NEG_INFINITY; n]);
    let upper = opts.upper.clone().unwrap_or_else(|| vec![f64::INFINITY; n]);
    if lower.len() != n || upper.len() != n || lower.iter().zip(&upper).any(|(l, u)| l > u) {
        return Err(Error::validation("bounds", "bounds must match parameters and satisfy lower <= upper"));
    }
    let scales: Vec<f64> = match &opts.scales {
        Some(s) if s.len() == n && s.iter().all(|v| *v > 0.0) => s.clone(),
        Some(_) => return Err(Error::validation("scales", "need one positive scale per parameter")),
        None => init.iter().map(|v| v.abs().max(1.0)).collect(),
    };
    let sqrt_w = match &opts.weights {
        Some(w) if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) => {
            return Err(Error::validation("weights", "weights must be finite and >= 0"))
        }
        Some(w) => Some(w.iter().map(|v| v.sqrt()).collect::<Vec<_>>()),
        None => None,
    };
    let mut prob = Problem { f: residuals, sqrt_w, lower: &lower, upper: &upper, evaluations: 0 };

    let mut x = init.to_vec();
    prob.project(&mut x);
    let mut r = prob
        .residuals(&x)
        .ok_or_else(|| Error::domain("least_squares", "residuals undefined or non-finite at the initial point"))?;
    let m = r.len();
    if m < n {
        return Err(Error::InsufficientData(format!("{m} residuals for {n} parameters")));
    }
    let mut cost = half_norm_sq(&r);
    let mut history = vec![cost];
    let mut warnings = Vec::new();
    let mut lambda = 0.0_f64;
    let mut nu = 2.0;
    let mut diag_scale = vec![0.0_f64; n];
    let mut converged = false;
    let mut outer = 0;

    while outer < opts.max_iterations {
        outer += 1;
        // A reduction by thirty orders of magnitude is an exact fit.
        if cost <= 1e-30 * history[0] {
            converged = true;
            break;
        }
        let jac = prob.jacobian(&x, &r, &scales)?;
        let rv = DVector::from_column_slice(&r);
        let g = jac.transpose() * &rv;
        let a = jac.transpose() * &jac;

        let rnorm = (2.0 * cost).sqrt();
        let cosine = (0..n)
            .map(|j| {
                let cn = jac.column(j).norm();
                if cn == 0.0 {
                    0.0
                } else {
                    g[j].abs() / (cn * rnorm)
                }
            })
            .fold(0.0, f64::max);
        if cosine <= opts.gtol {
            converged = true;
            break;
        }
        for j in 0..n {
            diag_scale[j] = diag_scale[j].max(a[(j, j)]);
        }
        let dmax = diag_scale.iter().cloned().fold(0.0, f64::max);

        let mut accepted = false;
        let mut small_step = false;
        for _ in 0..60 {
            let mut damped = a.clone();
            for j in 0..n {
                damped[(j, j)] += lambda * diag_scale[j].max(1e-12 * dmax);
            }
            let mut step = match damped.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda = if lambda == 0.0 { 1e-3 } else { lambda * nu };
                    nu *= 2.0;
                    continue;
                }
            };
            if let Some(limit) = opts.max_step {
                let worst = (0..n).map(|j| step[j].abs() / (limit * scales[j])).fold(0.0, f64::max);
                if worst > 1.0 {
                    step /= worst;
                }
            }
            let mut x_new: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            prob.project(&mut x_new);
            let delta = DVector::from_iterator(n, x_new.iter().zip(&x).map(|(a, b)| a - b));
            small_step = (0..n).all(|j| delta[j].abs() <= opts.xtol * (x[j].abs() + scales[j]));
            let trial = prob.residuals(&x_new);
            let new_cost = trial.as_ref().map_or(f64::INFINITY, |t| half_norm_sq(t));
            let predicted = -(g.dot(&delta) + 0.5 * delta.dot(&(&a * &delta)));
            if new_cost < cost {
                let rho = if predicted > 0.0 { (cost - new_cost) / predicted } else { 1.0 };
                let relative_gain = (cost - new_cost) / cost;
                x = x_new;
                r = trial.expect("finite cost implies residuals");
                cost = new_cost;
                history.push(cost);
                lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                accepted = true;
                if small_step || relative_gain < 1e-15 {
                    converged = true;
                }
                break;
            }
            if small_step {
                break;
            }
            lambda = if lambda == 0.0 { 1e-3 } else { lambda * nu };
            nu *= 2.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // No downhill step exists at the resolution of the parameters.
            converged = small_step || cosine < 1e-4;
            if !converged {
                warnings.push(format!("stalled with gradient cosine {cosine:.3e}"));
            }
            break;
        }
    }
    let iterations = history.len() - 1;
    if !converged && outer >= opts.max_iterations {
        warnings.push(format!("no convergence after {} iterations", opts.max_iterations));
    }

    let jac = prob.jacobian(&x, &r, &scales)?;
    let (mut cov, deficient) = pseudo_inverse(&(jac.transpose() * &jac));
    if deficient {
        warnings.push("singular Jacobian: some parameters are not identifiable".into());
    }
    let dof = m - n;
    if !opts.absolute_weights {
        if dof > 0 {
            cov *= 2.0 * cost / dof as f64;
        } else {
            warnings.push("zero degrees of freedom: uncertainties not rescaled".into());
        }
    }
    let uncertainties = (0..n).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    Ok(LsqOutcome {
        x,
        uncertainties,
        covariance: cov,
        cost,
        dof,
        iterations,
        evaluations: prob.evaluations,
        converged,
        warnings,
        cost_history: history,
    })
}
