use serde::{Deserialize, Serialize};

use super::FitResult;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub amplitude: f64,
    pub exponent: f64,
    pub amplitude_err: f64,
    pub exponent_err: f64,
    /// Covariance of (ln amplitude, exponent).
    pub log_covariance: [[f64; 2]; 2],
}

impl PowerLawFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * x.powf(self.exponent)
    }

    pub fn to_fit_result(&self, residual_norm: f64) -> FitResult {
        let mut r = FitResult { residual_norm, converged: true, iterations: 1, ..Default::default() };
        r.insert("amplitude", self.amplitude, self.amplitude_err);
        r.insert("exponent", self.exponent, self.exponent_err);
        r
    }
}

/// Fits y = A·x^b by weighted linear regression of ln y on ln x.
///
/// With `errors` the weights are (y/σ_y)² and the covariance is taken as
/// absolute; without them unit weights are used and the covariance is scaled
/// by the residual variance.
pub fn fit_power_law(x: &[f64], y: &[f64], errors: Option<&[f64]>) -> Result<PowerLawFit> {
    if x.len() != y.len() || errors.is_some_and(|e| e.len() != x.len()) {
        return Err(Error::validation("power_law", "x, y and errors must have equal length"));
    }
    if let Some(i) = x.iter().zip(y).position(|(a, b)| !(*a > 0.0 && *b > 0.0)) {
        return Err(Error::domain("fit_power_law", format!("non-positive data at index {i}")));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let w: Vec<f64> = match errors {
        Some(e) => {
            if let Some(i) = e.iter().position(|v| !(*v > 0.0)) {
                return Err(Error::domain("fit_power_law", format!("error at index {i} must be > 0")));
            }
            y.iter().zip(e).map(|(yi, ei)| (yi / ei).powi(2)).collect()
        }
        None => vec![1.0; x.len()],
    };
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(&lx).map(|(w, v)| w * v).sum::<f64>() / sw;
    let my = w.iter().zip(&ly).map(|(w, v)| w * v).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&lx).map(|(w, v)| w * (v - mx).powi(2)).sum();
    if !(sxx > 0.0) || x.len() < 2 {
        return Err(Error::domain("fit_power_law", "need at least two distinct x values"));
    }
    let sxy: f64 = w.iter().zip(lx.iter().zip(&ly)).map(|(w, (a, b))| w * (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let ln_a = my - b * mx;
    let chi2: f64 = w.iter().zip(lx.iter().zip(&ly)).map(|(w, (a, c))| w * (c - ln_a - b * a).powi(2)).sum();
    let scale = match errors {
        Some(_) => 1.0,
        None if x.len() > 2 => chi2 / (x.len() - 2) as f64,
        None => 0.0,
    };
    let var_b = scale / sxx;
    let var_ln_a = scale * (1.0 / sw + mx * mx / sxx);
    let cov = -scale * mx / sxx;
    let amplitude = ln_a.exp();
    Ok(PowerLawFit {
        amplitude,
        exponent: b,
        amplitude_err: amplitude * var_ln_a.sqrt(),
        exponent_err: var_b.sqrt(),
        log_covariance: [[var_ln_a, cov], [cov, var_b]],
    })
}
