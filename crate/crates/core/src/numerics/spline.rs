//! Shape-preserving piecewise-cubic Hermite interpolation (PCHIP), plus a
//! log-log wrapper for positive power-law-like tables.

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::validation("spline", "x and y lengths differ"));
        }
        if x.len() < 2 {
            return Err(Error::validation("spline", "need at least two knots"));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::validation("spline", "knots must be finite"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("spline", "knot abscissae must be strictly increasing"));
        }
        let slopes = pchip_slopes(&x, &y);
        Ok(MonotoneCubic { x, y, slopes })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }

    /// Evaluates the interpolant; outside the knot range it continues along
    /// the end tangent.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0] + self.slopes[0] * (t - self.x[0]);
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1] + self.slopes[n - 1] * (t - self.x[n - 1]);
        }
        let k = self.x.partition_point(|&xi| xi <= t) - 1;
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.slopes[k] + h01 * self.y[k + 1] + h11 * h * self.slopes[k + 1]
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            // weighted harmonic mean (Fritsch-Butland)
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// PCHIP through (ln x, ln y); power laws are reproduced exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct LogLogSpline {
    inner: MonotoneCubic,
}

impl LogLogSpline {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.iter().chain(y).any(|&v| !(v > 0.0)) {
            return Err(Error::validation("spline", "log-log knots must be strictly positive"));
        }
        let lx = x.iter().map(|v| v.ln()).collect();
        let ly = y.iter().map(|v| v.ln()).collect();
        Ok(LogLogSpline { inner: MonotoneCubic::new(lx, ly)? })
    }

    /// Builds the spline directly from log-space knot values.
    pub fn from_log_knots(ln_x: Vec<f64>, ln_y: Vec<f64>) -> Result<Self> {
        Ok(LogLogSpline { inner: MonotoneCubic::new(ln_x, ln_y)? })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            // power-law continuation towards the origin
            let (_, ly) = self.inner.knots();
            return if self.inner.slopes[0] > 0.0 { 0.0 } else { ly[0].exp() };
        }
        self.inner.eval(x.ln()).exp()
    }

    pub fn knots(&self) -> Vec<(f64, f64)> {
        let (lx, ly) = self.inner.knots();
        lx.iter().zip(ly).map(|(a, b)| (a.exp(), b.exp())).collect()
    }
}
