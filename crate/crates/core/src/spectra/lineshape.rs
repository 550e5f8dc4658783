use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::numerics::faddeeva::voigt_kernel;
use crate::{Error, Result};

/// Converts a Gaussian FWHM to its standard deviation.
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * LN_2).sqrt())
}

/// Lorentzian PSD over ordinary frequency with area `n` and FWHM `gamma`:
/// n·(γ/2π)/((f − f₀)² + (γ/2)²). The peak is 4n/(2πγ).
pub fn lorentzian_psd(n: f64, gamma: f64, center: f64, f: f64) -> f64 {
    let d = f - center;
    let h = 0.5 * gamma;
    n * gamma / (2.0 * PI) / (d * d + h * h)
}

/// Unit-area Gaussian with FWHM `gamma_g`, evaluated at offset `x`.
pub fn gaussian_profile(x: f64, gamma_g: f64) -> f64 {
    let s = fwhm_to_sigma(gamma_g);
    (-0.5 * (x / s).powi(2)).exp() / (s * (2.0 * PI).sqrt())
}

/// Unit-area Voigt profile: a Lorentzian of FWHM `gamma_l` convolved with a
/// Gaussian of FWHM `gamma_g`, evaluated at offset `x` from the centre.
pub fn voigt_profile(x: f64, gamma_l: f64, gamma_g: f64) -> f64 {
    if gamma_g == 0.0 {
        return lorentzian_psd(1.0, gamma_l, 0.0, x);
    }
    let s = fwhm_to_sigma(gamma_g);
    let scale = s * std::f64::consts::SQRT_2;
    voigt_kernel(x / scale, 0.5 * gamma_l / scale) / (s * (2.0 * PI).sqrt())
}

/// Empirical Voigt FWHM, 0.5346γ_L + √(0.2166γ_L² + γ_G²), good to ~2e-4.
pub fn voigt_fwhm(gamma_l: f64, gamma_g: f64) -> f64 {
    0.5346 * gamma_l + (0.2166 * gamma_l * gamma_l + gamma_g * gamma_g).sqrt()
}

/// Peak shape parameters. `area` is in the same units as the PSD times Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineshapeParams {
    pub center: f64,
    pub gamma_l: f64,
    pub gamma_g: f64,
    pub area: f64,
    #[serde(default)]
    pub floor: f64,
}

impl LineshapeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_l >= 0.0 && self.gamma_g >= 0.0 && self.gamma_l + self.gamma_g > 0.0) {
            return Err(Error::validation("gamma", "widths must be >= 0 with a positive sum"));
        }
        if !(self.area >= 0.0) {
            return Err(Error::validation("area", format!("must be >= 0, got {}", self.area)));
        }
        if !self.center.is_finite() || !self.floor.is_finite() {
            return Err(Error::validation("center", "centre and floor must be finite"));
        }
        Ok(())
    }

    pub fn fwhm(&self) -> f64 {
        voigt_fwhm(self.gamma_l, self.gamma_g)
    }
}

/// floor + area · Voigt(f − centre).
pub fn voigt_psd(p: &LineshapeParams, f: f64) -> f64 {
    p.floor + p.area * voigt_profile(f - p.center, p.gamma_l, p.gamma_g)
}
