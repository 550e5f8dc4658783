use num_complex::Complex64;

use super::{DeviceParams, ProbeState};
use crate::constants::{PLANCK, TWO_PI};
use crate::{Error, Result};

/// Cavity susceptibility |χ(δ)|² up to a constant: 1/(δ² + (κ/2)²).
fn sideband_filter(dev: &DeviceParams, offset: f64) -> f64 {
    let half = 0.5 * dev.kappa;
    1.0 / (offset * offset + half * half)
}

/// Optomechanical damping rate (Hz) from the two-sideband expression
/// γ_OM(Δ) = g₀² n_c κ [L(Δ − ω_m) − L(Δ + ω_m)], L(δ) = 1/(δ² + (κ/2)²).
///
/// Positive for red detuning (cooling), negative for blue, odd in Δ.
pub fn gamma_om(dev: &DeviceParams, probe: &ProbeState) -> f64 {
    let d = probe.detuning;
    dev.g0
        * dev.g0
        * probe.n_c
        * dev.kappa
        * (sideband_filter(dev, d - dev.omega_m) - sideband_filter(dev, d + dev.omega_m))
}

/// Rate of photons scattered into one motional sideband per phonon, for the
/// anti-Stokes (`upper = true`, ω_s + ω_m) or Stokes sideband.
pub(crate) fn sideband_scattering_rate(dev: &DeviceParams, probe: &ProbeState, upper: bool) -> f64 {
    let offset = if upper { probe.detuning - dev.omega_m } else { probe.detuning + dev.omega_m };
    dev.g0 * dev.g0 * probe.n_c * dev.kappa * sideband_filter(dev, offset)
}

/// C = γ_OM(Δ = ω_m, n_c) / γ_i.
pub fn cooperativity(dev: &DeviceParams, n_c: f64, gamma_i: f64) -> Result<f64> {
    if !(gamma_i > 0.0) {
        return Err(Error::domain("cooperativity", format!("gamma_i must be > 0, got {gamma_i}")));
    }
    Ok(gamma_om(dev, &ProbeState::red(dev, n_c)) / gamma_i)
}

/// Photon number at which blue-detuned (Δ = −ω_m) anti-damping cancels the
/// intrinsic damping `gamma_i`.
pub fn self_oscillation_threshold(dev: &DeviceParams, gamma_i: f64) -> f64 {
    gamma_i / gamma_om(dev, &ProbeState::red(dev, 1.0))
}

/// Normalised single-port reflection |1 − κ_e/(iΔ + κ/2)|².
pub fn cavity_reflection(dev: &DeviceParams, detuning: f64) -> f64 {
    let r = Complex64::new(1.0, 0.0) - dev.kappa_e / Complex64::new(0.5 * dev.kappa, detuning);
    r.norm_sqr()
}

/// Intracavity photon number for input power `p_in` (W) at detuning Δ:
/// n_c = κ_e P / (2π h f_o ((κ/2)² + Δ²)).
pub fn intracavity_photons(dev: &DeviceParams, detuning: f64, p_in: f64) -> f64 {
    let photon_energy = PLANCK * dev.optical_frequency();
    dev.kappa_e * p_in * sideband_filter(dev, detuning) / (TWO_PI * photon_energy)
}

/// Input power (W) that yields `n_c` photons at detuning Δ.
pub fn input_power_for_photons(dev: &DeviceParams, detuning: f64, n_c: f64) -> f64 {
    let photon_energy = PLANCK * dev.optical_frequency();
    n_c * TWO_PI * photon_energy / (dev.kappa_e * sideband_filter(dev, detuning))
}
