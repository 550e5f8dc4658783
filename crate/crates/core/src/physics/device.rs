use serde::{Deserialize, Serialize};

use crate::constants::SPEED_OF_LIGHT;
use crate::{Error, Result};

/// Optical and mechanical resonator constants. Rates are ordinary
/// frequencies in Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Vacuum optomechanical coupling.
    pub g0: f64,
    /// Total optical energy decay rate.
    pub kappa: f64,
    /// External (waveguide) coupling rate.
    pub kappa_e: f64,
    /// Intrinsic optical loss rate.
    pub kappa_i: f64,
    /// Mechanical resonance frequency.
    pub omega_m: f64,
    /// Optical resonance wavelength in metres.
    pub lambda_c: f64,
}

impl DeviceParams {
    /// The silicon nanobeam device characterised in the reference measurement:
    /// g₀ = 735 kHz, κ = 529 MHz (κ_e = 153 MHz, κ_i = 376 MHz),
    /// ω_m = 3.6 GHz, λ_c = 1545 nm.
    pub fn reference_device() -> Self {
        DeviceParams { g0: 735e3, kappa: 529e6, kappa_e: 153e6, kappa_i: 376e6, omega_m: 3.6e9, lambda_c: 1545e-9 }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("g0", self.g0),
            ("kappa", self.kappa),
            ("kappa_e", self.kappa_e),
            ("kappa_i", self.kappa_i),
            ("omega_m", self.omega_m),
            ("lambda_c", self.lambda_c),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(
                    format!("device.{name}"),
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        let sum = self.kappa_e + self.kappa_i;
        if ((sum - self.kappa) / self.kappa).abs() > 1e-6 {
            return Err(Error::validation(
                "device.kappa",
                format!("kappa ({}) must equal kappa_e + kappa_i ({sum}) to 1 ppm", self.kappa),
            ));
        }
        Ok(())
    }

    pub fn sideband_resolved(&self) -> bool {
        self.omega_m > self.kappa
    }

    /// Optical carrier frequency c/λ_c in Hz.
    pub fn optical_frequency(&self) -> f64 {
        SPEED_OF_LIGHT / self.lambda_c
    }

    pub fn with_g0(mut self, g0: f64) -> Self {
        self.g0 = g0;
        self
    }
}

/// Probe laser state: detuning Δ = ω_c − ω_s (Hz, positive is red) and the
/// intracavity photon number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeState {
    pub detuning: f64,
    pub n_c: f64,
}

impl ProbeState {
    pub fn new(detuning: f64, n_c: f64) -> Self {
        ProbeState { detuning, n_c }
    }

    pub fn red(dev: &DeviceParams, n_c: f64) -> Self {
        ProbeState { detuning: dev.omega_m, n_c }
    }

    pub fn blue(dev: &DeviceParams, n_c: f64) -> Self {
        ProbeState { detuning: -dev.omega_m, n_c }
    }

    pub fn resonant(n_c: f64) -> Self {
        ProbeState { detuning: 0.0, n_c }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_c >= 0.0 && self.n_c.is_finite()) {
            return Err(Error::validation("probe.n_c", format!("must be >= 0, got {}", self.n_c)));
        }
        if !self.detuning.is_finite() {
            return Err(Error::validation("probe.detuning", "must be finite"));
        }
        Ok(())
    }
}
