use serde::{Deserialize, Serialize};

use super::optomech::gamma_om;
use super::{bose_einstein, inverse_bose_einstein, DeviceParams, ProbeState};
use crate::numerics::spline::LogLogSpline;
use crate::{Error, Result};

/// Coupling rate γ_p of the absorption-generated phonon bath as a function
/// of its temperature T_p.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaPLaw {
    /// γ_p = amplitude · T_p · exp(−T_c / T_p); amplitude in Hz/K.
    Activated { amplitude: f64, t_c: f64 },
    /// Monotone cubic through (ln T_p, ln γ_p) knots.
    Tabulated { t_p: Vec<f64>, gamma_p: Vec<f64> },
    /// Temperature-independent rate.
    Constant { gamma_p: f64 },
}

impl GammaPLaw {
    pub fn eval(&self, t_p: f64) -> Result<f64> {
        match self {
            GammaPLaw::Activated { amplitude, t_c } => {
                if t_p <= 0.0 {
                    Ok(0.0)
                } else {
                    Ok(amplitude * t_p * (-t_c / t_p).exp())
                }
            }
            GammaPLaw::Tabulated { t_p: knots_t, gamma_p } => Ok(LogLogSpline::new(knots_t, gamma_p)?.eval(t_p)),
            GammaPLaw::Constant { gamma_p } => Ok(*gamma_p),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GammaPLaw::Activated { amplitude, t_c } => {
                if !(*amplitude >= 0.0) || !(*t_c >= 0.0) {
                    return Err(Error::validation(
                        "bath.gamma_p_law",
                        "activated law needs amplitude >= 0 and t_c >= 0",
                    ));
                }
            }
            GammaPLaw::Tabulated { t_p, gamma_p } => {
                LogLogSpline::new(t_p, gamma_p).map_err(|e| Error::validation("bath.gamma_p_law", e.to_string()))?;
            }
            GammaPLaw::Constant { gamma_p } => {
                if !(*gamma_p >= 0.0) {
                    return Err(Error::validation("bath.gamma_p_law", "constant rate must be >= 0"));
                }
            }
        }
        Ok(())
    }
}

/// Gaussian frequency-jitter FWHM γ_G = amplitude · T^exponent (amplitude is
/// the width in Hz at 1 K).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JitterLaw {
    pub amplitude: f64,
    pub exponent: f64,
}

impl JitterLaw {
    /// Jitter width at temperature `t`; zero for t <= 0.
    pub fn eval(&self, t: f64) -> f64 {
        if t > 0.0 {
            self.amplitude * t.powf(self.exponent)
        } else {
            0.0
        }
    }
}

/// The baths coupled to the mechanical mode: the fridge (rate γ₀ at T_f)
/// and the optical-absorption bath whose occupancy follows
/// n_p = np_amplitude · n_c^np_exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathModel {
    pub gamma_0: f64,
    pub t_f: f64,
    pub np_amplitude: f64,
    pub np_exponent: f64,
    pub gamma_p_law: GammaPLaw,
    #[serde(default)]
    pub jitter_law: Option<JitterLaw>,
}

/// Bath quantities at one photon number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathState {
    pub n_f: f64,
    pub n_p: f64,
    pub t_p: f64,
    pub gamma_0: f64,
    pub gamma_p: f64,
    /// Jitter FWHM evaluated at max(T_p, T_f).
    pub gamma_g: f64,
}

impl BathState {
    pub fn gamma_i(&self) -> f64 {
        self.gamma_0 + self.gamma_p
    }
}

impl BathModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_0 >= 0.0) || !self.gamma_0.is_finite() {
            return Err(Error::validation("bath.gamma_0", format!("must be >= 0, got {}", self.gamma_0)));
        }
        if !(self.t_f >= 0.0) || !self.t_f.is_finite() {
            return Err(Error::validation("bath.t_f", format!("must be >= 0, got {}", self.t_f)));
        }
        if !(self.np_amplitude > 0.0) || !self.np_amplitude.is_finite() {
            return Err(Error::validation("bath.np_amplitude", format!("must be > 0, got {}", self.np_amplitude)));
        }
        if !self.np_exponent.is_finite() {
            return Err(Error::validation("bath.np_exponent", "must be finite"));
        }
        self.gamma_p_law.validate()
    }

    pub fn with_fridge_temperature(&self, t_f: f64) -> Self {
        BathModel { t_f, ..self.clone() }
    }

    /// Absorption-bath occupancy n_p(n_c).
    pub fn n_p(&self, n_c: f64) -> f64 {
        if n_c <= 0.0 {
            0.0
        } else {
            self.np_amplitude * n_c.powf(self.np_exponent)
        }
    }

    pub fn state(&self, dev: &DeviceParams, n_c: f64) -> Result<BathState> {
        let n_f = bose_einstein(dev.omega_m, self.t_f)?;
        let n_p = self.n_p(n_c);
        let t_p = if n_p > 0.0 { inverse_bose_einstein(dev.omega_m, n_p)? } else { 0.0 };
        let gamma_p = self.gamma_p_law.eval(t_p)?;
        let gamma_g = self.jitter_law.map_or(0.0, |j| j.eval(t_p.max(self.t_f)));
        Ok(BathState { n_f, n_p, t_p, gamma_0: self.gamma_0, gamma_p, gamma_g })
    }

    /// Energy-damping (Lorentzian) linewidth γ₀ + γ_p + γ_OM in Hz.
    pub fn linewidth(&self, dev: &DeviceParams, probe: &ProbeState) -> Result<f64> {
        let s = self.state(dev, probe.n_c)?;
        Ok(s.gamma_i() + gamma_om(dev, probe))
    }
}

/// ⟨n⟩ = (γ₀ n_f + γ_p n_p) / (γ₀ + γ_p + γ_OM); refuses when the total
/// damping is not positive.
pub fn occupancy_from_rates(gamma_0: f64, n_f: f64, gamma_p: f64, n_p: f64, gamma_om: f64) -> Result<f64> {
    let total = gamma_0 + gamma_p + gamma_om;
    if !(total > 0.0) {
        return Err(Error::Instability { total_damping_hz: total });
    }
    Ok((gamma_0 * n_f + gamma_p * n_p) / total)
}

/// Steady-state mechanical occupancy for the given probe and baths.
pub fn mode_occupancy(dev: &DeviceParams, probe: &ProbeState, bath: &BathModel) -> Result<f64> {
    let s = bath.state(dev, probe.n_c)?;
    occupancy_from_rates(s.gamma_0, s.n_f, s.gamma_p, s.n_p, gamma_om(dev, probe))
}

/// Sideband asymmetry ξ = (⟨n⟩_b + 1)/⟨n⟩_r − 1 from the occupancies at
/// Δ = −ω_m and Δ = +ω_m with equal transduction gain on both sidebands.
pub fn sideband_asymmetry(dev: &DeviceParams, n_c: f64, bath: &BathModel) -> Result<f64> {
    let n_r = mode_occupancy(dev, &ProbeState::red(dev, n_c), bath)?;
    let n_b = mode_occupancy(dev, &ProbeState::blue(dev, n_c), bath)?;
    if !(n_r > 0.0) {
        return Err(Error::Degenerate { op: "sideband_asymmetry", msg: "red-detuned occupancy is zero".into() });
    }
    Ok((n_b + 1.0) / n_r - 1.0)
}
