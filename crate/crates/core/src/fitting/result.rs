use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::lsq::LsqOutcome;
use crate::{Error, Result};

/// Outcome of a fit: named parameters with 1σ uncertainties from the local
/// quadratic model at the optimum.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: IndexMap<String, f64>,
    pub uncertainties: IndexMap<String, f64>,
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn from_outcome(names: &[&str], out: &LsqOutcome) -> Self {
        let mut r = FitResult {
            residual_norm: out.residual_norm(),
            converged: out.converged,
            iterations: out.iterations,
            warnings: out.warnings.clone(),
            ..Default::default()
        };
        for (i, name) in names.iter().enumerate() {
            r.parameters.insert(name.to_string(), out.x[i]);
            r.uncertainties.insert(name.to_string(), out.uncertainties[i]);
        }
        r
    }

    pub fn insert(&mut self, name: &str, value: f64, sigma: f64) {
        self.parameters.insert(name.to_string(), value);
        self.uncertainties.insert(name.to_string(), sigma);
    }

    /// Value of a named parameter. Panics on unknown names, which are
    /// programming errors.
    pub fn value(&self, name: &str) -> f64 {
        self.parameters[name]
    }

    pub fn sigma(&self, name: &str) -> f64 {
        self.uncertainties[name]
    }
}

/// One point of a measured cooling (or heating) curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoolingCurvePoint {
    pub n_c: f64,
    pub occupancy: f64,
    pub occupancy_err: f64,
    /// Lorentzian linewidth γ_L (Hz).
    pub linewidth: f64,
    pub linewidth_err: f64,
    /// +1 for Δ = +ω_m, −1 for Δ = −ω_m, 0 on resonance.
    pub detuning_sign: i8,
    pub t_f: f64,
}

impl CoolingCurvePoint {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_c > 0.0) {
            return Err(Error::validation("n_c", format!("must be > 0, got {}", self.n_c)));
        }
        if !(self.occupancy_err >= 0.0 && self.linewidth_err >= 0.0) {
            return Err(Error::validation("err", "errors must be >= 0"));
        }
        if !matches!(self.detuning_sign, -1..=1) {
            return Err(Error::validation("detuning_sign", "must be -1, 0 or +1"));
        }
        if !(self.t_f >= 0.0) {
            return Err(Error::validation("t_f", "must be >= 0"));
        }
        Ok(())
    }
}
