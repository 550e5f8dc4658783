use serde::{Deserialize, Serialize};

use super::{CoolingCurvePoint, FitResult};
use crate::physics::{bose_einstein, gamma_om, DeviceParams, ProbeState};
use crate::{Error, Result};

/// Weighted slope through the origin with its 1σ error. Unit weights are
/// rescaled by the residual variance.
fn slope_through_origin(x: &[f64], y: &[f64], sigma: &[f64]) -> (f64, f64, f64) {
    let absolute = sigma.iter().all(|s| *s > 0.0);
    let w: Vec<f64> = if absolute { sigma.iter().map(|s| 1.0 / (s * s)).collect() } else { vec![1.0; x.len()] };
    let sxx: f64 = (0..x.len()).map(|i| w[i] * x[i] * x[i]).sum();
    let sxy: f64 = (0..x.len()).map(|i| w[i] * x[i] * y[i]).sum();
    let slope = sxy / sxx;
    let chi2: f64 = (0..x.len()).map(|i| w[i] * (y[i] - slope * x[i]).powi(2)).sum();
    let var = if absolute {
        1.0 / sxx
    } else if x.len() > 1 {
        chi2 / (x.len() - 1) as f64 / sxx
    } else {
        0.0
    };
    (slope, var.sqrt(), chi2.sqrt())
}

/// g₀ from a red/blue linewidth sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct G0Fit {
    pub g0: f64,
    pub g0_err: f64,
    /// γ_OM per photon at Δ = ω_m (Hz).
    pub slope: f64,
    pub slope_err: f64,
    /// Estimate from the calibrated red-detuned occupancy,
    /// C = n_f/⟨n⟩_r − 1, when occupancies and T_f are available.
    pub g0_from_cooperativity: Option<f64>,
    pub g0_from_cooperativity_err: Option<f64>,
    pub result: FitResult,
}

/// Pairs red and blue points taken at the same photon number (1 ppm).
fn pairs(points: &[CoolingCurvePoint]) -> Vec<(CoolingCurvePoint, CoolingCurvePoint)> {
    let mut out = Vec::new();
    for r in points.iter().filter(|p| p.detuning_sign > 0) {
        if let Some(b) =
            points.iter().find(|b| b.detuning_sign < 0 && ((b.n_c - r.n_c) / r.n_c).abs() < 1e-6 && b.t_f == r.t_f)
        {
            out.push((*r, *b));
        }
    }
    out
}

/// Fits γ_OM = (γ_red − γ_blue)/2 against n_c with a line through the origin
/// and converts the slope to g₀ using the sideband-resolved back-action of
/// `dev` (whose own g₀ is ignored).
pub fn fit_g0_from_linewidths(points: &[CoolingCurvePoint], dev: &DeviceParams) -> Result<G0Fit> {
    for p in points {
        p.validate()?;
    }
    let pr = pairs(points);
    let mut distinct: Vec<f64> = pr.iter().map(|(r, _)| r.n_c).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| ((*a - *b) / *b).abs() < 1e-6);
    if distinct.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need red/blue pairs at two or more photon numbers, found {}",
            distinct.len()
        )));
    }
    let per_photon = gamma_om(&dev.with_g0(1.0), &ProbeState::red(dev, 1.0));
    let x: Vec<f64> = pr.iter().map(|(r, _)| r.n_c).collect();
    let y: Vec<f64> = pr.iter().map(|(r, b)| 0.5 * (r.linewidth - b.linewidth)).collect();
    let s: Vec<f64> = pr.iter().map(|(r, b)| 0.5 * r.linewidth_err.hypot(b.linewidth_err)).collect();
    let (slope, slope_err, rnorm) = slope_through_origin(&x, &y, &s);
    if !(slope > 0.0) {
        return Err(Error::Degenerate { op: "fit_g0_from_linewidths", msg: format!("non-positive slope {slope}") });
    }
    let g0 = (slope / per_photon).sqrt();
    let g0_err = 0.5 * g0 * slope_err / slope;

    // C_k = n_f/⟨n⟩_r − 1 and γ_i = (γ_r + γ_b)/2 give γ_OM = C·γ_i.
    let mut alt = None;
    let usable: Vec<_> = pr.iter().filter(|(r, _)| r.occupancy > 0.0).collect();
    if usable.len() >= 2 {
        let mut ax = Vec::new();
        let mut ay = Vec::new();
        let mut asig = Vec::new();
        for (r, b) in &usable {
            let n_f = bose_einstein(dev.omega_m, r.t_f)?;
            let c = n_f / r.occupancy - 1.0;
            let gi = 0.5 * (r.linewidth + b.linewidth);
            let c_err = n_f * r.occupancy_err / (r.occupancy * r.occupancy);
            let gi_err = 0.5 * r.linewidth_err.hypot(b.linewidth_err);
            ax.push(r.n_c);
            ay.push(c * gi);
            asig.push((c_err * gi).hypot(c * gi_err));
        }
        let (s2, s2_err, _) = slope_through_origin(&ax, &ay, &asig);
        if s2 > 0.0 {
            let g = (s2 / per_photon).sqrt();
            alt = Some((g, 0.5 * g * s2_err / s2));
        }
    }

    let mut result = FitResult { residual_norm: rnorm, converged: true, iterations: 1, ..Default::default() };
    result.insert("g0", g0, g0_err);
    result.insert("gamma_om_per_photon", slope, slope_err);
    if let Some((g, e)) = alt {
        result.insert("g0_from_cooperativity", g, e);
    }
    Ok(G0Fit {
        g0,
        g0_err,
        slope,
        slope_err,
        g0_from_cooperativity: alt.map(|a| a.0),
        g0_from_cooperativity_err: alt.map(|a| a.1),
        result,
    })
}
