//! Fits across a detuning sweep: the joint Voigt fit with the cooperativity
//! held fixed, and the detected-area-versus-detuning cooling model.

use serde::{Deserialize, Serialize};

use super::lineshape::{fit_voigt, VoigtConstraint};
use super::lsq::{least_squares, LsqOptions, LsqOutcome};
use super::FitResult;
use crate::parallel::{self, Execution};
use crate::physics::{gamma_om, DeviceParams, ProbeState};
use crate::spectra::{transduction_rate, voigt_profile, Spectrum};
use crate::{Error, Result};

/// γ_OM(Δ, n_c)/γ_OM(ω_m, n_ref): the back-action at detuning Δ relative to
/// the red sideband at the reference photon number.
pub fn backaction_ratio(dev: &DeviceParams, detuning: f64, n_c: f64, n_ref: f64) -> f64 {
    gamma_om(dev, &ProbeState::new(detuning, n_c)) / gamma_om(dev, &ProbeState::red(dev, n_ref))
}

/// Detected-sideband transduction at Δ relative to Δ = ω_m (equal n_c).
pub fn transduction_envelope(dev: &DeviceParams, detuning: f64) -> f64 {
    transduction_rate(dev, &ProbeState::new(detuning, 1.0)) / transduction_rate(dev, &ProbeState::red(dev, 1.0))
}

/// Joint fit of a detuning series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetuningSeriesFit {
    pub gamma_i: f64,
    pub gamma_g: f64,
    pub g0: f64,
    pub detunings: Vec<f64>,
    /// Fitted peak areas and their 1σ errors, in the spectra's units × Hz.
    pub areas: Vec<f64>,
    pub area_errors: Vec<f64>,
    pub result: FitResult,
}

fn metadata(spec: &Spectrum, i: usize) -> Result<(f64, f64)> {
    let m = spec.metadata();
    match (m.detuning_hz, m.n_c) {
        (Some(d), Some(n)) if n > 0.0 => Ok((d, n)),
        _ => Err(Error::validation(format!("spectra[{i}].metadata"), "detuning_hz and a positive n_c are required")),
    }
}

/// Fits a detuning series with shared γ_i and γ_G and the cooperativity held
/// at `c`: γ_L(Δ) = γ_i (1 + C·γ_OM(Δ)/γ_OM(ω_m)). Centre, area and floor are
/// free per spectrum. C refers to the mean photon number of the series, and
/// g₀ follows from C, γ_i and that photon number.
pub fn fit_voigt_detuning_series(spectra: &[Spectrum], dev: &DeviceParams, c: f64) -> Result<DetuningSeriesFit> {
    if spectra.len() < 2 {
        return Err(Error::InsufficientData("detuning series needs at least two spectra".into()));
    }
    dev.validate()?;
    let meta: Vec<(f64, f64)> = spectra.iter().enumerate().map(|(i, s)| metadata(s, i)).collect::<Result<_>>()?;
    let n_ref = meta.iter().map(|m| m.1).sum::<f64>() / meta.len() as f64;
    let unit_dev = dev.with_g0(1.0);
    let ratios: Vec<f64> = meta.iter().map(|&(d, n)| backaction_ratio(&unit_dev, d, n, n_ref)).collect();

    // Independent constrained fits provide starting values.
    let singles: Vec<_> = parallel::map_range(Execution::Parallel, spectra.len(), |k| {
        fit_voigt(&spectra[k], VoigtConstraint::Cooperativity { c, ratio: ratios[k] })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut gi: Vec<f64> = singles.iter().map(|f| f.result.value("gamma_i")).collect();
    let mut gg: Vec<f64> = singles.iter().map(|f| f.params.gamma_g).collect();
    gi.sort_by(f64::total_cmp);
    gg.sort_by(f64::total_cmp);
    let mut init = vec![gi[gi.len() / 2], gg[gg.len() / 2]];
    for f in &singles {
        init.extend([f.params.center, f.params.area, f.params.floor]);
    }
    let width_scale = init[0].max(init[1]);
    let mut scales = vec![width_scale, width_scale];
    let mut lower = vec![0.0, 0.0];
    let mut upper = vec![f64::INFINITY, f64::INFINITY];
    for (s, f) in spectra.iter().zip(&singles) {
        scales.extend([width_scale, f.params.area.max(1e-300), f.params.floor.abs().max(1e-300)]);
        lower.extend([s.f_start(), 0.0, f64::NEG_INFINITY]);
        upper.extend([s.f_start() + s.f_step() * s.len() as f64, f64::INFINITY, f64::INFINITY]);
    }

    let grids: Vec<Vec<f64>> = spectra.iter().map(|s| s.frequencies()).collect();
    let model_all = |p: &[f64]| -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for (k, grid) in grids.iter().enumerate() {
            let gl = p[0] * (1.0 + c * ratios[k]);
            if !(gl >= 0.0) {
                return Err(Error::domain("fit_voigt_detuning_series", "negative Lorentzian width"));
            }
            let (x0, area, floor) = (p[2 + 3 * k], p[3 + 3 * k], p[4 + 3 * k]);
            out.extend(grid.iter().map(|f| floor + area * voigt_profile(f - x0, gl, p[1])));
        }
        Ok(out)
    };
    let data: Vec<f64> = spectra.iter().flat_map(|s| s.values().iter().copied()).collect();
    let resid = |p: &[f64]| Ok(model_all(p)?.iter().zip(&data).map(|(m, y)| m - y).collect::<Vec<f64>>());
    let base = LsqOptions { lower: Some(lower), upper: Some(upper), scales: Some(scales), ..Default::default() };
    let mut x = init;
    let mut out: Option<LsqOutcome> = None;
    // Two reweighting passes with multiplicative noise weights.
    for _ in 0..2 {
        let weights = model_all(&x)?.iter().map(|m| if *m != 0.0 { 1.0 / (m * m) } else { 0.0 }).collect();
        let o = least_squares(resid, &x, &LsqOptions { weights: Some(weights), ..base.clone() })?;
        x = o.x.clone();
        out = Some(o);
    }
    let out = out.expect("ran at least once");

    let mut names: Vec<String> = vec!["gamma_i".into(), "gamma_g".into()];
    for k in 0..spectra.len() {
        names.extend([format!("center_{k}"), format!("area_{k}"), format!("floor_{k}")]);
    }
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut result = FitResult::from_outcome(&name_refs, &out);
    let gamma_i = out.x[0];
    let om_per_g0sq = gamma_om(&unit_dev, &ProbeState::red(dev, n_ref));
    let g0 = (c * gamma_i / om_per_g0sq).sqrt();
    let g0_err = 0.5 * g0 * out.uncertainties[0] / gamma_i;
    result.insert("g0", g0, g0_err);
    Ok(DetuningSeriesFit {
        gamma_i,
        gamma_g: out.x[1],
        g0,
        detunings: meta.iter().map(|m| m.0).collect(),
        areas: (0..spectra.len()).map(|k| out.x[3 + 3 * k]).collect(),
        area_errors: (0..spectra.len()).map(|k| out.uncertainties[3 + 3 * k]).collect(),
        result,
    })
}

/// Result of [`fit_area_vs_detuning`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaDetuningFit {
    pub cooperativity: f64,
    pub cooperativity_err: f64,
    /// Fit with free cooperativity.
    pub result: FitResult,
    /// Same model with C = 0 (no back-action cooling).
    pub null: FitResult,
}

impl AreaDetuningFit {
    /// Evaluates the fitted and the C = 0 area models at `detunings`.
    pub fn predict(&self, dev: &DeviceParams, detunings: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let unit_dev = dev.with_g0(1.0);
        let blue: Vec<bool> = detunings.iter().map(|d| *d < 0.0).collect();
        let m = AreaModel {
            envelope: detunings.iter().map(|&d| transduction_envelope(dev, d)).collect(),
            ratio: detunings.iter().map(|&d| backaction_ratio(&unit_dev, d, 1.0, 1.0)).collect(),
            any_blue: self.result.parameters.contains_key("scale"),
            blue,
        };
        let params = |r: &FitResult| -> Vec<f64> {
            r.parameters.iter().filter(|(k, _)| k.as_str() != "cooperativity").map(|(_, v)| *v).collect()
        };
        Ok((m.eval(&params(&self.result), self.cooperativity)?, m.eval(&params(&self.null), 0.0)?))
    }
}

struct AreaModel {
    envelope: Vec<f64>,
    ratio: Vec<f64>,
    blue: Vec<bool>,
    any_blue: bool,
}

impl AreaModel {
    /// Parameters: (A₀, C) when every point is red or resonant, else
    /// (s, n₀, C) with the vacuum term on blue points.
    fn eval(&self, p: &[f64], c: f64) -> Result<Vec<f64>> {
        (0..self.envelope.len())
            .map(|i| {
                let cool = 1.0 + c * self.ratio[i];
                if !(cool > 0.0) {
                    return Err(Error::Instability { total_damping_hz: cool });
                }
                Ok(if self.any_blue {
                    p[0] * self.envelope[i] * (p[1] / cool + if self.blue[i] { 1.0 } else { 0.0 })
                } else {
                    p[0] * self.envelope[i] / cool
                })
            })
            .collect()
    }
}

/// Fits detected sideband areas across detuning to
/// area(Δ) ∝ T(Δ)·⟨n⟩₀/(1 + C·γ_OM(Δ)/γ_OM(ω_m)), where T is the sideband
/// transduction envelope, and also fits the C = 0 null model.
pub fn fit_area_vs_detuning(
    detunings: &[f64],
    areas: &[f64],
    errors: Option<&[f64]>,
    dev: &DeviceParams,
) -> Result<AreaDetuningFit> {
    if detunings.len() != areas.len() || errors.is_some_and(|e| e.len() != areas.len()) {
        return Err(Error::validation("areas", "detunings, areas and errors must have equal length"));
    }
    if areas.len() < 3 {
        return Err(Error::InsufficientData("area-vs-detuning fit needs at least three points".into()));
    }
    let unit_dev = dev.with_g0(1.0);
    let blue: Vec<bool> = detunings.iter().map(|d| *d < 0.0).collect();
    let m = AreaModel {
        envelope: detunings.iter().map(|&d| transduction_envelope(dev, d)).collect(),
        ratio: detunings.iter().map(|&d| backaction_ratio(&unit_dev, d, 1.0, 1.0)).collect(),
        any_blue: blue.iter().any(|b| *b),
        blue,
    };
    let weights: Option<Vec<f64>> = match errors {
        Some(e) if e.iter().all(|v| *v > 0.0) => Some(e.iter().map(|v| 1.0 / (v * v)).collect()),
        Some(_) => return Err(Error::validation("errors", "area errors must be > 0")),
        None => None,
    };
    let w = |i: usize| weights.as_ref().map_or(1.0, |w| w[i]);
    let amplitude_for = |shape: &[f64]| -> f64 {
        let num: f64 = (0..areas.len()).map(|i| w(i) * shape[i] * areas[i]).sum();
        let den: f64 = (0..areas.len()).map(|i| w(i) * shape[i] * shape[i]).sum();
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    };
    let chi2 = |pred: &[f64]| (0..areas.len()).map(|i| w(i) * (pred[i] - areas[i]).powi(2)).sum::<f64>();

    // Grid start over C (and n₀ with blue points); amplitude in closed form.
    let mut best: Option<(f64, Vec<f64>)> = None;
    let n0_grid: &[f64] = if m.any_blue { &[0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0] } else { &[1.0] };
    for &c in &[0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
        for &n0 in n0_grid {
            let proto = if m.any_blue { vec![1.0, n0] } else { vec![1.0] };
            let Ok(shape) = m.eval(&proto, c) else { continue };
            let a = amplitude_for(&shape);
            let mut p = proto;
            p[0] = a;
            p.push(c);
            let pred: Vec<f64> = shape.iter().map(|s| s * a).collect();
            let cost = chi2(&pred);
            if best.as_ref().is_none_or(|b| cost < b.0) {
                best = Some((cost, p));
            }
        }
    }
    let (_, init) = best.ok_or_else(|| Error::InsufficientData("no stable starting point".into()))?;
    let k = init.len();
    let resid = |p: &[f64]| Ok(m.eval(p, p[k - 1])?.iter().zip(areas).map(|(a, b)| a - b).collect::<Vec<f64>>());
    let mut lower = vec![0.0; k];
    lower[k - 1] = 0.0;
    let scales: Vec<f64> = init.iter().map(|v| v.abs().max(1e-3)).map(|v| v.max(f64::MIN_POSITIVE)).collect();
    let absolute = weights.is_some();
    let opts = LsqOptions {
        lower: Some(lower.clone()),
        weights: weights.clone(),
        absolute_weights: absolute,
        scales: Some(scales.clone()),
        ..Default::default()
    };
    let out = least_squares(resid, &init, &opts)?;
    let names: &[&str] = if m.any_blue { &["scale", "n0", "cooperativity"] } else { &["amplitude", "cooperativity"] };
    let result = FitResult::from_outcome(names, &out);

    let null_resid = |p: &[f64]| Ok(m.eval(p, 0.0)?.iter().zip(areas).map(|(a, b)| a - b).collect::<Vec<f64>>());
    let null_opts = LsqOptions {
        lower: Some(lower[..k - 1].to_vec()),
        scales: Some(scales[..k - 1].to_vec()),
        weights,
        absolute_weights: absolute,
        ..Default::default()
    };
    let null_out = least_squares(null_resid, &init[..k - 1], &null_opts)?;
    let null = FitResult::from_outcome(&names[..k - 1], &null_out);
    Ok(AreaDetuningFit { cooperativity: out.x[k - 1], cooperativity_err: out.uncertainties[k - 1], result, null })
}
