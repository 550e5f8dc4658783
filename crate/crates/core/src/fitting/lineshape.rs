use serde::{Deserialize, Serialize};

use super::lsq::{least_squares, LsqOptions, LsqOutcome};
use super::FitResult;
use crate::parallel::{self, Execution};
use crate::spectra::{lorentzian_psd, voigt_profile, LineshapeParams, Spectrum};
use crate::{Error, Result};

/// Reweighting passes (weights 1/model²) after the unweighted fit.
const IRLS_PASSES: usize = 2;
/// A peak must exceed this many floor standard deviations.
const MIN_PEAK_SNR: f64 = 5.0;

/// Fitted lineshape with its uncertainties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineshapeFit {
    pub params: LineshapeParams,
    pub result: FitResult,
}

/// Constraint on the Voigt widths.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VoigtConstraint {
    #[default]
    Free,
    FixedGammaL {
        gamma_l: f64,
    },
    FixedGammaG {
        gamma_g: f64,
    },
    /// γ_L = γ_i (1 + C·ratio), with ratio = γ_OM(Δ)/γ_OM(ω_m); γ_i is fitted.
    Cooperativity {
        c: f64,
        ratio: f64,
    },
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Moment-based starting values.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PeakGuess {
    pub center: f64,
    pub width: f64,
    pub area: f64,
    pub floor: f64,
    pub peak: f64,
}

/// Floor from the median of the outer quartiles, centre at the argmax, width
/// from the second moment of the contiguous region above half maximum.
pub(crate) fn initial_guess(spec: &Spectrum) -> Result<PeakGuess> {
    let v = spec.values();
    let n = v.len();
    let q = n / 4;
    let mut outer: Vec<f64> = v[..q].iter().chain(&v[n - q..]).copied().collect();
    let floor = median(&mut outer);
    let mut dev: Vec<f64> = outer.iter().map(|x| (x - floor).abs()).collect();
    let floor_std = 1.4826 * median(&mut dev);
    let (imax, vmax) = v.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &x)| if x > b.1 { (i, x) } else { b });
    let peak = vmax - floor;
    if !(peak > MIN_PEAK_SNR * floor_std) || peak <= 0.0 {
        return Err(Error::NoPeak { peak, noise: floor_std });
    }
    let half = floor + 0.5 * peak;
    let mut lo = imax;
    while lo > 0 && v[lo - 1] > half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < n && v[hi + 1] > half {
        hi += 1;
    }
    let center = spec.frequency(imax);
    let (mut s0, mut s2) = (0.0, 0.0);
    for (i, y) in v.iter().enumerate().take(hi + 1).skip(lo) {
        let w = y - floor;
        s0 += w;
        s2 += w * (spec.frequency(i) - center).powi(2);
    }
    let sigma = (s2 / s0).sqrt();
    // For a Lorentzian truncated at half maximum, σ² = (γ/2)²(4/π − 1).
    let mut width = 2.0 * sigma / (4.0 / std::f64::consts::PI - 1.0).sqrt();
    if !(width >= spec.f_step()) {
        width = (hi - lo + 1) as f64 * spec.f_step();
    }
    Ok(PeakGuess { center, width, area: peak * std::f64::consts::PI * width / 2.0, floor, peak })
}

/// Runs the unweighted fit followed by inverse-variance reweighting with a
/// multiplicative noise model (σ ∝ model).
fn irls<M>(spec: &Spectrum, model: M, init: Vec<f64>, base: LsqOptions) -> Result<LsqOutcome>
where
    M: Fn(&[f64], f64) -> f64,
{
    let freqs = spec.frequencies();
    let data = spec.values();
    let resid = |p: &[f64]| Ok(freqs.iter().zip(data).map(|(f, y)| model(p, *f) - y).collect::<Vec<f64>>());
    let mut out = least_squares(resid, &init, &base)?;
    for _ in 0..IRLS_PASSES {
        let weights: Vec<f64> = freqs
            .iter()
            .map(|f| {
                let m = model(&out.x, *f).abs();
                if m > 0.0 {
                    1.0 / (m * m)
                } else {
                    0.0
                }
            })
            .collect();
        let opts = LsqOptions { weights: Some(weights), ..base.clone() };
        let next = least_squares(resid, &out.x, &opts)?;
        out = next;
    }
    Ok(out)
}

/// Lorentzian fit with parameters (centre, γ_L, area, floor); γ_G is 0.
pub fn fit_lorentzian(spec: &Spectrum) -> Result<LineshapeFit> {
    let g = initial_guess(spec)?;
    let span = spec.f_step() * spec.len() as f64;
    let opts = LsqOptions {
        lower: Some(vec![spec.f_start(), 1e-6 * spec.f_step(), 0.0, f64::NEG_INFINITY]),
        upper: Some(vec![spec.f_start() + span, 10.0 * span, f64::INFINITY, f64::INFINITY]),
        scales: Some(vec![g.width, g.width, g.area, g.peak]),
        ..Default::default()
    };
    let model = |p: &[f64], f: f64| p[3] + lorentzian_psd(p[2], p[1], p[0], f);
    let out = irls(spec, model, vec![g.center, g.width, g.area, g.floor], opts)?;
    let result = FitResult::from_outcome(&["center", "gamma_l", "area", "floor"], &out);
    let params = LineshapeParams { center: out.x[0], gamma_l: out.x[1], gamma_g: 0.0, area: out.x[2], floor: out.x[3] };
    Ok(LineshapeFit { params, result })
}

/// Widths (γ_L, γ_G) implied by the free width parameters under a constraint.
fn widths(c: &VoigtConstraint, a: f64, b: f64) -> (f64, f64) {
    match *c {
        VoigtConstraint::Free => (a, b),
        VoigtConstraint::FixedGammaL { gamma_l } => (gamma_l, b),
        VoigtConstraint::FixedGammaG { gamma_g } => (a, gamma_g),
        VoigtConstraint::Cooperativity { c, ratio } => (a * (1.0 + c * ratio), b),
    }
}

/// Voigt fit separating homogeneous (γ_L) and jitter (γ_G) broadening.
///
/// Parameters are (centre, w₁, w₂, area, floor) where (w₁, w₂) are
/// (γ_L, γ_G) for [`VoigtConstraint::Free`] and (γ_i, γ_G) for the
/// cooperativity constraint; fixed widths are simply not varied. Several
/// starting splits of the Lorentzian width are tried and the lowest cost kept.
pub fn fit_voigt(spec: &Spectrum, constraint: VoigtConstraint) -> Result<LineshapeFit> {
    let lor = fit_lorentzian(spec)?;
    let w = lor.params.gamma_l;
    let span = spec.f_step() * spec.len() as f64;
    let mult = match constraint {
        VoigtConstraint::Cooperativity { c, ratio } => {
            let m = 1.0 + c * ratio;
            if !(m > 0.0) {
                return Err(Error::validation("constraint", format!("1 + C·ratio = {m} must be > 0")));
            }
            m
        }
        _ => 1.0,
    };
    let (fix_a, fix_b) = match constraint {
        VoigtConstraint::FixedGammaL { gamma_l } => (Some(gamma_l), None),
        VoigtConstraint::FixedGammaG { gamma_g } => (None, Some(gamma_g)),
        _ => (None, None),
    };
    let model = move |p: &[f64], f: f64| {
        let (gl, gg) = widths(&constraint, p[1], p[2]);
        p[4] + p[3] * voigt_profile(f - p[0], gl, gg)
    };
    let mut best: Option<LsqOutcome> = None;
    for split in [0.3, 0.6, 0.9] {
        let a0 = fix_a.unwrap_or(split * w / mult);
        let b0 = fix_b.unwrap_or((1.0 - split * 0.9) * w);
        let lower = vec![spec.f_start(), fix_a.unwrap_or(0.0), fix_b.unwrap_or(0.0), 0.0, f64::NEG_INFINITY];
        let upper = vec![
            spec.f_start() + span,
            fix_a.unwrap_or(10.0 * span),
            fix_b.unwrap_or(10.0 * span),
            f64::INFINITY,
            f64::INFINITY,
        ];
        let opts = LsqOptions {
            lower: Some(lower),
            upper: Some(upper),
            scales: Some(vec![w, w, w, lor.params.area.max(1e-300), lor.params.floor.abs().max(1e-300)]),
            ..Default::default()
        };
        let init = vec![lor.params.center, a0, b0, lor.params.area, lor.params.floor];
        let out = irls(spec, model, init, opts)?;
        if best.as_ref().is_none_or(|b| out.cost < b.cost) {
            best = Some(out);
        }
    }
    let out = best.expect("at least one start");
    let (gl, gg) = widths(&constraint, out.x[1], out.x[2]);
    let first = if matches!(constraint, VoigtConstraint::Cooperativity { .. }) { "gamma_i" } else { "gamma_l" };
    let mut result = FitResult::from_outcome(&["center", first, "gamma_g", "area", "floor"], &out);
    if first == "gamma_i" {
        result.insert("gamma_l", gl, out.uncertainties[1] * mult);
    }
    let params = LineshapeParams { center: out.x[0], gamma_l: gl, gamma_g: gg, area: out.x[3], floor: out.x[4] };
    if let Some(w) = width_degeneracy_warning(spec, &params) {
        result.warnings.push(w);
    }
    Ok(LineshapeFit { params, result })
}

/// Warns when one width dominates and the peak is weak, in which case the
/// split between γ_L and γ_G is poorly constrained.
pub(crate) fn width_degeneracy_warning(spec: &Spectrum, p: &LineshapeParams) -> Option<String> {
    let ratio = p.gamma_g / p.gamma_l;
    let peak = p.area * voigt_profile(0.0, p.gamma_l, p.gamma_g);
    let resid: Vec<f64> =
        spec.frequencies().iter().zip(spec.values()).map(|(f, y)| y - crate::spectra::voigt_psd(p, *f)).collect();
    let rms = (resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64).sqrt();
    let snr = if rms > 0.0 { peak / rms } else { f64::INFINITY };
    let outside = !(0.1..=10.0).contains(&ratio);
    (outside && snr < 10.0)
        .then(|| format!("widths weakly identifiable: gamma_g/gamma_l = {ratio:.3}, peak SNR = {snr:.2}"))
}

/// Fits every spectrum independently; results keep the input order.
pub fn fit_lorentzian_batch(spectra: &[Spectrum], exec: Execution) -> Vec<Result<LineshapeFit>> {
    parallel::map(exec, spectra, fit_lorentzian)
}

/// Voigt counterpart of [`fit_lorentzian_batch`].
pub fn fit_voigt_batch(
    spectra: &[Spectrum],
    constraint: VoigtConstraint,
    exec: Execution,
) -> Vec<Result<LineshapeFit>> {
    parallel::map(exec, spectra, |s| fit_voigt(s, constraint))
}
