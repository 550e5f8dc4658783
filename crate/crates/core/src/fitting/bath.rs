//! Joint fit of cooling curves at several fridge temperatures to the
//! two-bath occupancy model with a common γ₀ and γ_p(n_c).

use serde::{Deserialize, Serialize};

use super::lsq::{least_squares, LsqOptions, LsqOutcome};
use super::{CoolingCurvePoint, FitResult};
use crate::numerics::spline::LogLogSpline;
use crate::parallel::{self, Execution};
use crate::physics::{bose_einstein, gamma_om, occupancy_from_rates, BathModel, DeviceParams, ProbeState};
use crate::{Error, Result};

const LN_GAMMA_MIN: f64 = -13.815_510_557_964_274; // ln 1e-6
const LN_GAMMA_MAX: f64 = 20.723_265_836_946_41; // ln 1e9

/// n_p(n_c) = amplitude · n_c^exponent, assumed known when fitting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NpLaw {
    pub amplitude: f64,
    pub exponent: f64,
}

impl NpLaw {
    pub fn from_bath(b: &BathModel) -> Self {
        NpLaw { amplitude: b.np_amplitude, exponent: b.np_exponent }
    }

    pub fn eval(&self, n_c: f64) -> f64 {
        self.amplitude * n_c.powf(self.exponent)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathFitOptions {
    pub knots_per_decade: f64,
    /// One γ_p knot at every distinct n_c instead of the smooth spline.
    pub per_point: bool,
    /// Number of starting values for γ₀ (log-spaced over 10 Hz to 10 kHz).
    pub multi_start: usize,
    /// Profile-likelihood interval for γ₀; otherwise the quadratic estimate.
    pub profile: bool,
    /// Include linewidth residuals for points with a positive linewidth error.
    pub use_linewidths: bool,
}

impl Default for BathFitOptions {
    fn default() -> Self {
        BathFitOptions { knots_per_decade: 4.0, per_point: false, multi_start: 4, profile: true, use_linewidths: true }
    }
}

/// Fitted bath model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathFit {
    pub gamma_0: f64,
    pub gamma_0_err: f64,
    /// 1σ interval for γ₀ (profile likelihood or quadratic).
    pub gamma_0_interval: (f64, f64),
    pub knot_n_c: Vec<f64>,
    pub knot_gamma_p: Vec<f64>,
    pub knot_gamma_p_err: Vec<f64>,
    /// exp(ln γ_p + 2σ), the useful number when γ_p is consistent with zero.
    pub knot_gamma_p_upper: Vec<f64>,
    pub np_law: NpLaw,
    /// Covariance of (ln γ₀, ln γ_p at each knot).
    pub log_covariance: Vec<Vec<f64>>,
    pub result: FitResult,
}

/// γ_p(n_c) parameterised by ln γ_p at log-spaced knots.
#[derive(Clone, Debug)]
struct GammaPCurve {
    ln_knots: Vec<f64>,
}

impl GammaPCurve {
    fn eval(&self, ln_gp: &[f64], n_c: f64) -> Result<f64> {
        if self.ln_knots.len() == 1 {
            return Ok(ln_gp[0].exp());
        }
        Ok(LogLogSpline::from_log_knots(self.ln_knots.clone(), ln_gp.to_vec())?.eval(n_c))
    }
}

fn probe_for(dev: &DeviceParams, n_c: f64, sign: i8) -> ProbeState {
    match sign {
        1 => ProbeState::red(dev, n_c),
        -1 => ProbeState::blue(dev, n_c),
        _ => ProbeState::resonant(n_c),
    }
}

fn knot_positions(points: &[CoolingCurvePoint], opts: &BathFitOptions) -> Vec<f64> {
    let mut n: Vec<f64> = points.iter().map(|p| p.n_c).collect();
    n.sort_by(f64::total_cmp);
    n.dedup_by(|a, b| ((*a - *b) / *b).abs() < 1e-9);
    if opts.per_point || n.len() < 2 {
        return n;
    }
    let (lo, hi) = (n[0].ln(), n[n.len() - 1].ln());
    let decades = (hi - lo) / std::f64::consts::LN_10;
    let k = ((decades * opts.knots_per_decade).ceil() as usize + 1).max(2);
    (0..k).map(|i| (lo + (hi - lo) * i as f64 / (k - 1) as f64).exp()).collect()
}

struct Problem<'a> {
    points: &'a [CoolingCurvePoint],
    np: NpLaw,
    curve: GammaPCurve,
    n_f: Vec<f64>,
    om: Vec<f64>,
    use_lw: Vec<bool>,
}

impl Problem<'_> {
    /// Residuals for θ = (ln γ₀, ln γ_p at knots).
    fn residuals(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let g0 = theta[0].exp();
        let mut out = Vec::with_capacity(2 * self.points.len());
        for (i, p) in self.points.iter().enumerate() {
            let gp = self.curve.eval(&theta[1..], p.n_c)?;
            let n = occupancy_from_rates(g0, self.n_f[i], gp, self.np.eval(p.n_c), self.om[i])?;
            out.push(n - p.occupancy);
            if self.use_lw[i] {
                out.push(g0 + gp + self.om[i] - p.linewidth);
            }
        }
        Ok(out)
    }

    fn weights(&self) -> (Vec<f64>, bool) {
        let mut w = Vec::new();
        let mut absolute = true;
        for (i, p) in self.points.iter().enumerate() {
            for (use_it, err) in [(true, p.occupancy_err), (self.use_lw[i], p.linewidth_err)] {
                if use_it {
                    if err > 0.0 {
                        w.push(1.0 / (err * err));
                    } else {
                        absolute = false;
                        w.push(1.0);
                    }
                }
            }
        }
        if !absolute {
            w.iter_mut().for_each(|v| *v = 1.0);
        }
        (w, absolute)
    }
}

/// Fits ⟨n⟩(n_c; T_f) = (γ₀n_f + γ_p n_p)/(γ₀ + γ_p + γ_OM) jointly over all
/// points, with γ₀ a scalar and ln γ_p a monotone cubic in ln n_c through
/// knots spaced `knots_per_decade` per decade. Linewidths γ₀ + γ_p + γ_OM
/// enter as extra residuals when their errors are given.
pub fn fit_bath_model(
    points: &[CoolingCurvePoint],
    dev: &DeviceParams,
    np_law: NpLaw,
    opts: &BathFitOptions,
) -> Result<BathFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("bath fit needs at least two points".into()));
    }
    for p in points {
        p.validate()?;
    }
    dev.validate()?;
    let knots = knot_positions(points, opts);
    let use_lw: Vec<bool> = points.iter().map(|p| opts.use_linewidths && p.linewidth_err > 0.0).collect();
    let prob = Problem {
        points,
        np: np_law,
        curve: GammaPCurve { ln_knots: knots.iter().map(|v| v.ln()).collect() },
        n_f: points.iter().map(|p| bose_einstein(dev.omega_m, p.t_f)).collect::<Result<_>>()?,
        om: points.iter().map(|p| gamma_om(dev, &probe_for(dev, p.n_c, p.detuning_sign))).collect(),
        use_lw,
    };
    let k = knots.len() + 1;
    let (weights, absolute) = prob.weights();
    let base = LsqOptions {
        lower: Some(vec![LN_GAMMA_MIN; k]),
        upper: Some(vec![LN_GAMMA_MAX; k]),
        weights: Some(weights),
        absolute_weights: absolute,
        scales: Some(vec![1.0; k]),
        max_step: Some(1.0),
        ..Default::default()
    };
    let resid = |t: &[f64]| prob.residuals(t);

    let starts = opts.multi_start.max(1);
    let runs = parallel::map_range(Execution::Parallel, starts, |s| {
        let ln_g0 =
            if starts == 1 { 300f64.ln() } else { 10f64.ln() + (1e4f64 / 10.0).ln() * s as f64 / (starts - 1) as f64 };
        least_squares(resid, &vec![ln_g0; k], &base).ok()
    });
    // Ties go to the earliest start so the choice is order independent.
    let mut best: Option<LsqOutcome> = None;
    for out in runs.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| out.cost < b.cost) {
            best = Some(out);
        }
    }
    let out = best.ok_or_else(|| Error::domain("fit_bath_model", "no starting point gave a stable model"))?;

    let mut names = vec!["ln_gamma_0".to_string()];
    names.extend((0..knots.len()).map(|i| format!("ln_gamma_p_{i}")));
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut result = FitResult::from_outcome(&refs, &out);

    let gamma_0 = out.x[0].exp();
    let quad = (gamma_0 * (-out.uncertainties[0]).exp(), gamma_0 * out.uncertainties[0].exp());
    let interval = if opts.profile {
        let threshold = if absolute { 1.0 } else { out.reduced_chi_square().max(f64::MIN_POSITIVE) };
        profile_interval(&resid, &out, &base, threshold)?
    } else {
        quad
    };
    let gamma_0_err = 0.5 * (interval.1 - interval.0);
    result.insert("gamma_0", gamma_0, gamma_0_err);

    let mut t_f: Vec<f64> = points.iter().map(|p| p.t_f).collect();
    t_f.sort_by(f64::total_cmp);
    t_f.dedup();
    if t_f.len() < 2 {
        result.warnings.push("single fridge temperature: gamma_0 and gamma_p are not separately identifiable".into());
    }
    let dominated = points.iter().enumerate().all(|(i, p)| {
        let gp = prob.curve.eval(&out.x[1..], p.n_c).unwrap_or(0.0);
        prob.om[i].abs() > 10.0 * (gamma_0 + gp)
    });
    if dominated {
        result.warnings.push("back-action dominates every point: bath rates weakly identifiable".into());
    }

    let knot_gamma_p: Vec<f64> = out.x[1..].iter().map(|v| v.exp()).collect();
    Ok(BathFit {
        gamma_0,
        gamma_0_err,
        gamma_0_interval: interval,
        knot_gamma_p_err: knot_gamma_p.iter().zip(&out.uncertainties[1..]).map(|(g, s)| g * s).collect(),
        knot_gamma_p_upper: out.x[1..].iter().zip(&out.uncertainties[1..]).map(|(l, s)| (l + 2.0 * s).exp()).collect(),
        knot_gamma_p,
        knot_n_c: knots,
        np_law,
        log_covariance: (0..k).map(|i| (0..k).map(|j| out.covariance[(i, j)]).collect()).collect(),
        result,
    })
}

/// Interval of γ₀ where the χ² profiled over γ_p rises by at most `threshold`.
fn profile_interval<F>(resid: &F, best: &LsqOutcome, base: &LsqOptions, threshold: f64) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let chi2_min = best.chi_square();
    let rest = best.x[1..].to_vec();
    let k = rest.len();
    let sub_opts = LsqOptions {
        lower: Some(vec![LN_GAMMA_MIN; k]),
        upper: Some(vec![LN_GAMMA_MAX; k]),
        scales: Some(vec![1.0; k]),
        ..base.clone()
    };
    let profile = |ln_g0: f64, warm: &[f64]| -> Option<(f64, Vec<f64>)> {
        let r = |t: &[f64]| {
            let mut full = Vec::with_capacity(k + 1);
            full.push(ln_g0);
            full.extend_from_slice(t);
            resid(&full)
        };
        let out = least_squares(r, warm, &sub_opts).ok()?;
        Some((out.chi_square() - chi2_min, out.x))
    };
    let mut bounds = [0.0; 2];
    for (side, dir) in [-1.0f64, 1.0].iter().enumerate() {
        let x0 = best.x[0];
        let mut step = best.uncertainties[0].clamp(0.01, 1.0);
        let mut inside = (x0, rest.clone());
        let mut outside = None;
        for _ in 0..40 {
            let x = x0 + dir * step;
            if !(LN_GAMMA_MIN..=LN_GAMMA_MAX).contains(&x) {
                break;
            }
            match profile(x, &inside.1) {
                Some((d, t)) if d <= threshold => {
                    inside = (x, t);
                    step *= 2.0;
                }
                _ => {
                    outside = Some(x);
                    break;
                }
            }
        }
        let Some(mut out_x) = outside else {
            bounds[side] = if *dir < 0.0 { LN_GAMMA_MIN } else { LN_GAMMA_MAX };
            continue;
        };
        let mut in_x = inside.0;
        for _ in 0..40 {
            let mid = 0.5 * (in_x + out_x);
            match profile(mid, &inside.1) {
                Some((d, t)) if d <= threshold => {
                    in_x = mid;
                    inside.1 = t;
                }
                _ => out_x = mid,
            }
            if (out_x - in_x).abs() < 1e-6 {
                break;
            }
        }
        bounds[side] = 0.5 * (in_x + out_x);
    }
    Ok((bounds[0].exp(), bounds[1].exp()))
}

impl BathFit {
    pub fn gamma_p(&self, n_c: f64) -> f64 {
        if self.knot_n_c.len() == 1 {
            return self.knot_gamma_p[0];
        }
        LogLogSpline::new(&self.knot_n_c, &self.knot_gamma_p).map_or(f64::NAN, |s| s.eval(n_c))
    }

    /// Predicted occupancy at Δ = sign·ω_m (sign 0: resonant).
    pub fn occupancy(&self, dev: &DeviceParams, n_c: f64, t_f: f64, sign: i8) -> Result<f64> {
        let om = gamma_om(dev, &probe_for(dev, n_c, sign));
        occupancy_from_rates(
            self.gamma_0,
            bose_einstein(dev.omega_m, t_f)?,
            self.gamma_p(n_c),
            self.np_law.eval(n_c),
            om,
        )
    }

    /// Predicted Lorentzian linewidth γ₀ + γ_p + γ_OM.
    pub fn linewidth(&self, dev: &DeviceParams, n_c: f64, sign: i8) -> f64 {
        self.gamma_0 + self.gamma_p(n_c) + gamma_om(dev, &probe_for(dev, n_c, sign))
    }

    /// Predicted sideband asymmetry ξ = (⟨n⟩_b + 1)/⟨n⟩_r − 1.
    pub fn asymmetry(&self, dev: &DeviceParams, n_c: f64, t_f: f64) -> Result<f64> {
        let r = self.occupancy(dev, n_c, t_f, 1)?;
        let b = self.occupancy(dev, n_c, t_f, -1)?;
        if r == 0.0 {
            return Err(Error::Degenerate { op: "asymmetry", msg: "zero red occupancy".into() });
        }
        Ok((b + 1.0) / r - 1.0)
    }

    /// Predicted asymmetry and its 1σ error propagated from the fit
    /// covariance by central differences in the log parameters.
    pub fn asymmetry_with_error(&self, dev: &DeviceParams, n_c: f64, t_f: f64) -> Result<(f64, f64)> {
        let xi = self.asymmetry(dev, n_c, t_f)?;
        let k = self.log_covariance.len();
        let mut grad = vec![0.0; k];
        for (j, g) in grad.iter_mut().enumerate() {
            let h = 1e-5;
            let shifted = |d: f64| {
                let mut m = self.clone();
                if j == 0 {
                    m.gamma_0 *= d.exp();
                } else {
                    m.knot_gamma_p[j - 1] *= d.exp();
                }
                m.asymmetry(dev, n_c, t_f)
            };
            *g = (shifted(h)? - shifted(-h)?) / (2.0 * h);
        }
        let var: f64 = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| grad[i] * self.log_covariance[i][j] * grad[j])
            .sum();
        Ok((xi, var.max(0.0).sqrt()))
    }
}
