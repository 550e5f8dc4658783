//! Acceptance suite. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use omckit::fitting::{
    fit_area_vs_detuning, fit_bath_model, fit_lorentzian, fit_power_law, fit_voigt_detuning_series, least_squares,
    BathFitOptions, CoolingCurvePoint, LsqOptions, NpLaw,
};
use omckit::numerics::quadrature::{integrate, integrate_real_line, Tolerance};
use omckit::numerics::special::{gamma, riemann_zeta};
use omckit::phonon::{
    bose_integral, gamma_p_high_t, gamma_p_integral, gamma_p_low_t, toy_effective_bath, toy_rates, ContinuumBath,
    ToyThreePhonon,
};
use omckit::physics::{
    bose_einstein, gamma_om, inverse_bose_einstein, mode_occupancy, self_oscillation_threshold, sideband_asymmetry,
    BathModel, DeviceParams, GammaPLaw, JitterLaw, ProbeState,
};
use omckit::spectra::{
    add_measurement_noise, calibrate_occupancy, calibration_tone_psd, gaussian_profile, heterodyne_psd, lorentzian_psd,
    receiver_efficiency, sideband_line, total_efficiency, voigt_fwhm, voigt_profile, voigt_psd, CalibrationChain,
    FrequencyGrid, LineshapeParams, Spectrum, SpectrumUnit,
};
use omckit::table::Table;

type Outcome = Result<String, String>;

/// Collects sub-checks of one criterion.
#[derive(Default)]
struct Checks {
    notes: Vec<String>,
    failures: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        let msg = msg.into();
        if ok {
            self.notes.push(msg);
        } else {
            self.failures.push(msg);
        }
    }

    fn finish(self) -> Outcome {
        if self.failures.is_empty() {
            Ok(self.notes.join("; "))
        } else {
            Err(self.failures.join("; "))
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

// ---------------------------------------------------------------------------

fn c1_backaction_rate() -> Outcome {
    let dev = DeviceParams::reference_device();
    let g = gamma_om(&dev, &ProbeState::red(&dev, 1.0));
    let mut c = Checks::default();
    c.check(rel(g, 4.08e3) < 0.02, format!("gamma_OM(w_m, n_c=1) = {g:.1} Hz"));
    c.finish()
}

fn c2_thresholds() -> Outcome {
    let dev = DeviceParams::reference_device();
    let hi = self_oscillation_threshold(&dev, 6.1e3);
    let lo = self_oscillation_threshold(&dev, 408.0);
    let mut c = Checks::default();
    c.check(rel(hi, 1.5) <= 0.10, format!("n_thr(6.1 kHz) = {hi:.3}"));
    c.check(rel(lo, 0.1) <= 0.20, format!("n_thr(408 Hz) = {lo:.4}"));
    c.finish()
}

fn c3_occupancy_arithmetic() -> Outcome {
    let n = bose_einstein(3.6e9, 4.0).map_err(|e| e.to_string())?;
    let t = inverse_bose_einstein(3.6e9, 0.98).map_err(|e| e.to_string())?;
    let mut c = Checks::default();
    c.check((n - 22.66).abs() <= 0.05, format!("n(3.6 GHz, 4 K) = {n:.4}"));
    c.check((0.235..=0.275).contains(&t), format!("T(n = 0.98) = {:.1} mK", t * 1e3));
    c.finish()
}

fn c4_quality_factor() -> Outcome {
    let dev = DeviceParams::reference_device();
    let q = dev.omega_m / 400.0;
    let mut c = Checks::default();
    c.check(rel(q, 9.0e6) <= 0.01, format!("Q_m = {q:.3e}"));
    c.finish()
}

fn c5_calibration_chain() -> Outcome {
    let dev = DeviceParams::reference_device();
    let f_o = dev.optical_frequency();
    let mut chain = CalibrationChain::reference(f_o);
    chain.eta_cpl = 0.34;
    chain.eta_23 = 0.84;
    chain.eta_vc = 0.56;
    chain.eta_det = 1.0;
    let eta = total_efficiency(&chain);
    let mut c = Checks::default();
    c.check((eta - 0.16).abs() <= 0.001, format!("total efficiency = {:.3}%", eta * 100.0));

    let grid = FrequencyGrid::centered(20e6, 400e3, 4001);
    let p_cal = 1e-12;
    let s = calibration_tone_psd(&chain, f_o, p_cal, 20e6, 10e3, &grid).map_err(|e| e.to_string())?;
    let got = receiver_efficiency(&s, chain.noise_floor(f_o), chain.s_dark, p_cal, f_o).map_err(|e| e.to_string())?;
    c.check((got - 0.56).abs() <= 1e-3, format!("receiver efficiency round trip = {got:.6}"));
    c.finish()
}

fn c6_phonon_identities() -> Outcome {
    let mut c = Checks::default();
    let i2 = bose_integral(2.0, 0.0).map_err(|e| e.to_string())?;
    c.check((i2 - PI * PI / 3.0).abs() <= 1e-8, format!("I(2,0) - pi^2/3 = {:.1e}", i2 - PI * PI / 3.0));
    let i3 = bose_integral(3.0, 0.0).map_err(|e| e.to_string())?;
    let exact = 3.0 * gamma(3.0) * riemann_zeta(3.0).map_err(|e| e.to_string())?;
    c.check((i3 - exact).abs() <= 1e-6, format!("I(3,0) = {i3:.7} (3 Gamma(3) zeta(3) = {exact:.7})"));

    // The x_c^a e^{-x_c} asymptote carries a relative error of about a/x_c,
    // so the [0.9, 1.1] band at x_c > 20 is met for a <= 2.
    let t_c = 2.0;
    let wm = 3.6e9;
    let bath2 = ContinuumBath::from_cutoff_temperature(2.0, t_c, 1e-9).map_err(|e| e.to_string())?;
    let mut worst_low: f64 = 0.0;
    for x_c in [20.01, 25.0, 30.0, 40.0, 60.0, 100.0, 300.0] {
        let t = t_c / x_c;
        let r = gamma_p_low_t(&bath2, wm, t) / gamma_p_integral(&bath2, wm, t).map_err(|e| e.to_string())?;
        worst_low = worst_low.max((r - 1.0).abs());
    }
    c.check(worst_low <= 0.1, format!("a=2 low-T |ratio-1| <= {worst_low:.4} for x_c > 20"));
    let bath3 = ContinuumBath::from_cutoff_temperature(3.0, t_c, 1e-9).map_err(|e| e.to_string())?;
    let r3 = gamma_p_low_t(&bath3, wm, t_c / 20.01) / gamma_p_integral(&bath3, wm, t_c / 20.01).unwrap();
    c.notes.push(format!("(a=3 low-T ratio at x_c=20 is {r3:.3})"));

    let mut worst_high: f64 = 0.0;
    for bath in [&bath2, &bath3] {
        for x_c in [1e-4, 1e-3, 5e-3, 0.0099] {
            let t = t_c / x_c;
            let r = gamma_p_high_t(bath, wm, t).unwrap() / gamma_p_integral(bath, wm, t).unwrap();
            worst_high = worst_high.max((r - 1.0).abs());
        }
    }
    c.check(worst_high <= 0.01, format!("high-T |ratio-1| <= {worst_high:.5} for x_c < 0.01 (a=2,3)"));
    c.finish()
}

/// Integrates dn/dt = Γ₊(n) − Γ₋(n) with RK4 and fits n(t) = n∞ + (n₀ − n∞)e^{−γt}.
fn relax(model: &ToyThreePhonon, gamma_guess: f64) -> (f64, f64) {
    let rate = |n: f64| {
        let (up, down) = toy_rates(model, n).unwrap();
        up - down
    };
    let dt = 0.01 / gamma_guess;
    let mut n = 0.0;
    let mut ts = Vec::new();
    let mut ns = Vec::new();
    for k in 0..=800 {
        if k % 8 == 0 {
            ts.push(k as f64 * dt);
            ns.push(n);
        }
        let k1 = rate(n);
        let k2 = rate(n + 0.5 * dt * k1);
        let k3 = rate(n + 0.5 * dt * k2);
        let k4 = rate(n + dt * k3);
        n += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    let scale = ns[ns.len() - 1].max(1e-300);
    let out = least_squares(
        |p| Ok(ts.iter().zip(&ns).map(|(t, y)| (p[0] * (1.0 - (-p[1] * gamma_guess * t).exp()) - y) / scale).collect()),
        &[scale, 0.5],
        &LsqOptions::default(),
    )
    .unwrap();
    (out.x[0], out.x[1] * gamma_guess)
}

fn c7_effective_bath() -> Outcome {
    let mut c = Checks::default();
    let wm = 3.6e9;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for w1 in [10e9, 20e9, 50e9, 100e9, 300e9] {
        for t_p in log_grid(0.05, 50.0, 10) {
            let m = ToyThreePhonon::new(w1, wm, 1.0, t_p).unwrap();
            let (n_p, _) = toy_effective_bath(&m).map_err(|e| e.to_string())?;
            worst = worst.max(rel(n_p, bose_einstein(wm, t_p).unwrap()));
            count += 1;
        }
    }
    c.check(count == 50 && worst <= 1e-9, format!("n_p vs Bose-Einstein on {count} points: max rel {worst:.1e}"));

    let mut worst_n: f64 = 0.0;
    let mut worst_g: f64 = 0.0;
    for (w1, t_p, a) in [(20e9, 0.5, 1e3), (50e9, 2.0, 10.0), (100e9, 5.0, 1.0), (300e9, 20.0, 0.1)] {
        let m = ToyThreePhonon::new(w1, wm, a, t_p).unwrap();
        let (n_p, g_p) = toy_effective_bath(&m).unwrap();
        let (n_inf, g_fit) = relax(&m, g_p);
        worst_n = worst_n.max(rel(n_inf, n_p));
        worst_g = worst_g.max(rel(g_fit, g_p));
    }
    c.check(
        worst_n <= 0.01 && worst_g <= 0.01,
        format!("ODE relaxation: n_p within {worst_n:.1e}, rate within {worst_g:.1e}"),
    );
    c.finish()
}

// --- criterion 8 -----------------------------------------------------------

/// Averages per spectrum in the synthetic detuning series.
const DETUNING_SERIES_AVERAGES: u64 = 1_000_000;

fn c8_voigt_round_trip() -> Outcome {
    let (gamma_i, gamma_g, g0, c_true) = (2.3e3, 6.1e3, 715e3, 3.9);
    let dev = DeviceParams::reference_device().with_g0(g0);
    let n_c = c_true * gamma_i / gamma_om(&dev, &ProbeState::red(&dev, 1.0));
    let bath = BathModel {
        gamma_0: 306.0,
        t_f: 0.185,
        np_amplitude: 13.3,
        np_exponent: 0.25,
        gamma_p_law: GammaPLaw::Constant { gamma_p: gamma_i - 306.0 },
        jitter_law: Some(JitterLaw { amplitude: gamma_g, exponent: 0.0 }),
    };
    let calib = CalibrationChain::reference(dev.optical_frequency());
    let grid = FrequencyGrid::centered(calib.beat_frequency, 160e3, 321);
    let detunings: Vec<f64> = (0..11).map(|k| dev.omega_m + (k as f64 - 5.0) * 0.3 * dev.kappa).collect();
    let spectra: Vec<Spectrum> = detunings
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let s = heterodyne_psd(&dev, &ProbeState::new(d, n_c), &bath, &calib, &grid).unwrap();
            add_measurement_noise(&s, 8000 + k as u64, DETUNING_SERIES_AVERAGES).unwrap()
        })
        .collect();
    let fit = fit_voigt_detuning_series(&spectra, &dev, c_true).map_err(|e| e.to_string())?;
    let mut c = Checks::default();
    c.check(rel(fit.gamma_i, gamma_i) <= 0.05, format!("gamma_i = {:.0} Hz", fit.gamma_i));
    c.check(rel(fit.gamma_g, gamma_g) <= 0.05, format!("gamma_G = {:.0} Hz", fit.gamma_g));
    c.check(rel(fit.g0, g0) <= 0.05, format!("g0 = {:.1} kHz", fit.g0 / 1e3));
    let areas =
        fit_area_vs_detuning(&fit.detunings, &fit.areas, Some(&fit.area_errors), &dev).map_err(|e| e.to_string())?;
    c.check(
        rel(areas.cooperativity, c_true) <= 0.05,
        format!("C = {:.3} +/- {:.3} from areas", areas.cooperativity, areas.cooperativity_err),
    );
    c.check(areas.null.residual_norm > areas.result.residual_norm, "null model fits worse");
    c.finish()
}

// --- criterion 9 -----------------------------------------------------------

/// Relative 1σ occupancy error of the synthetic cooling curves.
const OCCUPANCY_NOISE: f64 = 0.03;

fn reference_bath(t_f: f64) -> BathModel {
    BathModel {
        gamma_0: 306.0,
        t_f,
        np_amplitude: 13.3,
        np_exponent: 0.25,
        gamma_p_law: GammaPLaw::Activated { amplitude: 789.0, t_c: 2.0 },
        jitter_law: None,
    }
}

fn noisy_point(
    dev: &DeviceParams,
    bath: &BathModel,
    n_c: f64,
    sign: i8,
    rng: &mut ChaCha8Rng,
) -> Option<CoolingCurvePoint> {
    let probe = if sign > 0 { ProbeState::red(dev, n_c) } else { ProbeState::blue(dev, n_c) };
    let n = mode_occupancy(dev, &probe, bath).ok()?;
    let lw = bath.linewidth(dev, &probe).ok()?;
    if !(lw > 0.0) {
        return None;
    }
    let measured = n * (1.0 + OCCUPANCY_NOISE * normal(rng));
    Some(CoolingCurvePoint {
        n_c,
        occupancy: measured,
        occupancy_err: OCCUPANCY_NOISE * n,
        linewidth: lw,
        linewidth_err: 0.0,
        detuning_sign: sign,
        t_f: bath.t_f,
    })
}

fn c9_bath_round_trip() -> Outcome {
    let dev = DeviceParams::reference_device();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut red = Vec::new();
    let mut pairs = Vec::new();
    for t_f in [0.010, 0.635] {
        let bath = reference_bath(t_f);
        for n_c in log_grid(0.01, 100.0, 49) {
            red.push(noisy_point(&dev, &bath, n_c, 1, &mut rng).unwrap());
            let (Some(r), Some(b)) =
                (noisy_point(&dev, &bath, n_c, 1, &mut rng), noisy_point(&dev, &bath, n_c, -1, &mut rng))
            else {
                continue;
            };
            // The mean of the red and blue widths is the intrinsic width.
            if b.linewidth >= 0.25 * (r.linewidth + b.linewidth) {
                pairs.push((r, b));
            }
        }
    }
    let fit = fit_bath_model(&red, &dev, NpLaw { amplitude: 13.3, exponent: 0.25 }, &BathFitOptions::default())
        .map_err(|e| e.to_string())?;
    let mut c = Checks::default();
    c.check(
        (fit.gamma_0 - 306.0).abs() <= 28.0,
        format!(
            "gamma_0 = {:.1} Hz (profile 1 sigma [{:.1}, {:.1}], {}% occupancy noise)",
            fit.gamma_0,
            fit.gamma_0_interval.0,
            fit.gamma_0_interval.1,
            OCCUPANCY_NOISE * 100.0
        ),
    );

    // Asymmetry from independent red/blue measurements where the blue probe
    // keeps at least half of the intrinsic damping.
    let mut worst: f64 = 0.0;
    let mut chi2 = 0.0;
    for (r, b) in &pairs {
        let xi = (b.occupancy + 1.0) / r.occupancy - 1.0;
        let d_xi = ((b.occupancy_err / r.occupancy).powi(2)
            + ((b.occupancy + 1.0) * r.occupancy_err / (r.occupancy * r.occupancy)).powi(2))
        .sqrt();
        let (pred, d_pred) = fit.asymmetry_with_error(&dev, r.n_c, r.t_f).map_err(|e| e.to_string())?;
        let z = (pred - xi) / d_xi.hypot(d_pred);
        worst = worst.max(z.abs());
        chi2 += z * z;
    }
    let red_chi2 = chi2 / pairs.len() as f64;
    c.check(
        pairs.len() >= 6 && worst <= 3.0 && red_chi2 <= 2.0,
        format!("asymmetry on {} stable pairs: max |z| = {worst:.2}, chi2/N = {red_chi2:.2}", pairs.len()),
    );
    c.finish()
}

// --- criterion 10 ----------------------------------------------------------

fn c10_power_laws() -> Outcome {
    let mut c = Checks::default();
    let x = log_grid(0.01, 10.0, 61);
    for (law, (label, amp, exponent)) in
        [("n_p ~ n_c^(1/4)", 13.3, 0.25), ("gamma ~ n_c^-0.23", 5e3, -0.23), ("gamma_G ~ T_p^-0.9", 6e3, -0.9)]
            .into_iter()
            .enumerate()
    {
        let mut worst: f64 = 0.0;
        let mut mean = 0.0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 * (law as u64 + 1) + seed);
            let y: Vec<f64> = x.iter().map(|v| amp * v.powf(exponent) * (1.0 + 0.1 * normal(&mut rng))).collect();
            let err: Vec<f64> = y.iter().map(|v| 0.1 * v).collect();
            let f = fit_power_law(&x, &y, Some(&err)).map_err(|e| e.to_string())?;
            worst = worst.max((f.exponent - exponent).abs());
            mean += f.exponent / 100.0;
        }
        c.check(worst <= 0.03, format!("{label}: mean exponent {mean:.4}, worst deviation {worst:.4}"));
    }
    c.finish()
}

// --- criterion 11 ----------------------------------------------------------

fn brute_force_voigt(x: f64, gl: f64, gg: f64) -> f64 {
    let sigma = gg / (2.0 * (2.0 * 2f64.ln()).sqrt());
    integrate(
        |t| lorentzian_psd(1.0, gl, 0.0, x - t) * gaussian_profile(t, gg),
        -9.0 * sigma,
        9.0 * sigma,
        Tolerance::relative(1e-11),
    )
    .unwrap()
    .value
}

fn c11_properties() -> Outcome {
    let mut c = Checks::default();
    let dev = DeviceParams::reference_device();
    let tol = Tolerance::relative(1e-10);

    // normalisation
    let area = integrate_real_line(|f| lorentzian_psd(5.0, 4e3, 0.0, f), 0.0, tol).unwrap().value;
    let v_area = integrate_real_line(|f| voigt_profile(f, 2.3e3, 6.1e3), 0.0, tol).unwrap().value;
    c.check((area - 5.0).abs() < 1e-6 && (v_area - 1.0).abs() < 1e-6, "Lorentzian and Voigt normalisation");

    // odd symmetry of the back-action
    let odd = log_grid(1e6, 2e10, 60).iter().all(|&d| {
        let p = gamma_om(&dev, &ProbeState::new(d, 0.7));
        let m = gamma_om(&dev, &ProbeState::new(-d, 0.7));
        (p + m).abs() <= 1e-12 * p.abs()
    });
    c.check(odd, "gamma_OM odd in detuning");

    // Voigt limits and the convolution oracle
    let xs: Vec<f64> = (0..2048).map(|i| -60e3 + 120e3 * i as f64 / 2047.0).collect();
    let lim_l =
        xs.iter().map(|&x| rel(voigt_profile(x, 2.3e3, 1e-4), lorentzian_psd(1.0, 2.3e3, 0.0, x))).fold(0.0, f64::max);
    let lim_g = xs
        .iter()
        .filter(|x| x.abs() < 10e3)
        .map(|&x| rel(voigt_profile(x, 1e-4, 6.1e3), gaussian_profile(x, 6.1e3)))
        .fold(0.0, f64::max);
    c.check(lim_l < 1e-4 && lim_g < 1e-4, format!("Voigt limits: {lim_l:.1e}, {lim_g:.1e}"));
    let conv =
        xs.iter().map(|&x| rel(voigt_profile(x, 2.3e3, 6.1e3), brute_force_voigt(x, 2.3e3, 6.1e3))).fold(0.0, f64::max);
    c.check(conv < 1e-3, format!("Voigt vs direct convolution on 2048 points: {conv:.1e}"));
    let half = 0.5 * voigt_profile(0.0, 2.3e3, 6.1e3);
    let (mut lo, mut hi) = (0.0, 50e3);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if brute_force_voigt(mid, 2.3e3, 6.1e3) > half {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let fwhm = 2.0 * lo;
    c.check(
        rel(fwhm, voigt_fwhm(2.3e3, 6.1e3)) < 1e-3 && rel(fwhm, 7.46e3) < 0.01,
        format!("Voigt FWHM {fwhm:.1} Hz (approximation {:.1} Hz)", voigt_fwhm(2.3e3, 6.1e3)),
    );

    // area/occupancy duality
    let calib = CalibrationChain::reference(dev.optical_frequency());
    let mut worst: f64 = 0.0;
    for target in [0.1, 1.0, 25.0] {
        let n_c = 0.01;
        let om = gamma_om(&dev, &ProbeState::red(&dev, n_c));
        let t_f = inverse_bose_einstein(dev.omega_m, target * (400.0 + om) / 400.0).unwrap();
        let bath = BathModel {
            gamma_0: 400.0,
            t_f,
            np_amplitude: 1.0,
            np_exponent: 0.0,
            gamma_p_law: GammaPLaw::Constant { gamma_p: 0.0 },
            jitter_law: None,
        };
        let probe = ProbeState::red(&dev, n_c);
        let line = sideband_line(&dev, &probe, &bath, &calib).unwrap();
        let width = line.gamma_l;
        let grid = FrequencyGrid::centered(calib.beat_frequency, 2000.0 * width, 40_001);
        let s = heterodyne_psd(&dev, &probe, &bath, &calib, &grid).unwrap();
        let floor = calib.s_dark / calib.shot_noise_level(dev.optical_frequency()) + 1.0;
        let n = calibrate_occupancy(s.area_above(floor), &calib, &dev, &probe).unwrap();
        worst = worst.max(rel(n, target));
    }
    c.check(worst < 1e-3, format!("integrated area -> occupancy within {worst:.1e}"));

    // red/blue area ratio reproduces the asymmetry
    let bath = reference_bath(0.2);
    let n_c = 0.02;
    let r = sideband_line(&dev, &ProbeState::red(&dev, n_c), &bath, &calib).unwrap();
    let b = sideband_line(&dev, &ProbeState::blue(&dev, n_c), &bath, &calib).unwrap();
    let xi = sideband_asymmetry(&dev, n_c, &bath).unwrap();
    c.check(rel(b.detected_area / r.detected_area - 1.0, xi) < 1e-6, "red/blue area ratio equals 1 + xi");

    // efficiency chain identity
    let f_o = dev.optical_frequency();
    let grid = FrequencyGrid::centered(20e6, 400e3, 4001);
    let worst_eta = [0.01, 0.05, 0.2, 0.56, 0.8, 1.0]
        .iter()
        .map(|&eta| {
            let ch = CalibrationChain { eta_vc: eta, eta_det: 1.0, ..calib.clone() };
            let s = calibration_tone_psd(&ch, f_o, 1e-12, 20e6, 10e3, &grid).unwrap();
            rel(receiver_efficiency(&s, ch.noise_floor(f_o), ch.s_dark, 1e-12, f_o).unwrap(), eta)
        })
        .fold(0.0, f64::max);
    c.check(worst_eta < 1e-6, format!("receiver efficiency identity over [0.01, 1]: {worst_eta:.1e}"));

    // determinism
    let probe = ProbeState::red(&dev, 0.5);
    let grid = FrequencyGrid::centered(calib.beat_frequency, 200e3, 401);
    let s = heterodyne_psd(&dev, &probe, &reference_bath(0.185), &calib, &grid).unwrap();
    let a1 = add_measurement_noise(&s, 42, 1_000_000).unwrap();
    let a2 = add_measurement_noise(&s, 42, 1_000_000).unwrap();
    let f1 = fit_lorentzian(&a1).unwrap();
    let f2 = fit_lorentzian(&a2).unwrap();
    c.check(a1 == a2 && f1 == f2, "seeded synthesis and fits are bit-identical");

    // CSV round trips
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spectrum.csv");
    a1.write(&path).unwrap();
    let back = Spectrum::read(&path).unwrap();
    let t = Table::from_columns(&[("x", a1.values())]).unwrap();
    let tv = Table::parse(&t.to_csv_string()).unwrap().column_f64("x").unwrap();
    c.check(back == a1 && tv == a1.values(), "spectrum and table CSV round trips");

    // Bose-Einstein round trip
    let be = log_grid(1e-3, 1e3, 50)
        .iter()
        .all(|&n| rel(bose_einstein(3.6e9, inverse_bose_einstein(3.6e9, n).unwrap()).unwrap(), n) < 1e-12);
    c.check(be, "Bose-Einstein inverse round trip");

    // least-squares monotone cost
    let noisy = add_measurement_noise(&s, 7, 50).unwrap();
    let freqs = noisy.frequencies();
    let vals = noisy.values().to_vec();
    let out = least_squares(
        |p| Ok(freqs.iter().zip(&vals).map(|(f, y)| p[3] + lorentzian_psd(p[2], p[1], p[0], *f) - y).collect()),
        &[50e6 + 3e3, 1e4, 1.0, 1.0],
        &LsqOptions { scales: Some(vec![1e3, 1e3, 1.0, 1.0]), ..Default::default() },
    )
    .unwrap();
    c.check(out.cost_history.windows(2).all(|w| w[1] <= w[0]), "least-squares cost non-increasing");

    // power-law scale covariance
    let x = log_grid(0.1, 100.0, 30);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v.powf(0.4) * (1.0 + 0.1 * normal(&mut rng))).collect();
    let f = fit_power_law(&x, &y, None).unwrap();
    let xs: Vec<f64> = x.iter().map(|v| v * 7.0).collect();
    let g = fit_power_law(&xs, &y, None).unwrap();
    c.check(
        (f.exponent - g.exponent).abs() < 1e-12 && rel(g.amplitude, f.amplitude * 7f64.powf(-f.exponent)) < 1e-12,
        "power-law scale covariance",
    );

    // coverage of quoted uncertainties
    let truth = LineshapeParams { center: 50e6, gamma_l: 4e3, gamma_g: 0.0, area: 2000.0, floor: 1.1 };
    let step = 200.0;
    let base: Vec<f64> = (0..401).map(|i| voigt_psd(&truth, 50e6 - 40e3 + i as f64 * step)).collect();
    let clean = Spectrum::new(50e6 - 40e3, step, base, step, SpectrumUnit::ShotNoise).unwrap();
    let (mut in1, mut in3, mut pl1) = (0, 0, 0);
    for seed in 0..500u64 {
        let noisy = add_measurement_noise(&clean, 50_000 + seed, 1000).unwrap();
        let fit = fit_lorentzian(&noisy).unwrap();
        let z = (fit.params.area - truth.area) / fit.result.sigma("area");
        in1 += (z.abs() <= 1.0) as usize;
        in3 += (z.abs() <= 3.0) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(60_000 + seed);
        let x = log_grid(0.01, 10.0, 40);
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(0.25) * (1.0 + 0.1 * normal(&mut rng))).collect();
        let e: Vec<f64> = x.iter().map(|v| 0.1 * 3.0 * v.powf(0.25)).collect();
        let p = fit_power_law(&x, &y, Some(&e)).unwrap();
        pl1 += ((p.exponent - 0.25).abs() <= p.exponent_err) as usize;
    }
    let cov_l = in1 as f64 / 500.0;
    let cov_p = pl1 as f64 / 500.0;
    c.check(
        (0.60..=0.75).contains(&cov_l) && (0.60..=0.75).contains(&cov_p) && in3 >= 475,
        format!("1 sigma coverage: Lorentzian area {cov_l:.3}, power-law exponent {cov_p:.3}; 3 sigma {in3}/500"),
    );

    // averaging noise obeys the law of large numbers
    let flat = Spectrum::new(0.0, 1.0, vec![2.0; 10_000], 1.0, SpectrumUnit::ShotNoise).unwrap();
    let noisy = add_measurement_noise(&flat, 11, 100).unwrap();
    let mean = noisy.values().iter().sum::<f64>() / 10_000.0;
    c.check((mean - 2.0).abs() <= 3.0 * 0.2 / 100.0, format!("noise sample mean {mean:.5}"));

    // toy model detailed balance
    let m = ToyThreePhonon::new(80e9, 3.6e9, 1.0, 1.0).unwrap();
    let (n_p, _) = toy_effective_bath(&m).unwrap();
    let (up, down) = toy_rates(&m, n_p).unwrap();
    c.check(rel(up, down) < 1e-12, "three-phonon rates balance at n_p");
    c.finish()
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "back-action rate", c1_backaction_rate),
        (2, "self-oscillation thresholds", c2_thresholds),
        (3, "occupancy arithmetic", c3_occupancy_arithmetic),
        (4, "mechanical quality factor", c4_quality_factor),
        (5, "calibration chain", c5_calibration_chain),
        (6, "phonon-integral identities", c6_phonon_identities),
        (7, "effective-bath theorem", c7_effective_bath),
        (8, "Voigt detuning-series round trip", c8_voigt_round_trip),
        (9, "bath-model round trip", c9_bath_round_trip),
        (10, "power-law recoveries", c10_power_laws),
        (11, "property suites", c11_properties),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
