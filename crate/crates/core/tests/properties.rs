use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use omckit::fitting::{fit_area_vs_detuning, fit_power_law, transduction_envelope};
use omckit::numerics::quadrature::{integrate_real_line, Tolerance};
use omckit::physics::{bose_einstein, gamma_om, inverse_bose_einstein, DeviceParams, ProbeState};
use omckit::spectra::{voigt_fwhm, voigt_profile, Spectrum, SpectrumUnit};
use omckit::table::Table;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn backaction_is_odd(d in 1e5f64..5e10, n_c in 1e-3f64..100.0) {
        let dev = DeviceParams::reference_device();
        let p = gamma_om(&dev, &ProbeState::new(d, n_c));
        let m = gamma_om(&dev, &ProbeState::new(-d, n_c));
        prop_assert!((p + m).abs() <= 1e-12 * p.abs().max(1e-300));
    }

    #[test]
    fn bose_einstein_inverts(n in 1e-6f64..1e4, f in 1e8f64..1e11) {
        let t = inverse_bose_einstein(f, n).unwrap();
        prop_assert!((bose_einstein(f, t).unwrap() / n - 1.0).abs() < 1e-11);
    }

    #[test]
    fn voigt_is_normalised(gl in 10.0f64..2e4, gg in 10.0f64..2e4) {
        let a = integrate_real_line(|x| voigt_profile(x, gl, gg), 0.0, Tolerance::relative(1e-10)).unwrap().value;
        prop_assert!((a - 1.0).abs() < 1e-6);
    }

    #[test]
    fn voigt_fwhm_lies_between_components(gl in 1.0f64..1e4, gg in 1.0f64..1e4) {
        let w = voigt_fwhm(gl, gg);
        prop_assert!(w >= gl.max(gg) * (1.0 - 1e-3) && w <= gl + gg);
    }

    #[test]
    fn table_csv_round_trip(values in prop::collection::vec(-1e300f64..1e300, 1..50)) {
        let t = Table::from_columns(&[("v", &values[..])]).unwrap();
        let back = Table::parse(&t.to_csv_string()).unwrap();
        prop_assert_eq!(back.column_f64("v").unwrap(), values);
    }

    #[test]
    fn power_law_exponent_is_scale_invariant(s in 1e-3f64..1e3, k in -2.0f64..2.0) {
        let x: Vec<f64> = (1..20).map(|i| i as f64 * 0.7).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| 2.0 * v.powf(k) * (1.0 + 0.05 * ((i * 7 % 5) as f64 - 2.0))).collect();
        let a = fit_power_law(&x, &y, None).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| v * s).collect();
        let b = fit_power_law(&xs, &y, None).unwrap();
        prop_assert!((a.exponent - b.exponent).abs() < 1e-9);
        prop_assert!((b.amplitude / (a.amplitude * s.powf(-a.exponent)) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn spectrum_rejects_malformed_rows() {
    let text = "frequency_hz,psd\n1,2\n2,x\n";
    let err = Table::parse(text).unwrap().column_f64("psd").unwrap_err().to_string();
    assert!(err.contains('3'), "{err}");
    let short = Spectrum::new(0.0, 1.0, vec![1.0; 4], 1.0, SpectrumUnit::ShotNoise);
    assert!(short.is_err());
}

#[test]
fn cooling_model_beats_null_model() {
    let dev = DeviceParams::reference_device().with_g0(715e3);
    let c_true = 3.9;
    let detunings: Vec<f64> = (0..11).map(|k| dev.omega_m + (k as f64 - 5.0) * 0.3 * dev.kappa).collect();
    let n_ref = 1.0;
    let om_ref = gamma_om(&dev, &ProbeState::new(dev.omega_m, n_ref));
    let clean: Vec<f64> = detunings
        .iter()
        .map(|&d| {
            let ratio = gamma_om(&dev, &ProbeState::new(d, n_ref)) / om_ref;
            50.0 * transduction_envelope(&dev, d) / (1.0 + c_true * ratio)
        })
        .collect();
    let mut wins = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy: Vec<f64> = clean
            .iter()
            .map(|a| {
                let e: f64 = StandardNormal.sample(&mut rng);
                a * (1.0 + 0.05 * e)
            })
            .collect();
        let err: Vec<f64> = noisy.iter().map(|a| 0.05 * a).collect();
        let fit = fit_area_vs_detuning(&detunings, &noisy, Some(&err), &dev).unwrap();
        wins += (fit.result.residual_norm < fit.null.residual_norm) as usize;
    }
    assert!(wins >= 99, "{wins}/100");
}
