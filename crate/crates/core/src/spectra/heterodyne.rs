use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::lineshape::{gaussian_profile, voigt_profile};
use super::spectrum::{ProbeMetadata, Spectrum, SpectrumUnit};
use crate::constants::PLANCK;
use crate::parallel::{self, Execution};
use crate::physics::optomech::sideband_scattering_rate;
use crate::physics::{gamma_om, occupancy_from_rates, BathModel, DeviceParams, ProbeState};
use crate::{Error, Result};

/// Intermediate frequency of the mechanical beat note (Hz).
pub const DEFAULT_BEAT_FREQUENCY: f64 = 50e6;
/// Zero-point displacement amplitude of the reference device (m).
pub const DEFAULT_X_ZPF: f64 = 4.1e-15;
/// Tolerance below zero accepted for blue-detuned calibrated occupancies.
pub const NEGATIVE_OCCUPANCY_TOLERANCE: f64 = 1e-3;

fn default_beat() -> f64 {
    DEFAULT_BEAT_FREQUENCY
}

fn default_beta() -> f64 {
    1.0
}

/// Efficiencies and electrical parameters of the heterodyne receiver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationChain {
    /// Circulator port 1 to 2.
    pub eta_12: f64,
    /// Circulator port 2 to 3.
    pub eta_23: f64,
    /// Fiber-to-device coupling.
    pub eta_cpl: f64,
    /// Variable coupler.
    pub eta_vc: f64,
    /// Balanced detector.
    pub eta_det: f64,
    /// Detector gain (V/W).
    pub g_e: f64,
    /// Load impedance (Ω).
    pub r_l: f64,
    pub p_lo: f64,
    pub p_in: f64,
    /// Electronic noise PSD (W/Hz).
    pub s_dark: f64,
    /// Systematic correction dividing every detected area.
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_beat")]
    pub beat_frequency: f64,
}

impl CalibrationChain {
    /// Receiver resembling the reference setup. Only the product η_VC·η_det
    /// (0.56) is known, so it is assigned entirely to `eta_vc`. The dark
    /// level sits a decade below shot noise.
    pub fn reference(optical_frequency: f64) -> Self {
        let mut c = CalibrationChain {
            eta_12: 0.88,
            eta_23: 0.84,
            eta_cpl: 0.34,
            eta_vc: 0.56,
            eta_det: 1.0,
            g_e: 1e4,
            r_l: 50.0,
            p_lo: 0.7e-3,
            p_in: 20e-6,
            s_dark: 0.0,
            beta: 1.0,
            beat_frequency: DEFAULT_BEAT_FREQUENCY,
        };
        c.s_dark = 0.1 * c.shot_noise_level(optical_frequency);
        c
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta_12", self.eta_12),
            ("eta_23", self.eta_23),
            ("eta_cpl", self.eta_cpl),
            ("eta_vc", self.eta_vc),
            ("eta_det", self.eta_det),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(name, format!("efficiency must lie in [0, 1], got {v}")));
            }
        }
        for (name, v) in [("g_e", self.g_e), ("r_l", self.r_l), ("p_lo", self.p_lo), ("beta", self.beta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.p_in >= 0.0 && self.s_dark >= 0.0) {
            return Err(Error::validation("p_in", "p_in and s_dark must be >= 0"));
        }
        if !(self.beat_frequency > 0.0) {
            return Err(Error::validation("beat_frequency", "must be > 0"));
        }
        Ok(())
    }

    /// Shot-noise PSD at the analyser, (G_e²/R_L)·2hf_o·P_LO (W/Hz).
    pub fn shot_noise_level(&self, optical_frequency: f64) -> f64 {
        self.g_e * self.g_e / self.r_l * 2.0 * PLANCK * optical_frequency * self.p_lo
    }

    /// Noise floor with the signal blocked: S_dark + shot noise (W/Hz).
    pub fn noise_floor(&self, optical_frequency: f64) -> f64 {
        self.s_dark + self.shot_noise_level(optical_frequency)
    }
}

/// η = η_cpl·η₂₃·η_VC·η_det.
pub fn total_efficiency(calib: &CalibrationChain) -> f64 {
    calib.eta_cpl * calib.eta_23 * calib.eta_vc * calib.eta_det
}

/// η_cpl = √(P_PM/(η₂₃·η₁₂·P_in)) from the power transmitted through the
/// circulator and device reflection.
pub fn fiber_coupling_efficiency(p_pm: f64, p_in: f64, eta_12: f64, eta_23: f64) -> Result<f64> {
    if !(p_pm >= 0.0 && p_in > 0.0) {
        return Err(Error::domain("fiber_coupling_efficiency", "need P_PM >= 0 and P_in > 0"));
    }
    for e in [eta_12, eta_23] {
        if !(e > 0.0 && e <= 1.0) {
            return Err(Error::domain("fiber_coupling_efficiency", format!("efficiency {e} outside (0, 1]")));
        }
    }
    let eta = (p_pm / (eta_23 * eta_12 * p_in)).sqrt();
    if eta > 1.0 + 1e-12 {
        return Err(Error::OutOfRange { quantity: "eta_cpl", value: eta });
    }
    Ok(eta.min(1.0))
}

/// Uniform frequency grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub start: f64,
    pub step: f64,
    pub points: usize,
}

impl FrequencyGrid {
    /// `points` samples spanning `span` Hz centred on `center`.
    pub fn centered(center: f64, span: f64, points: usize) -> Self {
        let step = span / (points.max(2) - 1) as f64;
        FrequencyGrid { start: center - 0.5 * span, step, points }
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }
}

/// Per-phonon sideband photon flux reaching the receiver, (κ_e/κ)·Γ_sb, for
/// the sideband that is detected at this detuning: the anti-Stokes line for
/// Δ >= 0 and the Stokes line for Δ < 0.
pub fn transduction_rate(dev: &DeviceParams, probe: &ProbeState) -> f64 {
    let upper = probe.detuning >= 0.0;
    dev.kappa_e / dev.kappa * sideband_scattering_rate(dev, probe, upper)
}

/// Steady-state parameters of the detected mechanical line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SidebandLine {
    pub occupancy: f64,
    /// ⟨n⟩ for Δ >= 0, ⟨n⟩ + 1 for Δ < 0.
    pub sideband_area: f64,
    pub gamma_l: f64,
    pub gamma_g: f64,
    /// Detected peak area relative to shot noise (Hz).
    pub detected_area: f64,
}

/// Computes the detected line without sampling it.
pub fn sideband_line(
    dev: &DeviceParams,
    probe: &ProbeState,
    bath: &BathModel,
    calib: &CalibrationChain,
) -> Result<SidebandLine> {
    let st = bath.state(dev, probe.n_c)?;
    let g_om = gamma_om(dev, probe);
    let n = occupancy_from_rates(st.gamma_0, st.n_f, st.gamma_p, st.n_p, g_om)?;
    let sideband_area = if probe.detuning >= 0.0 { n } else { n + 1.0 };
    let gain = total_efficiency(calib) * calib.beta * transduction_rate(dev, probe);
    Ok(SidebandLine {
        occupancy: n,
        sideband_area,
        gamma_l: st.gamma_i() + g_om,
        gamma_g: st.gamma_g,
        detected_area: gain * sideband_area,
    })
}

/// Noiseless heterodyne PSD in shot-noise units:
/// S_dark/S_SN + 1 + η·β·Γ_det·S(f), where S is the Voigt-broadened line of
/// area ⟨n⟩ (or ⟨n⟩ + 1) at the beat frequency.
pub fn heterodyne_psd(
    dev: &DeviceParams,
    probe: &ProbeState,
    bath: &BathModel,
    calib: &CalibrationChain,
    grid: &FrequencyGrid,
) -> Result<Spectrum> {
    dev.validate()?;
    probe.validate()?;
    calib.validate()?;
    let line = sideband_line(dev, probe, bath, calib)?;
    let floor = calib.s_dark / calib.shot_noise_level(dev.optical_frequency()) + 1.0;
    let values = (0..grid.points)
        .map(|i| {
            let x = grid.frequency(i) - calib.beat_frequency;
            floor + line.detected_area * voigt_profile(x, line.gamma_l, line.gamma_g)
        })
        .collect();
    let rbw = grid.step;
    Ok(Spectrum::new(grid.start, grid.step, values, rbw, SpectrumUnit::ShotNoise)?.with_metadata(ProbeMetadata {
        detuning_hz: Some(probe.detuning),
        n_c: Some(probe.n_c),
        t_f_k: Some(bath.t_f),
        ..ProbeMetadata::default()
    }))
}

/// Converts an occupancy-scale area back from a detected area (shot-noise
/// units × Hz): divides by η, the transduction rate and β, then removes the
/// vacuum contribution for blue detuning.
pub fn calibrate_occupancy(
    area_detected: f64,
    calib: &CalibrationChain,
    dev: &DeviceParams,
    probe: &ProbeState,
) -> Result<f64> {
    if !(area_detected >= 0.0) {
        return Err(Error::domain("calibrate_occupancy", format!("area must be >= 0, got {area_detected}")));
    }
    let gain = total_efficiency(calib) * transduction_rate(dev, probe) * calib.beta;
    if !(gain > 0.0) {
        return Err(Error::Degenerate { op: "calibrate_occupancy", msg: "zero detection gain".into() });
    }
    let sideband = area_detected / gain;
    if probe.detuning >= 0.0 {
        return Ok(sideband);
    }
    let n = sideband - 1.0;
    if n < -NEGATIVE_OCCUPANCY_TOLERANCE {
        return Err(Error::NegativeOccupancy(n));
    }
    Ok(n)
}

/// Converts a shot-noise-referenced spectrum to detected W/Hz.
pub fn to_watts(spec: &Spectrum, calib: &CalibrationChain, dev: &DeviceParams) -> Result<Spectrum> {
    match spec.unit() {
        SpectrumUnit::ShotNoise => {
            spec.rescaled(calib.shot_noise_level(dev.optical_frequency()), SpectrumUnit::WattsPerHz)
        }
        SpectrumUnit::WattsPerHz => Ok(spec.clone()),
        SpectrumUnit::MetersSquaredPerHz => Err(Error::validation("unit", "cannot convert displacement PSD to W/Hz")),
    }
}

/// Converts a W/Hz spectrum to shot-noise units.
pub fn to_shot_noise(spec: &Spectrum, calib: &CalibrationChain, dev: &DeviceParams) -> Result<Spectrum> {
    match spec.unit() {
        SpectrumUnit::WattsPerHz => {
            spec.rescaled(1.0 / calib.shot_noise_level(dev.optical_frequency()), SpectrumUnit::ShotNoise)
        }
        SpectrumUnit::ShotNoise => Ok(spec.clone()),
        SpectrumUnit::MetersSquaredPerHz => {
            Err(Error::validation("unit", "cannot convert displacement PSD to shot noise"))
        }
    }
}

/// Displacement PSD x_zpf²·S_bb from a shot-noise spectrum with the given
/// floor removed. The vacuum part of a Stokes line is kept.
pub fn to_displacement(
    spec: &Spectrum,
    floor: f64,
    calib: &CalibrationChain,
    dev: &DeviceParams,
    probe: &ProbeState,
    x_zpf: f64,
) -> Result<Spectrum> {
    if spec.unit() != SpectrumUnit::ShotNoise {
        return Err(Error::validation("unit", "displacement conversion needs a shot-noise spectrum"));
    }
    let gain = total_efficiency(calib) * transduction_rate(dev, probe) * calib.beta;
    if !(gain > 0.0) {
        return Err(Error::Degenerate { op: "to_displacement", msg: "zero detection gain".into() });
    }
    let k = x_zpf * x_zpf / gain;
    let v = spec.values().iter().map(|s| (s - floor) * k).collect();
    let mut out = spec.with_values(v)?;
    out = out.rescaled(1.0, SpectrumUnit::MetersSquaredPerHz)?;
    Ok(out)
}

/// Synthetic calibration measurement in W/Hz: a Gaussian tone of power
/// `p_cal` and FWHM `tone_width` at `tone_center` seen through a receiver
/// with efficiency η_VC·η_det.
pub fn calibration_tone_psd(
    calib: &CalibrationChain,
    optical_frequency: f64,
    p_cal: f64,
    tone_center: f64,
    tone_width: f64,
    grid: &FrequencyGrid,
) -> Result<Spectrum> {
    calib.validate()?;
    let sn = calib.shot_noise_level(optical_frequency);
    let photon = PLANCK * optical_frequency;
    let eta = calib.eta_vc * calib.eta_det;
    let values = (0..grid.points)
        .map(|i| {
            let s_cal = p_cal * gaussian_profile(grid.frequency(i) - tone_center, tone_width);
            calib.s_dark + sn * (1.0 + eta * s_cal / photon)
        })
        .collect();
    Spectrum::new(grid.start, grid.step, values, grid.step, SpectrumUnit::WattsPerHz)
}

/// η_VC·η_det = (hf_o/P_cal)·∫(S_II − S_noise)/(S_noise − S_dark) df over the
/// spectrum window.
pub fn receiver_efficiency(
    s_ii: &Spectrum,
    s_noise: f64,
    s_dark: f64,
    p_cal: f64,
    optical_frequency: f64,
) -> Result<f64> {
    if !(p_cal > 0.0) {
        return Err(Error::domain("receiver_efficiency", "P_cal must be > 0"));
    }
    let gap = s_noise - s_dark;
    if !(gap > 1e-12 * s_noise.abs()) || gap <= 0.0 {
        return Err(Error::Degenerate { op: "receiver_efficiency", msg: "S_noise - S_dark at numerical floor".into() });
    }
    let integral = s_ii.area_above(s_noise) / gap;
    let eta = PLANCK * optical_frequency / p_cal * integral;
    if eta > 1.0 + 1e-6 {
        return Err(Error::OutOfRange { quantity: "eta_vc_eta_det", value: eta });
    }
    Ok(eta)
}

/// Applies finite-averaging noise: each bin is scaled by 1 + ε/√n_avg with
/// ε standard normal. A Gaussian approximation to averaged periodogram
/// statistics, reasonable for n_avg >= 10.
pub fn add_measurement_noise(spec: &Spectrum, seed: u64, n_avg: u64) -> Result<Spectrum> {
    if n_avg == 0 {
        return Err(Error::domain("add_measurement_noise", "n_avg must be >= 1"));
    }
    if n_avg < 10 {
        log::warn!("Gaussian averaging noise is approximate for n_avg = {n_avg} < 10");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rel = 1.0 / (n_avg as f64).sqrt();
    let v = spec
        .values()
        .iter()
        .map(|&x| {
            let e: f64 = StandardNormal.sample(&mut rng);
            x * (1.0 + rel * e)
        })
        .collect();
    spec.with_values(v)
}

/// Averaging noise applied to synthetic spectra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub seed: u64,
    /// Number of averaged periodograms.
    pub n_avg: u64,
}

/// Heterodyne spectra for a list of probe states.
///
/// Point `i` draws its noise from [`parallel::derive_seed`]`(seed, i)`, so the
/// output is identical under parallel and sequential execution.
pub fn simulate_series(
    dev: &DeviceParams,
    probes: &[ProbeState],
    bath: &BathModel,
    calib: &CalibrationChain,
    grid: &FrequencyGrid,
    noise: Option<NoiseSpec>,
    exec: Execution,
) -> Result<Vec<Spectrum>> {
    parallel::map_range(exec, probes.len(), |i| {
        let clean = heterodyne_psd(dev, &probes[i], bath, calib, grid)?;
        match noise {
            Some(n) => add_measurement_noise(&clean, parallel::derive_seed(n.seed, i as u64), n.n_avg),
            None => Ok(clean),
        }
    })
    .into_iter()
    .collect()
}
