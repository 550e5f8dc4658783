//! Heterodyne noise spectra: synthesis, lineshapes, file format and the
//! receiver calibration chain.

pub mod heterodyne;
pub mod lineshape;
pub mod spectrum;

pub use heterodyne::{
    add_measurement_noise, calibrate_occupancy, calibration_tone_psd, fiber_coupling_efficiency, heterodyne_psd,
    receiver_efficiency, sideband_line, simulate_series, to_displacement, to_shot_noise, to_watts, total_efficiency,
    transduction_rate, CalibrationChain, FrequencyGrid, NoiseSpec, SidebandLine, DEFAULT_BEAT_FREQUENCY, DEFAULT_X_ZPF,
};
pub use lineshape::{gaussian_profile, lorentzian_psd, voigt_fwhm, voigt_profile, voigt_psd, LineshapeParams};
pub use spectrum::{ProbeMetadata, Spectrum, SpectrumUnit};
