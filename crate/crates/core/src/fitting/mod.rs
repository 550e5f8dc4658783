//! Parameter inference: lineshapes, detuning series, g₀, power laws and the
//! two-bath cooling model.

pub mod bath;
pub mod detuning;
pub mod lineshape;
pub mod linewidth;
pub mod lsq;
pub mod power_law;
mod result;

pub use bath::{fit_bath_model, BathFit, BathFitOptions, NpLaw};
pub use detuning::{
    backaction_ratio, fit_area_vs_detuning, fit_voigt_detuning_series, transduction_envelope, AreaDetuningFit,
    DetuningSeriesFit,
};
pub use lineshape::{fit_lorentzian, fit_lorentzian_batch, fit_voigt, fit_voigt_batch, LineshapeFit, VoigtConstraint};
pub use linewidth::{fit_g0_from_linewidths, G0Fit};
pub use lsq::{least_squares, LsqOptions, LsqOutcome};
pub use power_law::{fit_power_law, PowerLawFit};
pub use result::{CoolingCurvePoint, FitResult};
