//! Steady-state physics of the optomechanical system.

mod bath;
mod device;
mod occupancy;
pub(crate) mod optomech;

pub use bath::{mode_occupancy, occupancy_from_rates, sideband_asymmetry, BathModel, BathState, GammaPLaw, JitterLaw};
pub use device::{DeviceParams, ProbeState};
pub use occupancy::{bose_einstein, inverse_bose_einstein};
pub use optomech::{
    cavity_reflection, cooperativity, gamma_om, input_power_for_photons, intracavity_photons,
    self_oscillation_threshold,
};
