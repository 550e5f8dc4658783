//! Physical constants (exact SI values since the 2019 redefinition).

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// h/k_B in K/Hz: multiply an ordinary frequency to get its quantum
/// temperature scale.
pub const H_OVER_KB: f64 = PLANCK / BOLTZMANN;

pub const TWO_PI: f64 = std::f64::consts::TAU;
