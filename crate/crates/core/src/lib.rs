//! Simulation and inference toolkit for cryogenic cavity-optomechanics
//! thermometry.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`] holds the numerical primitives (adaptive quadrature, special
//!   functions, the complex probability function, monotone splines).
//! * [`physics`] is the closed-form steady-state physics of the optomechanical
//!   system: occupancies, back-action damping, thresholds, asymmetry.
//! * [`phonon`] is the three-phonon bath model used for the absorption bath.
//! * [`spectra`] synthesises heterodyne noise spectra and implements the
//!   receiver calibration chain.
//! * [`fitting`] recovers physical parameters from spectra and derived series.
//!
//! All rates and frequencies are ordinary frequencies in Hz (the "/2π"
//! values); conversion to angular units happens inside the formulas that need
//! it.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod error;
pub mod fitting;
pub mod numerics;
pub mod parallel;
pub mod phonon;
pub mod physics;
pub mod spectra;
pub mod table;

pub use error::{Error, Result};
