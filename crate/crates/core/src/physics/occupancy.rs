use crate::constants::H_OVER_KB;
use crate::{Error, Result};

/// Mean thermal occupancy 1/(exp(hf/k_BT) − 1) of a mode at ordinary
/// frequency `f` (Hz) and temperature `t` (K). Zero at T = 0.
pub fn bose_einstein(f: f64, t: f64) -> Result<f64> {
    if !(f > 0.0) || !f.is_finite() {
        return Err(Error::domain("bose_einstein", format!("frequency must be > 0, got {f}")));
    }
    if !(t >= 0.0) {
        return Err(Error::domain("bose_einstein", format!("temperature must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let x = H_OVER_KB * f / t;
    Ok(1.0 / x.exp_m1())
}

/// Temperature at which a mode at frequency `f` has occupancy `n`:
/// T = hf / (k_B ln(1 + 1/n)).
pub fn inverse_bose_einstein(f: f64, n: f64) -> Result<f64> {
    if !(f > 0.0) || !f.is_finite() {
        return Err(Error::domain("inverse_bose_einstein", format!("frequency must be > 0, got {f}")));
    }
    if !(n > 0.0) {
        return Err(Error::domain("inverse_bose_einstein", format!("occupancy must be > 0, got {n}")));
    }
    if n.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(H_OVER_KB * f / (1.0 / n).ln_1p())
}
