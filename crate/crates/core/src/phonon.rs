//! Three-phonon scattering model of the optical-absorption bath.
//!
//! A discrete toy model (two high-frequency modes ω₁ − ω₂ = ω_m exchanging
//! quanta with the mechanical mode) and the continuum version in which a
//! power-law density of modes above a cutoff ω_c is thermalised at T_p.

use serde::{Deserialize, Serialize};

use crate::constants::H_OVER_KB;
use crate::numerics::quadrature::{integrate, Tolerance};
use crate::numerics::special::{gamma, riemann_zeta, upper_incomplete_gamma};
use crate::physics::bose_einstein;
use crate::{Error, Result};

/// Two high-frequency modes coupled to the mechanical mode through the
/// anharmonic constant `a` (Hz); ω₁ − ω₂ = ω_m.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyThreePhonon {
    pub omega_1: f64,
    pub omega_2: f64,
    pub omega_m: f64,
    pub a: f64,
    pub t_p: f64,
}

impl ToyThreePhonon {
    /// Builds the model with ω₂ = ω₁ − ω_m.
    pub fn new(omega_1: f64, omega_m: f64, a: f64, t_p: f64) -> Result<Self> {
        let m = ToyThreePhonon { omega_1, omega_2: omega_1 - omega_m, omega_m, a, t_p };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_2 > 0.0 && self.omega_1 > self.omega_2) {
            return Err(Error::validation("toy.omega", "need omega_1 > omega_2 > 0"));
        }
        if ((self.omega_1 - self.omega_2 - self.omega_m) / self.omega_m).abs() > 1e-6 {
            return Err(Error::validation("toy.omega_m", "omega_1 - omega_2 must equal omega_m to 1 ppm"));
        }
        if !(self.a > 0.0) {
            return Err(Error::validation("toy.a", "anharmonic constant must be > 0"));
        }
        if !(self.t_p >= 0.0) {
            return Err(Error::validation("toy.t_p", "temperature must be >= 0"));
        }
        Ok(())
    }

    /// Thermal occupancies (n₁, n₂) at T_p.
    pub fn occupancies(&self) -> Result<(f64, f64)> {
        Ok((bose_einstein(self.omega_1, self.t_p)?, bose_einstein(self.omega_2, self.t_p)?))
    }

    /// n₂ − n₁ evaluated without cancellation when ω_m ≪ ω₁.
    fn occupancy_gap(&self) -> f64 {
        if self.t_p == 0.0 {
            return 0.0;
        }
        let x1 = H_OVER_KB * self.omega_1 / self.t_p;
        let x2 = H_OVER_KB * self.omega_2 / self.t_p;
        // (e^{x1} − e^{x2}) / ((e^{x1} − 1)(e^{x2} − 1))
        let num = (x1 - x2).exp_m1();
        num / (x1.exp_m1() * (-x2).exp_m1().abs())
    }
}

/// Scattering rates (Γ₊, Γ₋) into and out of the mechanical mode for
/// explicit occupancies: Γ₊ = A(n_m + 1)(n₂ + 1)n₁, Γ₋ = A(n₁ + 1)n_m n₂.
pub fn scattering_rates(a: f64, n_1: f64, n_2: f64, n_m: f64) -> (f64, f64) {
    (a * (n_m + 1.0) * (n_2 + 1.0) * n_1, a * (n_1 + 1.0) * n_m * n_2)
}

/// Toy-model rates with both high-frequency modes thermal at T_p.
pub fn toy_rates(model: &ToyThreePhonon, n_m: f64) -> Result<(f64, f64)> {
    if !(n_m >= 0.0) {
        return Err(Error::domain("toy_rates", format!("n_m must be >= 0, got {n_m}")));
    }
    let (n1, n2) = model.occupancies()?;
    Ok(scattering_rates(model.a, n1, n2, n_m))
}

/// Effective bath for explicit occupancies. The rate equation
/// ṅ_m = Γ₊ − Γ₋ = −A(n₂ − n₁)n_m + A(n₂ + 1)n₁ relaxes at γ_p = A(n₂ − n₁)
/// towards n_p = n₁(n₂ + 1)/(n₂ − n₁).
pub fn effective_bath_from_occupancies(a: f64, n_1: f64, n_2: f64) -> Result<(f64, f64)> {
    let gap = n_2 - n_1;
    if gap == 0.0 {
        return Err(Error::Degenerate { op: "toy_effective_bath", msg: "n_1 == n_2".into() });
    }
    Ok((n_1 * (n_2 + 1.0) / gap, a * gap))
}

/// Effective bath (n_p, γ_p) of the thermal toy model. For thermal modes
/// n_p equals the Bose-Einstein occupancy at (ω_m, T_p).
pub fn toy_effective_bath(model: &ToyThreePhonon) -> Result<(f64, f64)> {
    let (n1, n2) = model.occupancies()?;
    let gap = model.occupancy_gap();
    if gap == 0.0 || n1 == n2 {
        return Err(Error::Degenerate { op: "toy_effective_bath", msg: "n_1 == n_2 (T_p = 0?)".into() });
    }
    Ok((n1 * (n2 + 1.0) / gap, model.a * gap))
}

/// Product of mode density and matrix element in the continuum model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrand {
    /// ρ(ω)A(ω, ω_m) ∝ ω^a.
    #[default]
    PowerLaw,
    /// ρ(ω)A(ω, ω_m) ∝ ω_m (ω_m + ω) ω³ (isotropic elastic continuum); the
    /// exponent `a` is ignored.
    ContinuumElastic,
}

/// Continuum of high-frequency modes above `omega_c` (Hz).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuumBath {
    pub a: f64,
    pub omega_c: f64,
    /// Overall rate normalisation; γ_p = prefactor · ω_m · T_p^{a+1} · I(a, x_c).
    pub prefactor: f64,
    #[serde(default)]
    pub integrand: Integrand,
}

impl ContinuumBath {
    pub fn new(a: f64, omega_c: f64, prefactor: f64) -> Result<Self> {
        let b = ContinuumBath { a, omega_c, prefactor, integrand: Integrand::PowerLaw };
        b.validate()?;
        Ok(b)
    }

    /// Parameterised by the cutoff temperature T_c = hω_c/k_B instead of the
    /// cutoff frequency. The two parameterisations are never cross-checked
    /// against each other.
    pub fn from_cutoff_temperature(a: f64, t_c: f64, prefactor: f64) -> Result<Self> {
        Self::new(a, t_c / H_OVER_KB, prefactor)
    }

    pub fn cutoff_temperature(&self) -> f64 {
        H_OVER_KB * self.omega_c
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 1.0) && self.integrand == Integrand::PowerLaw {
            return Err(Error::validation("bath.a", format!("exponent must be > 1, got {}", self.a)));
        }
        if !(self.omega_c > 0.0) {
            return Err(Error::validation("bath.omega_c", "cutoff must be > 0"));
        }
        if !(self.prefactor >= 0.0) {
            return Err(Error::validation("bath.prefactor", "prefactor must be >= 0"));
        }
        Ok(())
    }

    /// x_c = hω_c/(k_B T_p).
    pub fn cutoff_x(&self, t_p: f64) -> f64 {
        self.cutoff_temperature() / t_p
    }

    /// Amplitude A of the activated form A·T_p·exp(−T_c/T_p) that the low-T
    /// asymptote reduces to for a mechanical frequency `omega_m`.
    pub fn activated_amplitude(&self, omega_m: f64) -> f64 {
        self.prefactor * omega_m * self.cutoff_temperature().powf(self.effective_exponent())
    }

    fn effective_exponent(&self) -> f64 {
        match self.integrand {
            Integrand::PowerLaw => self.a,
            Integrand::ContinuumElastic => 4.0,
        }
    }
}

/// h(x) = x² e^{−x}/(1 − e^{−x})², smooth with h(0) = 1.
fn regular_part(x: f64) -> f64 {
    if x < 1e-8 {
        return 1.0 - x * x / 12.0;
    }
    let r = x / (-(-x).exp_m1());
    r * r * (-x).exp()
}

/// Bose weight integrand x^a e^x/(e^x − 1)², written to avoid overflow.
fn bose_weight(a: f64, x: f64) -> f64 {
    let d = -(-x).exp_m1();
    x.powf(a) * (-x).exp() / (d * d)
}

const TAIL_START: f64 = 50.0;
const QUAD_TOL: f64 = 1e-12;

/// ∫_{z}^∞ x^a e^x/(e^x − 1)² dx for z >= 50 through the expansion
/// e^x/(e^x − 1)² = Σ_k k e^{−kx}.
fn tail_series(a: f64, z: f64) -> Result<f64> {
    let mut sum = 0.0;
    for k in 1..=4 {
        let kf = k as f64;
        let term = kf * upper_incomplete_gamma(a + 1.0, kf * z)? / kf.powf(a + 1.0);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    Ok(sum)
}

/// I(a, x_c) = ∫_{x_c}^∞ x^a e^x/(e^x − 1)² dx.
///
/// Gauss-Kronrod on [x_c, 50] (split at max(x_c, 1), with u = x^{a−1}
/// removing the x^{a−2} behaviour near the origin) plus the incomplete-gamma
/// series for the exponential tail.
pub fn bose_integral(a: f64, x_c: f64) -> Result<f64> {
    if !(x_c >= 0.0) {
        return Err(Error::domain("bose_integral", format!("x_c must be >= 0, got {x_c}")));
    }
    if x_c == 0.0 && !(a > 1.0) {
        return Err(Error::domain("bose_integral", format!("integral diverges for a <= 1 at x_c = 0 (a = {a})")));
    }
    if x_c >= TAIL_START {
        return tail_series(a, x_c);
    }
    let tol = Tolerance::relative(QUAD_TOL);
    let mid = x_c.max(1.0);
    let mut total = 0.0;
    if x_c < mid {
        if a > 1.0 {
            let p = a - 1.0;
            let u_lo = x_c.powf(p);
            let u_hi = mid.powf(p);
            let inv = 1.0 / p;
            let r = integrate(|u: f64| regular_part(u.powf(inv)), u_lo, u_hi, tol)?;
            total += r.value / p;
        } else {
            total += integrate(|x| bose_weight(a, x), x_c, mid, tol)?.value;
        }
    }
    total += integrate(|x| bose_weight(a, x), mid, TAIL_START, tol)?.value;
    total += tail_series(a, TAIL_START)?;
    Ok(total)
}

/// The x_c → 0 limit a·Γ(a)·ζ(a) of [`bose_integral`].
pub fn bose_integral_at_zero(a: f64) -> Result<f64> {
    if !(a > 1.0) {
        return Err(Error::domain("bose_integral_at_zero", format!("requires a > 1, got {a}")));
    }
    Ok(a * gamma(a) * riemann_zeta(a)?)
}

fn check_temperature(op: &'static str, t_p: f64) -> Result<()> {
    if !(t_p > 0.0) || !t_p.is_finite() {
        return Err(Error::domain(op, format!("T_p must be > 0, got {t_p}")));
    }
    Ok(())
}

/// Damping rate γ_p(T_p) from the full continuum integral.
pub fn gamma_p_integral(bath: &ContinuumBath, omega_m: f64, t_p: f64) -> Result<f64> {
    check_temperature("gamma_p_integral", t_p)?;
    let x_c = bath.cutoff_x(t_p);
    match bath.integrand {
        Integrand::PowerLaw => Ok(bath.prefactor * omega_m * t_p.powf(bath.a + 1.0) * bose_integral(bath.a, x_c)?),
        Integrand::ContinuumElastic => {
            let x_m = H_OVER_KB * omega_m / t_p;
            let i = bose_integral(4.0, x_c)? + x_m * bose_integral(3.0, x_c)?;
            Ok(bath.prefactor * omega_m * t_p.powi(5) * i)
        }
    }
}

/// Activated low-temperature asymptote prefactor·ω_m·T_p^{a+1}·x_c^a·e^{−x_c},
/// i.e. A·T_p·exp(−T_c/T_p). Zero for T_p <= 0.
pub fn gamma_p_low_t(bath: &ContinuumBath, omega_m: f64, t_p: f64) -> f64 {
    if !(t_p > 0.0) {
        return 0.0;
    }
    let t_c = bath.cutoff_temperature();
    bath.activated_amplitude(omega_m) * t_p * (-t_c / t_p).exp()
}

/// High-temperature power law prefactor·ω_m·T_p^{a+1}·a·Γ(a)·ζ(a).
pub fn gamma_p_high_t(bath: &ContinuumBath, omega_m: f64, t_p: f64) -> Result<f64> {
    check_temperature("gamma_p_high_t", t_p)?;
    match bath.integrand {
        Integrand::PowerLaw => Ok(bath.prefactor * omega_m * t_p.powf(bath.a + 1.0) * bose_integral_at_zero(bath.a)?),
        Integrand::ContinuumElastic => {
            let x_m = H_OVER_KB * omega_m / t_p;
            let i = bose_integral_at_zero(4.0)? + x_m * bose_integral_at_zero(3.0)?;
            Ok(bath.prefactor * omega_m * t_p.powi(5) * i)
        }
    }
}
