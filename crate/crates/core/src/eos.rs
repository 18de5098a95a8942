//! Stiffened-gas equation of state in Lagrangian (specific volume) form.
//!
//! All quantities are per unit mass: `v` is specific volume, `e_total` is
//! specific total energy, `u` is velocity.

use thiserror::Error;

/// Errors raised by the checked EOS evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EosError {
    #[error("specific volume must be positive, got {0}")]
    NonPositiveVolume(f64),
    #[error("p + pi must be positive, got p = {p}, pi = {pi}")]
    NonPositiveStiffenedPressure { p: f64, pi: f64 },
    #[error("adiabatic index must exceed 1, got {0}")]
    InvalidGamma(f64),
    #[error("stiffness constant must be finite and non-negative, got {0}")]
    InvalidStiffness(f64),
    #[error("material colour must be 0 or 1, got {0}")]
    InvalidColour(u8),
    #[error("non-finite input to EOS evaluation")]
    NonFinite,
}

/// Per-cell material constants. Fixed for the whole run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    gamma: f64,
    pi: f64,
    colour: u8,
}

impl MaterialParams {
    pub fn new(gamma: f64, pi: f64, colour: u8) -> Result<Self, EosError> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(EosError::InvalidGamma(gamma));
        }
        if !(pi.is_finite() && pi >= 0.0) {
            return Err(EosError::InvalidStiffness(pi));
        }
        if colour > 1 {
            return Err(EosError::InvalidColour(colour));
        }
        Ok(Self { gamma, pi, colour })
    }

    /// Ideal gas (`pi = 0`) with colour 0.
    pub fn ideal(gamma: f64) -> Result<Self, EosError> {
        Self::new(gamma, 0.0, 0)
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn pi(&self) -> f64 {
        self.pi
    }

    #[inline]
    pub fn colour(&self) -> u8 {
        self.colour
    }

    /// Unchecked `e = v (p + gamma pi) / (gamma - 1)`.
    #[inline]
    pub fn energy_raw(&self, v: f64, p: f64) -> f64 {
        v * (p + self.gamma * self.pi) / (self.gamma - 1.0)
    }

    /// Unchecked inverse: pressure from specific volume and internal energy.
    #[inline]
    pub fn pressure_raw(&self, v: f64, e_internal: f64) -> f64 {
        (self.gamma - 1.0) * e_internal / v - self.gamma * self.pi
    }

    /// Unchecked Lagrangian wavespeed squared `gamma (p + pi) / v`.
    #[inline]
    pub fn wavespeed_sq_raw(&self, v: f64, p: f64) -> f64 {
        self.gamma * (p + self.pi) / v
    }

    fn check_state(&self, v: f64, p: f64) -> Result<(), EosError> {
        if !(v.is_finite() && p.is_finite()) {
            return Err(EosError::NonFinite);
        }
        if v <= 0.0 {
            return Err(EosError::NonPositiveVolume(v));
        }
        if p + self.pi <= 0.0 {
            return Err(EosError::NonPositiveStiffenedPressure { p, pi: self.pi });
        }
        Ok(())
    }
}

/// Specific internal energy.
pub fn internal_energy(v: f64, p: f64, mat: &MaterialParams) -> Result<f64, EosError> {
    mat.check_state(v, p)?;
    Ok(mat.energy_raw(v, p))
}

/// Pressure from specific volume, specific total energy and velocity.
pub fn pressure_from_conserved(
    v: f64,
    e_total: f64,
    u: f64,
    mat: &MaterialParams,
) -> Result<f64, EosError> {
    if !(v.is_finite() && e_total.is_finite() && u.is_finite()) {
        return Err(EosError::NonFinite);
    }
    if v <= 0.0 {
        return Err(EosError::NonPositiveVolume(v));
    }
    let p = mat.pressure_raw(v, e_total - 0.5 * u * u);
    if p + mat.pi <= 0.0 {
        return Err(EosError::NonPositiveStiffenedPressure { p, pi: mat.pi });
    }
    Ok(p)
}

/// Squared Lagrangian wavespeed `a^2 = gamma (p + pi) / v`.
pub fn wavespeed_sq(v: f64, p: f64, mat: &MaterialParams) -> Result<f64, EosError> {
    mat.check_state(v, p)?;
    Ok(mat.wavespeed_sq_raw(v, p))
}
