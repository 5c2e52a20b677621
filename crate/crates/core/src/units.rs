//! Unit conventions.
//!
//! Energies are wavenumbers in cm⁻¹ and times are in ps. With ħ absorbed, a
//! level of energy `E` accumulates the phase `2π·c·E·t` where `c` is the speed
//! of light in cm/ps.

use std::f64::consts::PI;

/// Speed of light in cm/ps.
pub const SPEED_OF_LIGHT_CM_PER_PS: f64 = 0.029_979_245_8;

/// Angular frequency (rad/ps) of an energy given in cm⁻¹.
#[inline]
pub fn angular_frequency(energy_cm1: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT_CM_PER_PS * energy_cm1
}

/// Phase accumulated by energy `energy_cm1` over `t_ps`.
#[inline]
pub fn phase(energy_cm1: f64, t_ps: f64) -> f64 {
    angular_frequency(energy_cm1) * t_ps
}

/// Oscillation period (ps) of an energy gap given in cm⁻¹.
pub fn period_ps(gap_cm1: f64) -> f64 {
    1.0 / (SPEED_OF_LIGHT_CM_PER_PS * gap_cm1)
}

pub const FS_PER_PS: f64 = 1000.0;
