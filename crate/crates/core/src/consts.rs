//! Physical constants (SI).

use std::f64::consts::PI;

/// Vacuum permeability (H/m).
pub const MU0: f64 = 4.0 * PI * 1e-7;
/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Free-space wave impedance (ohm).
pub const ETA0: f64 = 376.730_313_668;
/// Speed of light (m/s).
pub const C0: f64 = 299_792_458.0;

/// Free-space wavelength at `freq` Hz.
pub fn wavelength(freq: f64) -> f64 {
    C0 / freq
}

/// Power ratio to decibels.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Decibels to power ratio.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Wraps an angle in degrees into `[-180, 180)`.
pub fn wrap_deg(x: f64) -> f64 {
    let r = (x + 180.0).rem_euclid(360.0) - 180.0;
    if r >= 180.0 {
        r - 360.0
    } else {
        r
    }
}
