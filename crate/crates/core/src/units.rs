//! Unit conversions shared by the radio and geometry code.

use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// dBm to milliwatts.
#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

#[inline]
pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}

#[inline]
pub fn deg(d: f64) -> f64 {
    d.to_radians()
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(TWO_PI);
    if r > PI {
        r -= TWO_PI;
    }
    r
}
