//! Unit helpers. Times are in microseconds and angular frequencies in
//! radians per microsecond, so `mhz(1.0)` is 2π·1 MHz.

use std::f64::consts::TAU;

pub const TWO_PI: f64 = TAU;

/// Angular frequency for a frequency given in MHz.
pub fn mhz(f: f64) -> f64 {
    TAU * f
}

pub fn ghz(f: f64) -> f64 {
    TAU * 1.0e3 * f
}

pub fn khz(f: f64) -> f64 {
    TAU * 1.0e-3 * f
}

/// Frequency in MHz for an angular frequency.
pub fn to_mhz(omega: f64) -> f64 {
    omega / TAU
}

pub fn to_ghz(omega: f64) -> f64 {
    omega / (TAU * 1.0e3)
}
