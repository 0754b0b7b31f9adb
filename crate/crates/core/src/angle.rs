//! Electrical-angle helpers.

use std::f64::consts::{PI, TAU};

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_half_open(angle: f64) -> f64 {
    let r = (angle + PI).rem_euclid(TAU);
    // rem_euclid can round up to the modulus for tiny negative inputs.
    if r >= TAU {
        -PI
    } else {
        r - PI
    }
}

/// Wraps an angle difference into `(-pi, pi]`.
pub fn wrap_difference(delta: f64) -> f64 {
    let w = wrap_half_open(delta);
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Parses an angle literal: plain radians (`0.314`) or a multiple of pi
/// (`0.1pi`, `-pi`, `pi/3` is not accepted).
pub fn parse_angle(text: &str) -> Option<f64> {
    let t = text.trim();
    let lower = t.to_ascii_lowercase();
    if let Some(coeff) = lower.strip_suffix("pi") {
        let coeff = coeff.trim().trim_end_matches('*');
        let c = match coeff {
            "" | "+" => 1.0,
            "-" => -1.0,
            other => other.parse::<f64>().ok()?,
        };
        Some(c * PI)
    } else {
        lower.parse::<f64>().ok()
    }
}
