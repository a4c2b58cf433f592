use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Nuttall coefficients, all-positive centered form.
pub const NUTTALL: [f64; 4] = [0.338946, 0.481973, 0.161054, 0.018027];
/// Blackman coefficients, centered form.
pub const BLACKMAN: [f64; 3] = [0.42, 0.5, 0.08];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Rectangular,
    Hanning,
    Blackman,
    Nuttall,
}

impl WindowKind {
    /// Window value at normalized position `u` in [-1, 1], peak at `u = 0`.
    pub fn at(self, u: f64) -> f64 {
        if u.abs() > 1.0 {
            return 0.0;
        }
        match self {
            WindowKind::Rectangular => 1.0,
            WindowKind::Hanning => 0.5 + 0.5 * (PI * u).cos(),
            WindowKind::Blackman => BLACKMAN[0] + BLACKMAN[1] * (PI * u).cos() + BLACKMAN[2] * (2.0 * PI * u).cos(),
            WindowKind::Nuttall => {
                NUTTALL[0]
                    + NUTTALL[1] * (PI * u).cos()
                    + NUTTALL[2] * (2.0 * PI * u).cos()
                    + NUTTALL[3] * (3.0 * PI * u).cos()
            }
        }
    }

    /// Derivative of [`WindowKind::at`] with respect to `u`.
    pub fn derivative_at(self, u: f64) -> f64 {
        if u.abs() > 1.0 {
            return 0.0;
        }
        match self {
            WindowKind::Rectangular => 0.0,
            WindowKind::Hanning => -0.5 * PI * (PI * u).sin(),
            WindowKind::Blackman => -BLACKMAN[1] * PI * (PI * u).sin() - BLACKMAN[2] * 2.0 * PI * (2.0 * PI * u).sin(),
            WindowKind::Nuttall => {
                -NUTTALL[1] * PI * (PI * u).sin()
                    - NUTTALL[2] * 2.0 * PI * (2.0 * PI * u).sin()
                    - NUTTALL[3] * 3.0 * PI * (3.0 * PI * u).sin()
            }
        }
    }
}

impl fmt::Display for WindowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WindowKind::Rectangular => "rectangular",
            WindowKind::Hanning => "hanning",
            WindowKind::Blackman => "blackman",
            WindowKind::Nuttall => "nuttall",
        };
        f.write_str(s)
    }
}

impl FromStr for WindowKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "rectangular" | "rect" => Ok(WindowKind::Rectangular),
            "hanning" | "hann" => Ok(WindowKind::Hanning),
            "blackman" => Ok(WindowKind::Blackman),
            "nuttall" => Ok(WindowKind::Nuttall),
            other => Err(Error::invalid(format!("unknown window '{other}'"))),
        }
    }
}

/// Centered window of `len` samples.
///
/// Sample `n` sits at `u = 2 (n - (len - 1) / 2) / len`, so an even-length
/// Hann window is constant-overlap-add at hop `len / 2`.
pub fn window(kind: WindowKind, len: usize) -> Vec<f64> {
    let c = (len as f64 - 1.0) / 2.0;
    let half = len as f64 / 2.0;
    (0..len).map(|n| kind.at((n as f64 - c) / half)).collect()
}

/// Window sampled at arbitrary offsets `t` (seconds) with half-width `half` (seconds).
pub fn window_at_offsets(kind: WindowKind, offsets: &[f64], half: f64) -> Vec<f64> {
    offsets.iter().map(|&t| kind.at(t / half)).collect()
}
