//! Temporal envelopes used to shape the noise component of the excitation.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::signal::{analytic_signal, fft, ifft, interp_linear, Complex64};

pub const AMPLITUDE_HALF_WIDTH: usize = 10;
pub const TRUE_ENVELOPE_WEIGHT: f64 = 10.0;
pub const TRUE_ENVELOPE_MAX_ITER: usize = 50;
/// 0.1 dB expressed in nepers of amplitude.
pub const TRUE_ENVELOPE_TOL: f64 = 0.1 / 20.0 * std::f64::consts::LN_10;
const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeKind {
    Amplitude,
    Hilbert,
    Triangular,
    True,
    None,
}

impl fmt::Display for EnvelopeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvelopeKind::Amplitude => "amplitude",
            EnvelopeKind::Hilbert => "hilbert",
            EnvelopeKind::Triangular => "triangular",
            EnvelopeKind::True => "true",
            EnvelopeKind::None => "none",
        })
    }
}

impl FromStr for EnvelopeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amplitude" => Ok(EnvelopeKind::Amplitude),
            "hilbert" => Ok(EnvelopeKind::Hilbert),
            "triangular" => Ok(EnvelopeKind::Triangular),
            "true" => Ok(EnvelopeKind::True),
            "none" => Ok(EnvelopeKind::None),
            other => Err(Error::invalid(format!("unknown envelope kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalEnvelope {
    pub values: Vec<f64>,
    pub kind: EnvelopeKind,
}

impl TemporalEnvelope {
    fn new(values: Vec<f64>, kind: EnvelopeKind) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite() && *v >= 0.0));
        TemporalEnvelope { values, kind }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Gain curve scaled to unit mean square, so modulated unit-variance noise
    /// keeps its energy. An all-zero envelope gives unit gain.
    pub fn modulation(&self) -> Vec<f64> {
        let ms = self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len().max(1) as f64;
        if ms <= 0.0 {
            return vec![1.0; self.values.len()];
        }
        let g = 1.0 / ms.sqrt();
        self.values.iter().map(|v| v * g).collect()
    }
}

/// Moving average of `|v|` over `2n + 1` samples, zero-padded at the edges.
pub fn amplitude_envelope(frame: &[f64], n: usize) -> Result<TemporalEnvelope> {
    if frame.len() <= 2 * n + 1 {
        return Err(Error::invalid("frame must be longer than the averaging window"));
    }
    let len = frame.len();
    let mut prefix = vec![0.0; len + 1];
    for (i, v) in frame.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v.abs();
    }
    let values = (0..len)
        .map(|i| {
            let lo = i.saturating_sub(n);
            let hi = (i + n + 1).min(len);
            ((prefix[hi] - prefix[lo]) / (2 * n + 1) as f64).max(0.0)
        })
        .collect();
    Ok(TemporalEnvelope::new(values, EnvelopeKind::Amplitude))
}

/// Amplitude envelope kept at `points` evenly spaced samples and linearly
/// interpolated back to the frame length.
pub fn amplitude_envelope_downsampled(frame: &[f64], n: usize, points: usize) -> Result<TemporalEnvelope> {
    if points < 2 {
        return Err(Error::invalid("need at least 2 envelope points"));
    }
    let full = amplitude_envelope(frame, n)?;
    let len = full.len();
    let step = (len - 1) as f64 / (points - 1) as f64;
    let coarse: Vec<f64> = (0..points)
        .map(|i| interp_linear(&full.values, i as f64 * step))
        .collect();
    let values = (0..len).map(|i| interp_linear(&coarse, i as f64 / step)).collect();
    Ok(TemporalEnvelope::new(values, EnvelopeKind::Amplitude))
}

/// Magnitude of the analytic signal.
pub fn hilbert_envelope(frame: &[f64]) -> Result<TemporalEnvelope> {
    let a = analytic_signal(frame)?;
    Ok(TemporalEnvelope::new(
        a.iter().map(|c| c.norm()).collect(),
        EnvelopeKind::Hilbert,
    ))
}

/// Symmetric triangle: 0 at `0.35 L`, 1 at `0.5 L`, 0 at `0.65 L`.
pub fn triangular_envelope(len: usize) -> Result<TemporalEnvelope> {
    if len < 4 {
        return Err(Error::invalid("triangular envelope needs at least 4 samples"));
    }
    let l = len as f64;
    let (a, b) = (0.35 * l, 0.65 * l);
    let c = 0.5 * (a + b);
    let values = (0..len)
        .map(|i| {
            let t = i as f64;
            if t <= a || t >= b {
                0.0
            } else if t <= c {
                (t - a) / (c - a)
            } else {
                (b - t) / (b - c)
            }
        })
        .collect();
    Ok(TemporalEnvelope::new(values, EnvelopeKind::Triangular))
}

/// Result of the iterative cepstral upper envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueEnvelope {
    /// Log-amplitude spectrum `S(k)` of the frame (floored).
    pub spectrum: Vec<f64>,
    /// Smoothed upper envelope `C(k)` in the same units.
    pub envelope: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub time: TemporalEnvelope,
}

fn lifter(log_spec: &[f64], order: usize) -> Vec<f64> {
    let n = log_spec.len();
    let mut buf: Vec<Complex64> = log_spec.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    ifft(&mut buf);
    for (q, v) in buf.iter_mut().enumerate() {
        if q.min(n - q) > order {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    fft(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// True envelope of a frame with an `N = L` point spectrum and cepstral order
/// `L / 4`, iterated until `C >= S - 0.1 dB` or `max_iter` is reached. The time
/// envelope is the rectified, centered real part of `w_f` times the inverse
/// transform of the final `M(k)`.
pub fn true_envelope(frame: &[f64], weight: f64, max_iter: usize) -> Result<TrueEnvelope> {
    let n = frame.len();
    if n < 8 {
        return Err(Error::invalid("true envelope needs at least 8 samples"));
    }
    let order = n / 4;
    let mut buf: Vec<Complex64> = frame.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft(&mut buf);
    let s: Vec<f64> = buf.iter().map(|c| c.norm().max(LOG_FLOOR).ln()).collect();
    let mut m = s.clone();
    let mut c = lifter(&m, order);
    let mut iterations = 1;
    let mut converged = false;
    loop {
        let gap = s.iter().zip(&c).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
        if gap < TRUE_ENVELOPE_TOL {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        m = s.iter().zip(&c).map(|(a, b)| a.max(*b)).collect();
        c = lifter(&m, order);
        iterations += 1;
    }
    let mut t: Vec<Complex64> = m.iter().map(|&v| Complex64::new(weight * v, 0.0)).collect();
    ifft(&mut t);
    let time = (0..n).map(|i| t[(i + n - n / 2) % n].re.abs()).collect();
    Ok(TrueEnvelope {
        spectrum: s,
        envelope: c,
        iterations,
        converged,
        time: TemporalEnvelope::new(time, EnvelopeKind::True),
    })
}

/// Envelope of `frame` for the given kind; `None` gives unit gain.
pub fn estimate(kind: EnvelopeKind, frame: &[f64]) -> Result<TemporalEnvelope> {
    match kind {
        EnvelopeKind::Amplitude => amplitude_envelope(frame, AMPLITUDE_HALF_WIDTH),
        EnvelopeKind::Hilbert => hilbert_envelope(frame),
        EnvelopeKind::Triangular => triangular_envelope(frame.len()),
        EnvelopeKind::True => Ok(true_envelope(frame, TRUE_ENVELOPE_WEIGHT, TRUE_ENVELOPE_MAX_ITER)?.time),
        EnvelopeKind::None => Ok(TemporalEnvelope::new(vec![1.0; frame.len()], EnvelopeKind::None)),
    }
}
