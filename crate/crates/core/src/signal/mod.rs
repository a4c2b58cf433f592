//! Signal containers, framing, windows and transforms shared by the analysis
//! and synthesis modules.

mod fft;
pub mod gen;
mod wav;
mod window;

use std::fmt;
use std::str::FromStr;

pub use fft::{analytic_signal, fft, fft_size, ifft, irfft, next_pow2, rfft};
pub use rustfft::num_complex::Complex64;
pub use wav::{read_wav, write_wav};
pub use window::{window, window_at_offsets, WindowKind, BLACKMAN, NUTTALL};

use crate::error::{Error, Result};

pub const DEFAULT_FRAME_SHIFT: f64 = 0.005;

/// Mono PCM signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    /// Samples must be finite. Peak normalization happens at load time, not here.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite sample at index {i}")));
        }
        Ok(Waveform { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn fs(&self) -> f64 {
        self.sample_rate as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64
    }

    /// Scaled copy with peak 1. Silent signals are returned unchanged.
    pub fn peak_normalized(&self) -> Waveform {
        let p = self.peak();
        if p == 0.0 {
            return self.clone();
        }
        Waveform {
            samples: self.samples.iter().map(|v| v / p).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Scaled copy with peak at most 1.
    pub fn limited(&self) -> Waveform {
        if self.peak() > 1.0 {
            self.peak_normalized()
        } else {
            self.clone()
        }
    }
}

/// Uniform analysis frame grid. Frame `n` is centered at `n * frame_shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGrid {
    pub frame_shift: f64,
    pub frame_length: f64,
    pub num_frames: usize,
}

impl FrameGrid {
    pub fn new(frame_shift: f64, frame_length: f64, num_frames: usize) -> Result<Self> {
        if !(frame_shift > 0.0 && frame_shift.is_finite()) {
            return Err(Error::invalid("frame shift must be positive"));
        }
        if !(frame_length >= frame_shift && frame_length.is_finite()) {
            return Err(Error::invalid("frame length must be at least the frame shift"));
        }
        Ok(FrameGrid {
            frame_shift,
            frame_length,
            num_frames,
        })
    }

    /// Grid covering `duration` seconds: `ceil(duration / frame_shift)` frames.
    pub fn for_duration(duration: f64, frame_shift: f64, frame_length: f64) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::EmptyInput);
        }
        let n = (duration / frame_shift - 1e-9).ceil().max(1.0) as usize;
        FrameGrid::new(frame_shift, frame_length, n)
    }

    pub fn for_waveform(w: &Waveform, frame_shift: f64, frame_length: f64) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::EmptyInput);
        }
        FrameGrid::for_duration(w.duration(), frame_shift, frame_length)
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.frame_shift
    }

    pub fn duration(&self) -> f64 {
        self.num_frames as f64 * self.frame_shift
    }

    pub fn frame_len_samples(&self, fs: f64) -> usize {
        (self.frame_length * fs).round().max(1.0) as usize
    }

    /// Frame shift in whole samples.
    pub fn hop_samples(&self, fs: f64) -> usize {
        (self.frame_shift * fs).round().max(1.0) as usize
    }

    /// Fractional frame index of time `t`, clamped to the grid.
    pub fn frame_pos(&self, t: f64) -> f64 {
        (t / self.frame_shift).clamp(0.0, self.num_frames.saturating_sub(1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackKind {
    ContF0,
    Mvf,
    Hnr,
    Cnm,
    Pdd,
    Other,
}

impl TrackKind {
    pub fn requires_positive(self) -> bool {
        matches!(self, TrackKind::ContF0 | TrackKind::Mvf)
    }
}

impl fmt::Display for TrackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TrackKind::ContF0 => "contf0",
            TrackKind::Mvf => "mvf",
            TrackKind::Hnr => "hnr",
            TrackKind::Cnm => "cnm",
            TrackKind::Pdd => "pdd",
            TrackKind::Other => "other",
        };
        f.write_str(s)
    }
}

impl FromStr for TrackKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "contf0" | "f0" => TrackKind::ContF0,
            "mvf" => TrackKind::Mvf,
            "hnr" => TrackKind::Hnr,
            "cnm" => TrackKind::Cnm,
            "pdd" => TrackKind::Pdd,
            "other" => TrackKind::Other,
            other => return Err(Error::invalid(format!("unknown track kind '{other}'"))),
        })
    }
}

/// Per-frame scalar parameter stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTrack {
    values: Vec<f64>,
    grid: FrameGrid,
    kind: TrackKind,
}

impl ParamTrack {
    pub fn new(values: Vec<f64>, grid: FrameGrid, kind: TrackKind) -> Result<Self> {
        Error::check_len(values.len(), grid.num_frames)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite {kind} value at frame {i}")));
        }
        if kind.requires_positive() {
            if let Some(i) = values.iter().position(|&v| v <= 0.0) {
                return Err(Error::invalid(format!(
                    "{kind} must be strictly positive (frame {i} = {})",
                    values[i]
                )));
            }
        }
        Ok(ParamTrack { values, grid, kind })
    }

    /// Constant track over `grid`.
    pub fn constant(value: f64, grid: FrameGrid, kind: TrackKind) -> Result<Self> {
        ParamTrack::new(vec![value; grid.num_frames], grid, kind)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn grid(&self) -> &FrameGrid {
        &self.grid
    }

    pub fn kind(&self) -> TrackKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Linear interpolation at time `t` seconds, held constant past the ends.
    pub fn at_time(&self, t: f64) -> f64 {
        interp_linear(&self.values, self.grid.frame_pos(t))
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        ParamTrack::new(values, self.grid, self.kind)
    }
}

impl std::ops::Index<usize> for ParamTrack {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Linear interpolation of `v` at fractional index `pos`, clamped to the ends.
pub fn interp_linear(v: &[f64], pos: f64) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    if pos <= 0.0 {
        return v[0];
    }
    let last = v.len() - 1;
    if pos >= last as f64 {
        return v[last];
    }
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    v[i] * (1.0 - f) + v[i + 1] * f
}

/// Catmull-Rom cubic interpolation of `x` at fractional sample `pos`; zero outside.
pub fn interp_cubic(x: &[f64], pos: f64) -> f64 {
    let i = pos.floor();
    let f = pos - i;
    let i = i as isize;
    let at = |k: isize| -> f64 {
        if k < 0 || k >= x.len() as isize {
            0.0
        } else {
            x[k as usize]
        }
    };
    let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    p1 + 0.5 * f * (p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)))
}

/// Splits `w` into windowed frames centered on the grid times, zero-padded at the edges.
pub fn frame_signal(w: &Waveform, grid: &FrameGrid, kind: WindowKind) -> Result<Vec<Vec<f64>>> {
    if w.is_empty() {
        return Err(Error::EmptyInput);
    }
    let fs = w.fs();
    let len = grid.frame_len_samples(fs);
    let win = window(kind, len);
    Ok((0..grid.num_frames)
        .map(|n| {
            let start = frame_start(grid.time(n) * fs, len);
            extract(w.samples(), start, len)
                .into_iter()
                .zip(&win)
                .map(|(x, g)| x * g)
                .collect()
        })
        .collect())
}

/// First sample index of a `len`-sample frame centered at sample `center`.
pub fn frame_start(center: f64, len: usize) -> isize {
    center.round() as isize - (len / 2) as isize
}

/// Copies `len` samples starting at `start`, zero outside `x`.
pub fn extract(x: &[f64], start: isize, len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let k = start + i as isize;
            if k >= 0 && (k as usize) < x.len() {
                x[k as usize]
            } else {
                0.0
            }
        })
        .collect()
}

/// Overlap-adds frames placed as by [`frame_signal`] into a buffer of `out_len` samples.
pub fn overlap_add(frames: &[Vec<f64>], grid: &FrameGrid, fs: f64, out_len: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_len];
    for (n, frame) in frames.iter().enumerate() {
        let start = frame_start(grid.time(n) * fs, frame.len());
        add_at(&mut out, start, frame);
    }
    out
}

/// Adds `src` into `dst` starting at `start`, dropping samples outside `dst`.
pub fn add_at(dst: &mut [f64], start: isize, src: &[f64]) {
    for (i, &v) in src.iter().enumerate() {
        let k = start + i as isize;
        if k >= 0 && (k as usize) < dst.len() {
            dst[k as usize] += v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMode {
    Nearest,
    Linear,
}

/// Resamples a track to `target_len` frames spanning the same duration.
pub fn resample_track(t: &ParamTrack, target_len: usize, mode: ResampleMode) -> Result<ParamTrack> {
    if t.is_empty() {
        return Err(Error::EmptyInput);
    }
    if target_len == 0 {
        return Err(Error::invalid("target length must be at least 1"));
    }
    let n = t.len();
    let v = t.values();
    let values: Vec<f64> = if target_len == n {
        v.to_vec()
    } else {
        match mode {
            ResampleMode::Nearest => (0..target_len).map(|i| v[i * n / target_len]).collect(),
            ResampleMode::Linear => {
                if target_len == 1 {
                    vec![v[0]]
                } else {
                    let step = (n - 1) as f64 / (target_len - 1) as f64;
                    (0..target_len).map(|i| interp_linear(v, i as f64 * step)).collect()
                }
            }
        }
    };
    let g = t.grid();
    let shift = g.frame_shift * n as f64 / target_len as f64;
    let grid = FrameGrid {
        frame_shift: shift,
        frame_length: g.frame_length.max(shift),
        num_frames: target_len,
    };
    ParamTrack::new(values, grid, t.kind())
}
