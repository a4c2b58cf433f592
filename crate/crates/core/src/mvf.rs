//! Maximum voiced frequency from the sinusoidal likeness measure (SLM) of
//! harmonic peaks, smoothed across frames by dynamic programming.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pitch::parabolic;
use crate::signal::{
    extract, frame_start, next_pow2, rfft, window, Complex64, ParamTrack, TrackKind, Waveform, WindowKind,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlmConfig {
    pub periods_per_window: f64,
    pub fft_oversample: usize,
    pub dp_gamma: f64,
    pub frame_shift: f64,
    /// Candidate used when every peak is treated as noise.
    pub floor_hz: f64,
    /// Distortion `1 - slm` of a typical noise peak; maps to likeness 0.
    pub noise_distortion: f64,
    /// Distortion at or below which a peak counts as a pure sinusoid.
    pub sinusoid_distortion: f64,
}

impl Default for SlmConfig {
    fn default() -> Self {
        SlmConfig {
            periods_per_window: 3.0,
            fft_oversample: 4,
            dp_gamma: 1.0,
            frame_shift: 0.005,
            floor_hz: 1000.0,
            noise_distortion: NOISE_DISTORTION,
            sinusoid_distortion: SINUSOID_DISTORTION,
        }
    }
}

/// Median `1 - slm` of harmonic-slot maxima of white noise.
pub const NOISE_DISTORTION: f64 = 0.018;
/// Clean harmonics of a 3-period Hann frame stay below this distortion.
pub const SINUSOID_DISTORTION: f64 = 1e-3;

impl SlmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fft_oversample < 4 {
            return Err(Error::invalid("fft_oversample must be at least 4"));
        }
        if !(self.dp_gamma >= 0.0) {
            return Err(Error::invalid("dp_gamma must be non-negative"));
        }
        if !(self.periods_per_window > 0.0 && self.frame_shift > 0.0) {
            return Err(Error::invalid("window and shift must be positive"));
        }
        if !(0.0 < self.sinusoid_distortion
            && self.sinusoid_distortion < self.noise_distortion
            && self.noise_distortion <= 1.0)
        {
            return Err(Error::invalid("need 0 < sinusoid_distortion < noise_distortion <= 1"));
        }
        Ok(())
    }
}

/// One spectral peak of a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub freq: f64,
    /// Raw likeness in [0, 1].
    pub slm: f64,
    /// Rescaled likeness in [0, 1].
    pub lambda: f64,
}

/// MVF candidate: frequency and the mean squared labelling error of the peaks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub freq: f64,
    pub error: f64,
}

/// Log-magnitude spectrum, normalized by `sqrt(L) fs`.
pub fn log_spectrum(spec: &[Complex64], len: usize, fs: f64) -> Vec<f64> {
    let norm = (len as f64).sqrt() * fs;
    spec.iter().map(|c| (c.norm() / norm + 1e-300).ln()).collect()
}

/// Real amplitude of the centered Hann transform at `w` rad/sample.
fn hann_amplitude(w: f64, len: usize) -> f64 {
    let l = len as f64;
    let dirichlet = |x: f64| {
        let s = (x / 2.0).sin();
        if s.abs() < 1e-12 {
            // limit of sin(xL/2)/sin(x/2) near multiples of 2 pi
            let k = (x / (2.0 * PI)).round() as i64;
            if (k * (len as i64 - 1)) % 2 == 0 {
                l
            } else {
                -l
            }
        } else {
            (x * l / 2.0).sin() / s
        }
    };
    0.5 * dirichlet(w) + 0.25 * dirichlet(w - 2.0 * PI / l) + 0.25 * dirichlet(w + 2.0 * PI / l)
}

/// Transform of the analysis window shifted to `freq`, on bins `lo..=hi`.
fn window_template(freq: f64, fs: f64, len: usize, nfft: usize, lo: usize, hi: usize) -> Vec<Complex64> {
    let c = (len as f64 - 1.0) / 2.0;
    (lo..=hi)
        .map(|k| {
            let w = 2.0 * PI * (k as f64 / nfft as f64 - freq / fs);
            Complex64::from_polar(hann_amplitude(w, len), -w * c)
        })
        .collect()
}

/// Normalized cross-correlation between the spectrum around a peak and the
/// window transform centered on it.
pub fn slm(spec: &[Complex64], freq: f64, fs: f64, len: usize) -> f64 {
    let nfft = spec.len();
    let span = (nfft / len).max(1);
    let center = (freq / fs * nfft as f64).round() as isize;
    let lo = (center - span as isize).max(0) as usize;
    let hi = ((center + span as isize) as usize).min(nfft / 2);
    if hi <= lo {
        return 0.0;
    }
    let tpl = window_template(freq, fs, len, nfft, lo, hi);
    let s = &spec[lo..=hi];
    let cross: Complex64 = s.iter().zip(&tpl).map(|(a, b)| a * b.conj()).sum();
    let es: f64 = s.iter().map(|v| v.norm_sqr()).sum();
    let ew: f64 = tpl.iter().map(|v| v.norm_sqr()).sum();
    if es <= 0.0 || ew <= 0.0 {
        return 0.0;
    }
    (cross.norm() / (es * ew).sqrt()).clamp(0.0, 1.0)
}

/// Maps a raw score to [0, 1] on a log-distortion scale. Raw scores of noise
/// peaks crowd just below 1, so a linear rescale cannot separate them from
/// harmonics.
pub fn rescale(raw: f64, cfg: &SlmConfig) -> f64 {
    let d = (1.0 - raw).max(1e-12);
    ((cfg.noise_distortion / d).ln() / (cfg.noise_distortion / cfg.sinusoid_distortion).ln()).clamp(0.0, 1.0)
}

/// Harmonic-slot peaks of one frame, centered at sample `center`.
pub fn frame_peaks(x: &[f64], fs: f64, center: f64, f0: f64, cfg: &SlmConfig) -> Vec<Peak> {
    let len = ((cfg.periods_per_window * fs / f0).round() as usize).max(8);
    let nfft = next_pow2(cfg.fft_oversample * len);
    let win = window(WindowKind::Hanning, len);
    let frame: Vec<f64> = extract(x, frame_start(center, len), len)
        .iter()
        .zip(&win)
        .map(|(a, b)| a * b)
        .collect();
    if frame.iter().all(|&v| v == 0.0) {
        return Vec::new();
    }
    let spec = rfft(&frame, nfft);
    let logs = log_spectrum(&spec[..=nfft / 2], len, fs);
    let bin_hz = fs / nfft as f64;
    let mut peaks = Vec::new();
    let mut h = 1.0;
    while (h + 0.5) * f0 < fs / 2.0 {
        let lo = (((h - 0.5) * f0) / bin_hz).ceil() as usize;
        let hi = ((((h + 0.5) * f0) / bin_hz).floor() as usize).min(nfft / 2);
        h += 1.0;
        if hi <= lo + 1 {
            continue;
        }
        let k = (lo..=hi).max_by(|&a, &b| logs[a].total_cmp(&logs[b])).unwrap();
        if k == lo || k == hi {
            continue;
        }
        let (off, _) = parabolic(logs[k - 1], logs[k], logs[k + 1]);
        let freq = (k as f64 + off) * bin_hz;
        let raw = slm(&spec, freq, fs, len);
        let lambda = rescale(raw, cfg);
        peaks.push(Peak { freq, slm: raw, lambda });
    }
    peaks
}

/// Candidates for a frame: index `i` marks peaks `< i` voiced and the rest noise.
pub fn candidates(peaks: &[Peak], fs: f64, floor_hz: f64) -> Vec<Candidate> {
    let p = peaks.len();
    if p == 0 {
        return vec![Candidate {
            freq: floor_hz,
            error: 0.0,
        }];
    }
    (0..=p)
        .map(|i| {
            let voiced: f64 = peaks[..i].iter().map(|q| (1.0 - q.lambda).powi(2)).sum();
            let noise: f64 = peaks[i..].iter().map(|q| q.lambda.powi(2)).sum();
            let freq = match i {
                0 => floor_hz,
                _ if i == p => fs / 2.0,
                _ => 0.5 * (peaks[i - 1].freq + peaks[i].freq),
            };
            Candidate {
                freq,
                error: (voiced + noise) / p as f64,
            }
        })
        .collect()
}

fn transition(a: f64, b: f64, fs: f64, gamma: f64) -> f64 {
    gamma * ((a - b) / (fs / 2.0)).powi(2)
}

/// Total cost of a path through per-frame candidate sets.
pub fn path_cost(cands: &[Vec<Candidate>], path: &[usize], fs: f64, gamma: f64) -> f64 {
    let mut cost = 0.0;
    for (m, &i) in path.iter().enumerate() {
        cost += cands[m][i].error;
        if m > 0 {
            cost += transition(cands[m][i].freq, cands[m - 1][path[m - 1]].freq, fs, gamma);
        }
    }
    cost
}

/// Minimum-cost path (first-order Viterbi).
pub fn dp_path(cands: &[Vec<Candidate>], fs: f64, gamma: f64) -> Vec<usize> {
    if cands.is_empty() {
        return Vec::new();
    }
    let mut cost: Vec<f64> = cands[0].iter().map(|c| c.error).collect();
    let mut back: Vec<Vec<usize>> = vec![Vec::new()];
    for m in 1..cands.len() {
        let mut next = Vec::with_capacity(cands[m].len());
        let mut ptr = Vec::with_capacity(cands[m].len());
        for c in &cands[m] {
            let (j, best) = cands[m - 1]
                .iter()
                .enumerate()
                .map(|(j, p)| (j, cost[j] + transition(c.freq, p.freq, fs, gamma)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            next.push(best + c.error);
            ptr.push(j);
        }
        cost = next;
        back.push(ptr);
    }
    let mut i = (0..cost.len()).min_by(|&a, &b| cost[a].total_cmp(&cost[b])).unwrap();
    let mut path = vec![0; cands.len()];
    for m in (0..cands.len()).rev() {
        path[m] = i;
        if m > 0 {
            i = back[m][i];
        }
    }
    path
}

/// Frame-wise argmin of the candidate error.
pub fn greedy_path(cands: &[Vec<Candidate>]) -> Vec<usize> {
    cands
        .iter()
        .map(|c| (0..c.len()).min_by(|&a, &b| c[a].error.total_cmp(&c[b].error)).unwrap())
        .collect()
}

/// MVF track on the grid of `f0`.
pub fn estimate_mvf_slm(w: &Waveform, f0: &ParamTrack, cfg: &SlmConfig) -> Result<ParamTrack> {
    cfg.validate()?;
    if w.is_empty() {
        return Err(Error::EmptyInput);
    }
    if f0.values().iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("F0 track must be strictly positive"));
    }
    let fs = w.fs();
    let grid = *f0.grid();
    let cands: Vec<Vec<Candidate>> = (0..grid.num_frames)
        .into_par_iter()
        .map(|n| {
            let peaks = frame_peaks(w.samples(), fs, grid.time(n) * fs, f0[n], cfg);
            candidates(&peaks, fs, cfg.floor_hz)
        })
        .collect();
    let path = dp_path(&cands, fs, cfg.dp_gamma);
    let values = path
        .iter()
        .enumerate()
        .map(|(m, &i)| cands[m][i].freq.clamp(f0[m], fs / 2.0))
        .collect();
    ParamTrack::new(values, grid, TrackKind::Mvf)
}
