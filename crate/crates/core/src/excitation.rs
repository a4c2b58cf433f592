//! Voiced excitation modelling: glottal closure instants, pitch-synchronous
//! residual frames, their principal components, and HNR weighting.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pitch::{acf_frames, best_acf_peak};
use crate::signal::{interp_cubic, window, FrameGrid, ParamTrack, TrackKind, Waveform, WindowKind};

pub const HNR_MIN: f64 = 1e-4;
pub const HNR_MAX: f64 = 1e4;

/// Fraction of the period searched on either side of a predicted GCI.
const GCI_SEARCH: f64 = 0.3;
/// Peaks below this fraction of the strongest smoothed peak are ignored.
const GCI_THRESHOLD: f64 = 0.05;

fn check_f0(f0: &ParamTrack) -> Result<()> {
    if f0.is_empty() {
        return Err(Error::EmptyInput);
    }
    if f0.values().iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("F0 track must be strictly positive"));
    }
    Ok(())
}

fn period_at(f0: &ParamTrack, k: usize, fs: f64) -> f64 {
    fs / f0.at_time(k as f64 / fs)
}

fn argmax(y: &[f64], lo: usize, hi: usize) -> usize {
    (lo..hi).fold(lo, |b, k| if y[k] > y[b] { k } else { b })
}

/// F0-guided peak picking on the smoothed residual. Polarity is chosen from
/// the larger of the positive and negative extremes.
pub fn detect_gci(residual: &Waveform, f0: &ParamTrack) -> Result<Vec<usize>> {
    check_f0(f0)?;
    let x = residual.samples();
    let n = x.len();
    let fs = residual.fs();
    let kernel = [1.0, 2.0, 3.0, 2.0, 1.0];
    let mut y: Vec<f64> = (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    let k = i as isize + j as isize - 2;
                    if k >= 0 && (k as usize) < n {
                        c * x[k as usize]
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
                / 9.0
        })
        .collect();
    let mx = y.iter().cloned().fold(0.0, f64::max);
    let mn = y.iter().cloned().fold(0.0, f64::min);
    if mx <= 0.0 && mn >= 0.0 {
        return Ok(Vec::new());
    }
    if -mn > mx {
        y.iter_mut().for_each(|v| *v = -*v);
    }
    let thr = GCI_THRESHOLD * mx.max(-mn);

    let mut out: Vec<usize> = Vec::new();
    let mut tracking = false;
    let mut cursor = 0usize;
    while cursor < n {
        let t0 = period_at(f0, cursor, fs);
        if tracking {
            let last = *out.last().unwrap();
            let pred = last as f64 + period_at(f0, last, fs);
            let lo = ((pred - GCI_SEARCH * t0).round() as usize).max(last + 1);
            let hi = ((pred + GCI_SEARCH * t0).round() as usize + 1).min(n);
            if lo >= hi {
                break;
            }
            let k = argmax(&y, lo, hi);
            if y[k] > thr {
                out.push(k);
                cursor = k + 1;
            } else {
                tracking = false;
                cursor = lo;
            }
        } else {
            let hi = (cursor + t0.round().max(1.0) as usize).min(n);
            let k = argmax(&y, cursor, hi);
            let far_enough = out.last().is_none_or(|&l| (k - l) as f64 >= (1.0 - GCI_SEARCH) * t0);
            if y[k] > thr && far_enough {
                out.push(k);
                tracking = true;
                cursor = k + 1;
            } else {
                cursor = hi;
            }
        }
    }
    Ok(out)
}

/// Pitch-synchronous frames resampled to a common length.
#[derive(Debug, Clone, PartialEq)]
pub struct PsFrames {
    pub frames: Vec<Vec<f64>>,
    /// GCIs the frames are centered on (edge GCIs are skipped).
    pub centers: Vec<usize>,
    pub basis_len: usize,
}

/// Fixed basis length: two nominal periods at the median F0.
pub fn basis_length(f0: &ParamTrack, fs: f64) -> usize {
    let mut v = f0.values().to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let med = v[v.len() / 2];
    2 * (fs / med).round().max(1.0) as usize
}

/// Local frame length in samples: `round(2 fs / f0)`.
pub fn ps_frame_length(fs: f64, f0: f64) -> usize {
    (2.0 * fs / f0).round() as usize
}

/// Two-period Hann-tapered frames centered on each GCI, resampled to the basis
/// length and normalized to unit energy.
pub fn extract_ps_frames(residual: &Waveform, gcis: &[usize], f0: &ParamTrack) -> Result<PsFrames> {
    check_f0(f0)?;
    if gcis.is_empty() {
        return Err(Error::invalid("at least one GCI is required"));
    }
    let fs = residual.fs();
    let x = residual.samples();
    let basis_len = basis_length(f0, fs);
    let out: Vec<(usize, Vec<f64>)> = gcis
        .par_iter()
        .filter_map(|&g| {
            let len = ps_frame_length(fs, f0.at_time(g as f64 / fs));
            let start = g as isize - (len / 2) as isize;
            if len < 4 || start < 0 || start as usize + len > x.len() {
                return None;
            }
            let win = window(WindowKind::Hanning, len);
            let seg: Vec<f64> = x[start as usize..start as usize + len]
                .iter()
                .zip(&win)
                .map(|(a, b)| a * b)
                .collect();
            let step = (len - 1) as f64 / (basis_len - 1) as f64;
            let mut f: Vec<f64> = (0..basis_len).map(|i| interp_cubic(&seg, i as f64 * step)).collect();
            let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= 0.0 {
                return None;
            }
            f.iter_mut().for_each(|v| *v /= norm);
            Some((g, f))
        })
        .collect();
    let (centers, frames) = out.into_iter().unzip();
    Ok(PsFrames {
        frames,
        centers,
        basis_len,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBasis {
    /// Unit-norm eigenvectors, largest eigenvalue first.
    pub eigenvectors: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub frame_count: usize,
}

impl ResidualBasis {
    /// The voiced excitation prototype.
    pub fn first(&self) -> &[f64] {
        &self.eigenvectors[0]
    }

    pub fn len(&self) -> usize {
        self.eigenvectors.first().map_or(0, |v| v.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaMode {
    /// Covariance of mean-removed frames.
    Centered,
    /// Second-moment matrix about the origin; the first eigenvector is then
    /// the dominant pulse shape rather than the dominant deviation from it.
    Uncentered,
}

/// PCA of mean-removed frames.
pub fn pca_basis(frames: &[Vec<f64>]) -> Result<ResidualBasis> {
    pca_basis_with(frames, PcaMode::Centered)
}

pub fn pca_basis_with(frames: &[Vec<f64>], mode: PcaMode) -> Result<ResidualBasis> {
    if frames.len() < 2 {
        return Err(Error::invalid("PCA needs at least 2 frames"));
    }
    let d = frames[0].len();
    if d == 0 {
        return Err(Error::EmptyInput);
    }
    for f in frames {
        Error::check_len(f.len(), d)?;
    }
    let k = frames.len() as f64;
    let mean: Vec<f64> = match mode {
        PcaMode::Centered => (0..d).map(|i| frames.iter().map(|f| f[i]).sum::<f64>() / k).collect(),
        PcaMode::Uncentered => vec![0.0; d],
    };
    let data = DMatrix::from_fn(frames.len(), d, |r, c| frames[r][c] - mean[c]);
    let cov = (data.transpose() * &data) / k;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut eigenvalues = Vec::with_capacity(d);
    let mut eigenvectors = Vec::with_capacity(d);
    for &i in &order {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().cloned().collect();
        let big = v
            .iter()
            .cloned()
            .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if big < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        eigenvalues.push(eig.eigenvalues[i].max(0.0));
        eigenvectors.push(v);
    }
    Ok(ResidualBasis {
        eigenvectors,
        eigenvalues,
        frame_count: frames.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HnrConfig {
    pub f0_min: f64,
    pub f0_max: f64,
}

impl Default for HnrConfig {
    fn default() -> Self {
        HnrConfig {
            f0_min: 80.0,
            f0_max: 300.0,
        }
    }
}

/// Frame length used by the analysis pipeline for HNR.
pub const HNR_FRAME_LENGTH: f64 = 0.04;

/// Per-frame HNR from the highest normalized-autocorrelation maximum in the
/// period range. Frames use `grid.frame_length`, which must cover two of the
/// longest periods.
pub fn hnr_estimate(w: &Waveform, grid: &FrameGrid, cfg: &HnrConfig) -> Result<ParamTrack> {
    if w.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0 < cfg.f0_min && cfg.f0_min < cfg.f0_max && cfg.f0_max < w.fs() / 2.0) {
        return Err(Error::invalid("need 0 < f0_min < f0_max < fs/2"));
    }
    if grid.frame_length < 2.0 / cfg.f0_min - 1e-12 {
        return Err(Error::invalid("HNR frame length must cover two of the longest periods"));
    }
    let fs = w.fs();
    let win_len = grid.frame_len_samples(fs);
    let lo = (fs / cfg.f0_max).floor() as usize;
    let hi = (fs / cfg.f0_min).ceil() as usize;
    let acf = acf_frames(w.samples(), fs, grid, win_len, hi + 1);
    let values = acf
        .acf
        .iter()
        .zip(&acf.energy)
        .map(|(r, &e)| {
            if e <= 0.0 {
                return HNR_MIN;
            }
            match best_acf_peak(r, lo, hi, 0.0, fs, cfg.f0_min) {
                Some((_, v)) if v > 0.0 => {
                    if v >= 1.0 {
                        HNR_MAX
                    } else {
                        (v / (1.0 - v)).clamp(HNR_MIN, HNR_MAX)
                    }
                }
                _ => HNR_MIN,
            }
        })
        .collect();
    ParamTrack::new(values, *grid, TrackKind::Hnr)
}

pub fn voiced_weight(hnr: f64) -> f64 {
    (hnr / (hnr + 1.0)).sqrt()
}

pub fn unvoiced_weight(hnr: f64) -> f64 {
    (1.0 / (hnr + 1.0)).sqrt()
}

/// Voiced and unvoiced excitation weights derived from an HNR track.
#[derive(Debug, Clone, PartialEq)]
pub struct HnrWeights {
    pub w_v: Vec<f64>,
    pub w_u: Vec<f64>,
    hnr: ParamTrack,
}

pub fn hnr_weights(hnr: &ParamTrack) -> Result<HnrWeights> {
    if hnr.values().iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("HNR must be positive"));
    }
    let clamped: Vec<f64> = hnr.values().iter().map(|v| v.clamp(HNR_MIN, HNR_MAX)).collect();
    Ok(HnrWeights {
        w_v: clamped.iter().map(|&h| voiced_weight(h)).collect(),
        w_u: clamped.iter().map(|&h| unvoiced_weight(h)).collect(),
        hnr: hnr.with_values(clamped)?,
    })
}

impl HnrWeights {
    fn frame_index(&self, sample: f64, fs: f64) -> f64 {
        sample / (self.hnr.grid().frame_shift * fs)
    }

    /// Voiced weight for a pulse at sample `k`: frame `i = k / (shift fs)`, nearest.
    pub fn voiced_at_sample(&self, k: f64, fs: f64) -> f64 {
        let i = self.frame_index(k, fs).round().clamp(0.0, (self.w_v.len() - 1) as f64) as usize;
        self.w_v[i]
    }

    /// Unvoiced weight at sample `k`, from the HNR interpolated to that sample.
    pub fn unvoiced_at_sample(&self, k: f64, fs: f64) -> f64 {
        let pos = self.frame_index(k, fs);
        unvoiced_weight(crate::signal::interp_linear(self.hnr.values(), pos))
    }

    /// Voiced weight on the same per-sample interpolation as [`Self::unvoiced_at_sample`].
    pub fn voiced_interp_at_sample(&self, k: f64, fs: f64) -> f64 {
        let pos = self.frame_index(k, fs);
        voiced_weight(crate::signal::interp_linear(self.hnr.values(), pos))
    }
}
