//! Objective quality measures between a reference and a test waveform.
//!
//! Band measures (fwSNRseg, WSS, NCM) use a 25-band mel filterbank with
//! band weights `W = X^0.2` taken from the reference band magnitude.
//! Spectral distances (LLR, IS) come from order-16 LPC models; LSD works on
//! the dB power spectrum; MCD compares mel-cepstra excluding `c0`.

use std::f64::consts::{LN_10, SQRT_2};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::signal::{ifft, next_pow2, rfft, window, Complex64, Waveform, WindowKind};
use crate::spectral;

/// Scale turning Euclidean mel-cepstral distance into dB.
pub const MCD_SCALE: f64 = 10.0 * SQRT_2 / LN_10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    pub frame_length: f64,
    pub frame_shift: f64,
    pub num_bands: usize,
    pub weight_exponent: f64,
    pub fwsnr_min_db: f64,
    pub fwsnr_max_db: f64,
    pub ncm_snr_limit_db: f64,
    pub lpc_order: usize,
    pub mcd_order: usize,
    pub mcd_alpha: f64,
    /// Reference frames more than this far below the loudest frame are skipped.
    pub silence_db: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            frame_length: 0.03,
            frame_shift: 0.0075,
            num_bands: 25,
            weight_exponent: 0.2,
            fwsnr_min_db: -10.0,
            fwsnr_max_db: 35.0,
            ncm_snr_limit_db: 15.0,
            lpc_order: 16,
            mcd_order: 24,
            mcd_alpha: 0.42,
            silence_db: -60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub fwsnrseg: f64,
    pub ncm: f64,
    pub wss: f64,
    pub llr: f64,
    pub is_dist: f64,
    pub lsd: f64,
    pub mcd: f64,
    /// `None` when either waveform has zero variance.
    pub corr: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandMetrics {
    pub fwsnrseg: f64,
    pub wss: f64,
    pub ncm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDistances {
    pub llr: f64,
    pub is_dist: f64,
    pub lsd: f64,
    pub mcd: f64,
    /// Frames dropped because an LPC model could not be fitted.
    pub unstable_frames: usize,
}

struct Framing {
    len: usize,
    starts: Vec<usize>,
    nfft: usize,
}

fn framing(n: usize, fs: f64, cfg: &MetricConfig) -> Framing {
    let len = (cfg.frame_length * fs).round() as usize;
    let hop = (cfg.frame_shift * fs).round().max(1.0) as usize;
    let mut starts = Vec::new();
    let mut s = 0;
    while s + len <= n {
        starts.push(s);
        s += hop;
    }
    if starts.is_empty() {
        starts.push(0);
    }
    Framing {
        len,
        starts,
        nfft: next_pow2(len),
    }
}

fn aligned<'a>(a: &'a Waveform, b: &'a Waveform) -> Result<(&'a [f64], &'a [f64], f64)> {
    if a.sample_rate() != b.sample_rate() {
        return Err(Error::invalid("reference and test sample rates differ"));
    }
    let n = a.len().min(b.len());
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    Ok((&a.samples()[..n], &b.samples()[..n], a.fs()))
}

fn frame(x: &[f64], start: usize, win: &[f64]) -> Vec<f64> {
    win.iter()
        .enumerate()
        .map(|(i, w)| x.get(start + i).copied().unwrap_or(0.0) * w)
        .collect()
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Indices of frames loud enough to score, relative to the loudest reference frame.
fn active_frames(frames: &[Vec<f64>], silence_db: f64) -> Vec<bool> {
    let e: Vec<f64> = frames.iter().map(|f| energy(f)).collect();
    let emax = e.iter().cloned().fold(0.0, f64::max);
    let floor = emax * 10f64.powf(silence_db / 10.0);
    e.iter().map(|&v| v > 0.0 && v >= floor).collect()
}

/// Triangular mel filters over `nfft/2 + 1` bins.
pub fn mel_filterbank(num_bands: usize, nfft: usize, fs: f64) -> Vec<Vec<f64>> {
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(fs / 2.0);
    let edges: Vec<f64> = (0..num_bands + 2)
        .map(|i| hz(top * i as f64 / (num_bands + 1) as f64))
        .collect();
    let nbins = nfft / 2 + 1;
    (0..num_bands)
        .map(|b| {
            let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
            (0..nbins)
                .map(|k| {
                    let f = k as f64 * fs / nfft as f64;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

fn band_magnitudes(frame: &[f64], nfft: usize, bank: &[Vec<f64>]) -> Vec<f64> {
    let spec = rfft(frame, nfft);
    bank.iter()
        .map(|tri| tri.iter().zip(&spec).map(|(t, s)| t * s.norm_sqr()).sum::<f64>().sqrt())
        .collect()
}

fn weighted_mean(values: &[f64], weights: &[f64]) -> Option<f64> {
    let ws: f64 = weights.iter().sum();
    if !(ws > 0.0) {
        return None;
    }
    Some(values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / ws)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// fwSNRseg, WSS and NCM.
pub fn band_weighted_suite(reference: &Waveform, test: &Waveform, cfg: &MetricConfig) -> Result<BandMetrics> {
    let (x, y, fs) = aligned(reference, test)?;
    let fr = framing(x.len(), fs, cfg);
    let win = window(WindowKind::Hanning, fr.len);
    let bank = mel_filterbank(cfg.num_bands, fr.nfft, fs);
    let fx: Vec<Vec<f64>> = fr.starts.iter().map(|&s| frame(x, s, &win)).collect();
    let fy: Vec<Vec<f64>> = fr.starts.iter().map(|&s| frame(y, s, &win)).collect();
    let active = active_frames(&fx, cfg.silence_db);
    let bx: Vec<Vec<f64>> = fx.par_iter().map(|f| band_magnitudes(f, fr.nfft, &bank)).collect();
    let by: Vec<Vec<f64>> = fy.par_iter().map(|f| band_magnitudes(f, fr.nfft, &bank)).collect();
    let envx = band_envelopes(x, fs, cfg.num_bands);
    let envy = band_envelopes(y, fs, cfg.num_bands);

    let mut fw = Vec::new();
    let mut wss = Vec::new();
    let mut ncm = Vec::new();
    for (j, &s) in fr.starts.iter().enumerate() {
        if !active[j] {
            continue;
        }
        let (xb, yb) = (&bx[j], &by[j]);
        let w: Vec<f64> = xb.iter().map(|v| v.powf(cfg.weight_exponent)).collect();

        let snr: Vec<f64> = xb
            .iter()
            .zip(yb)
            .map(|(&a, &b)| {
                let d = (a - b).powi(2);
                let v = if d == 0.0 {
                    cfg.fwsnr_max_db
                } else {
                    10.0 * (a * a / d).log10()
                };
                v.clamp(cfg.fwsnr_min_db, cfg.fwsnr_max_db)
            })
            .collect();
        if let Some(v) = weighted_mean(&snr, &w) {
            fw.push(v);
        }

        let db = |v: &f64| 10.0 * (v * v + 1e-20).log10();
        let sx: Vec<f64> = xb.iter().map(db).collect();
        let sy: Vec<f64> = yb.iter().map(db).collect();
        let d: Vec<f64> = (0..sx.len() - 1)
            .map(|i| ((sy[i + 1] - sy[i]) - (sx[i + 1] - sx[i])).powi(2))
            .collect();
        if let Some(v) = weighted_mean(&d, &w[..d.len()]) {
            wss.push(v);
        }

        let end = (s + fr.len).min(x.len());
        let lim = cfg.ncm_snr_limit_db;
        let ti: Vec<f64> = (0..cfg.num_bands)
            .map(|b| {
                let r = pearson(&envx[b][s..end], &envy[b][s..end]).unwrap_or(0.0);
                let r2 = r * r;
                let snr = if r2 >= 1.0 {
                    lim
                } else {
                    10.0 * (r2 / (1.0 - r2)).log10()
                };
                (snr.clamp(-lim, lim) + lim) / (2.0 * lim)
            })
            .collect();
        if let Some(v) = weighted_mean(&ti, &w) {
            ncm.push(v);
        }
    }
    if fw.is_empty() {
        return Err(Error::Degenerate);
    }
    Ok(BandMetrics {
        fwsnrseg: mean(&fw),
        wss: mean(&wss),
        ncm: mean(&ncm),
    })
}

/// Hilbert envelopes of each mel band of the whole signal.
fn band_envelopes(x: &[f64], fs: f64, num_bands: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let nfft = next_pow2(n);
    let spec = rfft(x, nfft);
    let bank = mel_filterbank(num_bands, nfft, fs);
    bank.par_iter()
        .map(|tri| {
            // one-sided band spectrum doubled: the inverse transform is the analytic band signal
            let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
            for k in 0..=nfft / 2 {
                let g = if k == 0 || k == nfft / 2 { 1.0 } else { 2.0 };
                buf[k] = spec[k] * (tri[k] * g);
            }
            ifft(&mut buf);
            buf[..n].iter().map(|c| c.norm()).collect()
        })
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    if a.len() < 2 {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation between two equal-length sequences.
pub fn corr(reference: &[f64], test: &[f64]) -> Result<f64> {
    Error::check_len(reference.len(), test.len())?;
    if reference.len() < 2 {
        return Err(Error::invalid("correlation needs at least 2 samples"));
    }
    pearson(reference, test).ok_or(Error::Degenerate)
}

/// Autocorrelation `r[0..=order]` of a frame.
pub fn autocorrelation(x: &[f64], order: usize) -> Vec<f64> {
    (0..=order)
        .map(|k| x.iter().zip(x.iter().skip(k)).map(|(a, b)| a * b).sum())
        .collect()
}

/// Levinson-Durbin recursion. Returns the predictor `a` (with `a[0] = 1`) and
/// the prediction error, or `None` for an unstable or degenerate model.
pub fn levinson(r: &[f64], order: usize) -> Option<(Vec<f64>, f64)> {
    if r.len() <= order || !(r[0] > 0.0) {
        return None;
    }
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=order {
        let acc: f64 = (1..i).map(|j| a[j] * r[i - j]).sum::<f64>() + r[i];
        let k = -acc / err;
        if !(k.abs() < 1.0) {
            return None;
        }
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if !(err > 0.0) {
            return None;
        }
    }
    Some((a, err))
}

/// Quadratic form `a^T R a` with Toeplitz `R` built from `r`.
pub fn toeplitz_quad(a: &[f64], r: &[f64]) -> f64 {
    let p = a.len();
    let mut s = 0.0;
    for i in 0..p {
        for j in 0..p {
            s += a[i] * a[j] * r[i.abs_diff(j)];
        }
    }
    s
}

/// LLR, IS, LSD and MCD.
pub fn spectral_distance_suite(reference: &Waveform, test: &Waveform, cfg: &MetricConfig) -> Result<SpectralDistances> {
    let (x, y, fs) = aligned(reference, test)?;
    let fr = framing(x.len(), fs, cfg);
    let win = window(WindowKind::Hanning, fr.len);
    let fx: Vec<Vec<f64>> = fr.starts.iter().map(|&s| frame(x, s, &win)).collect();
    let fy: Vec<Vec<f64>> = fr.starts.iter().map(|&s| frame(y, s, &win)).collect();
    let active = active_frames(&fx, cfg.silence_db);
    let p = cfg.lpc_order;

    let per_frame: Vec<Option<(Option<(f64, f64)>, f64, f64)>> = (0..fx.len())
        .into_par_iter()
        .map(|j| {
            if !active[j] {
                return None;
            }
            let (a, b) = (&fx[j], &fy[j]);
            let rx = autocorrelation(a, p);
            let ry = autocorrelation(b, p);
            let lpc = match (levinson(&rx, p), levinson(&ry, p)) {
                (Some((ax, _)), Some((ay, _))) => {
                    let sx = toeplitz_quad(&ax, &rx);
                    let sy = toeplitz_quad(&ay, &ry);
                    let cross = toeplitz_quad(&ay, &rx);
                    let llr = (cross / sx).ln().clamp(0.0, 1.0);
                    let is = (cross / sy + (sy / sx).ln() - 1.0).max(0.0);
                    Some((llr, is))
                }
                _ => None,
            };
            let px = rfft(a, fr.nfft);
            let py = rfft(b, fr.nfft);
            let nb = fr.nfft / 2 + 1;
            let lsd = (px[..nb]
                .iter()
                .zip(&py[..nb])
                .map(|(u, v)| {
                    let d = 10.0 * (u.norm_sqr() + 1e-12).log10() - 10.0 * (v.norm_sqr() + 1e-12).log10();
                    d * d
                })
                .sum::<f64>()
                / nb as f64)
                .sqrt();
            let cx = spectral::mcep_frame(a, fr.nfft, cfg.mcd_order, cfg.mcd_alpha);
            let cy = spectral::mcep_frame(b, fr.nfft, cfg.mcd_order, cfg.mcd_alpha);
            Some((lpc, lsd, mcd_frame(&cx, &cy)))
        })
        .collect();

    let mut llr = Vec::new();
    let mut is = Vec::new();
    let mut lsd = Vec::new();
    let mut mcd = Vec::new();
    let mut unstable = 0;
    for f in per_frame.into_iter().flatten() {
        match f.0 {
            Some((l, i)) => {
                llr.push(l);
                is.push(i);
            }
            None => unstable += 1,
        }
        lsd.push(f.1);
        mcd.push(f.2);
    }
    if lsd.is_empty() {
        return Err(Error::Degenerate);
    }
    Ok(SpectralDistances {
        llr: mean(&llr),
        is_dist: mean(&is),
        lsd: mean(&lsd),
        mcd: mean(&mcd),
        unstable_frames: unstable,
    })
}

/// MCD in dB between two mel-cepstral frames, excluding `c0`.
///
/// Coefficients follow the `c0 + 2 sum c_n cos` convention, so each is doubled
/// to match the one-sided form the usual scaling assumes.
pub fn mcd_frame(cx: &[f64], cy: &[f64]) -> f64 {
    let s: f64 = cx.iter().zip(cy).skip(1).map(|(a, b)| (2.0 * (a - b)).powi(2)).sum();
    MCD_SCALE * s.sqrt()
}

/// Mean MCD over aligned mel-cepstral frame sequences.
pub fn mcd(cx: &[Vec<f64>], cy: &[Vec<f64>]) -> Result<f64> {
    Error::check_len(cx.len(), cy.len())?;
    if cx.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(mean(
        &cx.iter().zip(cy).map(|(a, b)| mcd_frame(a, b)).collect::<Vec<_>>(),
    ))
}

/// All metrics for a (reference, test) pair.
pub fn evaluate(reference: &Waveform, test: &Waveform, cfg: &MetricConfig) -> Result<MetricReport> {
    let band = band_weighted_suite(reference, test, cfg)?;
    let spec = spectral_distance_suite(reference, test, cfg)?;
    let (x, y, _) = aligned(reference, test)?;
    Ok(MetricReport {
        fwsnrseg: band.fwsnrseg,
        ncm: band.ncm,
        wss: band.wss,
        llr: spec.llr,
        is_dist: spec.is_dist,
        lsd: spec.lsd,
        mcd: spec.mcd,
        corr: corr(x, y).ok(),
    })
}
