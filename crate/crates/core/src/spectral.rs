//! Mel-cepstral envelopes: analysis, evaluation on a frequency grid, and
//! synthesis/inverse filtering by frame-wise frequency-domain overlap-add.
//!
//! Log-amplitude convention: `C(w) = c0 + 2 sum_{n>=1} c_n cos(n beta(w))` in
//! nepers, where `beta` is the all-pass warped frequency. A flat unit-power
//! spectrum has all coefficients zero. The filter realizes the minimum-phase
//! response `exp(C(w) - 2j sum c_n sin(n beta(w)))`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::signal::{
    extract, fft, fft_size, frame_start, ifft, interp_linear, next_pow2, rfft, window, Complex64, FrameGrid,
    ParamTrack, Waveform, WindowKind,
};

pub const DEFAULT_ALPHA: f64 = 0.42;
/// Recorded for reference; the cepstra here are always log-amplitude (gamma = 0).
pub const DEFAULT_GAMMA: f64 = -1.0 / 3.0;
/// Power floor applied before taking logs.
pub const FLOOR_DB: f64 = -100.0;
/// Points on the warped axis used for the cosine transform.
const WARP_POINTS: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct MgcTrack {
    coeffs: Vec<Vec<f64>>,
    order: usize,
    alpha: f64,
    gamma: f64,
    grid: FrameGrid,
}

impl MgcTrack {
    pub fn new(coeffs: Vec<Vec<f64>>, order: usize, alpha: f64, grid: FrameGrid) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::invalid("alpha must be in [0, 1)"));
        }
        if coeffs.len() != grid.num_frames {
            return Err(Error::LengthMismatch {
                left: coeffs.len(),
                right: grid.num_frames,
            });
        }
        for c in &coeffs {
            Error::check_len(c.len(), order + 1)?;
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric("non-finite cepstral coefficient".into()));
            }
        }
        Ok(MgcTrack {
            coeffs,
            order,
            alpha,
            gamma: DEFAULT_GAMMA,
            grid,
        })
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn frame(&self, n: usize) -> &[f64] {
        &self.coeffs[n]
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn grid(&self) -> &FrameGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficients linearly interpolated at fractional frame `pos`.
    pub fn at_pos(&self, pos: f64) -> Vec<f64> {
        let last = self.coeffs.len() - 1;
        let p = pos.clamp(0.0, last as f64);
        let i = (p.floor() as usize).min(last);
        let j = (i + 1).min(last);
        let f = p - i as f64;
        self.coeffs[i]
            .iter()
            .zip(&self.coeffs[j])
            .map(|(a, b)| a * (1.0 - f) + b * f)
            .collect()
    }
}

/// All-pass warped frequency for normalized angular frequency `w` in [0, pi].
pub fn warp(w: f64, alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    ((1.0 - a2) * w.sin()).atan2((1.0 + a2) * w.cos() - 2.0 * alpha)
}

/// Inverse of [`warp`].
pub fn unwarp(beta: f64, alpha: f64) -> f64 {
    warp(beta, -alpha)
}

/// Cepstrum of order `order` from a one-sided power spectrum (`nfft/2 + 1` bins).
pub fn mcep_from_power(power: &[f64], order: usize, alpha: f64) -> Vec<f64> {
    let floor = 10f64.powf(FLOOR_DB / 10.0);
    let log_amp: Vec<f64> = power.iter().map(|&p| 0.5 * p.max(floor).ln()).collect();
    mcep_from_log_amplitude(&log_amp, order, alpha)
}

/// Warped cosine transform of a one-sided log-amplitude spectrum.
pub fn mcep_from_log_amplitude(log_amp: &[f64], order: usize, alpha: f64) -> Vec<f64> {
    let last = (log_amp.len() - 1) as f64;
    let m = WARP_POINTS;
    let samples: Vec<f64> = (0..=m)
        .map(|i| {
            let beta = PI * i as f64 / m as f64;
            interp_linear(log_amp, unwarp(beta, alpha) / PI * last)
        })
        .collect();
    (0..=order)
        .map(|n| {
            let mut s = 0.0;
            for (i, v) in samples.iter().enumerate() {
                let wt = if i == 0 || i == m { 0.5 } else { 1.0 };
                s += wt * v * (n as f64 * PI * i as f64 / m as f64).cos();
            }
            s / m as f64
        })
        .collect()
}

/// Cepstrum of one windowed frame from its periodogram, normalized to a peak
/// of 0 dB so that the floor does not depend on the frame level. Only `c0`
/// carries the gain.
pub fn mcep_frame(windowed: &[f64], nfft: usize, order: usize, alpha: f64) -> Vec<f64> {
    let spec = rfft(windowed, nfft);
    let mut p: Vec<f64> = spec[..=nfft / 2].iter().map(|c| c.norm_sqr()).collect();
    let peak = p.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        p.iter_mut().for_each(|v| *v /= peak);
    }
    let mut c = mcep_from_power(&p, order, alpha);
    c[0] += 0.5 * (peak / windowed.len().max(1) as f64).max(1e-300).ln();
    c
}

fn check_args(order: usize, alpha: f64) -> Result<()> {
    if order < 10 {
        return Err(Error::invalid("cepstral order must be at least 10"));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid("alpha must be in [0, 1)"));
    }
    Ok(())
}

/// Periodogram normalized so a unit-variance white signal has unit power per bin.
fn periodogram(frame: &[f64], win: &[f64], nfft: usize) -> Vec<f64> {
    let xw: Vec<f64> = frame.iter().zip(win).map(|(a, b)| a * b).collect();
    let norm: f64 = win.iter().map(|v| v * v).sum();
    rfft(&xw, nfft)[..=nfft / 2]
        .iter()
        .map(|c| c.norm_sqr() / norm)
        .collect()
}

/// Fixed-window analysis: Hann frames of `grid.frame_length`, smoothed by
/// cepstral truncation.
pub fn mgc_analyze(w: &Waveform, grid: &FrameGrid, order: usize, alpha: f64) -> Result<MgcTrack> {
    check_args(order, alpha)?;
    if w.is_empty() {
        return Err(Error::EmptyInput);
    }
    let fs = w.fs();
    let len = grid.frame_len_samples(fs);
    let win = window(WindowKind::Hanning, len);
    let nfft = fft_size(len, true);
    let coeffs: Vec<Vec<f64>> = (0..grid.num_frames)
        .into_par_iter()
        .map(|n| {
            let frame = extract(w.samples(), frame_start(grid.time(n) * fs, len), len);
            mcep_from_power(&periodogram(&frame, &win, nfft), order, alpha)
        })
        .collect();
    MgcTrack::new(coeffs, order, alpha, *grid)
}

/// F0-adaptive analysis: a Hann window of three periods per frame and a
/// rectangular power smoother one F0 wide, which averages each harmonic over
/// its own slot before the log.
pub fn mgc_analyze_adaptive(w: &Waveform, f0: &ParamTrack, order: usize, alpha: f64) -> Result<MgcTrack> {
    check_args(order, alpha)?;
    if w.is_empty() {
        return Err(Error::EmptyInput);
    }
    let fs = w.fs();
    let grid = *f0.grid();
    let coeffs: Vec<Vec<f64>> = (0..grid.num_frames)
        .into_par_iter()
        .map(|n| {
            let f = f0[n];
            let len = ((3.0 * fs / f).round() as usize).max(4);
            let win = window(WindowKind::Hanning, len);
            let nfft = fft_size(len, true);
            let frame = extract(w.samples(), frame_start(grid.time(n) * fs, len), len);
            let p = periodogram(&frame, &win, nfft);
            let width = f * nfft as f64 / fs;
            mcep_from_power(&smooth_power(&p, width), order, alpha)
        })
        .collect();
    MgcTrack::new(coeffs, order, alpha, grid)
}

/// Moving average of `width` bins (fractional edges weighted) with mirrored ends.
fn smooth_power(p: &[f64], width: f64) -> Vec<f64> {
    if width <= 1.0 {
        return p.to_vec();
    }
    let n = p.len() as isize;
    let at = |k: isize| -> f64 {
        let mut k = k;
        // reflect about DC and Nyquist
        let period = 2 * (n - 1);
        k = k.rem_euclid(period.max(1));
        if k >= n {
            k = period - k;
        }
        p[k as usize]
    };
    let half = width / 2.0;
    let full = half.floor() as isize;
    let frac = half - full as f64;
    (0..n)
        .map(|k| {
            let mut s = 0.0;
            for d in -full..=full {
                s += at(k + d);
            }
            s += frac * (at(k - full - 1) + at(k + full + 1));
            s / width.max(1.0)
        })
        .collect()
}

/// Real log-amplitude of the envelope at `freqs` (Hz).
pub fn mgc_to_spectrum(c: &[f64], freqs: &[f64], fs: f64, alpha: f64) -> Vec<f64> {
    mgc_to_complex(c, freqs, fs, alpha).into_iter().map(|z| z.re).collect()
}

/// Complex log response `C(f) + j phase(f)` of the minimum-phase envelope filter.
pub fn mgc_to_complex(c: &[f64], freqs: &[f64], fs: f64, alpha: f64) -> Vec<Complex64> {
    freqs
        .iter()
        .map(|&f| {
            let beta = warp(2.0 * PI * f / fs, alpha);
            let mut re = c[0];
            let mut im = 0.0;
            for (n, &cn) in c.iter().enumerate().skip(1) {
                let (s, co) = (n as f64 * beta).sin_cos();
                re += 2.0 * cn * co;
                im -= 2.0 * cn * s;
            }
            Complex64::new(re, im)
        })
        .collect()
}

/// Precomputed `cos/sin(n beta_k)` for the bins of an `nfft`-point transform.
struct WarpTable {
    cos: Vec<Vec<f64>>,
    sin: Vec<Vec<f64>>,
}

impl WarpTable {
    fn new(nfft: usize, order: usize, alpha: f64) -> Self {
        let bins = nfft / 2 + 1;
        let betas: Vec<f64> = (0..bins)
            .map(|k| warp(2.0 * PI * k as f64 / nfft as f64, alpha))
            .collect();
        let mut cos = Vec::with_capacity(order + 1);
        let mut sin = Vec::with_capacity(order + 1);
        for n in 0..=order {
            cos.push(betas.iter().map(|b| (n as f64 * b).cos()).collect());
            sin.push(betas.iter().map(|b| (n as f64 * b).sin()).collect());
        }
        WarpTable { cos, sin }
    }

    /// Full-length Hermitian response `exp(sign * (C + j phase))`.
    fn response(&self, c: &[f64], nfft: usize, sign: f64) -> Vec<Complex64> {
        let bins = nfft / 2 + 1;
        let mut out = vec![Complex64::new(0.0, 0.0); nfft];
        for k in 0..bins {
            let mut re = c[0];
            let mut im = 0.0;
            for n in 1..c.len() {
                re += 2.0 * c[n] * self.cos[n][k];
                im -= 2.0 * c[n] * self.sin[n][k];
            }
            let v = Complex64::new(sign * re, sign * im).exp();
            out[k] = v;
            if k > 0 && k < nfft - k {
                out[nfft - k] = v.conj();
            }
        }
        out
    }
}

/// Time-varying envelope filtering without output scaling. `sign = 1` applies
/// the envelope, `-1` its inverse.
pub fn envelope_filter(x: &[f64], fs: f64, mgc: &MgcTrack, sign: f64) -> Vec<f64> {
    if x.is_empty() || mgc.is_empty() {
        return x.to_vec();
    }
    let grid = mgc.grid();
    let hop = grid.hop_samples(fs);
    let seg = 2 * hop;
    let nfft = next_pow2(seg + (fs / 16.0).ceil() as usize);
    let table = WarpTable::new(nfft, mgc.order(), mgc.alpha());
    let win = window(WindowKind::Hanning, seg);
    let nseg = x.len() / hop + 2;
    let pieces: Vec<(isize, Vec<f64>)> = (0..nseg)
        .into_par_iter()
        .filter_map(|j| {
            let start = (j * hop) as isize - hop as isize;
            let chunk = extract(x, start, seg);
            if chunk.iter().all(|&v| v == 0.0) {
                return None;
            }
            let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
            for (i, (v, g)) in chunk.iter().zip(&win).enumerate() {
                buf[i].re = v * g;
            }
            fft(&mut buf);
            let c = mgc.at_pos((j * hop) as f64 / fs / grid.frame_shift);
            let h = table.response(&c, nfft, sign);
            for (b, hv) in buf.iter_mut().zip(&h) {
                *b *= hv;
            }
            ifft(&mut buf);
            Some((start, buf.into_iter().map(|z| z.re).collect()))
        })
        .collect();
    let mut out = vec![0.0; x.len()];
    for (start, y) in pieces {
        crate::signal::add_at(&mut out, start, &y);
    }
    out
}

/// Synthesis filter. The output is scaled down only if its peak exceeds 1.
pub fn mglsa_filter(excitation: &Waveform, mgc: &MgcTrack) -> Result<Waveform> {
    let y = envelope_filter(excitation.samples(), excitation.fs(), mgc, 1.0);
    Ok(Waveform::new(y, excitation.sample_rate())?.limited())
}

/// Residual by applying the inverse envelope. Not rescaled.
pub fn inverse_filter(w: &Waveform, mgc: &MgcTrack) -> Result<Waveform> {
    let y = envelope_filter(w.samples(), w.fs(), mgc, -1.0);
    Waveform::new(y, w.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::gen::{self, Formant};
    use proptest::prelude::*;

    const FS: f64 = 16000.0;

    fn grid(n: usize) -> FrameGrid {
        FrameGrid::new(0.005, 0.025, n).unwrap()
    }

    fn flatness(x: &[f64]) -> f64 {
        let n = next_pow2(x.len());
        let p: Vec<f64> = rfft(x, n)[1..n / 2].iter().map(|c| c.norm_sqr() + 1e-20).collect();
        let g = (p.iter().map(|v| v.ln()).sum::<f64>() / p.len() as f64).exp();
        g / (p.iter().sum::<f64>() / p.len() as f64)
    }

    fn seg_snr(x: &[f64], y: &[f64], len: usize) -> f64 {
        let mut v = Vec::new();
        for (a, b) in x.chunks(len).zip(y.chunks(len)) {
            let s: f64 = a.iter().map(|v| v * v).sum();
            let e: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
            if s > 1e-6 {
                v.push(10.0 * (s / e.max(1e-30)).log10().min(60.0));
            }
        }
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn constant_track(c: Vec<f64>, n: usize) -> MgcTrack {
        let order = c.len() - 1;
        MgcTrack::new(vec![c; n], order, DEFAULT_ALPHA, grid(n)).unwrap()
    }

    fn single_formant() -> Vec<Formant> {
        vec![Formant {
            freq: 1000.0,
            bandwidth: 100.0,
        }]
    }

    #[test]
    fn warp_identity_at_zero_alpha() {
        assert_eq!(warp(PI / 2.0, 0.0), PI / 2.0);
        for i in 0..=20 {
            let w = PI * i as f64 / 20.0;
            assert!((warp(w, 0.0) - w).abs() < 1e-12);
            assert!((unwarp(warp(w, 0.42), 0.42) - w).abs() < 1e-12);
        }
    }

    #[test]
    fn warp_matches_allpass_phase() {
        for i in 1..20 {
            let w = PI * i as f64 / 20.0;
            let z = Complex64::from_polar(1.0, -w);
            let a = (z - 0.42) / (1.0 - 0.42 * z);
            assert!((warp(w, 0.42) + a.arg()).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_cepstrum_gives_constant_spectrum() {
        let mut c = vec![0.0; 25];
        c[0] = -1.3;
        let s = mgc_to_spectrum(&c, &[0.0, 100.0, 4000.0, 8000.0], FS, 0.42);
        assert!(s.iter().all(|v| (v + 1.3).abs() < 1e-15));
    }

    #[test]
    fn harmonic_evaluation_matches_dense_grid() {
        let c: Vec<f64> = (0..25).map(|n| 0.3 / (1.0 + n as f64).powi(2)).collect();
        let nfft = 8192;
        let table = WarpTable::new(nfft, 24, 0.42);
        let dense = table.response(&c, nfft, 1.0);
        let harm: Vec<f64> = (1..40).map(|k| 197.0 * k as f64).collect();
        let direct = mgc_to_spectrum(&c, &harm, FS, 0.42);
        for (f, d) in harm.iter().zip(direct) {
            let pos = f / FS * nfft as f64;
            let logs: Vec<f64> = dense[..=nfft / 2].iter().map(|z| z.norm().ln()).collect();
            let db = 20.0 / std::f64::consts::LN_10 * (d - interp_linear(&logs, pos)).abs();
            assert!(db < 0.1, "{f} Hz: {db} dB");
        }
    }

    #[test]
    fn white_noise_is_nearly_flat() {
        let x: Vec<f64> = gen::white_noise(16000, 3).iter().map(|v| 0.1 * v).collect();
        let w = Waveform::new(x, 16000).unwrap();
        let t = mgc_analyze(&w, &grid(200), 24, 0.42).unwrap();
        let mut mean = vec![0.0; 25];
        for c in t.coeffs() {
            for (m, v) in mean.iter_mut().zip(c) {
                *m += v / t.len() as f64;
            }
        }
        let avg_rest = mean[1..].iter().map(|v| v.abs()).sum::<f64>() / 24.0;
        assert!(avg_rest < 0.1 * mean[0].abs(), "{mean:?}");
    }

    #[test]
    fn zero_frames_hit_the_floor() {
        let w = Waveform::new(vec![0.0; 1600], 16000).unwrap();
        let t = mgc_analyze(&w, &grid(20), 24, 0.42).unwrap();
        let floor = 0.5 * 10f64.powf(FLOOR_DB / 10.0).ln();
        assert!((t.frame(5)[0] - floor).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_arguments() {
        let w = Waveform::new(vec![0.1; 1600], 16000).unwrap();
        assert!(mgc_analyze(&w, &grid(20), 5, 0.42).is_err());
        assert!(mgc_analyze(&w, &grid(20), 24, 1.0).is_err());
    }

    #[test]
    fn single_formant_peak_is_located() {
        let f = single_formant();
        let x = gen::vowel(FS, 16000, &|_| 120.0, &f, FS / 2.0, 1);
        let w = Waveform::new(x, 16000).unwrap();
        let f0 = ParamTrack::constant(120.0, grid(200), crate::signal::TrackKind::ContF0).unwrap();
        let t = mgc_analyze_adaptive(&w, &f0, 24, 0.42).unwrap();
        let freqs: Vec<f64> = (0..4000).map(|v| v as f64).collect();
        let s = mgc_to_spectrum(t.frame(100), &freqs, FS, 0.42);
        let peak = (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        assert!((peak as f64 - 1000.0).abs() <= 50.0, "{peak}");
    }

    #[test]
    fn adaptive_envelope_tracks_vowel_harmonics() {
        for (i, f) in gen::vowel_formants().iter().enumerate().take(5) {
            let f0v = 110.0 + 15.0 * i as f64;
            let x = gen::vowel(FS, 12000, &|_| f0v, f, FS / 2.0, i as u64);
            let w = Waveform::new(x, 16000).unwrap();
            let f0 = ParamTrack::constant(f0v, grid(150), crate::signal::TrackKind::ContF0).unwrap();
            let t = mgc_analyze_adaptive(&w, &f0, 24, 0.42).unwrap();
            let harm: Vec<f64> = (1..).map(|k| k as f64 * f0v).take_while(|&h| h < 7000.0).collect();
            let est = mgc_to_spectrum(t.frame(75), &harm, FS, 0.42);
            let err: f64 = harm
                .iter()
                .zip(&est)
                .map(|(&h, e)| {
                    (20.0 / std::f64::consts::LN_10 * (e - gen::formant_response(FS, f, h).norm().ln())).powi(2)
                })
                .sum::<f64>()
                / harm.len() as f64;
            assert!(err.sqrt() < 3.0, "vowel {i}: {} dB", err.sqrt());
        }
    }

    #[test]
    fn flat_filter_is_identity() {
        let x: Vec<f64> = gen::white_noise(4000, 1).iter().map(|v| 0.1 * v).collect();
        let w = Waveform::new(x.clone(), 16000).unwrap();
        let t = constant_track(vec![0.0; 25], 60);
        let y = mglsa_filter(&w, &t).unwrap();
        let r = inverse_filter(&w, &t).unwrap();
        for ((a, b), c) in x.iter().zip(y.samples()).zip(r.samples()) {
            assert!((a - b).abs() < 1e-12 && (a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn log_gain_doubles_amplitude() {
        let x: Vec<f64> = gen::white_noise(4000, 2).iter().map(|v| 0.05 * v).collect();
        let w = Waveform::new(x, 16000).unwrap();
        let mut c: Vec<f64> = (0..25).map(|n| if n == 0 { 0.0 } else { 0.1 / n as f64 }).collect();
        let a = mglsa_filter(&w, &constant_track(c.clone(), 60)).unwrap();
        c[0] += 2f64.ln();
        let b = mglsa_filter(&w, &constant_track(c, 60)).unwrap();
        let ratio = (b.power() / a.power()).sqrt();
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn impulse_through_formant_peaks_at_formant() {
        let f = single_formant();
        let freqs: Vec<f64> = (0..=512).map(|k| k as f64 * FS / 1024.0).collect();
        let logs: Vec<f64> = freqs
            .iter()
            .map(|&h| gen::formant_response(FS, &f, h).norm().ln())
            .collect();
        let c = mcep_from_log_amplitude(&logs, 40, 0.42);
        let mut x = vec![0.0; 4000];
        x[2000] = 0.5;
        let w = Waveform::new(x, 16000).unwrap();
        let y = mglsa_filter(&w, &constant_track(c, 60)).unwrap();
        let spec = rfft(y.samples(), 4096);
        let peak = (0..2048)
            .max_by(|&a, &b| spec[a].norm().total_cmp(&spec[b].norm()))
            .unwrap();
        let hz = peak as f64 * FS / 4096.0;
        assert!((hz - 1000.0).abs() <= 50.0, "{hz}");
    }

    #[test]
    fn residual_round_trip_and_whitening() {
        let f = &gen::vowel_formants()[0];
        let mut x = gen::vowel(FS, 12000, &|t| 120.0 + 30.0 * t, f, FS / 2.0, 4);
        gen::scale_to_peak(&mut x, 0.5);
        let w = Waveform::new(x.clone(), 16000).unwrap();
        let f0 = ParamTrack::new(
            (0..150).map(|n| 120.0 + 30.0 * n as f64 * 0.005).collect(),
            grid(150),
            crate::signal::TrackKind::ContF0,
        )
        .unwrap();
        let t = mgc_analyze_adaptive(&w, &f0, 24, 0.42).unwrap();
        let r = inverse_filter(&w, &t).unwrap();
        let y = envelope_filter(r.samples(), FS, &t, 1.0);
        let snr = seg_snr(&x[400..11600], &y[400..11600], 320);
        assert!(snr > 20.0, "{snr}");
        assert!(flatness(r.samples()) > flatness(&x));
    }

    #[test]
    fn bounded_output_for_extreme_envelopes() {
        let x = gen::white_noise(3200, 8);
        let w = Waveform::new(x, 16000).unwrap();
        let c: Vec<f64> = (0..25).map(|n| if n % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let y = mglsa_filter(&w, &constant_track(c, 40)).unwrap();
        assert!(y.samples().iter().all(|v| v.is_finite() && v.abs() <= 1.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn warp_is_monotone(alpha in 0.0f64..0.6) {
            let mut prev = -1.0;
            for i in 0..=200 {
                let b = warp(PI * i as f64 / 200.0, alpha);
                prop_assert!(b > prev);
                prev = b;
            }
        }

        #[test]
        fn cepstrum_round_trip(seed in 0u64..1000, order in 10usize..=24, alpha in 0.0f64..0.6) {
            let noise = gen::white_noise(order + 1, seed);
            let c: Vec<f64> = noise.iter().enumerate().map(|(n, v)| v * 0.5 / (1.0 + n as f64)).collect();
            let nfft = 2048;
            let freqs: Vec<f64> = (0..=nfft / 2).map(|k| k as f64 * FS / nfft as f64).collect();
            let log = mgc_to_spectrum(&c, &freqs, FS, alpha);
            let p: Vec<f64> = log.iter().map(|v| (2.0 * v).exp()).collect();
            let back = mcep_from_power(&p, order, alpha);
            let num: f64 = c.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum();
            let den: f64 = c.iter().map(|a| a * a).sum();
            prop_assert!((num / den).sqrt() < 0.05);
        }

        #[test]
        fn filter_output_is_finite(seed in 0u64..100) {
            let c: Vec<f64> = gen::white_noise(25, seed).iter().map(|v| 0.3 * v).collect();
            let x = gen::white_noise(1600, seed + 1);
            let y = envelope_filter(&x, FS, &constant_track(c, 20), 1.0);
            prop_assert!(y.iter().all(|v| v.is_finite()));
        }
    }
}
