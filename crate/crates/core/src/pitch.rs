//! Continuous F0 estimation.
//!
//! The baseline tracker turns per-frame autocorrelation peaks into log-F0
//! measurements whose variance shrinks with peak salience, then runs a
//! forward-backward Kalman smoother so every frame gets a value, voiced or
//! not. Three refinements operate on an existing track: an adaptive Kalman
//! filter driven by a signal-quality index, time-warped harmonic
//! instantaneous frequency, and StoneMask.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::signal::{
    extract, fft, frame_start, gen, ifft, interp_cubic, interp_linear, next_pow2, window, Complex64, FrameGrid,
    ParamTrack, TrackKind, Waveform, WindowKind,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchConfig {
    pub f0_min: f64,
    pub f0_max: f64,
    pub frame_shift: f64,
    pub harmonics_k: usize,
}

impl Default for PitchConfig {
    fn default() -> Self {
        PitchConfig {
            f0_min: 80.0,
            f0_max: 300.0,
            frame_shift: 0.005,
            harmonics_k: 6,
        }
    }
}

impl PitchConfig {
    pub fn validate(&self, fs: f64) -> Result<()> {
        if !(self.f0_min > 0.0 && self.f0_min < self.f0_max && self.f0_max < fs / 2.0) {
            return Err(Error::invalid(format!(
                "pitch range must satisfy 0 < f0_min < f0_max < fs/2 (got {}..{} at {fs} Hz)",
                self.f0_min, self.f0_max
            )));
        }
        if !(self.frame_shift > 0.0) {
            return Err(Error::invalid("frame shift must be positive"));
        }
        if self.harmonics_k == 0 {
            return Err(Error::invalid("need at least one harmonic"));
        }
        Ok(())
    }

    /// Autocorrelation window: three periods of the lowest F0, at least 40 ms.
    pub fn analysis_window(&self) -> f64 {
        (3.0 / self.f0_min).max(0.04)
    }

    pub fn prior_f0(&self) -> f64 {
        (self.f0_min * self.f0_max).sqrt()
    }
}

/// Scalar linear-Gaussian state: `x' = A x + w`, `z = B x + v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub x: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub a: f64,
    pub b: f64,
}

impl KalmanState {
    pub fn predict(&mut self) {
        self.x *= self.a;
        self.p = self.a * self.a * self.p + self.q;
    }

    pub fn update(&mut self, z: f64) {
        let s = self.b * self.b * self.p + self.r;
        let k = self.p * self.b / s;
        self.x += k * (z - self.b * self.x);
        self.p *= 1.0 - k * self.b;
    }
}

/// Forward Kalman filter followed by Rauch-Tung-Striebel smoothing.
/// `z[t] = None` marks a missing measurement.
pub fn kalman_smooth(z: &[Option<f64>], r: &[f64], q: &[f64], a: f64, b: f64, x0: f64, p0: f64) -> Vec<f64> {
    let n = z.len();
    if n == 0 {
        return Vec::new();
    }
    let mut xf = vec![0.0; n];
    let mut pf = vec![0.0; n];
    let mut xp = vec![0.0; n];
    let mut pp = vec![0.0; n];
    let mut st = KalmanState {
        x: x0,
        p: p0,
        q: q[0],
        r: r[0],
        a,
        b,
    };
    for t in 0..n {
        st.q = q[t];
        st.r = r[t];
        if t > 0 {
            st.predict();
        }
        xp[t] = st.x;
        pp[t] = st.p;
        if let Some(zt) = z[t] {
            st.update(zt);
        }
        xf[t] = st.x;
        pf[t] = st.p;
    }
    let mut xs = xf.clone();
    for t in (0..n - 1).rev() {
        let c = pf[t] * a / pp[t + 1];
        xs[t] = xf[t] + c * (xs[t + 1] - xp[t + 1]);
    }
    xs
}

/// Window-corrected normalized autocorrelation for each grid frame.
pub(crate) struct AcfFrames {
    pub acf: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
}

pub(crate) fn acf_frames(x: &[f64], fs: f64, grid: &FrameGrid, win_len: usize, max_lag: usize) -> AcfFrames {
    let win = window(WindowKind::Hanning, win_len);
    let nfft = next_pow2(2 * win_len.max(max_lag + 1));
    let rw = raw_acf(&win, nfft, max_lag);
    let wsum: f64 = win.iter().map(|v| v * v).sum();
    let out: Vec<(Vec<f64>, f64)> = (0..grid.num_frames)
        .into_par_iter()
        .map(|n| {
            let mut seg = extract(x, frame_start(grid.time(n) * fs, win_len), win_len);
            let mean = seg.iter().sum::<f64>() / win_len as f64;
            for (s, w) in seg.iter_mut().zip(&win) {
                *s = (*s - mean) * w;
            }
            let r = raw_acf(&seg, nfft, max_lag);
            if r[0] <= 1e-300 {
                return (vec![0.0; max_lag + 1], 0.0);
            }
            let acf = (0..=max_lag)
                .map(|k| {
                    if rw[k] <= 1e-12 * rw[0] {
                        0.0
                    } else {
                        ((r[k] / r[0]) / (rw[k] / rw[0])).clamp(-1.0, 1.0)
                    }
                })
                .collect();
            (acf, r[0] / wsum)
        })
        .collect();
    let (acf, energy) = out.into_iter().unzip();
    AcfFrames { acf, energy }
}

fn raw_acf(x: &[f64], nfft: usize, max_lag: usize) -> Vec<f64> {
    let mut buf: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); nfft];
    for (b, &v) in buf.iter_mut().zip(x) {
        b.re = v;
    }
    fft(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    ifft(&mut buf);
    buf[..=max_lag].iter().map(|c| c.re).collect()
}

/// Highest-scoring local autocorrelation maximum in `[lo, hi]` lags.
/// Returns the interpolated lag and its correlation.
pub(crate) fn best_acf_peak(
    r: &[f64],
    lo: usize,
    hi: usize,
    octave_cost: f64,
    fs: f64,
    f0_min: f64,
) -> Option<(f64, f64)> {
    let lo = lo.max(1);
    let hi = hi.min(r.len().saturating_sub(2));
    let mut best: Option<(f64, f64, f64)> = None;
    for k in lo..=hi {
        if !(r[k] >= r[k - 1] && r[k] > r[k + 1]) {
            continue;
        }
        let (off, val) = parabolic(r[k - 1], r[k], r[k + 1]);
        let lag = k as f64 + off;
        let score = val - octave_cost * (f0_min * lag / fs).log2();
        if best.is_none_or(|b| score > b.2) {
            best = Some((lag, val.min(1.0), score));
        }
    }
    best.map(|b| (b.0, b.1))
}

/// Vertex of the parabola through three equally spaced points: (offset, value).
pub(crate) fn parabolic(a: f64, b: f64, c: f64) -> (f64, f64) {
    let den = a - 2.0 * b + c;
    if den.abs() < 1e-300 {
        return (0.0, b);
    }
    let off = (0.5 * (a - c) / den).clamp(-0.5, 0.5);
    (off, b - 0.25 * (a - c) * off)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PitchEstimate {
    pub track: ParamTrack,
    /// Per-frame autocorrelation peak height in [0, 1]; 0 where no measurement was made.
    pub salience: Vec<f64>,
    /// True when no frame produced a measurement (for example silence).
    pub low_confidence: bool,
}

const BASELINE_R: f64 = 1e-4;
const BASELINE_Q: f64 = 5e-4;
const SALIENCE_EPS: f64 = 0.01;
const OCTAVE_COST: f64 = 0.1;

/// Baseline continuous F0: autocorrelation measurements smoothed in log-F0.
pub fn contf0_baseline(w: &Waveform, cfg: &PitchConfig) -> Result<PitchEstimate> {
    let fs = w.fs();
    cfg.validate(fs)?;
    if w.is_empty() {
        return Err(Error::EmptyInput);
    }
    let grid = FrameGrid::for_waveform(w, cfg.frame_shift, cfg.analysis_window().max(cfg.frame_shift))?;
    if grid.num_frames < 3 {
        return Err(Error::invalid("waveform shorter than 3 frames"));
    }
    let win_len = grid.frame_len_samples(fs);
    let lo = (fs / cfg.f0_max).floor() as usize;
    let hi = (fs / cfg.f0_min).ceil() as usize;
    let frames = acf_frames(w.samples(), fs, &grid, win_len, hi + 1);
    let emax = frames.energy.iter().cloned().fold(0.0, f64::max);

    let mut z = Vec::with_capacity(grid.num_frames);
    let mut r = Vec::with_capacity(grid.num_frames);
    let mut salience = Vec::with_capacity(grid.num_frames);
    for (acf, &e) in frames.acf.iter().zip(&frames.energy) {
        let peak = if emax > 0.0 && e > 1e-6 * emax {
            best_acf_peak(acf, lo, hi, OCTAVE_COST, fs, cfg.f0_min)
        } else {
            None
        };
        match peak {
            Some((lag, val)) => {
                let s = val.clamp(0.0, 1.0);
                z.push(Some((fs / lag).ln()));
                r.push(BASELINE_R / (s + SALIENCE_EPS));
                salience.push(s);
            }
            None => {
                z.push(None);
                r.push(1.0);
                salience.push(0.0);
            }
        }
    }
    let low_confidence = z.iter().all(|v| v.is_none());
    let q = vec![BASELINE_Q; grid.num_frames];
    let x0 = cfg.prior_f0().ln();
    let xs = kalman_smooth(&z, &r, &q, 1.0, 1.0, x0, 1.0);
    let lo_f = cfg.f0_min * 0.5;
    let hi_f = cfg.f0_max * 2.0;
    let values = xs.iter().map(|v| v.exp().clamp(lo_f, hi_f)).collect();
    Ok(PitchEstimate {
        track: ParamTrack::new(values, grid, TrackKind::ContF0)?,
        salience,
        low_confidence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AkfConfig {
    pub r0: f64,
    pub q0: f64,
    pub eps: f64,
    pub max_iter: usize,
    pub tol_hz: f64,
}

impl Default for AkfConfig {
    fn default() -> Self {
        AkfConfig {
            r0: 1e-2,
            q0: 1e-3,
            eps: 0.01,
            max_iter: 20,
            tol_hz: 0.1,
        }
    }
}

/// Signal-quality index: autocorrelation at the lag of `f0`, in [0, 1].
fn sqi(acf: &[f64], fs: f64, f0: f64) -> f64 {
    let lag = fs / f0;
    if lag >= (acf.len() - 1) as f64 {
        return 0.0;
    }
    interp_linear(acf, lag).clamp(0.0, 1.0)
}

/// Adaptive Kalman refinement. Measurement noise grows as the SQI of the
/// measured F0 drops; state noise follows the SQI of the current estimate.
pub fn refine_akf(f0: &ParamTrack, w: &Waveform, cfg: &PitchConfig, akf: &AkfConfig) -> Result<ParamTrack> {
    let fs = w.fs();
    cfg.validate(fs)?;
    let grid = *f0.grid();
    Error::check_len(
        f0.len(),
        FrameGrid::for_waveform(w, grid.frame_shift, grid.frame_length)?.num_frames,
    )?;
    if akf.max_iter == 0 {
        return Ok(f0.clone());
    }
    let win_len = (cfg.analysis_window() * fs).round() as usize;
    let max_lag = ((fs / (0.5 * cfg.f0_min)).ceil() as usize).min(win_len - 1);
    let frames = acf_frames(w.samples(), fs, &grid, win_len, max_lag);

    let meas = f0.values();
    let z: Vec<Option<f64>> = meas.iter().map(|v| Some(v.ln())).collect();
    let r: Vec<f64> = meas
        .iter()
        .zip(&frames.acf)
        .map(|(&v, acf)| akf.r0 * (1.0 - sqi(acf, fs, v) + akf.eps).powi(2))
        .collect();
    let mut cur: Vec<f64> = meas.to_vec();
    for _ in 0..akf.max_iter {
        let q: Vec<f64> = cur
            .iter()
            .zip(&frames.acf)
            .map(|(&v, acf)| akf.q0 * (sqi(acf, fs, v) + akf.eps))
            .collect();
        let xs = kalman_smooth(&z, &r, &q, 1.0, 1.0, z[0].unwrap_or(0.0), akf.r0);
        let next: Vec<f64> = xs
            .iter()
            .map(|v| v.exp().clamp(0.5 * cfg.f0_min, 2.0 * cfg.f0_max))
            .collect();
        let delta = next.iter().zip(&cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        cur = next;
        if delta < akf.tol_hz {
            break;
        }
    }
    f0.with_values(cur)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarmonicWeighting {
    /// Weights proportional to band-pass output magnitude.
    Magnitude,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimewarpConfig {
    pub iterations: usize,
    pub weighting: HarmonicWeighting,
}

impl Default for TimewarpConfig {
    fn default() -> Self {
        TimewarpConfig {
            iterations: 2,
            weighting: HarmonicWeighting::Magnitude,
        }
    }
}

/// Weighted average of per-harmonic estimates `if_k / k` with weights
/// normalized to sum to one. `ifs[k-1]` belongs to harmonic `k`.
pub fn combine_harmonics(ifs: &[f64], weights: &[f64]) -> Option<f64> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    Some(
        ifs.iter()
            .zip(weights)
            .enumerate()
            .map(|(i, (f, w))| w / total * f / (i + 1) as f64)
            .sum(),
    )
}

fn clamp_track(values: &[f64], cfg: &PitchConfig) -> Vec<f64> {
    let (lo, hi) = (0.5 * cfg.f0_min, 2.0 * cfg.f0_max);
    if values.iter().any(|&v| v < lo || v > hi) {
        log::warn!("F0 values outside [{lo}, {hi}] Hz clamped before refinement");
    }
    values.iter().map(|v| v.clamp(lo, hi)).collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Time-warping refinement: warp so the current trajectory is flat, measure
/// harmonic instantaneous frequencies with Nuttall band-pass filters, unwarp.
pub fn refine_timewarp(f0: &ParamTrack, w: &Waveform, cfg: &PitchConfig, tw: &TimewarpConfig) -> Result<ParamTrack> {
    let fs = w.fs();
    cfg.validate(fs)?;
    let grid = *f0.grid();
    Error::check_len(
        f0.len(),
        FrameGrid::for_waveform(w, grid.frame_shift, grid.frame_length)?.num_frames,
    )?;
    let mut cur = clamp_track(f0.values(), cfg);
    for _ in 0..tw.iterations {
        cur = timewarp_pass(&cur, w.samples(), fs, grid.frame_shift, cfg, tw);
    }
    f0.with_values(cur)
}

fn timewarp_pass(f0: &[f64], x: &[f64], fs: f64, shift: f64, cfg: &PitchConfig, tw: &TimewarpConfig) -> Vec<f64> {
    let n = x.len();
    let f_ref = median(f0);
    // warped time (seconds) of every input sample
    let mut tau = vec![0.0; n];
    let rate = |i: usize| interp_linear(f0, i as f64 / fs / shift) / f_ref;
    let mut prev = rate(0);
    for i in 1..n {
        let cur = rate(i);
        tau[i] = tau[i - 1] + 0.5 * (prev + cur) / fs;
        prev = cur;
    }
    let m_len = (tau[n - 1] * fs).floor() as usize + 1;
    let mut xw = Vec::with_capacity(m_len);
    let mut j = 0usize;
    for m in 0..m_len {
        let tm = m as f64 / fs;
        while j + 1 < n && tau[j + 1] <= tm {
            j += 1;
        }
        let pos = if j + 1 < n {
            let d = tau[j + 1] - tau[j];
            j as f64 + if d > 0.0 { (tm - tau[j]) / d } else { 0.0 }
        } else {
            j as f64
        };
        xw.push(interp_cubic(x, pos));
    }

    let half = 2.0 / f_ref;
    let span = (half * fs).ceil() as isize;
    let kmax = cfg.harmonics_k;
    let w0 = 2.0 * PI * f_ref;
    (0..f0.len())
        .into_par_iter()
        .map(|fr| {
            let pos = fr as f64 * shift * fs;
            let tc = interp_linear(&tau, pos);
            let mc = (tc * fs).round() as isize;
            let mut y = vec![Complex64::new(0.0, 0.0); kmax];
            let mut yd = vec![Complex64::new(0.0, 0.0); kmax];
            for m in (mc - span).max(0)..=(mc + span).min(m_len as isize - 1) {
                let s = tc - m as f64 / fs;
                let u = s / half;
                if u.abs() >= 1.0 {
                    continue;
                }
                let g = WindowKind::Nuttall.at(u);
                let gd = WindowKind::Nuttall.derivative_at(u) / half;
                let base = Complex64::from_polar(1.0, w0 * s);
                let mut e = base;
                let xv = xw[m as usize];
                for k in 0..kmax {
                    let wk = w0 * (k + 1) as f64;
                    y[k] += e * (xv * g);
                    yd[k] += e * Complex64::new(xv * gd, xv * g * wk);
                    e *= base;
                }
            }
            let mut ifs = Vec::with_capacity(kmax);
            let mut wts = Vec::with_capacity(kmax);
            for k in 0..kmax {
                let mag2 = y[k].norm_sqr();
                if mag2 <= 1e-300 || (k + 1) as f64 * f_ref >= fs / 2.0 {
                    ifs.push(0.0);
                    wts.push(0.0);
                    continue;
                }
                ifs.push((y[k].conj() * yd[k]).im / mag2 / (2.0 * PI));
                wts.push(match tw.weighting {
                    HarmonicWeighting::Magnitude => mag2.sqrt(),
                    HarmonicWeighting::Uniform => 1.0,
                });
            }
            let orig = f0[fr];
            match combine_harmonics(&ifs, &wts) {
                Some(fw) if fw.is_finite() && fw > 0.0 => (fw * orig / f_ref).clamp(0.5 * cfg.f0_min, 2.0 * cfg.f0_max),
                _ => orig,
            }
        })
        .collect()
}

/// Half-width of the StoneMask Blackman window, in periods of the candidate.
pub const STONEMASK_HALF_PERIODS: f64 = 3.0;

/// One StoneMask step at time `center` (seconds) for candidate `f0`. `None`
/// when the window does not fit inside the signal: a truncated window biases
/// the instantaneous frequency by several Hz.
pub fn stonemask_step(x: &[f64], fs: f64, center: f64, f0: f64, harmonics: usize) -> Option<f64> {
    let half = STONEMASK_HALF_PERIODS / f0;
    if x.is_empty() || center - half < 0.0 || (center + half) * fs > (x.len() - 1) as f64 {
        return None;
    }
    let first = ((center - half) * fs).ceil() as usize;
    let last = (((center + half) * fs).floor() as usize).min(x.len() - 1);
    let w0 = 2.0 * PI * f0;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 1..=harmonics {
        let wk = w0 * k as f64;
        if wk >= PI * fs {
            break;
        }
        let mut s = Complex64::new(0.0, 0.0);
        let mut sd = Complex64::new(0.0, 0.0);
        for n in first..=last {
            let t = n as f64 / fs - center;
            let u = t / half;
            let e = Complex64::from_polar(x[n], -wk * t);
            s += e * WindowKind::Blackman.at(u);
            sd += e * (WindowKind::Blackman.derivative_at(u) / half);
        }
        let mag2 = s.norm_sqr();
        if mag2 <= 1e-300 {
            continue;
        }
        let inst = (wk - (sd * s.conj()).im / mag2) / (2.0 * PI);
        let mag = mag2.sqrt();
        num += mag * inst;
        den += k as f64 * mag;
    }
    if den > 0.0 {
        Some(num / den)
    } else {
        None
    }
}

/// StoneMask refinement, two passes of the magnitude-weighted harmonic
/// instantaneous-frequency average.
pub fn refine_stonemask(f0: &ParamTrack, w: &Waveform, cfg: &PitchConfig) -> Result<ParamTrack> {
    let fs = w.fs();
    cfg.validate(fs)?;
    let grid = *f0.grid();
    Error::check_len(
        f0.len(),
        FrameGrid::for_waveform(w, grid.frame_shift, grid.frame_length)?.num_frames,
    )?;
    let (lo, hi) = (0.5 * cfg.f0_min, 2.0 * cfg.f0_max);
    let refined: Vec<Option<f64>> = f0
        .values()
        .par_iter()
        .enumerate()
        .map(|(n, &cand)| {
            if cand < lo {
                return None;
            }
            let t = grid.time(n);
            let mut f = cand;
            for _ in 0..2 {
                match stonemask_step(w.samples(), fs, t, f, cfg.harmonics_k) {
                    Some(v) if v.is_finite() && v >= lo && v <= hi => f = v,
                    _ => return Some(cand),
                }
            }
            Some(f)
        })
        .collect();
    let mut out = Vec::with_capacity(refined.len());
    for (n, r) in refined.into_iter().enumerate() {
        let v = match r {
            Some(v) => v,
            None => out.last().copied().unwrap_or(f0[n].max(lo)),
        };
        out.push(v);
    }
    f0.with_values(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    White,
    Pink,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "white" => Ok(NoiseKind::White),
            "pink" => Ok(NoiseKind::Pink),
            o => Err(Error::invalid(format!("unknown noise kind '{o}'"))),
        }
    }
}

/// Adds seeded noise at exactly `snr_db` relative to the signal power.
/// Pink noise falls 3 dB per octave.
pub fn add_noise(w: &Waveform, kind: NoiseKind, snr_db: f64, seed: u64) -> Result<Waveform> {
    if !snr_db.is_finite() {
        return Err(Error::invalid("SNR must be finite"));
    }
    let n = w.len();
    let ps = w.power();
    if n == 0 || ps == 0.0 {
        return Ok(w.clone());
    }
    let noise = match kind {
        NoiseKind::White => gen::white_noise(n, seed),
        NoiseKind::Pink => {
            let fs = w.fs();
            let df = fs / n as f64;
            gen::shaped_noise(fs, n, seed, &|f| if f < 0.5 * df { 0.0 } else { (df / f).sqrt() })
        }
    };
    let pn = noise.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let g = (ps / (pn * 10f64.powf(snr_db / 10.0))).sqrt();
    Waveform::new(
        w.samples().iter().zip(&noise).map(|(s, v)| s + g * v).collect(),
        w.sample_rate(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchErrorReport {
    pub gpe: f64,
    pub mfpe: f64,
    pub std: f64,
    pub rmse: f64,
    pub n_voiced: usize,
    pub n_gross: usize,
}

pub const GROSS_ERROR_THRESHOLD: f64 = 0.2;

/// GPE, MFPE, STD and RMSE over reference-voiced frames.
pub fn pitch_error_metrics(est: &ParamTrack, reference: &ParamTrack, voicing_ref: &[bool]) -> Result<PitchErrorReport> {
    Error::check_len(est.len(), reference.len())?;
    Error::check_len(voicing_ref.len(), reference.len())?;
    let mut n_v = 0usize;
    let mut n_ge = 0usize;
    let mut fine_sum = 0.0;
    let mut fine_sq = 0.0;
    let mut sq = 0.0;
    for ((&e, &r), &v) in est.values().iter().zip(reference.values()).zip(voicing_ref) {
        if !v {
            continue;
        }
        if !(r > 0.0) {
            return Err(Error::invalid("voiced reference frame with non-positive F0"));
        }
        n_v += 1;
        let d = e - r;
        sq += d * d;
        if (e / r - 1.0).abs() > GROSS_ERROR_THRESHOLD {
            n_ge += 1;
        } else {
            fine_sum += d;
            fine_sq += d * d;
        }
    }
    if n_v == 0 {
        return Err(Error::NoVoicedFrames);
    }
    let n_fe = n_v - n_ge;
    let (mfpe, std) = if n_fe > 0 {
        let m = fine_sum / n_fe as f64;
        (m, (fine_sq / n_fe as f64 - m * m).max(0.0).sqrt())
    } else {
        (0.0, 0.0)
    };
    Ok(PitchErrorReport {
        gpe: n_ge as f64 / n_v as f64 * 100.0,
        mfpe,
        std,
        rmse: (sq / n_v as f64).sqrt(),
        n_voiced: n_v,
        n_gross: n_ge,
    })
}

/// One-sided periodogram of the mean-removed track: `(frequency_hz, power)`.
/// Powers sum to `N * variance`.
pub fn psd_periodogram(t: &ParamTrack) -> Result<Vec<(f64, f64)>> {
    let n = t.len();
    if n < 8 {
        return Err(Error::invalid("periodogram needs at least 8 frames"));
    }
    let mean = t.values().iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = t.values().iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
    fft(&mut buf);
    let rate = 1.0 / t.grid().frame_shift;
    Ok((0..=n / 2)
        .map(|k| {
            let p = buf[k].norm_sqr() / n as f64;
            let both = k != 0 && !(n.is_multiple_of(2) && k == n / 2);
            (k as f64 * rate / n as f64, if both { 2.0 * p } else { p })
        })
        .collect())
}
