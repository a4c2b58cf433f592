//! Waveform generation from analysis parameters: the source-filter path
//! (PCA pulse excitation plus shaped noise through the envelope filter), the
//! continuous sinusoidal model, and a pulse-noise reference vocoder.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::envelopes::{self, EnvelopeKind};
use crate::error::{Error, Result};
use crate::excitation::{hnr_weights, ResidualBasis};
use crate::noise_mask::{frame_gains, CnmTrack};
use crate::signal::{
    add_at, fft, gen, ifft, interp_cubic, interp_linear, next_pow2, window, Complex64, FrameGrid, ParamTrack,
    TrackKind, Waveform, WindowKind,
};
use crate::spectral::{self, MgcTrack};

/// Half-width of the raised-cosine transition of the band-split filters.
pub const TRANSITION_HZ: f64 = 100.0;
/// A frame is voiced for the sinusoidal model when `MVF > ratio * F0`.
pub const DEFAULT_VOICING_RATIO: f64 = 1.5;

/// Parameter streams on one frame grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisBundle {
    pub contf0: ParamTrack,
    pub mvf: ParamTrack,
    pub mgc: MgcTrack,
    pub hnr: Option<ParamTrack>,
    pub cnm: Option<CnmTrack>,
    pub basis: Option<ResidualBasis>,
    pub envelope_kind: EnvelopeKind,
    pub sample_rate: u32,
}

impl AnalysisBundle {
    /// Checks that every track shares the F0 grid and has one value per frame.
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        let g = self.contf0.grid();
        if g.num_frames == 0 {
            return Err(Error::EmptyInput);
        }
        if self.contf0.kind() != TrackKind::ContF0 || self.mvf.kind() != TrackKind::Mvf {
            return Err(Error::invalid("contf0 and mvf tracks have the wrong kind"));
        }
        let same = |o: &FrameGrid| o.num_frames == g.num_frames && (o.frame_shift - g.frame_shift).abs() < 1e-12;
        if !same(self.mvf.grid()) || !same(self.mgc.grid()) {
            return Err(Error::LengthMismatch {
                left: g.num_frames,
                right: if same(self.mvf.grid()) {
                    self.mgc.len()
                } else {
                    self.mvf.len()
                },
            });
        }
        if let Some(h) = &self.hnr {
            if !same(h.grid()) {
                return Err(Error::LengthMismatch {
                    left: g.num_frames,
                    right: h.len(),
                });
            }
        }
        if let Some(c) = &self.cnm {
            Error::check_len(c.len(), g.num_frames)?;
        }
        if let Some(b) = &self.basis {
            if b.is_empty() {
                return Err(Error::invalid("residual basis is empty"));
            }
        }
        Ok(())
    }

    pub fn fs(&self) -> f64 {
        self.sample_rate as f64
    }

    pub fn num_frames(&self) -> usize {
        self.contf0.len()
    }

    pub fn hop(&self) -> usize {
        self.contf0.grid().hop_samples(self.fs())
    }

    /// Output length of both synthesizers: one hop per frame.
    pub fn output_len(&self) -> usize {
        self.num_frames() * self.hop()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub cnm_threshold: f64,
    /// Apply the bundle's cNM track when present.
    pub use_cnm: bool,
    pub voicing_ratio: f64,
    /// Include the noise component (sinusoidal model).
    pub noise: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            cnm_threshold: crate::noise_mask::DEFAULT_CNM_THRESHOLD,
            use_cnm: true,
            voicing_ratio: DEFAULT_VOICING_RATIO,
            noise: true,
        }
    }
}

/// Low-pass gain at `f` for a raised-cosine edge of `TRANSITION_HZ` on each
/// side of `cutoff`. A cutoff at or above Nyquist passes everything.
pub fn lowpass_gain(f: f64, cutoff: f64, fs: f64) -> f64 {
    if cutoff >= fs / 2.0 {
        return 1.0;
    }
    let (a, b) = (cutoff - TRANSITION_HZ, cutoff + TRANSITION_HZ);
    if f <= a {
        1.0
    } else if f >= b {
        0.0
    } else {
        0.5 * (1.0 + (PI * (f - a) / (b - a)).cos())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Band {
    Low,
    High,
}

/// Zero-phase STFT band split with Hann segments of two hops; the cutoff is
/// read from `cutoff` (one value per hop-spaced frame, linearly interpolated).
fn band_filter(x: &[f64], fs: f64, hop: usize, cutoff: &[f64], band: Band) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let seg = 2 * hop;
    let nfft = next_pow2(seg + (2.0 * fs / TRANSITION_HZ).ceil() as usize);
    let win = window(WindowKind::Hanning, seg);
    let nseg = x.len() / hop + 2;
    let pieces: Vec<(isize, Vec<f64>)> = (0..nseg)
        .into_par_iter()
        .filter_map(|j| {
            let start = j as isize * hop as isize - hop as isize;
            let chunk = crate::signal::extract(x, start, seg);
            if chunk.iter().all(|&v| v == 0.0) {
                return None;
            }
            let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
            for (i, (v, g)) in chunk.iter().zip(&win).enumerate() {
                buf[i].re = v * g;
            }
            fft(&mut buf);
            let fc = interp_linear(cutoff, j as f64);
            for k in 0..=nfft / 2 {
                let lp = lowpass_gain(k as f64 * fs / nfft as f64, fc, fs);
                let g = match band {
                    Band::Low => lp,
                    Band::High => 1.0 - lp,
                };
                buf[k] *= g;
                if k > 0 && k < nfft - k {
                    buf[nfft - k] *= g;
                }
            }
            ifft(&mut buf);
            Some((start, buf.into_iter().map(|z| z.re).collect()))
        })
        .collect();
    let mut out = vec![0.0; x.len()];
    for (start, y) in pieces {
        // zero-phase filtering spreads each segment to both sides; the
        // second half of the buffer holds negative times
        let (pos, neg) = y.split_at(nfft / 2);
        add_at(&mut out, start, pos);
        add_at(&mut out, start - neg.len() as isize, neg);
    }
    out
}

fn check_cutoffs(w: &Waveform, cutoff: &ParamTrack) -> Result<()> {
    if cutoff.values().iter().any(|&c| !(c > 0.0)) {
        return Err(Error::invalid("cutoff must be positive"));
    }
    if w.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Frame-wise zero-phase low-pass at the per-frame cutoffs of `cutoff`.
pub fn lowpass_at(w: &Waveform, cutoff: &ParamTrack) -> Result<Waveform> {
    check_cutoffs(w, cutoff)?;
    let hop = cutoff.grid().hop_samples(w.fs());
    Waveform::new(
        band_filter(w.samples(), w.fs(), hop, cutoff.values(), Band::Low),
        w.sample_rate(),
    )
}

/// Complement of [`lowpass_at`].
pub fn highpass_at(w: &Waveform, cutoff: &ParamTrack) -> Result<Waveform> {
    check_cutoffs(w, cutoff)?;
    let hop = cutoff.grid().hop_samples(w.fs());
    Waveform::new(
        band_filter(w.samples(), w.fs(), hop, cutoff.values(), Band::High),
        w.sample_rate(),
    )
}

/// Per-sample F0 from a hop-spaced track.
fn f0_per_sample(f0: &ParamTrack, hop: usize, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| interp_linear(f0.values(), k as f64 / hop as f64))
        .collect()
}

/// Fractional sample positions where the running F0 phase crosses an integer.
pub fn pulse_instants(f0: &ParamTrack, fs: f64, n: usize) -> Vec<f64> {
    let hop = f0.grid().hop_samples(fs);
    let f = f0_per_sample(f0, hop, n);
    let mut out = Vec::new();
    let mut phase = 0.0;
    for k in 1..n {
        let inc = 0.5 * (f[k - 1] + f[k]) / fs;
        let next = phase + inc;
        if next.floor() > phase.floor() {
            let frac = (next.floor() - phase) / inc;
            out.push((k - 1) as f64 + frac);
        }
        phase = next;
    }
    out
}

/// One excitation pulse spanning two local periods, sampled at offsets from
/// the pulse instant. Its energy below `band` (fraction of Nyquist) is
/// `band * period`, i.e. unit power spectral density in the voiced band, so a
/// band-limited prototype is not boosted relative to a flat one.
enum Pulse<'a> {
    Basis(&'a [f64]),
    Impulse,
}

impl Pulse<'_> {
    fn render(&self, period: f64, frac: f64, band: f64) -> Vec<f64> {
        let half = period.round().max(2.0) as usize;
        let len = 2 * half;
        // sample i sits at offset t = i - half - frac from the instant
        let mut v: Vec<f64> = match self {
            Pulse::Basis(b) => {
                let scale = b.len() as f64 / (2.0 * period);
                let mid = (b.len() - 1) as f64 / 2.0;
                (0..len)
                    .map(|i| {
                        let t = i as f64 - half as f64 - frac;
                        let pos = mid + t * scale;
                        if pos < 0.0 || pos > (b.len() - 1) as f64 {
                            0.0
                        } else {
                            interp_cubic(b, pos)
                        }
                    })
                    .collect()
            }
            Pulse::Impulse => (0..len)
                .map(|i| {
                    let t = i as f64 - half as f64 - frac;
                    let sinc = if t.abs() < 1e-12 {
                        1.0
                    } else {
                        (PI * t).sin() / (PI * t)
                    };
                    sinc * 0.5 * (1.0 + (PI * t / half as f64).cos())
                })
                .collect(),
        };
        let band = band.clamp(0.0, 1.0);
        let e = if band >= 1.0 {
            v.iter().map(|x| x * x).sum::<f64>()
        } else {
            band_energy(&v, band)
        };
        if e > 0.0 {
            let g = (band.max(f64::MIN_POSITIVE) * period / e).sqrt();
            v.iter_mut().for_each(|x| *x *= g);
        }
        v
    }
}

/// Energy of `v` in the band from 0 to `band` times Nyquist, via Parseval on a
/// zero-padded DFT.
fn band_energy(v: &[f64], band: f64) -> f64 {
    let n = next_pow2(2 * v.len().max(1));
    let mut buf: Vec<Complex64> = (0..n)
        .map(|k| Complex64::new(v.get(k).copied().unwrap_or(0.0), 0.0))
        .collect();
    fft(&mut buf);
    let edge = (band * (n / 2) as f64).round() as usize;
    // bins 1..edge appear twice in the two-sided spectrum
    let mut e = buf[0].norm_sqr();
    e += 2.0 * buf[1..edge.min(n / 2)].iter().map(|c| c.norm_sqr()).sum::<f64>();
    if edge >= n / 2 {
        e += buf[n / 2].norm_sqr();
    }
    e / n as f64
}

fn pulse_for(b: &AnalysisBundle) -> Pulse<'_> {
    match &b.basis {
        Some(basis) if !basis.is_empty() => Pulse::Basis(basis.first()),
        _ => {
            log::warn!("no residual basis in bundle; using impulse excitation");
            Pulse::Impulse
        }
    }
}

/// Per-sample gain that imposes the temporal envelope of each pulse on the
/// noise, as a Hann-weighted average of the per-period envelopes.
fn modulation_curve(n: usize, instants: &[f64], periods: &[f64], pulse: &Pulse<'_>, kind: EnvelopeKind) -> Vec<f64> {
    if kind == EnvelopeKind::None {
        return vec![1.0; n];
    }
    let mut acc = vec![0.0; n];
    let mut norm = vec![0.0; n];
    for (&p, &t0) in instants.iter().zip(periods) {
        let frame = pulse.render(t0, 0.0, 1.0);
        let env = match envelopes::estimate(kind, &frame) {
            Ok(e) => e.modulation(),
            Err(_) => vec![1.0; frame.len()],
        };
        let hann = window(WindowKind::Hanning, frame.len());
        let start = p.round() as isize - (frame.len() / 2) as isize;
        let weighted: Vec<f64> = env.iter().zip(&hann).map(|(a, b)| a * b).collect();
        add_at(&mut acc, start, &weighted);
        add_at(&mut norm, start, &hann);
    }
    acc.iter()
        .zip(&norm)
        .map(|(a, w)| if *w > 1e-3 { a / w } else { 1.0 })
        .collect()
}

/// Voiced pulse train: one rendered pulse per instant, scaled by `gain(k)`.
fn pulse_train(
    n: usize,
    instants: &[f64],
    periods: &[f64],
    pulse: &Pulse<'_>,
    band: &dyn Fn(f64) -> f64,
    gain: &dyn Fn(f64) -> f64,
) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (&p, &t0) in instants.iter().zip(periods) {
        let base = p.floor();
        let v = pulse.render(t0, p - base, band(p));
        let half = (v.len() / 2) as isize;
        let g = gain(p);
        let scaled: Vec<f64> = v.iter().map(|x| x * g).collect();
        add_at(&mut out, base as isize - half, &scaled);
    }
    out
}

fn frame_of(k: f64, hop: usize, frames: usize) -> usize {
    ((k / hop as f64).round().max(0.0) as usize).min(frames - 1)
}

/// Source-filter synthesis: pitch-synchronous pulses low-passed at the MVF
/// plus high-passed, envelope-modulated noise, weighted by HNR, optionally
/// masked by cNM, then shaped by the spectral envelope.
pub fn synth_source_filter(b: &AnalysisBundle, cfg: &SynthConfig) -> Result<Waveform> {
    b.validate()?;
    let fs = b.fs();
    let hop = b.hop();
    let n = b.output_len();
    let frames = b.num_frames();
    let pulse = pulse_for(b);
    let instants = pulse_instants(&b.contf0, fs, n);
    let periods: Vec<f64> = instants
        .iter()
        .map(|&p| fs / interp_linear(b.contf0.values(), p / hop as f64))
        .collect();
    let weights = b.hnr.as_ref().map(hnr_weights).transpose()?;
    let cnm = if cfg.use_cnm { b.cnm.as_ref() } else { None };

    let voiced_gain = |k: f64| -> f64 {
        let w = weights.as_ref().map_or(1.0, |w| w.voiced_at_sample(k, fs));
        let m = cnm.map_or(1.0, |c| {
            frame_gains(c.values[frame_of(k, hop, frames)], cfg.cnm_threshold).0
        });
        w * m
    };
    let band = |k: f64| interp_linear(b.mvf.values(), k / hop as f64) / (fs / 2.0);
    let voiced = pulse_train(n, &instants, &periods, &pulse, &band, &voiced_gain);
    let voiced = band_filter(&voiced, fs, hop, b.mvf.values(), Band::Low);

    let noise = gen::white_noise(n, cfg.seed);
    let noise = band_filter(&noise, fs, hop, b.mvf.values(), Band::High);
    let modulation = modulation_curve(n, &instants, &periods, &pulse, b.envelope_kind);
    let excitation: Vec<f64> = (0..n)
        .map(|k| {
            let kf = k as f64;
            let wu = weights.as_ref().map_or(1.0, |w| w.unvoiced_at_sample(kf, fs));
            let mu = cnm.map_or(1.0, |c| {
                frame_gains(c.values[frame_of(kf, hop, frames)], cfg.cnm_threshold).1
            });
            voiced[k] + noise[k] * modulation[k] * wu * mu
        })
        .collect();
    spectral::mglsa_filter(&Waveform::new(excitation, b.sample_rate)?, &b.mgc)
}

/// Per-frame parameters of the sinusoidal model.
#[derive(Debug, Clone, PartialEq)]
pub struct CsmFrameParams {
    pub k: usize,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
    /// Running excitation phase after this frame (radians).
    pub gamma_acc: f64,
    /// Angular frequency in radians per sample.
    pub w0: f64,
}

/// Number of harmonics: `round(MVF / F0) - 1` (at least 1) on voiced frames, 0 otherwise.
pub fn harmonic_count(f0: f64, mvf: f64, voicing_ratio: f64) -> usize {
    if mvf > voicing_ratio * f0 {
        (((mvf / f0).round() as i64) - 1).max(1) as usize
    } else {
        0
    }
}

/// Parameters for one frame. `prev` is `(gamma, w0)` of the previous frame,
/// `None` for the first frame; `hop` is the frame shift in samples.
pub fn csm_frame_params(
    f0: f64,
    mvf: f64,
    mgc_frame: &[f64],
    alpha: f64,
    fs: f64,
    hop: usize,
    prev: Option<(f64, f64)>,
    voicing_ratio: f64,
) -> Result<CsmFrameParams> {
    if !(f0 > 0.0 && mvf > 0.0) {
        return Err(Error::invalid("contF0 and MVF must be positive"));
    }
    let w0 = 2.0 * PI * f0 / fs;
    let gamma_acc = match prev {
        Some((g, w_prev)) => g + 0.5 * hop as f64 * (w0 + w_prev),
        None => 0.0,
    };
    let k = harmonic_count(f0, mvf, voicing_ratio);
    let freqs: Vec<f64> = (1..=k).map(|h| h as f64 * f0).collect();
    let c = spectral::mgc_to_complex(mgc_frame, &freqs, fs, alpha);
    let base = 2.0 * (f0 / fs).sqrt();
    let amplitudes = freqs
        .iter()
        .zip(&c)
        .map(|(&f, z)| base * lowpass_gain(f, mvf, fs) * z.re.exp())
        .collect();
    let phases = c
        .iter()
        .enumerate()
        .map(|(i, z)| z.im + (i + 1) as f64 * gamma_acc)
        .collect();
    Ok(CsmFrameParams {
        k,
        amplitudes,
        phases,
        gamma_acc,
        w0,
    })
}

/// All frame parameters; the phase recursion runs sequentially.
pub fn csm_params(b: &AnalysisBundle, voicing_ratio: f64) -> Result<Vec<CsmFrameParams>> {
    let fs = b.fs();
    let hop = b.hop();
    let mut out: Vec<CsmFrameParams> = Vec::with_capacity(b.num_frames());
    for i in 0..b.num_frames() {
        let prev = out.last().map(|p| (p.gamma_acc, p.w0));
        let p = csm_frame_params(
            b.contf0[i],
            b.mvf[i],
            b.mgc.frame(i),
            b.mgc.alpha(),
            fs,
            hop,
            prev,
            voicing_ratio,
        )?;
        log::debug!(
            "frame {i}: f0 {:.1} Hz, mvf {:.0} Hz, K = {}",
            b.contf0[i],
            b.mvf[i],
            p.k
        );
        out.push(p);
    }
    Ok(out)
}

/// Continuous sinusoidal model: harmonics below the MVF, overlap-added with
/// Hann windows of two hops, plus high-passed, envelope-modulated noise shaped
/// by the spectral envelope.
pub fn synth_csm(b: &AnalysisBundle, cfg: &SynthConfig) -> Result<Waveform> {
    b.validate()?;
    let fs = b.fs();
    let hop = b.hop();
    let n = b.output_len();
    let params = csm_params(b, cfg.voicing_ratio)?;
    let win = window(WindowKind::Hanning, 2 * hop);
    let pieces: Vec<(isize, Vec<f64>)> = params
        .par_iter()
        .enumerate()
        .filter(|(_, p)| p.k > 0)
        .map(|(i, p)| {
            let seg: Vec<f64> = (0..2 * hop)
                .map(|s| {
                    let t = s as f64 - hop as f64;
                    let v: f64 = (0..p.k)
                        .map(|h| p.amplitudes[h] * ((h + 1) as f64 * p.w0 * t + p.phases[h]).cos())
                        .sum();
                    v * win[s]
                })
                .collect();
            ((i * hop) as isize - hop as isize, seg)
        })
        .collect();
    let mut out = vec![0.0; n];
    for (start, seg) in pieces {
        add_at(&mut out, start, &seg);
    }
    if cfg.noise {
        let pulse = pulse_for(b);
        let instants = pulse_instants(&b.contf0, fs, n);
        let periods: Vec<f64> = instants
            .iter()
            .map(|&p| fs / interp_linear(b.contf0.values(), p / hop as f64))
            .collect();
        let noise = gen::white_noise(n, cfg.seed);
        let noise = band_filter(&noise, fs, hop, b.mvf.values(), Band::High);
        let modulation = modulation_curve(n, &instants, &periods, &pulse, b.envelope_kind);
        let shaped: Vec<f64> = noise.iter().zip(&modulation).map(|(a, m)| a * m).collect();
        let shaped = spectral::envelope_filter(&shaped, fs, &b.mgc, 1.0);
        for (o, v) in out.iter_mut().zip(shaped) {
            *o += v;
        }
    }
    Ok(Waveform::new(out, b.sample_rate)?.limited())
}

/// Reference vocoder: impulse train on voiced frames, white noise on
/// unvoiced frames, through the envelope filter.
pub fn synth_pulse_noise(
    f0: &ParamTrack,
    voiced: &[bool],
    mgc: &MgcTrack,
    sample_rate: u32,
    seed: u64,
) -> Result<Waveform> {
    Error::check_len(voiced.len(), f0.len())?;
    Error::check_len(mgc.len(), f0.len())?;
    let fs = sample_rate as f64;
    let hop = f0.grid().hop_samples(fs);
    let n = f0.len() * hop;
    let noise = gen::white_noise(n, seed);
    let mut x = vec![0.0; n];
    for &p in &pulse_instants(f0, fs, n) {
        let k = p.round() as usize;
        if k < n && voiced[frame_of(p, hop, f0.len())] {
            x[k] += (fs / interp_linear(f0.values(), p / hop as f64)).sqrt();
        }
    }
    for (k, v) in x.iter_mut().enumerate() {
        if !voiced[frame_of(k as f64, hop, f0.len())] {
            *v = noise[k];
        }
    }
    spectral::mglsa_filter(&Waveform::new(x, sample_rate)?, mgc)
}
