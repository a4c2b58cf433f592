//! Synthetic test signals: tones, harmonic complexes with known F0
//! trajectories, formant vowels and seeded noise.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{fft, ifft, Complex64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn white_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
}

pub fn sine(fs: f64, n: usize, freq: f64, amp: f64, phase: f64) -> Vec<f64> {
    (0..n)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / fs + phase).cos())
        .collect()
}

/// Unit impulses every `period` samples starting at `offset`.
pub fn pulse_train(n: usize, period: usize, offset: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    let mut i = offset;
    while i < n {
        x[i] = 1.0;
        i += period;
    }
    x
}

/// Running phase (cycles) of an F0 trajectory sampled at `fs`.
pub fn f0_phase(fs: f64, n: usize, f0: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let mut phase = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut prev = f0(0.0);
    for i in 0..n {
        let cur = f0(i as f64 / fs);
        if i > 0 {
            acc += 0.5 * (prev + cur) / fs;
        }
        phase.push(acc);
        prev = cur;
    }
    phase
}

/// Harmonic complex following `f0(t)`. `partial(k, freq_hz)` gives the
/// amplitude and phase of harmonic `k`; harmonics at or above `max_freq` are
/// omitted.
pub fn harmonic(
    fs: f64,
    n: usize,
    f0: &dyn Fn(f64) -> f64,
    max_freq: f64,
    partial: &dyn Fn(usize, f64) -> (f64, f64),
) -> Vec<f64> {
    let phase = f0_phase(fs, n, f0);
    let limit = max_freq.min(fs / 2.0);
    (0..n)
        .map(|i| {
            let f = f0(i as f64 / fs);
            let mut s = 0.0;
            let mut k = 1;
            while (k as f64) * f < limit {
                let (a, ph) = partial(k, k as f64 * f);
                s += a * (2.0 * PI * k as f64 * phase[i] + ph).cos();
                k += 1;
            }
            s
        })
        .collect()
}

/// Band-limited sawtooth-like complex with 1/k amplitudes.
pub fn sawtooth(fs: f64, n: usize, f0: f64) -> Vec<f64> {
    harmonic(fs, n, &|_| f0, fs / 2.0, &|k, _| (1.0 / k as f64, -PI / 2.0))
}

/// Formant resonance: center frequency and bandwidth in Hz.
#[derive(Debug, Clone, Copy)]
pub struct Formant {
    pub freq: f64,
    pub bandwidth: f64,
}

/// Cascade of two-pole resonators, unit gain at DC, evaluated at `freq` Hz.
pub fn formant_response(fs: f64, formants: &[Formant], freq: f64) -> Complex64 {
    let w = 2.0 * PI * freq / fs;
    let z1 = Complex64::from_polar(1.0, -w);
    let z2 = z1 * z1;
    let mut h = Complex64::new(1.0, 0.0);
    for f in formants {
        let r = (-PI * f.bandwidth / fs).exp();
        let th = 2.0 * PI * f.freq / fs;
        let a1 = -2.0 * r * th.cos();
        let a2 = r * r;
        let dc = 1.0 + a1 + a2;
        h *= Complex64::new(dc, 0.0) / (Complex64::new(1.0, 0.0) + z1 * a1 + z2 * a2);
    }
    h
}

/// Formant sets for ten synthetic vowels.
pub fn vowel_formants() -> Vec<Vec<Formant>> {
    let table: [[f64; 3]; 10] = [
        [730.0, 1090.0, 2440.0],
        [530.0, 1840.0, 2480.0],
        [270.0, 2290.0, 3010.0],
        [570.0, 840.0, 2410.0],
        [300.0, 870.0, 2240.0],
        [660.0, 1720.0, 2410.0],
        [490.0, 1350.0, 1690.0],
        [440.0, 1020.0, 2240.0],
        [390.0, 1990.0, 2550.0],
        [640.0, 1190.0, 2390.0],
    ];
    table
        .iter()
        .map(|fs| {
            fs.iter()
                .zip([80.0, 100.0, 140.0])
                .map(|(&freq, bandwidth)| Formant { freq, bandwidth })
                .collect()
        })
        .collect()
}

/// Harmonics below `mvf` shaped by `formants` (minimum-phase), plus
/// envelope-shaped Gaussian noise above `mvf`. The flat-envelope excitation
/// has unit power, matching the per-sample PSD convention of the spectral module.
pub fn vowel(fs: f64, n: usize, f0: &dyn Fn(f64) -> f64, formants: &[Formant], mvf: f64, seed: u64) -> Vec<f64> {
    let mut x = harmonic(fs, n, f0, mvf, &|k, freq| {
        let h = formant_response(fs, formants, freq);
        (2.0 * (freq / k as f64 / fs).sqrt() * h.norm(), h.arg())
    });
    if mvf < fs / 2.0 {
        let noise = shaped_noise(fs, n, seed, &|f| {
            if f >= mvf {
                formant_response(fs, formants, f).norm()
            } else {
                0.0
            }
        });
        for (a, b) in x.iter_mut().zip(noise) {
            *a += b;
        }
    }
    x
}

/// Gaussian noise with magnitude response `mag(freq_hz)` applied in one FFT.
pub fn shaped_noise(fs: f64, n: usize, seed: u64, mag: &dyn Fn(f64) -> f64) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = white_noise(n, seed)
        .into_iter()
        .map(|v| Complex64::new(v, 0.0))
        .collect();
    fft(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let kk = k.min(n - k);
        *v *= mag(kk as f64 * fs / n as f64);
    }
    ifft(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

pub fn scale_to_peak(x: &mut [f64], peak: f64) {
    let p = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if p > 0.0 {
        for v in x.iter_mut() {
            *v *= peak / p;
        }
    }
}
