//! Voice-conversion helpers: dynamic time warping of feature sequences and
//! geometric-approach spectral subtraction for enhancing converted speech.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::signal::{add_at, extract, fft, ifft, window, Complex64, Waveform, WindowKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DtwNorm {
    #[default]
    Euclidean,
    Manhattan,
}

impl DtwNorm {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DtwNorm::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            DtwNorm::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

/// Monotone alignment from `(0, 0)` to `(I-1, J-1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarpPath {
    pub pairs: Vec<(usize, usize)>,
}

impl WarpPath {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn transposed(&self) -> WarpPath {
        WarpPath {
            pairs: self.pairs.iter().map(|&(i, j)| (j, i)).collect(),
        }
    }

    /// One "i j" pair per line.
    pub fn to_text(&self) -> String {
        self.pairs.iter().map(|(i, j)| format!("{i} {j}\n")).collect()
    }
}

pub fn dtw_align(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<(WarpPath, f64)> {
    dtw_align_with(x, y, DtwNorm::Euclidean)
}

/// Minimum-distance warp path with steps (1,0), (0,1) and (1,1). Ties in the
/// backtrack prefer the diagonal step.
pub fn dtw_align_with(x: &[Vec<f64>], y: &[Vec<f64>], norm: DtwNorm) -> Result<(WarpPath, f64)> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput);
    }
    let dim = x[0].len();
    for v in x.iter().chain(y) {
        Error::check_len(v.len(), dim)?;
    }
    let (ni, nj) = (x.len(), y.len());
    let mut acc = vec![f64::INFINITY; ni * nj];
    let at = |i: usize, j: usize| i * nj + j;
    for i in 0..ni {
        for j in 0..nj {
            let d = norm.distance(&x[i], &y[j]);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let mut b = f64::INFINITY;
                if i > 0 && j > 0 {
                    b = b.min(acc[at(i - 1, j - 1)]);
                }
                if i > 0 {
                    b = b.min(acc[at(i - 1, j)]);
                }
                if j > 0 {
                    b = b.min(acc[at(i, j - 1)]);
                }
                b
            };
            acc[at(i, j)] = d + best;
        }
    }
    let mut pairs = vec![(ni - 1, nj - 1)];
    let (mut i, mut j) = (ni - 1, nj - 1);
    while i > 0 || j > 0 {
        let (pi, pj) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = acc[at(i - 1, j - 1)];
            let up = acc[at(i - 1, j)];
            let left = acc[at(i, j - 1)];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        pairs.push((pi, pj));
        i = pi;
        j = pj;
    }
    pairs.reverse();
    Ok((WarpPath { pairs }, acc[at(ni - 1, nj - 1)]))
}

/// Aligns many sequence pairs in parallel.
pub fn dtw_align_many(pairs: &[(Vec<Vec<f64>>, Vec<Vec<f64>>)]) -> Vec<Result<(WarpPath, f64)>> {
    pairs.par_iter().map(|(x, y)| dtw_align(x, y)).collect()
}

/// Per-frame feature conversion. Training such a mapping is out of scope;
/// [`IdentityMapping`] is the pass-through.
pub trait FrameMapping {
    fn map_frame(&self, frame: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityMapping;

impl FrameMapping for IdentityMapping {
    fn map_frame(&self, frame: &[f64]) -> Vec<f64> {
        frame.to_vec()
    }
}

pub fn convert_frames(mapping: &dyn FrameMapping, frames: &[Vec<f64>]) -> Vec<Vec<f64>> {
    frames.iter().map(|f| mapping.map_frame(f)).collect()
}

/// Source/target frame pairs along a warp path, e.g. for training a mapping.
pub fn aligned_pairs(x: &[Vec<f64>], y: &[Vec<f64>], path: &WarpPath) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    path.pairs
        .iter()
        .map(|&(i, j)| match (x.get(i), y.get(j)) {
            (Some(a), Some(b)) => Ok((a.clone(), b.clone())),
            _ => Err(Error::invalid("warp path index out of range")),
        })
        .collect()
}

pub const GASS_FRAME: f64 = 0.02;
pub const GASS_SMOOTHING: f64 = 0.98;
/// Floor on the a-priori SNR (-25 dB).
pub const XI_MIN: f64 = 0.003_162_277_660_168_379_4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GassConfig {
    pub noise_frames: usize,
    pub frame_length: f64,
    pub smoothing: f64,
    /// Limit the gain to 1 at every bin.
    pub clamp_gain: bool,
}

impl Default for GassConfig {
    fn default() -> Self {
        GassConfig {
            noise_frames: 3,
            frame_length: GASS_FRAME,
            smoothing: GASS_SMOOTHING,
            clamp_gain: false,
        }
    }
}

/// Gain from the law-of-cosines estimates of `cos(theta_Y - theta_E)` and
/// `cos(theta_F - theta_E)` in terms of the a-posteriori SNR `gamma` and the
/// a-priori SNR `xi`. When the estimates do not form a triangle the ratio of
/// sines is 0/0 and its limit `sqrt(xi / gamma)` is used.
pub fn gass_gain(gamma: f64, xi: f64) -> f64 {
    if !(gamma > 0.0 && xi > 0.0) {
        return if gamma > 0.0 { 0.0 } else { 1.0 };
    }
    let c_ye = ((gamma + 1.0 - xi) / (2.0 * gamma.sqrt())).clamp(-1.0, 1.0);
    let c_fe = ((gamma - 1.0 - xi) / (2.0 * xi.sqrt())).clamp(-1.0, 1.0);
    let num = 1.0 - c_ye * c_ye;
    let den = 1.0 - c_fe * c_fe;
    if num <= 1e-12 || den <= 1e-12 {
        return (xi / gamma).sqrt();
    }
    (num / den).sqrt()
}

/// Geometric-approach spectral subtraction. The noise power spectrum is the
/// mean over the first `noise_frames` full frames; the a-priori SNR is
/// smoothed decision-directed; the noisy phase is kept.
pub fn gass_enhance(noisy: &Waveform, cfg: &GassConfig) -> Result<Waveform> {
    let fs = noisy.fs();
    let len = ((cfg.frame_length * fs).round() as usize / 2 * 2).max(4);
    let hop = len / 2;
    let x = noisy.samples();
    let frames = x.len() / hop + 1;
    if cfg.noise_frames == 0 || frames < cfg.noise_frames + 2 {
        return Err(Error::invalid(format!(
            "need more than {} frames of {} samples",
            cfg.noise_frames, len
        )));
    }
    let win = window(WindowKind::Hanning, len);
    // frame m starts at (m - 1) hop, so frame 0 is half outside the signal
    let spectra: Vec<Vec<Complex64>> = (0..frames)
        .into_par_iter()
        .map(|m| {
            let seg = extract(x, m as isize * hop as isize - hop as isize, len);
            let mut buf: Vec<Complex64> = seg.iter().zip(&win).map(|(a, b)| Complex64::new(a * b, 0.0)).collect();
            fft(&mut buf);
            buf
        })
        .collect();
    let mut noise = vec![0.0; len];
    for s in &spectra[1..=cfg.noise_frames] {
        for (n, z) in noise.iter_mut().zip(s) {
            *n += z.norm_sqr() / cfg.noise_frames as f64;
        }
    }
    let mut prev_clean: Option<Vec<f64>> = None;
    let mut out = vec![0.0; x.len()];
    for (m, spec) in spectra.iter().enumerate() {
        let mut clean_pow = vec![0.0; len];
        let mut buf = spec.clone();
        for k in 0..len {
            let py = spec[k].norm_sqr();
            let pe = noise[k];
            let h = if pe <= 1e-20 * (1.0 + py) {
                1.0
            } else {
                let gamma = py / pe;
                let ml = (gamma - 1.0).max(0.0);
                let xi = match &prev_clean {
                    Some(pc) => cfg.smoothing * pc[k] / pe + (1.0 - cfg.smoothing) * ml,
                    None => ml,
                }
                .max(XI_MIN);
                gass_gain(gamma, xi)
            };
            let h = if cfg.clamp_gain { h.min(1.0) } else { h };
            buf[k] *= h;
            clean_pow[k] = h * h * py;
        }
        ifft(&mut buf);
        let y: Vec<f64> = buf.iter().map(|z| z.re).collect();
        add_at(&mut out, m as isize * hop as isize - hop as isize, &y);
        prev_clean = Some(clean_pow);
    }
    Waveform::new(out, noisy.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::gen;
    use proptest::prelude::*;
    use rand::Rng;

    fn seq(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn identity_alignment() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i as f64).sin()]).collect();
        let (p, d) = dtw_align(&x, &x).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(p.len(), 20);
        assert!(p.pairs.iter().all(|&(i, j)| i == j));
    }

    #[test]
    fn repeated_frame_alignment() {
        let (p, d) = dtw_align(&seq(&[1.0, 5.0]), &seq(&[1.0, 1.0, 5.0])).unwrap();
        assert_eq!(p.pairs, vec![(0, 0), (0, 1), (1, 2)]);
        assert_eq!(d, 0.0);
    }

    /// Exhaustive minimum over all monotone paths, for small inputs.
    fn brute(x: &[Vec<f64>], y: &[Vec<f64>], i: usize, j: usize) -> f64 {
        let d = DtwNorm::Euclidean.distance(&x[i], &y[j]);
        if i == 0 && j == 0 {
            return d;
        }
        let mut best = f64::INFINITY;
        if i > 0 {
            best = best.min(brute(x, y, i - 1, j));
        }
        if j > 0 {
            best = best.min(brute(x, y, i, j - 1));
        }
        if i > 0 && j > 0 {
            best = best.min(brute(x, y, i - 1, j - 1));
        }
        d + best
    }

    #[test]
    fn matches_exhaustive_search() {
        let mut rng = gen::rng(5);
        for _ in 0..20 {
            let x: Vec<Vec<f64>> = (0..rng.gen_range(1..6))
                .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
                .collect();
            let y: Vec<Vec<f64>> = (0..rng.gen_range(1..6))
                .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
                .collect();
            let (p, d) = dtw_align(&x, &y).unwrap();
            assert!((d - brute(&x, &y, x.len() - 1, y.len() - 1)).abs() < 1e-12);
            let along: f64 = p
                .pairs
                .iter()
                .map(|&(i, j)| DtwNorm::Euclidean.distance(&x[i], &y[j]))
                .sum();
            assert!((along - d).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(dtw_align(&[vec![1.0, 2.0]], &[vec![1.0]]).is_err());
        assert!(dtw_align(&[], &[vec![1.0]]).is_err());
    }

    #[test]
    fn manhattan_norm() {
        let (_, d) = dtw_align_with(&[vec![0.0, 0.0]], &[vec![3.0, 4.0]], DtwNorm::Manhattan).unwrap();
        assert_eq!(d, 7.0);
        let (_, d) = dtw_align(&[vec![0.0, 0.0]], &[vec![3.0, 4.0]]).unwrap();
        assert_eq!(d, 5.0);
    }

    #[test]
    fn path_text_and_pairs() {
        let (p, _) = dtw_align(&seq(&[1.0, 5.0]), &seq(&[1.0, 1.0, 5.0])).unwrap();
        assert_eq!(p.to_text(), "0 0\n0 1\n1 2\n");
        let pairs = aligned_pairs(&seq(&[1.0, 5.0]), &seq(&[1.0, 1.0, 5.0]), &p).unwrap();
        assert_eq!(pairs[1], (vec![1.0], vec![1.0]));
        assert_eq!(convert_frames(&IdentityMapping, &seq(&[2.0])), seq(&[2.0]));
    }

    #[test]
    fn clean_signal_passes_unchanged() {
        let mut x = vec![0.0; 1600];
        x.extend(gen::sine(16000.0, 8000, 440.0, 0.5, 0.0));
        let w = Waveform::new(x.clone(), 16000).unwrap();
        let y = gass_enhance(&w, &GassConfig::default()).unwrap();
        let err = x
            .iter()
            .zip(y.samples())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err / norm < 1e-3, "{}", err / norm);
    }

    fn snr(clean: &[f64], x: &[f64]) -> f64 {
        let s: f64 = clean.iter().map(|v| v * v).sum();
        let e: f64 = clean.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
        10.0 * (s / e).log10()
    }

    #[test]
    fn tone_in_noise_improves() {
        let fs = 16000.0;
        let lead = 1600;
        let n = 32000;
        let mut clean = vec![0.0; lead];
        clean.extend(gen::sine(fs, n - lead, 1000.0, 1.0, 0.0));
        let noise = gen::white_noise(n, 11);
        let tone_power: f64 = 0.5;
        let g = tone_power.sqrt();
        let noisy: Vec<f64> = clean.iter().zip(&noise).map(|(a, b)| a + g * b).collect();
        let w = Waveform::new(noisy.clone(), 16000).unwrap();
        let y = gass_enhance(&w, &GassConfig::default()).unwrap();
        let before = snr(&clean[lead..], &noisy[lead..]);
        let after = snr(&clean[lead..], &y.samples()[lead..]);
        assert!(before.abs() < 0.2, "{before}");
        assert!(after - before >= 3.0, "{before} -> {after}");
    }

    #[test]
    fn gain_is_nonnegative() {
        let mut rng = gen::rng(17);
        for _ in 0..10_000 {
            let gamma = 10f64.powf(rng.gen_range(-4.0..4.0));
            let xi = 10f64.powf(rng.gen_range(-4.0..4.0));
            let h = gass_gain(gamma, xi);
            assert!(h >= 0.0 && h.is_finite(), "{gamma} {xi} {h}");
        }
    }

    #[test]
    fn gain_matches_exact_triangle() {
        // with consistent magnitudes the gain is A_F / A_Y
        let (af, ae, angle) = (1.3f64, 0.7f64, 1.1f64);
        let y = Complex64::from_polar(af, angle) + Complex64::new(ae, 0.0);
        let gamma = y.norm_sqr() / (ae * ae);
        let xi = af * af / (ae * ae);
        assert!((gass_gain(gamma, xi) - af / y.norm()).abs() < 1e-12);
    }

    #[test]
    fn too_short_input_is_rejected() {
        let w = Waveform::new(vec![0.1; 500], 16000).unwrap();
        assert!(gass_enhance(&w, &GassConfig::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn path_length_bounds(a in prop::collection::vec(-5.0f64..5.0, 1..30), b in prop::collection::vec(-5.0f64..5.0, 1..30)) {
            let (p, _) = dtw_align(&seq(&a), &seq(&b)).unwrap();
            let (ni, nj) = (a.len(), b.len());
            prop_assert!(ni.max(nj) <= p.len() && p.len() < ni + nj);
            prop_assert_eq!(p.pairs[0], (0, 0));
            prop_assert_eq!(*p.pairs.last().unwrap(), (ni - 1, nj - 1));
            for w in p.pairs.windows(2) {
                let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
                prop_assert!(di <= 1 && dj <= 1 && di + dj >= 1);
            }
        }

        #[test]
        fn distance_is_symmetric(a in prop::collection::vec(-5.0f64..5.0, 1..20), b in prop::collection::vec(-5.0f64..5.0, 1..20)) {
            let (p, d) = dtw_align(&seq(&a), &seq(&b)).unwrap();
            let (q, e) = dtw_align(&seq(&b), &seq(&a)).unwrap();
            prop_assert!((d - e).abs() < 1e-9);
            let along: f64 = q.transposed().pairs.iter().map(|&(i, j)| (a[i] - b[j]).abs()).sum();
            prop_assert!((along - d).abs() < 1e-9);
            prop_assert!(!p.is_empty());
        }

        #[test]
        fn clamped_gain_does_not_add_energy(seed in 0u64..1000, level in 0.01f64..1.0) {
            let x: Vec<f64> = gen::white_noise(4000, seed).iter().map(|v| level * v).collect();
            let w = Waveform::new(x, 16000).unwrap();
            let cfg = GassConfig { clamp_gain: true, ..Default::default() };
            let y = gass_enhance(&w, &cfg).unwrap();
            prop_assert!(y.power() <= w.power() * (1.0 + 1e-9));
        }
    }
}
