//! Phase distortion deviation (PDD), the continuous noise mask derived from
//! it, and two distribution helpers (Gaussian kernel density and the
//! empirical CDF) used to inspect parameter distributions.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::signal::{extract, frame_start, window, Complex64, FrameGrid, ParamTrack, Waveform, WindowKind};

/// Upper bound on the circular standard deviation, used when the resultant vanishes.
pub const PDD_MAX: f64 = 10.0;
pub const DEFAULT_CNM_THRESHOLD: f64 = 0.77;
const PDD_MAGIC: &str = "PDD1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PddConfig {
    /// Frames in the circular-statistics window; odd, at least 3.
    pub window_frames: usize,
    pub num_bands: usize,
    /// Analysis window length in pitch periods.
    pub periods: f64,
}

impl Default for PddConfig {
    fn default() -> Self {
        PddConfig {
            window_frames: 5,
            num_bands: 32,
            periods: 3.0,
        }
    }
}

impl PddConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_frames < 3 || self.window_frames.is_multiple_of(2) {
            return Err(Error::invalid("PDD window must be odd and at least 3 frames"));
        }
        if self.num_bands == 0 {
            return Err(Error::invalid("need at least one PDD band"));
        }
        if !(self.periods >= 2.0) {
            return Err(Error::invalid("PDD analysis window must span at least 2 periods"));
        }
        Ok(())
    }
}

/// Frame x band matrix of circular standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct PddMap {
    pub values: Vec<Vec<f64>>,
    /// Band centres in Hz.
    pub bands: Vec<f64>,
    pub grid: FrameGrid,
}

/// `sqrt(-2 ln |mean e^{j(x - mu)}|)` with `mu` the circular mean, capped at [`PDD_MAX`].
pub fn circular_deviation(phases: &[f64]) -> f64 {
    if phases.is_empty() {
        return 0.0;
    }
    let s: Complex64 = phases.iter().map(|&p| Complex64::from_polar(1.0, p)).sum();
    let mu = s.arg();
    let r = phases
        .iter()
        .map(|&p| Complex64::from_polar(1.0, p - mu))
        .sum::<Complex64>()
        .norm()
        / phases.len() as f64;
    if r < 1e-12 {
        return PDD_MAX;
    }
    (-2.0 * r.min(1.0).ln()).max(0.0).sqrt().min(PDD_MAX)
}

fn wrap(p: f64) -> f64 {
    (p + PI).rem_euclid(2.0 * PI) - PI
}

/// Phases of harmonics `1..=count` of a frame centred at sample `center`,
/// measured relative to the centre.
fn harmonic_phases(x: &[f64], fs: f64, center: f64, f0: f64, periods: f64, count: usize) -> Vec<f64> {
    let len = ((periods * fs / f0).round() as usize).max(4);
    let start = frame_start(center, len);
    let win = window(WindowKind::Hanning, len);
    let frame: Vec<f64> = extract(x, start, len).iter().zip(&win).map(|(a, b)| a * b).collect();
    let offset = start as f64 - center;
    (1..=count)
        .map(|h| {
            let w = 2.0 * PI * h as f64 * f0 / fs;
            let step = Complex64::from_polar(1.0, -w);
            let mut rot = Complex64::from_polar(1.0, -w * offset);
            let mut acc = Complex64::new(0.0, 0.0);
            for &v in &frame {
                acc += rot * v;
                rot *= step;
            }
            acc.arg()
        })
        .collect()
}

/// Phase distortion per band for every frame of the `f0` grid.
/// `PD_h = phi_{h+1} - phi_h - phi_1` is read at the harmonic nearest each band centre.
fn phase_distortion(w: &Waveform, f0: &ParamTrack, cfg: &PddConfig, bands: &[f64]) -> Vec<Vec<f64>> {
    let fs = w.fs();
    let grid = f0.grid();
    (0..grid.num_frames)
        .into_par_iter()
        .map(|n| {
            let f = f0[n];
            let count = ((0.5 * fs / f).floor() as usize).max(2);
            let phi = harmonic_phases(w.samples(), fs, grid.time(n) * fs, f, cfg.periods, count);
            let pd: Vec<f64> = (0..count - 1).map(|h| wrap(phi[h + 1] - phi[h] - phi[0])).collect();
            bands
                .iter()
                .map(|&b| {
                    let h = ((b / f).round() as usize).clamp(1, pd.len());
                    pd[h - 1]
                })
                .collect()
        })
        .collect()
}

pub fn band_centres(num_bands: usize, fs: f64) -> Vec<f64> {
    let width = 0.5 * fs / num_bands as f64;
    (0..num_bands).map(|b| (b as f64 + 0.5) * width).collect()
}

/// PDD map on the grid of `f0`, one circular deviation per frame and band
/// over a window of `cfg.window_frames` frames (truncated at the edges).
pub fn compute_pdd(w: &Waveform, f0: &ParamTrack, cfg: &PddConfig) -> Result<PddMap> {
    cfg.validate()?;
    if w.is_empty() || f0.is_empty() {
        return Err(Error::EmptyInput);
    }
    if f0.values().iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("F0 track must be strictly positive"));
    }
    let fs = w.fs();
    let bands = band_centres(cfg.num_bands, fs);
    let pd = phase_distortion(w, f0, cfg, &bands);
    let frames = pd.len();
    let half = cfg.window_frames / 2;
    let values = (0..frames)
        .into_par_iter()
        .map(|n| {
            let lo = n.saturating_sub(half);
            let hi = (n + half + 1).min(frames);
            (0..bands.len())
                .map(|b| {
                    let col: Vec<f64> = (lo..hi).map(|m| pd[m][b]).collect();
                    circular_deviation(&col)
                })
                .collect()
        })
        .collect();
    Ok(PddMap {
        values,
        bands,
        grid: *f0.grid(),
    })
}

impl PddMap {
    pub fn num_frames(&self) -> usize {
        self.values.len()
    }

    /// Copy with the bands below the frame's MVF set to zero.
    pub fn zero_below(&self, mvf: &ParamTrack) -> Result<PddMap> {
        Error::check_len(mvf.len(), self.values.len())?;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(n, row)| {
                row.iter()
                    .zip(&self.bands)
                    .map(|(&v, &b)| if b < mvf[n] { 0.0 } else { v })
                    .collect()
            })
            .collect();
        Ok(PddMap {
            values,
            bands: self.bands.clone(),
            grid: self.grid,
        })
    }

    /// Per-frame summary: mean over bands at or above the frame's MVF, or over
    /// all bands when `mvf` is `None` or no band lies above it.
    pub fn frame_summary(&self, mvf: Option<&ParamTrack>) -> Result<Vec<f64>> {
        if let Some(m) = mvf {
            Error::check_len(m.len(), self.values.len())?;
        }
        Ok(self
            .values
            .iter()
            .enumerate()
            .map(|(n, row)| {
                let cut = mvf.map_or(0.0, |m| m[n]);
                let high: Vec<f64> = row
                    .iter()
                    .zip(&self.bands)
                    .filter(|(_, &b)| b >= cut)
                    .map(|(&v, _)| v)
                    .collect();
                let used = if high.is_empty() {
                    row.as_slice()
                } else {
                    high.as_slice()
                };
                used.iter().sum::<f64>() / used.len() as f64
            })
            .collect())
    }

    /// Text header followed by little-endian f32 values, frame-major.
    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{PDD_MAGIC}")?;
        writeln!(out, "frame_shift {}", self.grid.frame_shift)?;
        writeln!(out, "frame_length {}", self.grid.frame_length)?;
        writeln!(out, "frames {}", self.values.len())?;
        let centres: Vec<String> = self.bands.iter().map(|b| b.to_string()).collect();
        writeln!(out, "bands {}", centres.join(" "))?;
        writeln!(out, "end")?;
        for row in &self.values {
            for v in row {
                out.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut input: impl Read) -> Result<PddMap> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let end = find_header_end(&bytes).ok_or_else(|| Error::Format("PDD header not terminated".into()))?;
        let header = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::Format("PDD header is not UTF-8".into()))?;
        let mut lines = header.lines();
        if lines.next() != Some(PDD_MAGIC) {
            return Err(Error::Format("missing PDD magic".into()));
        }
        let (mut shift, mut length, mut frames, mut bands) = (None, None, None, None);
        for line in lines {
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            let bad = || Error::Format(format!("bad PDD header line '{line}'"));
            match key {
                "frame_shift" => shift = Some(rest.parse::<f64>().map_err(|_| bad())?),
                "frame_length" => length = Some(rest.parse::<f64>().map_err(|_| bad())?),
                "frames" => frames = Some(rest.parse::<usize>().map_err(|_| bad())?),
                "bands" => {
                    bands = Some(
                        rest.split_whitespace()
                            .map(|s| s.parse::<f64>().map_err(|_| bad()))
                            .collect::<Result<Vec<f64>>>()?,
                    )
                }
                _ => return Err(bad()),
            }
        }
        let missing = |k: &str| Error::Format(format!("PDD header lacks '{k}'"));
        let (shift, length) = (
            shift.ok_or_else(|| missing("frame_shift"))?,
            length.ok_or_else(|| missing("frame_length"))?,
        );
        let (frames, bands) = (
            frames.ok_or_else(|| missing("frames"))?,
            bands.ok_or_else(|| missing("bands"))?,
        );
        let payload = &bytes[end + 4..];
        if payload.len() != frames * bands.len() * 4 {
            return Err(Error::Format("PDD payload size does not match the header".into()));
        }
        let flat: Vec<f64> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let values = if bands.is_empty() {
            vec![Vec::new(); frames]
        } else {
            flat.chunks(bands.len()).map(|c| c.to_vec()).collect()
        };
        Ok(PddMap {
            values,
            bands,
            grid: FrameGrid::new(shift, length, frames).map_err(|e| Error::Format(e.to_string()))?,
        })
    }
}

/// Index of the newline that precedes the "end\n" line, plus one.
fn find_header_end(bytes: &[u8]) -> Option<usize> {
    bytes.windows(5).position(|w| w == b"\nend\n").map(|p| p + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnmPolarity {
    /// `cNM = 1 - normalized PDD`: periodic frames get values near 1.
    Literal,
    /// `cNM = normalized PDD`: noisy frames get values near 1.
    Inverted,
}

impl std::str::FromStr for CnmPolarity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(CnmPolarity::Literal),
            "inverted" => Ok(CnmPolarity::Inverted),
            other => Err(Error::invalid(format!("unknown cNM polarity '{other}'"))),
        }
    }
}

impl std::fmt::Display for CnmPolarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CnmPolarity::Literal => "literal",
            CnmPolarity::Inverted => "inverted",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnmTrack {
    pub values: Vec<f64>,
    /// Min-max normalized per-frame PDD.
    pub normalized: Vec<f64>,
    pub threshold: f64,
    pub polarity: CnmPolarity,
    /// Set when the PDD summary was constant and every value is 0.5.
    pub degenerate: bool,
}

impl CnmTrack {
    /// Track from precomputed mask values, e.g. read back from a bundle.
    pub fn from_values(values: Vec<f64>, threshold: f64, polarity: CnmPolarity) -> Result<Self> {
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("cNM values must lie in [0, 1]"));
        }
        let normalized = match polarity {
            CnmPolarity::Literal => values.iter().map(|v| 1.0 - v).collect(),
            CnmPolarity::Inverted => values.clone(),
        };
        Ok(CnmTrack {
            values,
            normalized,
            threshold,
            polarity,
            degenerate: false,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Nearest-neighbour resampling to `len` frames.
    pub fn resampled(&self, len: usize) -> CnmTrack {
        let n = self.values.len();
        let pick = |v: &[f64]| -> Vec<f64> {
            if n == 0 {
                return vec![0.5; len];
            }
            (0..len).map(|i| v[(i * n / len.max(1)).min(n - 1)]).collect()
        };
        CnmTrack {
            values: pick(&self.values),
            normalized: pick(&self.normalized),
            ..self.clone()
        }
    }
}

/// Continuous noise mask from a PDD map. The per-frame summary is
/// [`PddMap::frame_summary`] with the given MVF track.
pub fn compute_cnm(pdd: &PddMap, mvf: Option<&ParamTrack>, polarity: CnmPolarity) -> Result<CnmTrack> {
    if pdd.values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let summary = pdd.frame_summary(mvf)?;
    let lo = summary.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = summary.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let degenerate = !(hi - lo > 1e-12);
    if degenerate {
        log::warn!("PDD summary is constant; cNM set to 0.5");
    }
    let normalized: Vec<f64> = if degenerate {
        vec![0.5; summary.len()]
    } else {
        summary.iter().map(|v| (v - lo) / (hi - lo)).collect()
    };
    let values = match polarity {
        CnmPolarity::Literal => normalized.iter().map(|v| 1.0 - v).collect(),
        CnmPolarity::Inverted => normalized.clone(),
    };
    Ok(CnmTrack {
        values,
        normalized,
        threshold: DEFAULT_CNM_THRESHOLD,
        polarity,
        degenerate,
    })
}

/// Gains `(voiced, unvoiced)` for one frame: the voiced part survives only
/// when `cnm <= threshold`, the unvoiced part is scaled by `cnm`.
pub fn frame_gains(cnm: f64, threshold: f64) -> (f64, f64) {
    (if cnm <= threshold { 1.0 } else { 0.0 }, cnm)
}

/// Masks and sums paired voiced and unvoiced frames.
pub fn apply_cnm(voiced: &[Vec<f64>], unvoiced: &[Vec<f64>], cnm: &[f64], threshold: f64) -> Result<Vec<Vec<f64>>> {
    Error::check_len(voiced.len(), unvoiced.len())?;
    Error::check_len(voiced.len(), cnm.len())?;
    voiced
        .iter()
        .zip(unvoiced)
        .zip(cnm)
        .map(|((v, u), &c)| {
            Error::check_len(v.len(), u.len())?;
            let (gv, gu) = frame_gains(c, threshold);
            Ok(v.iter().zip(u).map(|(a, b)| gv * a + gu * b).collect())
        })
        .collect()
}

/// Density estimate sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelDensity {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl KernelDensity {
    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1]))
        .sum()
}

/// Gaussian kernel estimate `(1/nh) sum K((x - y_i)/h)` at one point.
pub fn density_at(samples: &[f64], h: f64, x: f64) -> f64 {
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * PI).sqrt());
    norm * samples
        .iter()
        .map(|&y| (-0.5 * ((x - y) / h).powi(2)).exp())
        .sum::<f64>()
}

const KDE_MIN_POINTS: usize = 512;
const KDE_MAX_POINTS: usize = 1 << 16;

/// Gaussian kernel density on a grid spanning the samples plus five
/// bandwidths on each side, with at least eight points per bandwidth.
pub fn kernel_density(samples: &[f64], h: f64) -> Result<KernelDensity> {
    if samples.len() < 2 {
        return Err(Error::invalid("kernel density needs at least 2 samples"));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("bandwidth must be positive"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite sample".into()));
    }
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min) - 5.0 * h;
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 5.0 * h;
    let points = (((hi - lo) / (h / 8.0)).ceil() as usize + 1).clamp(KDE_MIN_POINTS, KDE_MAX_POINTS);
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| lo + i as f64 * step).collect();
    let density = grid.par_iter().map(|&x| density_at(samples, h, x)).collect();
    Ok(KernelDensity {
        grid,
        density,
        bandwidth: h,
    })
}

/// Silverman's rule: `0.9 min(sd, IQR/1.34) n^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::invalid("need at least 2 samples"));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let e = Ecdf::new(samples)?;
    let iqr = e.quantile(0.75) - e.quantile(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if !(spread > 0.0) {
        return Err(Error::Degenerate);
    }
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

/// Empirical distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::Numeric("NaN sample".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Ecdf { sorted })
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Smallest sample `v` with `eval(v) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let k = ((p.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[k - 1]
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

pub fn ecdf(samples: &[f64]) -> Result<Ecdf> {
    Ecdf::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{gen, TrackKind};
    use proptest::prelude::*;
    use rand::Rng;

    const FS: f64 = 16000.0;

    fn f0_track(v: f64, n: usize) -> ParamTrack {
        ParamTrack::constant(v, FrameGrid::new(0.005, 0.025, n).unwrap(), TrackKind::ContF0).unwrap()
    }

    fn median(v: &[f64]) -> f64 {
        Ecdf::new(v).unwrap().quantile(0.5)
    }

    fn mean_pdd(m: &PddMap) -> f64 {
        let all: Vec<f64> = m.values.iter().flatten().cloned().collect();
        all.iter().sum::<f64>() / all.len() as f64
    }

    #[test]
    fn config_rejects_even_or_short_windows() {
        for n in [1, 2, 4] {
            let cfg = PddConfig {
                window_frames: n,
                ..Default::default()
            };
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn pulse_train_has_near_zero_pdd() {
        let x = gen::pulse_train(16000, 100, 13);
        let w = Waveform::new(x, 16000).unwrap();
        let m = compute_pdd(&w, &f0_track(160.0, 200), &PddConfig::default()).unwrap();
        let inner: Vec<f64> = m.values[10..190].iter().flatten().cloned().collect();
        let max = inner.iter().cloned().fold(0.0, f64::max);
        assert!(max < 0.05, "{max}");
    }

    #[test]
    fn white_noise_has_large_pdd() {
        // Monte-Carlo oracle: uniform phases over 5 draws give sigma around 1.4.
        let mut rng = gen::rng(3);
        let trials = 20000;
        let oracle = (0..trials)
            .map(|_| {
                let p: Vec<f64> = (0..5).map(|_| rng.gen_range(-PI..PI)).collect();
                circular_deviation(&p)
            })
            .sum::<f64>()
            / trials as f64;
        assert!((oracle - 1.4).abs() < 0.1, "{oracle}");

        let w = Waveform::new(gen::white_noise(16000, 9), 16000).unwrap();
        let noise = compute_pdd(&w, &f0_track(160.0, 200), &PddConfig::default()).unwrap();
        let x = gen::pulse_train(16000, 100, 0);
        let w = Waveform::new(x, 16000).unwrap();
        let clean = compute_pdd(&w, &f0_track(160.0, 200), &PddConfig::default()).unwrap();
        let (mn, mc) = (mean_pdd(&noise), mean_pdd(&clean));
        assert!(mn > 1.0 && mn > 10.0 * mc, "noise {mn} clean {mc}");
    }

    #[test]
    fn deviation_ignores_constant_offsets() {
        let p = [0.1, 0.4, -0.3, 0.2, 0.05];
        let base = circular_deviation(&p);
        for c in [0.5, -2.0, 3.0, 10.0] {
            let q: Vec<f64> = p.iter().map(|v| v + c).collect();
            assert!((circular_deviation(&q) - base).abs() < 1e-12);
        }
        assert_eq!(circular_deviation(&[0.0, PI]), PDD_MAX);
        assert_eq!(circular_deviation(&[1.0; 5]), 0.0);
    }

    #[test]
    fn pdd_is_scale_invariant() {
        let x = gen::vowel(FS, 8000, &|_| 140.0, &gen::vowel_formants()[2], 4000.0, 4);
        let y: Vec<f64> = x.iter().map(|v| 0.1 * v).collect();
        let f0 = f0_track(140.0, 100);
        let a = compute_pdd(&Waveform::new(x, 16000).unwrap(), &f0, &PddConfig::default()).unwrap();
        let b = compute_pdd(&Waveform::new(y, 16000).unwrap(), &f0, &PddConfig::default()).unwrap();
        for (ra, rb) in a.values.iter().zip(&b.values) {
            for (p, q) in ra.iter().zip(rb) {
                assert!((p - q).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_below_mvf() {
        let w = Waveform::new(gen::white_noise(4000, 1), 16000).unwrap();
        let m = compute_pdd(&w, &f0_track(200.0, 50), &PddConfig::default()).unwrap();
        let mvf = ParamTrack::constant(3000.0, m.grid, TrackKind::Mvf).unwrap();
        let z = m.zero_below(&mvf).unwrap();
        for row in &z.values {
            for (v, b) in row.iter().zip(&z.bands) {
                if *b < 3000.0 {
                    assert_eq!(*v, 0.0);
                } else {
                    assert!(*v > 0.0);
                }
            }
        }
    }

    #[test]
    fn export_round_trips() {
        let w = Waveform::new(gen::white_noise(4000, 1), 16000).unwrap();
        let m = compute_pdd(&w, &f0_track(200.0, 50), &PddConfig::default()).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = PddMap::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.bands, m.bands);
        assert_eq!(back.grid, m.grid);
        for (ra, rb) in back.values.iter().zip(&m.values) {
            for (p, q) in ra.iter().zip(rb) {
                assert_eq!(*p, *q as f32 as f64);
            }
        }
        buf[0] = b'X';
        assert!(matches!(PddMap::read_from(buf.as_slice()), Err(Error::Format(_))));
    }

    fn synthetic_map(summary: &[f64]) -> PddMap {
        PddMap {
            values: summary.iter().map(|&v| vec![v; 4]).collect(),
            bands: band_centres(4, FS),
            grid: FrameGrid::new(0.005, 0.025, summary.len()).unwrap(),
        }
    }

    #[test]
    fn cnm_extremes_and_degenerate() {
        let c = compute_cnm(&synthetic_map(&[0.2, 1.5, 0.7, 3.0]), None, CnmPolarity::Literal).unwrap();
        assert_eq!(c.values[3], 0.0);
        assert_eq!(c.values[0], 1.0);
        for (a, b) in c.values.iter().zip(&c.normalized) {
            assert_eq!(a + b, 1.0);
        }
        let inv = compute_cnm(&synthetic_map(&[0.2, 1.5, 0.7, 3.0]), None, CnmPolarity::Inverted).unwrap();
        assert_eq!(inv.values, c.normalized);
        let d = compute_cnm(&synthetic_map(&[0.9; 6]), None, CnmPolarity::Literal).unwrap();
        assert!(d.degenerate && d.values.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn cnm_separates_voiced_from_noise() {
        let n = 16000;
        let mut x = gen::vowel(FS, n, &|_| 150.0, &gen::vowel_formants()[0], 8000.0, 1);
        gen::scale_to_peak(&mut x, 0.8);
        let mut noise = gen::white_noise(n, 2);
        gen::scale_to_peak(&mut noise, 0.3);
        x.extend(noise);
        let w = Waveform::new(x, 16000).unwrap();
        let f0 = f0_track(150.0, 400);
        let m = compute_pdd(&w, &f0, &PddConfig::default()).unwrap();
        let c = compute_cnm(&m, None, CnmPolarity::Literal).unwrap();
        let voiced = median(&c.values[10..190]);
        let noisy = median(&c.values[210..390]);
        assert!(
            voiced > DEFAULT_CNM_THRESHOLD && DEFAULT_CNM_THRESHOLD > noisy,
            "{voiced} {noisy}"
        );
    }

    #[test]
    fn frame_summary_uses_bands_above_mvf() {
        let mut m = synthetic_map(&[1.0, 1.0]);
        m.values[0] = vec![0.0, 0.0, 2.0, 4.0];
        let mvf = ParamTrack::new(vec![3500.0, 8000.0], m.grid, TrackKind::Mvf).unwrap();
        let s = m.frame_summary(Some(&mvf)).unwrap();
        assert_eq!(s[0], 3.0);
        assert_eq!(s[1], 1.0);
    }

    #[test]
    fn resampling_is_nearest() {
        let c = CnmTrack::from_values(vec![0.0, 1.0], 0.77, CnmPolarity::Literal).unwrap();
        assert_eq!(c.resampled(4).values, vec![0.0, 0.0, 1.0, 1.0]);
        assert!(CnmTrack::from_values(vec![1.5], 0.77, CnmPolarity::Literal).is_err());
    }

    #[test]
    fn apply_cnm_limits() {
        let v = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let u = vec![vec![0.5, -0.5], vec![1.0, 1.0]];
        assert_eq!(apply_cnm(&v, &u, &[0.0, 0.0], 0.77).unwrap(), v);
        assert_eq!(apply_cnm(&v, &u, &[1.0, 1.0], 0.77).unwrap(), u);
        let half = apply_cnm(&v, &u, &[0.5, 0.5], 0.77).unwrap();
        assert_eq!(half, vec![vec![1.25, 1.75], vec![3.5, 4.5]]);
        assert!(apply_cnm(&v, &u, &[0.5], 0.77).is_err());
    }

    #[test]
    fn kde_peaks_at_repeated_value() {
        let k = kernel_density(&[2.5; 10], 0.3).unwrap();
        let i = (0..k.density.len())
            .max_by(|&a, &b| k.density[a].total_cmp(&k.density[b]))
            .unwrap();
        assert!((k.grid[i] - 2.5).abs() < 0.3 / 8.0 + 1e-9);
        assert!((k.integral() - 1.0).abs() < 1e-3);
        assert!(kernel_density(&[1.0], 0.3).is_err());
        assert!(kernel_density(&[1.0, 2.0], 0.0).is_err());
    }

    #[test]
    fn kde_of_normal_samples_is_close_to_normal() {
        let x = gen::white_noise(10000, 42);
        let h = silverman_bandwidth(&x).unwrap();
        let k = kernel_density(&x, h).unwrap();
        assert!((k.integral() - 1.0).abs() < 1e-3);
        let p: Vec<f64> = k
            .grid
            .iter()
            .map(|&g| (-0.5 * g * g).exp() / (2.0 * PI).sqrt())
            .collect();
        let integrand: Vec<f64> = p
            .iter()
            .zip(&k.density)
            .map(|(a, b)| if *a > 0.0 { a * (a / b.max(1e-300)).ln() } else { 0.0 })
            .collect();
        let kl = trapezoid(&k.grid, &integrand);
        assert!(kl < 0.01, "{kl}");
    }

    #[test]
    fn ecdf_examples() {
        let e = ecdf(&[1.0, 2.0, 3.0]).unwrap();
        assert!((e.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(3.0), 1.0);
        assert_eq!(e.eval(1e9), 1.0);
        assert!(ecdf(&[]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ecdf_is_monotone(x in prop::collection::vec(-100.0f64..100.0, 1..60), q in prop::collection::vec(-120.0f64..120.0, 2..30)) {
            let e = ecdf(&x).unwrap();
            let mut q = q;
            q.sort_by(f64::total_cmp);
            let v: Vec<f64> = q.iter().map(|&t| e.eval(t)).collect();
            prop_assert!(v.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(v.iter().all(|p| (0.0..=1.0).contains(p)));
        }

        #[test]
        fn cnm_in_unit_interval(s in prop::collection::vec(0.0f64..10.0, 1..50), inverted in any::<bool>()) {
            let pol = if inverted { CnmPolarity::Inverted } else { CnmPolarity::Literal };
            let c = compute_cnm(&synthetic_map(&s), None, pol).unwrap();
            prop_assert!(c.values.iter().all(|v| (0.0..=1.0).contains(v)));
            if !inverted {
                for (a, b) in c.values.iter().zip(&c.normalized) {
                    prop_assert_eq!(a + b, 1.0);
                }
            }
        }

        #[test]
        fn masking_conserves_when_allowed(v in prop::collection::vec(-1.0f64..1.0, 1..40), u in prop::collection::vec(-1.0f64..1.0, 40)) {
            let u = u[..v.len()].to_vec();
            let out = apply_cnm(std::slice::from_ref(&v), std::slice::from_ref(&u), &[1.0], 1.0).unwrap();
            for ((o, a), b) in out[0].iter().zip(&v).zip(&u) {
                prop_assert!((o - (a + b)).abs() < 1e-15);
            }
        }

        #[test]
        fn deviation_is_bounded(p in prop::collection::vec(-10.0f64..10.0, 1..20)) {
            let s = circular_deviation(&p);
            prop_assert!((0.0..=PDD_MAX).contains(&s));
        }
    }
}
