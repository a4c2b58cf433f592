//! Command implementations behind the `cvoc` binary, the analysis pipeline
//! and the bundle file format.
//!
//! A bundle is a text header followed by little-endian f32 payloads:
//!
//! ```text
//! CVOC1
//! sample_rate 16000
//! frame_shift 0.005
//! frame_length 0.0375
//! frames 200
//! mgc_order 24
//! alpha 0.42
//! gamma -0.3333333333333333
//! envelope hilbert
//! track contf0 200
//! track mvf 200
//! track mgc 5000
//! end
//! ```
//!
//! Optional tracks are `hnr`, `cnm` (with `cnm_polarity` and `cnm_threshold`
//! header lines) and `basis` (the first residual eigenvector). Payloads follow
//! the `end` line in track order.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::envelopes::EnvelopeKind;
use crate::error::{Error, Result};
use crate::excitation::{self, HnrConfig, PcaMode, ResidualBasis};
use crate::metrics::{self, MetricConfig, MetricReport};
use crate::mvf::{self, SlmConfig};
use crate::noise_mask::{self, CnmPolarity, CnmTrack, PddConfig};
use crate::pitch::{self, AkfConfig, NoiseKind, PitchConfig, PitchErrorReport, TimewarpConfig};
use crate::signal::{gen, read_wav, write_wav, FrameGrid, ParamTrack, TrackKind, Waveform};
use crate::spectral::{self, MgcTrack};
use crate::synthesis::{self, AnalysisBundle, SynthConfig};
use crate::vc::{self, WarpPath};

pub const BUNDLE_MAGIC: &str = "CVOC1";

/// Process exit code for an error: 2 input, 3 format, 4 numeric failure.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::InvalidArgument(_) | Error::EmptyInput | Error::MissingTrack(_) => 2,
        Error::Format(_) => 3,
        Error::Numeric(_) | Error::Degenerate | Error::LengthMismatch { .. } | Error::NoVoicedFrames => 4,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Refine {
    #[default]
    None,
    Akf,
    Timewarp,
    StoneMask,
}

impl Refine {
    pub const ALL: [Refine; 4] = [Refine::None, Refine::Akf, Refine::Timewarp, Refine::StoneMask];
}

impl FromStr for Refine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Refine::None),
            "akf" => Ok(Refine::Akf),
            "timewarp" => Ok(Refine::Timewarp),
            "stonemask" => Ok(Refine::StoneMask),
            o => Err(Error::invalid(format!("unknown refinement '{o}'"))),
        }
    }
}

impl fmt::Display for Refine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Refine::None => "none",
            Refine::Akf => "akf",
            Refine::Timewarp => "timewarp",
            Refine::StoneMask => "stonemask",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    #[default]
    SourceFilter,
    Csm,
}

impl FromStr for Engine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sf" => Ok(Engine::SourceFilter),
            "csm" => Ok(Engine::Csm),
            o => Err(Error::invalid(format!("unknown engine '{o}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    pub frame_shift: f64,
    pub mgc_order: usize,
    pub alpha: f64,
    pub f0_min: f64,
    pub f0_max: f64,
    pub refine: Refine,
    pub envelope: EnvelopeKind,
    pub hnr: bool,
    pub basis: bool,
    /// Compute the continuous noise mask with this polarity.
    pub cnm: Option<CnmPolarity>,
    pub cnm_threshold: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            frame_shift: 0.005,
            mgc_order: 24,
            alpha: spectral::DEFAULT_ALPHA,
            f0_min: 80.0,
            f0_max: 300.0,
            refine: Refine::None,
            envelope: EnvelopeKind::Hilbert,
            hnr: true,
            basis: true,
            cnm: None,
            cnm_threshold: noise_mask::DEFAULT_CNM_THRESHOLD,
        }
    }
}

impl AnalysisConfig {
    fn pitch(&self) -> PitchConfig {
        PitchConfig {
            f0_min: self.f0_min,
            f0_max: self.f0_max,
            frame_shift: self.frame_shift,
            ..PitchConfig::default()
        }
    }
}

/// contF0 with the selected refinement.
pub fn estimate_f0(w: &Waveform, cfg: &PitchConfig, refine: Refine) -> Result<ParamTrack> {
    let base = pitch::contf0_baseline(w, cfg)?.track;
    match refine {
        Refine::None => Ok(base),
        Refine::Akf => pitch::refine_akf(&base, w, cfg, &AkfConfig::default()),
        Refine::Timewarp => pitch::refine_timewarp(&base, w, cfg, &TimewarpConfig::default()),
        Refine::StoneMask => pitch::refine_stonemask(&base, w, cfg),
    }
}

/// Residual PCA basis; `None` (with a warning) when too few cycles are found.
fn residual_basis(w: &Waveform, f0: &ParamTrack, mgc: &MgcTrack) -> Option<ResidualBasis> {
    let run = || -> Result<ResidualBasis> {
        let residual = spectral::inverse_filter(w, mgc)?;
        let gcis = excitation::detect_gci(&residual, f0)?;
        let frames = excitation::extract_ps_frames(&residual, &gcis, f0)?;
        let mut b = excitation::pca_basis_with(&frames.frames, PcaMode::Uncentered)?;
        b.eigenvectors.truncate(1);
        b.eigenvalues.truncate(1);
        Ok(b)
    };
    match run() {
        Ok(b) => Some(b),
        Err(e) => {
            log::warn!("residual basis unavailable ({e}); synthesis will use impulses");
            None
        }
    }
}

/// Full analysis: contF0, MVF, mel-cepstrum, and the optional HNR, residual
/// basis and noise mask, all on the contF0 grid.
pub fn analyze(w: &Waveform, cfg: &AnalysisConfig) -> Result<AnalysisBundle> {
    if w.is_empty() {
        return Err(Error::EmptyInput);
    }
    let pcfg = cfg.pitch();
    let f0 = estimate_f0(w, &pcfg, cfg.refine)?;
    let grid = *f0.grid();
    let slm = SlmConfig {
        frame_shift: cfg.frame_shift,
        ..SlmConfig::default()
    };
    let mvf = mvf::estimate_mvf_slm(w, &f0, &slm)?;
    let mgc = spectral::mgc_analyze_adaptive(w, &f0, cfg.mgc_order, cfg.alpha)?;
    let hnr = if cfg.hnr {
        let hgrid = FrameGrid::new(
            cfg.frame_shift,
            excitation::HNR_FRAME_LENGTH.max(2.0 / cfg.f0_min),
            grid.num_frames,
        )?;
        let h = excitation::hnr_estimate(
            w,
            &hgrid,
            &HnrConfig {
                f0_min: cfg.f0_min,
                f0_max: cfg.f0_max,
            },
        )?;
        Some(h)
    } else {
        None
    };
    let basis = if cfg.basis { residual_basis(w, &f0, &mgc) } else { None };
    let cnm = match cfg.cnm {
        Some(polarity) => {
            let pdd = noise_mask::compute_pdd(w, &f0, &PddConfig::default())?;
            let mut c = noise_mask::compute_cnm(&pdd, Some(&mvf), polarity)?;
            c.threshold = cfg.cnm_threshold;
            Some(c)
        }
        None => None,
    };
    Ok(AnalysisBundle {
        contf0: f0,
        mvf,
        mgc,
        hnr,
        cnm,
        basis,
        envelope_kind: cfg.envelope,
        sample_rate: w.sample_rate(),
    })
}

pub fn synthesize(b: &AnalysisBundle, engine: Engine, cfg: &SynthConfig) -> Result<Waveform> {
    match engine {
        Engine::SourceFilter => synthesis::synth_source_filter(b, cfg),
        Engine::Csm => synthesis::synth_csm(b, cfg),
    }
}

fn push_f32(out: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        out.extend_from_slice(&(*x as f32).to_le_bytes());
    }
}

/// Serializes a bundle: text header, then f32 payloads.
pub fn encode_bundle(b: &AnalysisBundle) -> Result<Vec<u8>> {
    b.validate()?;
    let g = b.contf0.grid();
    let mut h = String::new();
    let mut payload = Vec::new();
    let mut track = |h: &mut String, name: &str, v: &[f64]| {
        h.push_str(&format!("track {name} {}\n", v.len()));
        push_f32(&mut payload, v);
    };
    h.push_str(&format!("{BUNDLE_MAGIC}\n"));
    h.push_str(&format!("sample_rate {}\n", b.sample_rate));
    h.push_str(&format!("frame_shift {}\n", g.frame_shift));
    h.push_str(&format!("frame_length {}\n", g.frame_length));
    h.push_str(&format!("frames {}\n", g.num_frames));
    h.push_str(&format!("mgc_order {}\n", b.mgc.order()));
    h.push_str(&format!("alpha {}\n", b.mgc.alpha()));
    h.push_str(&format!("gamma {}\n", b.mgc.gamma()));
    h.push_str(&format!("envelope {}\n", b.envelope_kind));
    if let Some(c) = &b.cnm {
        h.push_str(&format!("cnm_polarity {}\n", c.polarity));
        h.push_str(&format!("cnm_threshold {}\n", c.threshold));
    }
    track(&mut h, "contf0", b.contf0.values());
    track(&mut h, "mvf", b.mvf.values());
    let flat: Vec<f64> = b.mgc.coeffs().iter().flatten().cloned().collect();
    track(&mut h, "mgc", &flat);
    if let Some(t) = &b.hnr {
        track(&mut h, "hnr", t.values());
    }
    if let Some(c) = &b.cnm {
        track(&mut h, "cnm", &c.values);
    }
    if let Some(basis) = &b.basis {
        track(&mut h, "basis", basis.first());
    }
    h.push_str("end\n");
    let mut out = h.into_bytes();
    out.extend(payload);
    Ok(out)
}

fn header_value<T: FromStr>(map: &HashMap<String, String>, key: &str) -> Result<T> {
    let v = map
        .get(key)
        .ok_or_else(|| Error::Format(format!("bundle header lacks '{key}'")))?;
    v.parse::<T>()
        .map_err(|_| Error::Format(format!("bad value for '{key}': '{v}'")))
}

/// Parses a bundle. Missing mandatory tracks give [`Error::MissingTrack`].
pub fn decode_bundle(bytes: &[u8]) -> Result<AnalysisBundle> {
    let magic = format!("{BUNDLE_MAGIC}\n");
    if !bytes.starts_with(magic.as_bytes()) {
        return Err(Error::Format("missing CVOC1 magic".into()));
    }
    let end = bytes
        .windows(5)
        .position(|w| w == b"\nend\n")
        .ok_or_else(|| Error::Format("bundle header not terminated".into()))?
        + 5;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::Format("bundle header is not UTF-8".into()))?;
    let mut keys = HashMap::new();
    let mut tracks: Vec<(String, usize)> = Vec::new();
    for line in header.lines().skip(1) {
        if line == "end" {
            break;
        }
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some("track"), Some(name), Some(n), None) => {
                let n = n
                    .parse()
                    .map_err(|_| Error::Format(format!("bad track line '{line}'")))?;
                tracks.push((name.to_string(), n));
            }
            (Some(k), Some(v), None, None) => {
                keys.insert(k.to_string(), v.to_string());
            }
            _ => return Err(Error::Format(format!("bad header line '{line}'"))),
        }
    }
    let payload = &bytes[end..];
    let total: usize = tracks.iter().map(|(_, n)| n).sum();
    if payload.len() != total * 4 {
        return Err(Error::Format(format!(
            "payload has {} bytes, header declares {}",
            payload.len(),
            total * 4
        )));
    }
    let mut data: HashMap<String, Vec<f64>> = HashMap::new();
    let mut offset = 0;
    for (name, n) in &tracks {
        let v = payload[offset..offset + 4 * n]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        offset += 4 * n;
        if data.insert(name.clone(), v).is_some() {
            return Err(Error::Format(format!("duplicate track '{name}'")));
        }
    }
    let fmt_err = |e: Error| match e {
        Error::Format(_) | Error::MissingTrack(_) => e,
        other => Error::Format(other.to_string()),
    };
    let sample_rate: u32 = header_value(&keys, "sample_rate")?;
    let frames: usize = header_value(&keys, "frames")?;
    let grid = FrameGrid::new(
        header_value(&keys, "frame_shift")?,
        header_value(&keys, "frame_length")?,
        frames,
    )
    .map_err(fmt_err)?;
    let order: usize = header_value(&keys, "mgc_order")?;
    let alpha: f64 = header_value(&keys, "alpha")?;
    let gamma: f64 = header_value(&keys, "gamma")?;
    let envelope: EnvelopeKind = header_value(&keys, "envelope")?;
    let mut take = |name: &str| data.remove(name);
    let need = |v: Option<Vec<f64>>, name: &str| v.ok_or_else(|| Error::MissingTrack(name.to_string()));
    let contf0 = ParamTrack::new(need(take("contf0"), "contf0")?, grid, TrackKind::ContF0).map_err(fmt_err)?;
    let mvf = ParamTrack::new(need(take("mvf"), "mvf")?, grid, TrackKind::Mvf).map_err(fmt_err)?;
    let flat = need(take("mgc"), "mgc")?;
    if flat.len() != frames * (order + 1) {
        return Err(Error::Format("mgc track length does not match frames and order".into()));
    }
    let coeffs = flat.chunks(order + 1).map(|c| c.to_vec()).collect();
    let mgc = MgcTrack::new(coeffs, order, alpha, grid)
        .map_err(fmt_err)?
        .with_gamma(gamma);
    let hnr = take("hnr")
        .map(|v| ParamTrack::new(v, grid, TrackKind::Hnr))
        .transpose()
        .map_err(fmt_err)?;
    let cnm = match take("cnm") {
        Some(v) => Some(
            CnmTrack::from_values(
                v,
                header_value(&keys, "cnm_threshold")?,
                header_value(&keys, "cnm_polarity")?,
            )
            .map_err(fmt_err)?,
        ),
        None => None,
    };
    let basis = take("basis").map(|v| ResidualBasis {
        eigenvectors: vec![v],
        eigenvalues: vec![1.0],
        frame_count: 0,
    });
    if let Some(name) = data.keys().next() {
        return Err(Error::Format(format!("unknown track '{name}'")));
    }
    let b = AnalysisBundle {
        contf0,
        mvf,
        mgc,
        hnr,
        cnm,
        basis,
        envelope_kind: envelope,
        sample_rate,
    };
    b.validate().map_err(fmt_err)?;
    Ok(b)
}

pub fn write_bundle(path: impl AsRef<Path>, b: &AnalysisBundle) -> Result<()> {
    let bytes = encode_bundle(b)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_bundle(path: impl AsRef<Path>) -> Result<AnalysisBundle> {
    decode_bundle(&fs::read(path)?)
}

pub fn cmd_analyze(input: &Path, output: &Path, cfg: &AnalysisConfig) -> Result<AnalysisBundle> {
    let w = read_wav(input)?;
    let b = analyze(&w, cfg)?;
    write_bundle(output, &b)?;
    Ok(b)
}

pub fn cmd_synthesize(bundle: &Path, output: &Path, engine: Engine, cfg: &SynthConfig) -> Result<Waveform> {
    let b = read_bundle(bundle)?;
    let y = synthesize(&b, engine, cfg)?;
    write_wav(output, &y)?;
    Ok(y)
}

pub fn cmd_copy_synth(
    input: &Path,
    output: &Path,
    acfg: &AnalysisConfig,
    engine: Engine,
    scfg: &SynthConfig,
) -> Result<Waveform> {
    let w = read_wav(input)?;
    let y = synthesize(&analyze(&w, acfg)?, engine, scfg)?;
    write_wav(output, &y)?;
    Ok(y)
}

/// Reads a reference F0 file: one value in Hz per line, 0 for unvoiced.
/// Blank lines and lines starting with `#` are skipped.
pub fn read_f0_file(path: &Path, frame_shift: f64) -> Result<ParamTrack> {
    let text = fs::read_to_string(path)?;
    let values = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad F0 value '{l}'")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    ParamTrack::new(
        values.clone(),
        FrameGrid::new(frame_shift, frame_shift, values.len())?,
        TrackKind::Other,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub f0: f64,
    /// Depth of a 3 Hz sinusoidal F0 modulation, in Hz.
    pub vibrato: f64,
    pub duration: f64,
    pub sample_rate: u32,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            f0: 140.0,
            vibrato: 10.0,
            duration: 1.0,
            sample_rate: 16000,
        }
    }
}

impl SyntheticSpec {
    fn f0_at(&self, t: f64) -> f64 {
        self.f0 + self.vibrato * (2.0 * std::f64::consts::PI * 3.0 * t).sin()
    }

    /// Harmonic vowel with the spec's F0 contour and its exact reference track.
    pub fn generate(&self, frame_shift: f64) -> Result<(Waveform, ParamTrack)> {
        let fs = self.sample_rate as f64;
        let n = (self.duration * fs).round() as usize;
        let mut x = gen::vowel(fs, n, &|t| self.f0_at(t), &gen::vowel_formants()[0], fs / 2.0, 0);
        gen::scale_to_peak(&mut x, 0.9);
        let w = Waveform::new(x, self.sample_rate)?;
        let frames = (self.duration / frame_shift).floor() as usize + 1;
        let reference: Vec<f64> = (0..frames).map(|i| self.f0_at(i as f64 * frame_shift)).collect();
        let r = ParamTrack::new(
            reference,
            FrameGrid::new(frame_shift, frame_shift, frames)?,
            TrackKind::Other,
        )?;
        Ok((w, r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub snr_db: Option<f64>,
    pub method: String,
    pub report: PitchErrorReportRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PitchErrorReportRow {
    pub gpe: f64,
    pub mfpe: f64,
    pub std: f64,
    pub rmse: f64,
}

impl From<PitchErrorReport> for PitchErrorReportRow {
    fn from(r: PitchErrorReport) -> Self {
        PitchErrorReportRow {
            gpe: r.gpe,
            mfpe: r.mfpe,
            std: r.std,
            rmse: r.rmse,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub pitch: PitchConfig,
    pub noise: NoiseKind,
    /// `None` benchmarks the clean signal.
    pub snrs: Vec<Option<f64>>,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            pitch: PitchConfig::default(),
            noise: NoiseKind::White,
            snrs: vec![None],
            seed: 0,
        }
    }
}

fn truncate_track(t: &ParamTrack, n: usize) -> Result<ParamTrack> {
    let g = FrameGrid::new(t.grid().frame_shift, t.grid().frame_length, n)?;
    ParamTrack::new(t.values()[..n].to_vec(), g, t.kind())
}

/// Baseline plus the three refinements at every SNR. Rows are grouped by SNR.
pub fn pitch_bench(w: &Waveform, reference: &ParamTrack, cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &snr in &cfg.snrs {
        let noisy = match snr {
            Some(s) => pitch::add_noise(w, cfg.noise, s, cfg.seed)?,
            None => w.clone(),
        };
        for refine in Refine::ALL {
            let est = estimate_f0(&noisy, &cfg.pitch, refine)?;
            let n = est.len().min(reference.len());
            let est = truncate_track(&est, n)?;
            let r = truncate_track(reference, n)?;
            let voiced: Vec<bool> = r.values().iter().map(|&v| v > 0.0).collect();
            let ref_f0 = r.with_values(r.values().iter().map(|&v| v.max(0.0)).collect())?;
            let report = pitch::pitch_error_metrics(&est, &ref_f0, &voiced)?;
            let method = if refine == Refine::None {
                "baseline".to_string()
            } else {
                refine.to_string()
            };
            rows.push(BenchRow {
                snr_db: snr,
                method,
                report: report.into(),
            });
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("snr_db,method,gpe,mfpe,std,rmse\n");
    for r in rows {
        let snr = r.snr_db.map_or("clean".to_string(), |v| format!("{v}"));
        s.push_str(&format!(
            "{snr},{},{:.4},{:.4},{:.4},{:.4}\n",
            r.method, r.report.gpe, r.report.mfpe, r.report.std, r.report.rmse
        ));
    }
    s
}

/// Objective metrics of `test` against `reference` (same sample rate), with
/// `corr` the waveform correlation over the common length.
pub fn compute_metrics(reference: &Waveform, test: &Waveform) -> Result<MetricReport> {
    if reference.sample_rate() != test.sample_rate() {
        return Err(Error::invalid("sample rates differ"));
    }
    let mut r = metrics::evaluate(reference, test, &MetricConfig::default())?;
    let n = reference.len().min(test.len());
    r.corr = metrics::corr(&reference.samples()[..n], &test.samples()[..n]).ok();
    Ok(r)
}

pub fn cmd_metrics(reference: &Path, test: &Path) -> Result<String> {
    let r = compute_metrics(&read_wav(reference)?, &read_wav(test)?)?;
    serde_json::to_string(&r).map_err(|e| Error::Numeric(e.to_string()))
}

/// DTW over the mel-cepstral frames of two bundles.
pub fn align_bundles(a: &AnalysisBundle, b: &AnalysisBundle) -> Result<(WarpPath, f64)> {
    vc::dtw_align(a.mgc.coeffs(), b.mgc.coeffs())
}

pub fn cmd_vc_align(a: &Path, b: &Path, output: &Path) -> Result<WarpPath> {
    let (path, _) = align_bundles(&read_bundle(a)?, &read_bundle(b)?)?;
    fs::write(output, path.to_text())?;
    Ok(path)
}
