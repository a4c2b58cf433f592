//! C ABI for the cvoc vocoder toolkit.
//!
//! Objects are opaque handles created by `cvoc_*_new`/`read`/`analyze` calls
//! and released with the matching `*_free`. Every fallible call returns a
//! [`CvocStatus`]; on failure [`cvoc_last_error`] holds a message for the
//! calling thread until the next failing call on that thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cvoc::cli::{self, AnalysisConfig, Engine, Refine};
use cvoc::envelopes::EnvelopeKind;
use cvoc::noise_mask::{CnmPolarity, DEFAULT_CNM_THRESHOLD};
use cvoc::signal::{read_wav, write_wav};
use cvoc::synthesis::{AnalysisBundle, SynthConfig};
use cvoc::{Error, Waveform};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvocStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    EmptyInput = 5,
    MissingTrack = 6,
    Numeric = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

impl From<&Error> for CvocStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io(_) => CvocStatus::Io,
            Error::Format(_) => CvocStatus::Format,
            Error::EmptyInput => CvocStatus::EmptyInput,
            Error::MissingTrack(_) => CvocStatus::MissingTrack,
            Error::InvalidArgument(_) | Error::LengthMismatch { .. } => CvocStatus::InvalidArgument,
            Error::Numeric(_) | Error::Degenerate | Error::NoVoicedFrames => CvocStatus::Numeric,
        }
    }
}

/// Synthesis engine selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvocEngine {
    SourceFilter = 0,
    Sinusoidal = 1,
}

/// Pitch refinement selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvocRefine {
    None = 0,
    Akf = 1,
    Timewarp = 2,
    StoneMask = 3,
}

/// Noise mask request: off, or on with the given polarity.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvocCnm {
    Off = 0,
    Literal = 1,
    Inverted = 2,
}

/// Temporal envelope used by the source-filter engine.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvocEnvelope {
    Amplitude = 0,
    Hilbert = 1,
    Triangular = 2,
    TrueEnvelope = 3,
    NoEnvelope = 4,
}

/// Analysis options. Start from [`cvoc_analysis_options_default`]. Enum
/// fields must hold one of the declared values; anything else is undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CvocAnalysisOptions {
    pub frame_shift: f64,
    /// 24 or 60.
    pub mgc_order: u32,
    pub alpha: f64,
    pub f0_min: f64,
    pub f0_max: f64,
    pub refine: CvocRefine,
    pub envelope: CvocEnvelope,
    pub hnr: bool,
    pub basis: bool,
    pub cnm: CvocCnm,
    pub cnm_threshold: f64,
}

/// Synthesis options. Start from [`cvoc_synthesis_options_default`]. Enum
/// fields must hold one of the declared values; anything else is undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CvocSynthesisOptions {
    pub engine: CvocEngine,
    pub seed: u64,
    pub use_cnm: bool,
    pub cnm_threshold: f64,
}

/// Opaque mono waveform.
pub struct CvocWaveform(Waveform);

/// Opaque analysis bundle.
pub struct CvocBundle(AnalysisBundle);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), CvocStatus>) -> CvocStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CvocStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            CvocStatus::Panic
        }
    }
}

fn fail(e: Error) -> CvocStatus {
    let s = CvocStatus::from(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> CvocStatus {
    set_error(format!("{what} is null"));
    CvocStatus::NullPointer
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, CvocStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        CvocStatus::InvalidArgument
    })
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, CvocStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut *mut T) -> Result<&'a mut *mut T, CvocStatus> {
    p.as_mut().ok_or_else(|| null("output pointer"))
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, cap: usize, len_out: *mut usize) -> Result<(), CvocStatus> {
    if !len_out.is_null() {
        *len_out = src.len();
    }
    if buf.is_null() {
        return if len_out.is_null() { Err(null("buffer")) } else { Ok(()) };
    }
    if cap < src.len() {
        set_error(format!("buffer holds {cap} values, {} needed", src.len()));
        return Err(CvocStatus::BufferTooSmall);
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn cvoc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn cvoc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[no_mangle]
pub extern "C" fn cvoc_analysis_options_default() -> CvocAnalysisOptions {
    let d = AnalysisConfig::default();
    CvocAnalysisOptions {
        frame_shift: d.frame_shift,
        mgc_order: d.mgc_order as u32,
        alpha: d.alpha,
        f0_min: d.f0_min,
        f0_max: d.f0_max,
        refine: CvocRefine::None,
        envelope: CvocEnvelope::Hilbert,
        hnr: d.hnr,
        basis: d.basis,
        cnm: CvocCnm::Off,
        cnm_threshold: d.cnm_threshold,
    }
}

#[no_mangle]
pub extern "C" fn cvoc_synthesis_options_default() -> CvocSynthesisOptions {
    CvocSynthesisOptions {
        engine: CvocEngine::SourceFilter,
        seed: 0,
        use_cnm: true,
        cnm_threshold: DEFAULT_CNM_THRESHOLD,
    }
}

impl CvocAnalysisOptions {
    fn to_config(self) -> Result<AnalysisConfig, CvocStatus> {
        if self.mgc_order != 24 && self.mgc_order != 60 {
            set_error(format!("mel-cepstral order must be 24 or 60, got {}", self.mgc_order));
            return Err(CvocStatus::InvalidArgument);
        }
        Ok(AnalysisConfig {
            frame_shift: self.frame_shift,
            mgc_order: self.mgc_order as usize,
            alpha: self.alpha,
            f0_min: self.f0_min,
            f0_max: self.f0_max,
            refine: match self.refine {
                CvocRefine::None => Refine::None,
                CvocRefine::Akf => Refine::Akf,
                CvocRefine::Timewarp => Refine::Timewarp,
                CvocRefine::StoneMask => Refine::StoneMask,
            },
            envelope: match self.envelope {
                CvocEnvelope::Amplitude => EnvelopeKind::Amplitude,
                CvocEnvelope::Hilbert => EnvelopeKind::Hilbert,
                CvocEnvelope::Triangular => EnvelopeKind::Triangular,
                CvocEnvelope::TrueEnvelope => EnvelopeKind::True,
                CvocEnvelope::NoEnvelope => EnvelopeKind::None,
            },
            hnr: self.hnr,
            basis: self.basis,
            cnm: match self.cnm {
                CvocCnm::Off => None,
                CvocCnm::Literal => Some(CnmPolarity::Literal),
                CvocCnm::Inverted => Some(CnmPolarity::Inverted),
            },
            cnm_threshold: self.cnm_threshold,
        })
    }
}

/// Copies `len` samples into a new waveform.
///
/// # Safety
/// `samples` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvoc_waveform_new(
    samples: *const f64,
    len: usize,
    sample_rate: u32,
    out: *mut *mut CvocWaveform,
) -> CvocStatus {
    guard(|| {
        let out = out_ptr(out)?;
        if samples.is_null() && len > 0 {
            return Err(null("samples"));
        }
        let v = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(samples, len).to_vec()
        };
        let w = Waveform::new(v, sample_rate).map_err(fail)?;
        *out = Box::into_raw(Box::new(CvocWaveform(w)));
        Ok(())
    })
}

/// Reads a 16-bit mono PCM WAV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvoc_waveform_read_wav(path: *const c_char, out: *mut *mut CvocWaveform) -> CvocStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let w = read_wav(path_arg(path, "path")?).map_err(fail)?;
        *out = Box::into_raw(Box::new(CvocWaveform(w)));
        Ok(())
    })
}

/// # Safety
/// `w` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cvoc_waveform_write_wav(w: *const CvocWaveform, path: *const c_char) -> CvocStatus {
    guard(|| {
        let w = handle(w, "waveform")?;
        write_wav(path_arg(path, "path")?, &w.0).map_err(fail)
    })
}

/// Number of samples; 0 for a null handle.
///
/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvoc_waveform_len(w: *const CvocWaveform) -> usize {
    w.as_ref().map_or(0, |w| w.0.len())
}

/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvoc_waveform_sample_rate(w: *const CvocWaveform) -> u32 {
    w.as_ref().map_or(0, |w| w.0.sample_rate())
}

/// Copies the samples into `buf` (capacity `cap`). `len_out`, when not null,
/// receives the sample count; a null `buf` only queries the length.
///
/// # Safety
/// `buf` must hold `cap` writable doubles; `len_out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cvoc_waveform_copy_samples(
    w: *const CvocWaveform,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> CvocStatus {
    guard(|| copy_out(handle(w, "waveform")?.0.samples(), buf, cap, len_out))
}

/// # Safety
/// `w` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cvoc_waveform_free(w: *mut CvocWaveform) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Runs the full analysis. A null `opts` uses the defaults.
///
/// # Safety
/// `w` must be a live handle, `opts` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cvoc_analyze(
    w: *const CvocWaveform,
    opts: *const CvocAnalysisOptions,
    out: *mut *mut CvocBundle,
) -> CvocStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let w = handle(w, "waveform")?;
        let cfg = opts
            .as_ref()
            .copied()
            .unwrap_or_else(|| cvoc_analysis_options_default())
            .to_config()?;
        let b = cli::analyze(&w.0, &cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(CvocBundle(b)));
        Ok(())
    })
}

/// Synthesizes a waveform from a bundle. A null `opts` uses the defaults.
///
/// # Safety
/// `b` must be a live handle, `opts` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cvoc_synthesize(
    b: *const CvocBundle,
    opts: *const CvocSynthesisOptions,
    out: *mut *mut CvocWaveform,
) -> CvocStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let b = handle(b, "bundle")?;
        let o = opts
            .as_ref()
            .copied()
            .unwrap_or_else(|| cvoc_synthesis_options_default());
        let engine = match o.engine {
            CvocEngine::SourceFilter => Engine::SourceFilter,
            CvocEngine::Sinusoidal => Engine::Csm,
        };
        let cfg = SynthConfig {
            seed: o.seed,
            use_cnm: o.use_cnm,
            cnm_threshold: o.cnm_threshold,
            ..SynthConfig::default()
        };
        let y = cli::synthesize(&b.0, engine, &cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(CvocWaveform(y)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvoc_bundle_read(path: *const c_char, out: *mut *mut CvocBundle) -> CvocStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let b = cli::read_bundle(path_arg(path, "path")?).map_err(fail)?;
        *out = Box::into_raw(Box::new(CvocBundle(b)));
        Ok(())
    })
}

/// # Safety
/// `b` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cvoc_bundle_write(b: *const CvocBundle, path: *const c_char) -> CvocStatus {
    guard(|| {
        let b = handle(b, "bundle")?;
        cli::write_bundle(path_arg(path, "path")?, &b.0).map_err(fail)
    })
}

/// Frame count; 0 for a null handle.
///
/// # Safety
/// `b` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvoc_bundle_num_frames(b: *const CvocBundle) -> usize {
    b.as_ref().map_or(0, |b| b.0.num_frames())
}

/// Copies the contF0 track (Hz per frame). Same buffer protocol as
/// [`cvoc_waveform_copy_samples`].
///
/// # Safety
/// `buf` must hold `cap` writable doubles; `len_out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cvoc_bundle_copy_f0(
    b: *const CvocBundle,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> CvocStatus {
    guard(|| copy_out(handle(b, "bundle")?.0.contf0.values(), buf, cap, len_out))
}

/// Copies the maximum voiced frequency track (Hz per frame).
///
/// # Safety
/// As for [`cvoc_bundle_copy_f0`].
#[no_mangle]
pub unsafe extern "C" fn cvoc_bundle_copy_mvf(
    b: *const CvocBundle,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> CvocStatus {
    guard(|| copy_out(handle(b, "bundle")?.0.mvf.values(), buf, cap, len_out))
}

/// # Safety
/// `b` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cvoc_bundle_free(b: *mut CvocBundle) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}
