//! Continuous vocoder toolkit.
//!
//! Analysis produces continuous parameter streams (contF0, maximum voiced
//! frequency, mel-cepstrum, HNR, temporal envelopes, phase distortion and the
//! continuous noise mask). Two synthesizers rebuild a waveform from them: a
//! source-filter path and a continuous sinusoidal model. Objective quality
//! metrics and voice-conversion helpers (DTW, geometric spectral
//! subtraction) complete the toolkit.

pub mod cli;
pub mod envelopes;
pub mod error;
pub mod excitation;
pub mod metrics;
pub mod mvf;
pub mod noise_mask;
pub mod pitch;
pub mod signal;
pub mod spectral;
pub mod synthesis;
pub mod vc;

pub use error::{Error, Result};
pub use signal::{FrameGrid, ParamTrack, TrackKind, Waveform};
