use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use super::Waveform;
use crate::error::{Error, Result};

fn map_hound(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::Format(other.to_string()),
    }
}

// Once the file is open, a failed read means the content is short or malformed.
fn map_hound_read(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Format(format!("truncated or malformed WAV: {io}")),
        other => Error::Format(other.to_string()),
    }
}

/// Reads a 16-bit PCM mono WAV file and normalizes it to peak 1.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let file = File::open(path.as_ref())?;
    let reader = hound::WavReader::new(BufReader::new(file)).map_err(map_hound_read)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Format(format!(
            "expected mono audio, found {} channels",
            spec.channels
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Format("expected 16-bit integer PCM".into()));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(map_hound_read)?;
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(Waveform::new(samples, spec.sample_rate)?.peak_normalized())
}

/// Writes 16-bit PCM mono. Signals with peak above 1 are scaled down first.
pub fn write_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let file = File::create(path.as_ref())?;
    let mut writer = hound::WavWriter::new(BufWriter::new(file), spec).map_err(map_hound)?;
    let w = w.limited();
    for &v in w.samples() {
        writer
            .write_sample((v * 32767.0).round().clamp(-32768.0, 32767.0) as i16)
            .map_err(map_hound)?;
    }
    writer.finalize().map_err(map_hound)
}
