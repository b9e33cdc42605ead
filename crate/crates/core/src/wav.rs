//! WAV input: 16-bit PCM, mono, 16 kHz (RIFF format tag 1). Anything
//! else is rejected with a descriptive error.

use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{AudioBuffer, SAMPLE_RATE};
use crate::scalar::Real;

const I16_SCALE: f64 = 32768.0;

pub fn read_wav<F: Real>(path: &Path) -> Result<AudioBuffer<F>> {
    let mut reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::Audio(format!("{}: {other}", path.display())),
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Audio(format!(
            "{}: expected 16-bit PCM, got {}-bit {:?}",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    if spec.channels != 1 {
        return Err(Error::Audio(format!(
            "{}: expected mono, got {} channels",
            path.display(),
            spec.channels
        )));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::Audio(format!(
            "{}: expected {SAMPLE_RATE} Hz, got {} Hz",
            path.display(),
            spec.sample_rate
        )));
    }
    let samples: std::result::Result<Vec<i16>, _> = reader.samples::<i16>().collect();
    let samples = samples.map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
    AudioBuffer::new(
        SAMPLE_RATE,
        samples
            .into_iter()
            .map(|s| F::from_f64_lossy(s as f64 / I16_SCALE))
            .collect(),
    )
}

/// Write a 16 kHz mono 16-bit PCM WAV; samples are clamped to `[-1, 1]`.
pub fn write_wav<F: Real>(path: &Path, samples: &[F]) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)
        .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
    for &s in samples {
        let v = (s.into_f64().clamp(-1.0, 1.0) * I16_SCALE).round();
        writer
            .write_sample(v.clamp(i16::MIN as f64, i16::MAX as f64) as i16)
            .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
    }
    writer
        .finalize()
        .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
    Ok(())
}
