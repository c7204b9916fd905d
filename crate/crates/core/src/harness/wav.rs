//! WAV reading and writing on top of `hound`: 16-bit PCM and 32-bit float,
//! any channel count (downmixed by averaging on read).

use std::io::Cursor;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    /// Mono samples in `[-1, 1]`.
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

fn read_error(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(e) => Error::Truncated(e.to_string()),
        other => Error::UnsupportedAudio(other.to_string()),
    }
}

pub fn decode_wav(bytes: &[u8]) -> Result<Audio> {
    let mut reader = WavReader::new(Cursor::new(bytes)).map_err(read_error)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 || spec.sample_rate == 0 {
        return Err(Error::UnsupportedAudio(format!(
            "{channels} channels at {} Hz",
            spec.sample_rate
        )));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>(),
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (f, bits) => {
            return Err(Error::UnsupportedAudio(format!(
                "{bits}-bit {f:?} samples (need 16-bit PCM or 32-bit float)"
            )))
        }
    }
    .map_err(read_error)?;
    if interleaved.len() % channels != 0 {
        return Err(Error::Truncated(format!(
            "{} samples do not fill whole {channels}-channel frames",
            interleaved.len()
        )));
    }
    let samples = interleaved
        .chunks_exact(channels)
        .map(|f| f.iter().sum::<f64>() / channels as f64)
        .collect();
    Ok(Audio {
        samples,
        sample_rate: spec.sample_rate as f64,
    })
}

pub fn load_wav(path: &Path) -> Result<Audio> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

fn spec(sample_rate: u32, format: WavFormat) -> WavSpec {
    let (bits_per_sample, sample_format) = match format {
        WavFormat::Pcm16 => (16, SampleFormat::Int),
        WavFormat::Float32 => (32, SampleFormat::Float),
    };
    WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample,
        sample_format,
    }
}

fn write_samples<W: std::io::Write + std::io::Seek>(
    mut w: WavWriter<W>,
    samples: &[f64],
    format: WavFormat,
) -> hound::Result<()> {
    for &x in samples {
        match format {
            WavFormat::Pcm16 => {
                w.write_sample((x * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?
            }
            WavFormat::Float32 => w.write_sample(x as f32)?,
        }
    }
    w.finalize()
}

/// Mono WAV bytes. PCM samples are scaled by 32768, rounded and clipped.
pub fn encode_wav(samples: &[f64], sample_rate: u32, format: WavFormat) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    WavWriter::new(&mut buf, spec(sample_rate, format))
        .and_then(|w| write_samples(w, samples, format))
        .expect("in-memory WAV write");
    buf.into_inner()
}

pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32, format: WavFormat) -> Result<()> {
    let to_error = |e: hound::Error| match e {
        hound::Error::IoError(e) => Error::io(path, e),
        other => Error::UnsupportedAudio(other.to_string()),
    };
    let w = WavWriter::create(path, spec(sample_rate, format)).map_err(to_error)?;
    write_samples(w, samples, format).map_err(to_error)
}
