//! Frames, energy and SNR metrics, and framing of long recordings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: f64 = 48_000.0;
/// 20 ms at 48 kHz.
pub const DEFAULT_FRAME_LEN: usize = 960;
pub const DEFAULT_SNR_CAP_DB: f64 = 100.0;

/// A fixed-length window of real samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl Frame {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyFrame);
        }
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid(
                "sample_rate",
                format!("{sample_rate} is not positive"),
            ));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Frame at the default 48 kHz rate.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, DEFAULT_SAMPLE_RATE)
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    // Internal constructor for values produced by our own arithmetic on valid frames.
    pub(crate) fn from_parts(samples: Vec<f64>, sample_rate: f64) -> Self {
        debug_assert!(!samples.is_empty());
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same rate, new samples of equal length.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: samples.len(),
            });
        }
        Self::new(samples, self.sample_rate)
    }
}

/// Reconstruction quality in decibels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrDb {
    pub value: f64,
    /// The error energy was exactly zero.
    pub capped: bool,
}

impl SnrDb {
    pub fn db(self) -> f64 {
        self.value
    }
}

/// Sum of squared samples.
pub fn energy(frame: &Frame) -> f64 {
    sum_squares(frame.samples())
}

pub(crate) fn sum_squares(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum()
}

/// `10 log10(sum x^2 / sum (xhat - x)^2)` with the default 100 dB cap.
pub fn snr_db(reference: &Frame, estimate: &Frame) -> Result<SnrDb> {
    snr_db_capped(reference.samples(), estimate.samples(), DEFAULT_SNR_CAP_DB)
}

/// SNR over raw slices. Values above `cap_db` are clamped to it; `capped`
/// is set only when the error energy is exactly zero.
pub fn snr_db_capped(reference: &[f64], estimate: &[f64], cap_db: f64) -> Result<SnrDb> {
    if reference.len() != estimate.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            actual: estimate.len(),
        });
    }
    let signal = sum_squares(reference);
    if signal <= 0.0 {
        return Err(Error::ZeroEnergyReference);
    }
    let noise: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(x, y)| (y - x) * (y - x))
        .sum();
    if noise == 0.0 {
        return Ok(SnrDb {
            value: cap_db,
            capped: true,
        });
    }
    let value = (10.0 * (signal / noise).log10()).min(cap_db);
    Ok(SnrDb {
        value,
        capped: false,
    })
}

/// Percentage of SNRs at or above `threshold_db`.
pub fn success_rate(snrs: &[SnrDb], threshold_db: f64) -> Result<f64> {
    if snrs.is_empty() {
        return Err(Error::EmptyInput("snr list"));
    }
    let hits = snrs.iter().filter(|s| s.value >= threshold_db).count();
    Ok(100.0 * hits as f64 / snrs.len() as f64)
}

/// Cut `samples` into windows of `frame_len` advancing by `hop`. A trailing
/// partial window is dropped.
pub fn frame_split(
    samples: &[f64],
    frame_len: usize,
    hop: usize,
    sample_rate: f64,
) -> Result<Vec<Frame>> {
    if frame_len == 0 {
        return Err(Error::invalid("frame_len", "must be positive"));
    }
    if hop == 0 {
        return Err(Error::invalid("hop", "must be positive"));
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    let mut frames = Vec::new();
    let mut start = 0;
    while start + frame_len <= samples.len() {
        frames.push(Frame::new(
            samples[start..start + frame_len].to_vec(),
            sample_rate,
        )?);
        start += hop;
    }
    Ok(frames)
}
