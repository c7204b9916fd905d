use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::codec::Staircase;
use crate::error::{Error, Result};
use crate::signal::Frame;

/// Telephone-band voice cutoff.
pub const DEFAULT_CUTOFF_HZ: f64 = 3300.0;
/// Odd so the group delay is a whole number of samples.
pub const DEFAULT_LOWPASS_TAPS: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowpassDesign {
    pub cutoff_hz: f64,
    pub taps: usize,
}

impl Default for LowpassDesign {
    fn default() -> Self {
        Self {
            cutoff_hz: DEFAULT_CUTOFF_HZ,
            taps: DEFAULT_LOWPASS_TAPS,
        }
    }
}

/// Hamming-windowed sinc with unit DC gain.
pub fn lowpass_taps(cutoff_hz: f64, sample_rate: f64, taps: usize) -> Result<Vec<f64>> {
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::invalid("sample_rate", format!("{sample_rate}")));
    }
    if !(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0) {
        return Err(Error::invalid(
            "cutoff_hz",
            format!("{cutoff_hz} must lie in (0, {})", sample_rate / 2.0),
        ));
    }
    if taps == 0 || taps % 2 == 0 {
        return Err(Error::invalid("taps", format!("{taps} must be odd")));
    }
    let fc = cutoff_hz / sample_rate;
    let mid = (taps / 2) as f64;
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let t = i as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * t).sin() / (PI * t)
            };
            let window = if taps == 1 {
                1.0
            } else {
                0.54 - 0.46 * (2.0 * PI * i as f64 / (taps - 1) as f64).cos()
            };
            sinc * window
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for v in &mut h {
        *v /= sum;
    }
    Ok(h)
}

/// Conventional DM demodulation: lowpass-filter the full staircase with a
/// linear-phase FIR, centered so the output lines up with the input. The
/// frame is extended by mirror reflection at both ends.
pub fn lowpass_reconstruct(stair: &Staircase, design: &LowpassDesign) -> Result<Frame> {
    let h = lowpass_taps(design.cutoff_hz, stair.sample_rate(), design.taps)?;
    let x = stair.values();
    if x.is_empty() {
        return Err(Error::EmptyFrame);
    }
    let half = (h.len() / 2) as isize;
    let n = x.len() as isize;
    let at = |i: isize| -> f64 {
        if n == 1 {
            return x[0];
        }
        // Reflect without repeating the edge sample, folding as often as
        // needed for frames shorter than the filter.
        let period = 2 * (n - 1);
        let mut j = i.rem_euclid(period);
        if j >= n {
            j = period - j;
        }
        x[j as usize]
    };
    let out = (0..n)
        .map(|i| {
            h.iter()
                .enumerate()
                .map(|(k, &hk)| hk * at(i + half - k as isize))
                .sum()
        })
        .collect();
    Frame::new(out, stair.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::dm_encode;
    use crate::signal::snr_db;

    fn tone(n: usize, hz: f64, amp: f64) -> Frame {
        Frame::from_samples(
            (0..n)
                .map(|i| amp * (2.0 * PI * hz * i as f64 / 48e3).sin())
                .collect(),
        )
        .unwrap()
    }

    fn stair_of(frame: &Frame) -> Staircase {
        // A staircase that is the signal itself isolates the filter.
        Staircase::new(frame.samples().to_vec(), vec![0.0; frame.len()], 48e3).unwrap()
    }

    #[test]
    fn dc_passes_flat() {
        let x = Frame::from_samples(vec![0.3; 960]).unwrap();
        let y = lowpass_reconstruct(&stair_of(&x), &LowpassDesign::default()).unwrap();
        for &v in y.samples() {
            let db = 20.0 * (v / 0.3).log10();
            assert!(db.abs() < 0.1, "{db}");
        }
    }

    #[test]
    fn stopband_attenuates_40db() {
        let n = 4800;
        let x = tone(n, 8000.0, 0.5);
        let y = lowpass_reconstruct(&stair_of(&x), &LowpassDesign::default()).unwrap();
        // Interior only: the mirrored edges fold a kink back in.
        let interior = 300..n - 300;
        let ein: f64 = x.samples()[interior.clone()].iter().map(|v| v * v).sum();
        let eout: f64 = y.samples()[interior].iter().map(|v| v * v).sum();
        let att = 10.0 * (ein / eout).log10();
        assert!(att >= 40.0, "attenuation {att} dB");
    }

    #[test]
    fn passband_tone_recovered_from_dm() {
        // 500 Hz, amplitude 0.3: max slope 0.0196/sample, so DM with
        // delta 0.03 tracks without overload and leaves granular noise only.
        let x = tone(960, 500.0, 0.3);
        let (_, stair) = dm_encode(&x, 0.03).unwrap();
        let raw = snr_db(&x, &stair.to_frame().unwrap()).unwrap().value;
        let y = lowpass_reconstruct(&stair, &LowpassDesign::default()).unwrap();
        let filtered = snr_db(&x, &y).unwrap().value;
        assert!(filtered > raw, "filtered {filtered} raw {raw}");
        assert!(filtered > 15.0, "{filtered}");
    }

    #[test]
    fn rejects_bad_cutoff() {
        let x = Frame::from_samples(vec![0.0; 16]).unwrap();
        let s = stair_of(&x);
        for cutoff in [0.0, -1.0, 24000.0, 30000.0] {
            let d = LowpassDesign {
                cutoff_hz: cutoff,
                ..Default::default()
            };
            assert!(lowpass_reconstruct(&s, &d).is_err());
        }
        let d = LowpassDesign {
            taps: 254,
            ..Default::default()
        };
        assert!(lowpass_reconstruct(&s, &d).is_err());
    }

    #[test]
    fn taps_are_symmetric_with_unit_gain() {
        let h = lowpass_taps(3300.0, 48e3, 255).unwrap();
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..h.len() {
            assert!((h[i] - h[h.len() - 1 - i]).abs() < 1e-15);
        }
    }
}
