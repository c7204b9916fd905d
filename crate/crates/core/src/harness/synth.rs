use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::trial_seed;
use crate::error::{Error, Result};
use crate::recon::DEFAULT_CUTOFF_HZ;
use crate::signal::{Frame, DEFAULT_FRAME_LEN, DEFAULT_SAMPLE_RATE};
use crate::spectral::DftPlan;

/// Default upper edge of the synthetic high band, the top of wideband speech.
pub const DEFAULT_MAX_HZ: f64 = 8000.0;

/// Default tone amplitudes. At this level a plain DM coder at 48 kHz retains
/// about 0.63, 0.80 and 0.83 of the samples for steps 0.005, 0.01 and 0.02,
/// the mask rates observed on speech.
pub const DEFAULT_AMP_MIN: f64 = 0.0007;
pub const DEFAULT_AMP_MAX: f64 = 0.0035;

/// How active-bin amplitudes are drawn between `amp_min` and `amp_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeLaw {
    Uniform,
    /// Uniform in decibels, so a few bins dominate.
    LogUniform,
}

/// Recipe for frames with an exactly known sparse spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    /// Active conjugate pairs.
    pub k: usize,
    pub amp_min: f64,
    pub amp_max: f64,
    pub law: AmplitudeLaw,
    /// Fraction of the active pairs placed above `cutoff_hz`.
    pub band_split: f64,
    pub cutoff_hz: f64,
    /// Upper edge of the high band.
    pub max_hz: f64,
    /// Each tone sits up to this many bins off its grid bin (at most 0.5).
    /// Zero gives an exactly sparse spectrum; anything else leaks into
    /// neighbouring bins the way unaligned speech harmonics do.
    pub detune: f64,
    pub sample_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: DEFAULT_FRAME_LEN,
            k: 8,
            amp_min: DEFAULT_AMP_MIN,
            amp_max: DEFAULT_AMP_MAX,
            law: AmplitudeLaw::Uniform,
            band_split: 0.5,
            cutoff_hz: DEFAULT_CUTOFF_HZ,
            max_hz: DEFAULT_MAX_HZ,
            detune: 0.0,
            sample_rate: DEFAULT_SAMPLE_RATE,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    /// Highest bin at or below the cutoff.
    pub fn cutoff_bin(&self) -> usize {
        (self.cutoff_hz * self.n as f64 / self.sample_rate).floor() as usize
    }

    /// Highest bin usable for the high band: at or below `max_hz` and
    /// strictly below Nyquist.
    pub fn top_bin(&self) -> usize {
        let top = (self.max_hz * self.n as f64 / self.sample_rate).floor() as usize;
        top.min((self.n - 1) / 2)
    }

    /// Active pairs above the cutoff.
    pub fn high_count(&self) -> usize {
        (self.k as f64 * self.band_split).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::invalid("n", format!("{} is too short", self.n)));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::invalid(
                "sample_rate",
                format!("{}", self.sample_rate),
            ));
        }
        if !(self.amp_min > 0.0 && self.amp_min <= self.amp_max && self.amp_max.is_finite()) {
            return Err(Error::invalid(
                "amplitude",
                format!(
                    "need 0 < min <= max, got [{}, {}]",
                    self.amp_min, self.amp_max
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.band_split) {
            return Err(Error::invalid(
                "band_split",
                format!("{} is outside [0, 1]", self.band_split),
            ));
        }
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < self.sample_rate / 2.0) {
            return Err(Error::invalid("cutoff_hz", format!("{}", self.cutoff_hz)));
        }
        if !(0.0..=0.5).contains(&self.detune) {
            return Err(Error::invalid(
                "detune",
                format!("{} is outside [0, 0.5]", self.detune),
            ));
        }
        if !(self.max_hz > self.cutoff_hz) {
            return Err(Error::invalid(
                "max_hz",
                format!("{} must exceed the cutoff {}", self.max_hz, self.cutoff_hz),
            ));
        }
        // Bins 1..N/2 exclusive, so every pair has two distinct members.
        let last = self.top_bin();
        let cut = self.cutoff_bin().min(last);
        let high = self.high_count();
        let low = self.k - high;
        if 2 * self.k >= self.n || low > cut || high > last - cut {
            return Err(Error::invalid(
                "k",
                format!(
                    "{} pairs ({low} low, {high} high) do not fit {cut} low and {} high bins",
                    self.k,
                    last - cut
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFrame {
    pub frame: Frame,
    /// DFT of `frame`: built analytically on the grid, computed otherwise.
    pub spectrum: Vec<Complex64>,
    /// Grid bins of the tones in `1..N/2`, ascending. With detuning these
    /// are the nearest bins, not the full support.
    pub support: Vec<usize>,
}

/// A real frame with exactly `k` active conjugate pairs,
/// `X(m) = (N/2) A exp(j phi)` and `X(N-m) = conj X(m)`.
pub fn synth_sparse_frame(spec: &SyntheticSpec) -> Result<SyntheticFrame> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let last = spec.top_bin();
    let cut = spec.cutoff_bin().min(last);
    let high = spec.high_count();
    let low = spec.k - high;

    let mut support: Vec<usize> = sample(&mut rng, cut, low)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    support.extend(
        sample(&mut rng, last - cut, high)
            .into_iter()
            .map(|i| i + cut + 1),
    );
    support.sort_unstable();

    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    let mut samples = vec![0.0; n];
    for &m in &support {
        let amp = match spec.law {
            AmplitudeLaw::Uniform => rng.gen_range(spec.amp_min..=spec.amp_max),
            AmplitudeLaw::LogUniform => {
                let (lo, hi) = (spec.amp_min.ln(), spec.amp_max.ln());
                rng.gen_range(lo..=hi).exp()
            }
        };
        let phase = rng.gen_range(0.0..2.0 * PI);
        let offset = if spec.detune > 0.0 {
            rng.gen_range(-spec.detune..=spec.detune)
        } else {
            0.0
        };
        if offset == 0.0 {
            let c = Complex64::from_polar(amp * n as f64 / 2.0, phase);
            spectrum[m] = c;
            spectrum[n - m] = c.conj();
        }
        let w = 2.0 * PI * (m as f64 + offset) / n as f64;
        for (i, s) in samples.iter_mut().enumerate() {
            *s += amp * (w * i as f64 + phase).cos();
        }
    }
    if spec.detune > 0.0 {
        spectrum = DftPlan::cached(n).forward_real(&samples);
    }
    Ok(SyntheticFrame {
        frame: Frame::new(samples, spec.sample_rate)?,
        spectrum,
        support,
    })
}

/// `count` frames from `spec`, frame `i` seeded with `trial_seed(spec.seed, i)`.
pub fn synth_corpus(spec: &SyntheticSpec, count: usize) -> Result<Vec<SyntheticFrame>> {
    (0..count)
        .map(|i| {
            synth_sparse_frame(&SyntheticSpec {
                seed: trial_seed(spec.seed, i as u64),
                ..*spec
            })
        })
        .collect()
}

/// Uniform noise on `[-1, 1)` scaled to unit energy.
pub fn unit_energy_frame(n: usize, sample_rate: f64, seed: u64) -> Result<Frame> {
    if n == 0 {
        return Err(Error::EmptyFrame);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = xs.iter().map(|v| v * v).sum::<f64>().sqrt();
    xs.iter_mut().for_each(|v| *v /= norm);
    Frame::new(xs, sample_rate)
}
