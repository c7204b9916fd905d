use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Bitstream, Staircase};
use crate::error::{Error, Result};
use crate::signal::Frame;

/// Binary sampling mask `d(n)` with its retained indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingMask {
    bits: Vec<bool>,
    retained: Vec<usize>,
}

impl SamplingMask {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        let retained = bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect();
        Self { bits, retained }
    }

    pub fn full(n: usize) -> Self {
        Self::from_bits(vec![true; n])
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Sorted positions where `d(n) = 1`.
    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn retained_count(&self) -> usize {
        self.retained.len()
    }

    /// Fraction of ones.
    pub fn rate(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.retained.len() as f64 / self.bits.len() as f64
        }
    }

    #[inline]
    pub fn get(&self, n: usize) -> bool {
        self.bits[n]
    }
}

/// Zero-filled observation `y_d(n) = d(n) y(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedSignal {
    values: Vec<f64>,
    mask: SamplingMask,
    sample_rate: f64,
}

impl MaskedSignal {
    /// Values at masked-out positions are forced to zero.
    pub fn new(values: &[f64], mask: SamplingMask, sample_rate: f64) -> Result<Self> {
        if values.len() != mask.len() {
            return Err(Error::LengthMismatch {
                expected: mask.len(),
                actual: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        let values = values
            .iter()
            .zip(mask.bits())
            .map(|(&v, &d)| if d { v } else { 0.0 })
            .collect();
        Ok(Self {
            values,
            mask,
            sample_rate,
        })
    }

    /// Noiseless observation `x_d(n) = d(n) x(n)` of a clean frame.
    pub fn from_frame(frame: &Frame, mask: SamplingMask) -> Result<Self> {
        Self::new(frame.samples(), mask, frame.sample_rate())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values at the retained positions, in index order.
    pub fn retained_values(&self) -> Vec<f64> {
        self.mask
            .retained()
            .iter()
            .map(|&i| self.values[i])
            .collect()
    }

    /// Copy with the retained values replaced, in retained-index order.
    pub(crate) fn with_retained_values(&self, retained: &[f64]) -> Self {
        debug_assert_eq!(retained.len(), self.mask.retained_count());
        let mut values = vec![0.0; self.values.len()];
        for (&i, &v) in self.mask.retained().iter().zip(retained) {
            values[i] = v;
        }
        Self {
            values,
            mask: self.mask.clone(),
            sample_rate: self.sample_rate,
        }
    }
}

/// `d(n) = 1` exactly where `b(n) b(n+1) = -1`. The last sample has no
/// successor and is never retained.
pub fn extract_mask(bits: &Bitstream) -> Result<SamplingMask> {
    bits.validate()?;
    let symbols = bits.symbols();
    if symbols.len() < 2 {
        return Err(Error::invalid(
            "bitstream",
            format!(
                "mask extraction needs at least 2 symbols, got {}",
                symbols.len()
            ),
        ));
    }
    let mut d: Vec<bool> = symbols
        .windows(2)
        .map(|w| i16::from(w[0]) * i16::from(w[1]) == -1)
        .collect();
    d.push(false);
    Ok(SamplingMask::from_bits(d))
}

pub fn masked_signal(stair: &Staircase, mask: &SamplingMask) -> Result<MaskedSignal> {
    MaskedSignal::new(stair.values(), mask.clone(), stair.sample_rate())
}

fn check_rate(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid("p", format!("{p} is outside [0, 1]")))
    }
}

/// iid Bernoulli(p) mask, reproducible from `seed`.
pub fn bernoulli_mask(n: usize, p: f64, seed: u64) -> Result<SamplingMask> {
    check_rate(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(SamplingMask::from_bits(
        (0..n).map(|_| rng.gen::<f64>() < p).collect(),
    ))
}

/// One draw of the simplified coding model `y_d(n) = d(n) (x(n) + q(n))`.
#[derive(Debug, Clone, PartialEq)]
pub struct IidModelSample {
    pub signal: MaskedSignal,
    /// `q(n)`, exactly `±delta/2`, drawn for every index.
    pub coding_error: Vec<f64>,
}

impl IidModelSample {
    pub fn mask(&self) -> &SamplingMask {
        self.signal.mask()
    }
}

/// Per sample: `d ~ Bernoulli(p)` and, independently, `q = ±delta/2` with
/// equal probability.
pub fn iid_model_sample(frame: &Frame, p: f64, delta: f64, seed: u64) -> Result<IidModelSample> {
    check_rate(p)?;
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::invalid(
            "delta",
            format!("{delta} must be non-negative"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = frame.len();
    let half = delta / 2.0;
    let mut bits = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for &x in frame.samples() {
        let d = rng.gen::<f64>() < p;
        let e = if rng.gen::<bool>() { half } else { -half };
        bits.push(d);
        q.push(e);
        values.push(if d { x + e } else { 0.0 });
    }
    Ok(IidModelSample {
        signal: MaskedSignal {
            values,
            mask: SamplingMask::from_bits(bits),
            sample_rate: frame.sample_rate(),
        },
        coding_error: q,
    })
}

#[cfg(test)]
mod tests {
    use super::super::dm_encode;
    use super::*;
    use proptest::prelude::*;

    fn bits(symbols: &[i8]) -> Bitstream {
        Bitstream::new(symbols.to_vec(), 0.1, false).unwrap()
    }

    #[test]
    fn mask_from_alternations() {
        let d = extract_mask(&bits(&[1, -1, 1, 1])).unwrap();
        assert_eq!(d.bits(), &[true, true, false, false]);
        assert_eq!(d.retained(), &[0, 1]);
        assert_eq!(d.rate(), 0.5);

        let flat = extract_mask(&bits(&[1; 10])).unwrap();
        assert_eq!(flat.retained_count(), 0);

        let alt: Vec<i8> = (0..9).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let d = extract_mask(&bits(&alt)).unwrap();
        assert_eq!(d.retained_count(), 8);
        assert!(!d.bits()[8]);
    }

    #[test]
    fn mask_needs_two_symbols() {
        assert!(extract_mask(&bits(&[1])).is_err());
    }

    #[test]
    fn masked_signal_products() {
        let frame = Frame::from_samples(vec![1.0, 2.0, 3.0]).unwrap();
        let ms =
            MaskedSignal::from_frame(&frame, SamplingMask::from_bits(vec![false, true, false]))
                .unwrap();
        assert_eq!(ms.values(), &[0.0, 2.0, 0.0]);

        let all = MaskedSignal::from_frame(&frame, SamplingMask::full(3)).unwrap();
        assert_eq!(all.values(), frame.samples());

        let none =
            MaskedSignal::from_frame(&frame, SamplingMask::from_bits(vec![false; 3])).unwrap();
        assert_eq!(none.values(), &[0.0; 3]);

        assert!(MaskedSignal::from_frame(&frame, SamplingMask::full(2)).is_err());
    }

    #[test]
    fn masked_signal_from_staircase() {
        let frame = Frame::from_samples(vec![0.0, 0.05, 0.02, 0.01]).unwrap();
        let (b, stair) = dm_encode(&frame, 0.1).unwrap();
        let mask = extract_mask(&b).unwrap();
        let ms = masked_signal(&stair, &mask).unwrap();
        for n in 0..4 {
            let expected = if mask.get(n) { stair.values()[n] } else { 0.0 };
            assert_eq!(ms.values()[n], expected);
        }
    }

    // The iid model treats the retained error as exactly +-delta/2. On a
    // granular (non-overloaded) input the true error is only bounded by delta
    // and spreads over that range.
    #[test]
    fn retained_error_is_bounded_but_not_half_step() {
        let delta = 0.01;
        let x: Vec<f64> = (0..4800)
            .map(|n| 0.05 * (2.0 * std::f64::consts::PI * 50.0 * n as f64 / 48e3).sin())
            .collect();
        let frame = Frame::from_samples(x.clone()).unwrap();
        let (b, stair) = dm_encode(&frame, delta).unwrap();
        let mask = extract_mask(&b).unwrap();
        let errs: Vec<f64> = mask
            .retained()
            .iter()
            .map(|&n| (stair.values()[n] - x[n]).abs())
            .collect();
        assert!(mask.rate() > 0.9);
        assert!(errs.iter().all(|&e| e <= delta));
        let near_half = errs
            .iter()
            .filter(|&&e| (e - delta / 2.0).abs() < 0.05 * delta)
            .count();
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        // Roughly uniform on [0, delta]: right mean, no point mass.
        assert!((mean / delta - 0.5).abs() < 0.1, "{mean}");
        assert!(near_half * 4 < errs.len(), "{near_half} of {}", errs.len());
    }

    #[test]
    fn bernoulli_extremes_and_rate() {
        assert_eq!(bernoulli_mask(100, 0.0, 1).unwrap().retained_count(), 0);
        assert_eq!(bernoulli_mask(100, 1.0, 1).unwrap().retained_count(), 100);
        let m = bernoulli_mask(100_000, 0.46, 42).unwrap();
        assert!((m.rate() - 0.46).abs() < 0.005, "rate {}", m.rate());
        assert!(bernoulli_mask(10, 1.5, 1).is_err());
        assert!(bernoulli_mask(10, -0.1, 1).is_err());
        assert_eq!(
            bernoulli_mask(64, 0.5, 9).unwrap(),
            bernoulli_mask(64, 0.5, 9).unwrap()
        );
    }

    #[test]
    fn iid_model_degenerate_cases() {
        let frame = Frame::from_samples((0..32).map(|i| (i as f64 * 0.3).sin()).collect()).unwrap();
        let s = iid_model_sample(&frame, 1.0, 0.0, 3).unwrap();
        assert_eq!(s.signal.values(), frame.samples());

        let z = iid_model_sample(&frame, 0.0, 0.1, 3).unwrap();
        assert!(z.signal.values().iter().all(|&v| v == 0.0));
        assert!(iid_model_sample(&frame, 2.0, 0.1, 3).is_err());
    }

    #[test]
    fn iid_model_marginals_chi_square() {
        // One sample position observed over many draws: categories
        // {0, x + D/2, x - D/2} with probabilities (1-p, p/2, p/2).
        let x = 0.3;
        let frame = Frame::from_samples(vec![x]).unwrap();
        let (p, delta) = (0.46, 0.1);
        let draws = 100_000u64;
        let mut counts = [0u64; 3];
        let mut sum = 0.0;
        for seed in 0..draws {
            let s = iid_model_sample(&frame, p, delta, seed).unwrap();
            let v = s.signal.values()[0];
            sum += v;
            let idx = if !s.mask().get(0) {
                0
            } else if s.coding_error[0] > 0.0 {
                assert_eq!(v, x + delta / 2.0);
                1
            } else {
                assert_eq!(v, x - delta / 2.0);
                2
            };
            counts[idx] += 1;
        }
        let expected = [1.0 - p, p / 2.0, p / 2.0].map(|q| q * draws as f64);
        let chi2: f64 = counts
            .iter()
            .zip(expected)
            .map(|(&o, e)| (o as f64 - e).powi(2) / e)
            .sum();
        // 2 degrees of freedom, 99.9% quantile.
        assert!(chi2 < 13.82, "chi2 = {chi2}, counts = {counts:?}");

        // Mean converges to p x; std of one draw is below 0.3.
        let mean = sum / draws as f64;
        assert!((mean - p * x).abs() < 4.0 * 0.3 / (draws as f64).sqrt());
    }

    proptest! {
        #[test]
        fn mask_rate_is_ones_ratio(symbols in prop::collection::vec(prop::bool::ANY, 2..200)) {
            let s: Vec<i8> = symbols.iter().map(|&b| if b { 1 } else { -1 }).collect();
            let m = extract_mask(&bits(&s)).unwrap();
            let ones = m.bits().iter().filter(|&&b| b).count();
            prop_assert_eq!(m.rate(), ones as f64 / s.len() as f64);
            prop_assert!(m.retained().windows(2).all(|w| w[0] < w[1]));
            for &i in m.retained() {
                prop_assert_eq!(s[i] * s[i + 1], -1);
            }
        }

        #[test]
        fn iid_model_structure(
            xs in prop::collection::vec(-1.0f64..1.0, 1..100),
            p in 0.0f64..=1.0,
            delta in 0.0f64..0.5,
            seed in any::<u64>(),
        ) {
            let frame = Frame::from_samples(xs.clone()).unwrap();
            let s = iid_model_sample(&frame, p, delta, seed).unwrap();
            for n in 0..xs.len() {
                prop_assert_eq!(s.coding_error[n].abs(), delta / 2.0);
                let expected = if s.mask().get(n) { xs[n] + s.coding_error[n] } else { 0.0 };
                prop_assert_eq!(s.signal.values()[n], expected);
            }
        }
    }
}
