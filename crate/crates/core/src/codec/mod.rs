//! Delta and adaptive-delta modulation.
//!
//! The encoder is the textbook one-bit loop: compare the input with the
//! previous staircase value, emit the sign, and move the staircase by one
//! step in that direction. The decoder is the same accumulator driven by the
//! received symbols, so the two staircases agree bit for bit.

mod file;
mod mask;

pub use file::{read_bitstream, write_bitstream, BITSTREAM_MAGIC, BITSTREAM_VERSION};
pub use mask::{
    bernoulli_mask, extract_mask, iid_model_sample, masked_signal, IidModelSample, MaskedSignal,
    SamplingMask,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Frame;

/// Default ADM step growth factor.
pub const DEFAULT_ADM_GROWTH: f64 = 1.5;
/// Default ratio between the initial ADM step and its clamp bounds.
pub const DEFAULT_ADM_RANGE: f64 = 16.0;

/// Modulator output: one ±1 symbol per input sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Bitstream {
    symbols: Vec<i8>,
    delta: f64,
    adaptive: bool,
}

impl Bitstream {
    /// Symbols are not checked here; decoders and mask extraction reject
    /// anything other than ±1.
    pub fn new(symbols: Vec<i8>, delta: f64, adaptive: bool) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self {
            symbols,
            delta,
            adaptive,
        })
    }

    pub fn symbols(&self) -> &[i8] {
        &self.symbols
    }

    /// Step size, or the initial step for an adaptive stream.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_adaptive(&self) -> bool {
        self.adaptive
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        match self
            .symbols
            .iter()
            .enumerate()
            .find(|(_, &s)| s != 1 && s != -1)
        {
            Some((index, &value)) => Err(Error::InvalidSymbol { index, value }),
            None => Ok(()),
        }
    }

    /// A sub-range of the stream, e.g. one frame of a long recording.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Bitstream {
        Bitstream {
            symbols: self.symbols[range].to_vec(),
            delta: self.delta,
            adaptive: self.adaptive,
        }
    }
}

/// Decoded staircase `y(n)` and the step used at each sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Staircase {
    values: Vec<f64>,
    delta_trace: Vec<f64>,
    sample_rate: f64,
}

impl Staircase {
    /// Staircase from externally decoded values, e.g. a foreign decoder.
    pub fn new(values: Vec<f64>, delta_trace: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if values.len() != delta_trace.len() {
            return Err(Error::LengthMismatch {
                expected: values.len(),
                actual: delta_trace.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid(
                "sample_rate",
                format!("{sample_rate} is not positive"),
            ));
        }
        Ok(Self {
            values,
            delta_trace,
            sample_rate,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn delta_trace(&self) -> &[f64] {
        &self.delta_trace
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

    pub fn to_frame(&self) -> Result<Frame> {
        Frame::new(self.values.clone(), self.sample_rate)
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Staircase {
        Staircase {
            values: self.values[range.clone()].to_vec(),
            delta_trace: self.delta_trace[range].to_vec(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Step adaptation for ADM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmParams {
    pub delta0: f64,
    /// Multiplicative growth applied on a repeated symbol, and its inverse on
    /// an alternation.
    pub growth: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl AdmParams {
    pub fn new(delta0: f64, growth: f64, delta_min: f64, delta_max: f64) -> Result<Self> {
        let params = Self {
            delta0,
            growth,
            delta_min,
            delta_max,
        };
        params.validate()?;
        Ok(params)
    }

    /// `K = 1.5`, clamp range `[delta0 / 16, 16 delta0]`.
    pub fn with_defaults(delta0: f64) -> Result<Self> {
        Self::new(
            delta0,
            DEFAULT_ADM_GROWTH,
            delta0 / DEFAULT_ADM_RANGE,
            delta0 * DEFAULT_ADM_RANGE,
        )
    }

    pub fn validate(&self) -> Result<()> {
        check_delta(self.delta0)?;
        if !(self.growth.is_finite() && self.growth > 1.0) {
            return Err(Error::invalid(
                "growth",
                format!("{} must exceed 1", self.growth),
            ));
        }
        if !(self.delta_min > 0.0
            && self.delta_min <= self.delta0
            && self.delta0 <= self.delta_max
            && self.delta_max.is_finite())
        {
            return Err(Error::invalid(
                "delta_min/delta_max",
                format!(
                    "need 0 < {} <= {} <= {}",
                    self.delta_min, self.delta0, self.delta_max
                ),
            ));
        }
        Ok(())
    }

    fn next_step(&self, previous: f64, repeated: bool) -> f64 {
        let step = if repeated {
            previous * self.growth
        } else {
            previous / self.growth
        };
        step.clamp(self.delta_min, self.delta_max)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("delta", format!("{delta} must be positive")))
    }
}

#[inline]
fn sign(v: f64) -> i8 {
    // Ties go up.
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// Plain DM with constant step `delta`, starting from a zero staircase.
pub fn dm_encode(frame: &Frame, delta: f64) -> Result<(Bitstream, Staircase)> {
    check_delta(delta)?;
    let n = frame.len();
    let mut symbols = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut acc = 0.0f64;
    for &x in frame.samples() {
        let b = sign(x - acc);
        acc += delta * f64::from(b);
        symbols.push(b);
        values.push(acc);
    }
    Ok((
        Bitstream {
            symbols,
            delta,
            adaptive: false,
        },
        Staircase {
            values,
            delta_trace: vec![delta; n],
            sample_rate: frame.sample_rate(),
        },
    ))
}

/// Accumulate a plain DM stream.
pub fn dm_decode(bits: &Bitstream, sample_rate: f64) -> Result<Staircase> {
    bits.validate()?;
    if bits.adaptive {
        return Err(Error::invalid(
            "bitstream",
            "adaptive stream needs ADM parameters, use adm_decode",
        ));
    }
    let delta = bits.delta;
    let mut acc = 0.0f64;
    let values = bits
        .symbols
        .iter()
        .map(|&b| {
            acc += delta * f64::from(b);
            acc
        })
        .collect();
    Ok(Staircase {
        values,
        delta_trace: vec![delta; bits.len()],
        sample_rate,
    })
}

/// ADM with one-symbol memory: the step grows by `K` when the symbol repeats
/// and shrinks by `K` when it alternates, clamped to `[delta_min, delta_max]`.
/// The first sample uses `delta0`.
pub fn adm_encode(frame: &Frame, params: &AdmParams) -> Result<(Bitstream, Staircase)> {
    params.validate()?;
    let n = frame.len();
    let mut symbols = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut trace = Vec::with_capacity(n);
    let mut acc = 0.0f64;
    let mut step = params.delta0;
    let mut prev: Option<i8> = None;
    for &x in frame.samples() {
        let b = sign(x - acc);
        if let Some(p) = prev {
            step = params.next_step(step, p == b);
        }
        acc += step * f64::from(b);
        symbols.push(b);
        values.push(acc);
        trace.push(step);
        prev = Some(b);
    }
    Ok((
        Bitstream {
            symbols,
            delta: params.delta0,
            adaptive: true,
        },
        Staircase {
            values,
            delta_trace: trace,
            sample_rate: frame.sample_rate(),
        },
    ))
}

pub fn adm_decode(bits: &Bitstream, params: &AdmParams, sample_rate: f64) -> Result<Staircase> {
    bits.validate()?;
    params.validate()?;
    let n = bits.len();
    let mut values = Vec::with_capacity(n);
    let mut trace = Vec::with_capacity(n);
    let mut acc = 0.0f64;
    let mut step = params.delta0;
    let mut prev: Option<i8> = None;
    for &b in &bits.symbols {
        if let Some(p) = prev {
            step = params.next_step(step, p == b);
        }
        acc += step * f64::from(b);
        values.push(acc);
        trace.push(step);
        prev = Some(b);
    }
    Ok(Staircase {
        values,
        delta_trace: trace,
        sample_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(xs: Vec<f64>) -> Frame {
        Frame::from_samples(xs).unwrap()
    }

    #[test]
    fn constant_input_gives_granular_oscillation() {
        let (bits, stair) = dm_encode(&frame(vec![0.0; 8]), 0.1).unwrap();
        assert_eq!(bits.symbols(), &[1, -1, 1, -1, 1, -1, 1, -1]);
        for (n, &y) in stair.values().iter().enumerate() {
            let expected = if n % 2 == 0 { 0.1 } else { 0.0 };
            assert!((y - expected).abs() < 1e-15, "n={n} y={y}");
        }
    }

    #[test]
    fn steep_ramp_overloads() {
        let xs: Vec<f64> = (0..20).map(|n| 0.5 * n as f64).collect();
        let (bits, stair) = dm_encode(&frame(xs), 0.1).unwrap();
        assert!(bits.symbols().iter().all(|&b| b == 1));
        for (n, &y) in stair.values().iter().enumerate() {
            assert!((y - 0.1 * (n + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn decode_accumulates() {
        let bits = Bitstream::new(vec![1, 1, -1], 0.1, false).unwrap();
        let y = dm_decode(&bits, 48e3).unwrap();
        let expected = [0.1, 0.2, 0.1];
        for (a, b) in y.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }

        let ups = Bitstream::new(vec![1; 50], 0.25, false).unwrap();
        assert_eq!(
            *dm_decode(&ups, 48e3).unwrap().values().last().unwrap(),
            12.5
        );
    }

    #[test]
    fn decode_rejects_bad_symbols() {
        let bits = Bitstream::new(vec![1, 0, -1], 0.1, false).unwrap();
        assert!(matches!(
            dm_decode(&bits, 48e3),
            Err(Error::InvalidSymbol { index: 1, value: 0 })
        ));
    }

    #[test]
    fn encode_rejects_bad_delta() {
        assert!(dm_encode(&frame(vec![0.0; 4]), 0.0).is_err());
        assert!(dm_encode(&frame(vec![0.0; 4]), f64::NAN).is_err());
    }

    #[test]
    fn adm_params_validation() {
        assert!(AdmParams::with_defaults(0.01).is_ok());
        assert!(AdmParams::new(0.01, 1.0, 0.001, 0.1).is_err());
        assert!(AdmParams::new(0.01, 1.5, 0.02, 0.1).is_err());
        assert!(AdmParams::new(0.01, 1.5, 0.001, 0.005).is_err());
    }

    #[test]
    fn adm_constant_input_settles_into_limit_cycle() {
        // Hand-executed from y(-1) = 0, x = 0, K = 1.5:
        //   n=0 b=+1 step d0      y = d0
        //   n=1 b=-1 step d0/K    y = d0/3     (alternation shrinks)
        //   n=2 b=-1 step d0      y = -2d0/3   (repeat grows)
        //   n=3 b=+1 step d0/K    y = 0
        // and the pattern repeats with period 4, so the step never decays
        // below d0/K and exactly half of the samples are retained.
        let d0 = 0.1;
        let params = AdmParams::with_defaults(d0).unwrap();
        let (bits, stair) = adm_encode(&frame(vec![0.0; 400]), &params).unwrap();
        let expected_bits = [1, -1, -1, 1];
        let expected_steps = [d0, d0 / 1.5, d0, d0 / 1.5];
        for n in 0..400 {
            assert_eq!(bits.symbols()[n], expected_bits[n % 4], "n={n}");
            assert!((stair.delta_trace()[n] - expected_steps[n % 4]).abs() < 1e-15);
        }
        let mask = extract_mask(&bits).unwrap();
        assert!((mask.rate() - 0.5).abs() < 1e-2);
    }

    #[test]
    fn adm_steep_ramp_grows_geometrically() {
        let params = AdmParams::with_defaults(0.01).unwrap();
        let xs: Vec<f64> = (0..40).map(|n| 10.0 * n as f64 + 1.0).collect();
        let (bits, stair) = adm_encode(&frame(xs), &params).unwrap();
        assert!(bits.symbols().iter().all(|&b| b == 1));
        let trace = stair.delta_trace();
        for n in 1..trace.len() {
            let expected = (trace[n - 1] * 1.5).min(params.delta_max);
            assert_eq!(trace[n], expected);
        }
        assert_eq!(*trace.last().unwrap(), params.delta_max);
    }

    proptest! {
        #[test]
        fn dm_decode_matches_encoder(
            xs in prop::collection::vec(-1.0f64..1.0, 1..200),
            delta in 1e-4f64..0.2,
        ) {
            let (bits, stair) = dm_encode(&frame(xs), delta).unwrap();
            let decoded = dm_decode(&bits, 48e3).unwrap();
            prop_assert_eq!(decoded.values(), stair.values());
            for w in stair.values().windows(2) {
                prop_assert!(((w[1] - w[0]).abs() - delta).abs() <= 1e-12);
            }
        }

        #[test]
        fn adm_decode_matches_encoder(
            xs in prop::collection::vec(-1.0f64..1.0, 1..200),
            delta0 in 1e-3f64..0.1,
        ) {
            let params = AdmParams::with_defaults(delta0).unwrap();
            let (bits, stair) = adm_encode(&frame(xs), &params).unwrap();
            let decoded = adm_decode(&bits, &params, 48e3).unwrap();
            prop_assert_eq!(decoded.values(), stair.values());
            prop_assert_eq!(decoded.delta_trace(), stair.delta_trace());
            let trace = stair.delta_trace();
            for n in 1..stair.len() {
                let step = stair.values()[n] - stair.values()[n - 1];
                prop_assert!((step.abs() - trace[n]).abs() <= 1e-12);
            }
        }
    }
}
