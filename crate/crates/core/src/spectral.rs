//! DFT pair, spectral hard thresholding, the exponential threshold schedule,
//! and the retained-sample smoother that precedes IMATDM.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::codec::MaskedSignal;
use crate::error::{Error, Result};
use crate::signal::Frame;

/// Relative tolerance for Hermitian symmetry checks.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Where a spectrum came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumOrigin {
    Analysis,
    Estimate,
}

/// Unnormalized DFT coefficients `X(m) = sum_n x(n) exp(-j 2 pi n m / N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub coeffs: Vec<Complex64>,
    pub origin: SpectrumOrigin,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest `|X(m) - conj X(N-m)|` relative to the largest magnitude.
    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.coeffs)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_defect() <= HERMITIAN_TOL
    }

    pub fn max_magnitude(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `(1/N) sum |X(m)|^2`, equal to the time-domain energy.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.len() as f64
    }
}

pub(crate) fn hermitian_defect(coeffs: &[Complex64]) -> f64 {
    let n = coeffs.len();
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    (0..n)
        .map(|m| (coeffs[m] - coeffs[(n - m) % n].conj()).norm())
        .fold(0.0, f64::max)
        / scale
}

/// Cached forward and inverse plans for one transform length.
#[derive(Clone)]
pub struct DftPlan {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for DftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DftPlan").field("len", &self.len).finish()
    }
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, DftPlan>> = RefCell::new(HashMap::new());
}

impl DftPlan {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    /// Per-thread cached plan.
    pub fn cached(len: usize) -> Self {
        PLANS.with(|p| {
            p.borrow_mut()
                .entry(len)
                .or_insert_with(|| DftPlan::new(len))
                .clone()
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward_real(&self, xs: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(xs.len(), self.len);
        let mut buf: Vec<Complex64> = xs.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// In-place inverse including the `1/N` factor.
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let scale = 1.0 / self.len as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }

    /// Inverse transform keeping the real part.
    pub fn inverse_real(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.inverse_in_place(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }
}

pub fn dft(frame: &Frame) -> Spectrum {
    Spectrum {
        coeffs: DftPlan::cached(frame.len()).forward_real(frame.samples()),
        origin: SpectrumOrigin::Analysis,
    }
}

/// Inverse DFT with `1/N` normalization. The imaginary residue is dropped;
/// call [`idft_complex`] to inspect it.
pub fn idft(spec: &Spectrum, sample_rate: f64) -> Result<Frame> {
    if spec.is_empty() {
        return Err(Error::EmptyFrame);
    }
    Frame::new(
        DftPlan::cached(spec.len()).inverse_real(&spec.coeffs),
        sample_rate,
    )
}

pub fn idft_complex(spec: &Spectrum) -> Vec<Complex64> {
    let mut buf = spec.coeffs.clone();
    DftPlan::cached(spec.len()).inverse_in_place(&mut buf);
    buf
}

/// Zero every coefficient with `|X(m)| < th`. Conjugate bins are decided
/// together so the spectrum stays Hermitian. Returns the number of kept bins.
pub fn threshold_spectrum(coeffs: &mut [Complex64], th: f64) -> usize {
    let n = coeffs.len();
    let mut kept = 0;
    for m in 0..=n / 2 {
        let mirror = (n - m) % n;
        let mag = 0.5 * (coeffs[m].norm() + coeffs[mirror].norm());
        if mag < th {
            coeffs[m] = Complex64::new(0.0, 0.0);
            coeffs[mirror] = Complex64::new(0.0, 0.0);
        } else {
            kept += if mirror == m { 1 } else { 2 };
        }
    }
    kept
}

/// The thresholding operator `T`: transform, drop small coefficients,
/// transform back.
pub fn hard_threshold(frame: &Frame, th: f64) -> Result<Frame> {
    if !(th >= 0.0) {
        return Err(Error::invalid("th", format!("{th} must be non-negative")));
    }
    let plan = DftPlan::cached(frame.len());
    let mut coeffs = plan.forward_real(frame.samples());
    threshold_spectrum(&mut coeffs, th);
    debug_assert!(hermitian_defect(&coeffs) <= HERMITIAN_TOL);
    Frame::new(plan.inverse_real(&coeffs), frame.sample_rate())
}

/// `Th(k) = beta exp(alpha k)` with `alpha < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSchedule {
    beta: f64,
    alpha: f64,
}

impl ThresholdSchedule {
    pub fn new(beta: f64, alpha: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid("beta", format!("{beta} must be positive")));
        }
        if !(alpha.is_finite() && alpha < 0.0) {
            return Err(Error::invalid(
                "alpha",
                format!("{alpha} must be negative for a decaying threshold"),
            ));
        }
        Ok(Self { beta, alpha })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn at(&self, k: usize) -> f64 {
        self.beta * (self.alpha * k as f64).exp()
    }
}

pub fn threshold_at(sched: &ThresholdSchedule, k: usize) -> f64 {
    sched.at(k)
}

/// Smooth the retained samples of `masked` with a centered moving average of
/// even length `l`, computed over retained-sample order (masked-out zeros are
/// skipped).
///
/// The window spans `l + 1` neighbours `i - l/2 ..= i + l/2` with half
/// weight on the two ends, so it has effective length `l`, is symmetric
/// about `i`, and cancels any alternating `+e, -e` error sequence exactly.
/// Near the ends the window keeps its shape and slides inward. With exactly
/// `l` retained samples the plain mean is used.
pub fn smooth_retained(masked: &MaskedSignal, l: usize) -> Result<MaskedSignal> {
    if l < 2 || l % 2 != 0 {
        return Err(Error::invalid(
            "l",
            format!("{l} must be even and at least 2"),
        ));
    }
    let retained = masked.retained_values();
    let r = retained.len();
    if r < l {
        return Err(Error::TooFewRetained {
            retained: r,
            required: l,
        });
    }
    if r == l {
        let mean = retained.iter().sum::<f64>() / l as f64;
        return Ok(masked.with_retained_values(&vec![mean; r]));
    }
    let half = l / 2;
    let inv = 1.0 / l as f64;
    let smoothed: Vec<f64> = (0..r)
        .map(|i| {
            let center = i.clamp(half, r - 1 - half);
            let lo = center - half;
            let hi = center + half;
            let inner: f64 = retained[lo + 1..hi].iter().sum();
            (0.5 * (retained[lo] + retained[hi]) + inner) * inv
        })
        .collect();
    Ok(masked.with_retained_values(&smoothed))
}
