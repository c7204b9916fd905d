use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::codec::MaskedSignal;
use crate::error::{Error, Result};
use crate::signal::{snr_db, Frame};
use crate::spectral::{smooth_retained, threshold_spectrum, DftPlan, ThresholdSchedule};

pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_ALPHA: f64 = -0.1;
pub const DEFAULT_BETA_FRACTION: f64 = 0.9;
pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_SMOOTHING_LEN: usize = 2;

/// How the schedule's initial threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Beta {
    Fixed(f64),
    /// Fraction of the largest spectral magnitude of the first iterate
    /// `x_1 = lambda y_d`, chosen per frame.
    FromFirstIterate(f64),
}

/// Threshold floor: stop once `Th(k) < gamma * sigma`, where
/// `sigma = sqrt(lambda^2 p N delta^2 / 4)` is the coding-error part of the
/// spectrum standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Guard {
    pub gamma: f64,
    /// DM step of the coded samples.
    pub delta: f64,
}

impl Guard {
    pub fn sigma(&self, lambda: f64, p: f64, n: usize) -> f64 {
        (lambda * lambda * p * n as f64 * self.delta * self.delta / 4.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImatParams {
    /// Relaxation; must satisfy `0 < lambda < 2/p`.
    pub lambda: f64,
    pub beta: Beta,
    /// Schedule exponent, negative.
    pub alpha: f64,
    pub max_iters: usize,
    pub guard: Option<Guard>,
}

impl Default for ImatParams {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            beta: Beta::FromFirstIterate(DEFAULT_BETA_FRACTION),
            alpha: DEFAULT_ALPHA,
            max_iters: DEFAULT_MAX_ITERS,
            guard: None,
        }
    }
}

impl ImatParams {
    /// Checks the parameters against mask rate `p`.
    pub fn validate(&self, p: f64) -> Result<()> {
        if !(p > 0.0) {
            return Err(Error::TooFewRetained {
                retained: 0,
                required: 1,
            });
        }
        let bound = 2.0 / p;
        if !(self.lambda > 0.0 && self.lambda < bound) {
            return Err(Error::RelaxationOutOfRange {
                lambda: self.lambda,
                p,
                bound,
            });
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        if !(self.alpha.is_finite() && self.alpha < 0.0) {
            return Err(Error::invalid(
                "alpha",
                format!("{} must be negative", self.alpha),
            ));
        }
        match self.beta {
            Beta::Fixed(b) if !(b.is_finite() && b > 0.0) => {
                return Err(Error::invalid("beta", format!("{b} must be positive")))
            }
            Beta::FromFirstIterate(f) if !(f.is_finite() && f > 0.0) => {
                return Err(Error::invalid(
                    "beta",
                    format!("fraction {f} must be positive"),
                ))
            }
            _ => {}
        }
        if let Some(g) = self.guard {
            if !(g.gamma > 1.0 && g.gamma.is_finite()) {
                return Err(Error::invalid(
                    "gamma",
                    format!("{} must exceed 1", g.gamma),
                ));
            }
            if !(g.delta >= 0.0 && g.delta.is_finite()) {
                return Err(Error::invalid(
                    "guard delta",
                    format!("{} must be >= 0", g.delta),
                ));
            }
        }
        Ok(())
    }
}

/// Per-iteration record. Entry `k` describes the step `x_k -> x_{k+1}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReconDiagnostics {
    pub thresholds: Vec<f64>,
    /// Bins kept by `T` at each step.
    pub support_sizes: Vec<usize>,
    /// SNR of `x_{k+1}` against the reference, when one was given.
    pub snr_db: Vec<f64>,
    pub iterations: usize,
    /// The guard floor ended the run before `max_iters`.
    pub stopped_by_guard: bool,
}

#[derive(Debug, Clone)]
pub struct ReconOutput {
    pub frame: Frame,
    pub diagnostics: ReconDiagnostics,
}

/// One step of the iteration, handed to observers.
#[derive(Debug)]
pub struct IterationState<'a> {
    pub k: usize,
    pub threshold: f64,
    /// `T(x_k)` in the time domain.
    pub thresholded: &'a [f64],
    /// Spectrum of `T(x_k)`.
    pub thresholded_spectrum: &'a [Complex64],
    /// `x_{k+1}`.
    pub next: &'a [f64],
}

/// IMAT: starting from `x_0 = 0`, iterate
/// `x_{k+1}(n) = lambda y_d(n) + (1 - lambda d(n)) T_k(x_k)(n)`
/// where `T_k` zeroes DFT coefficients below `Th(k) = beta exp(alpha k)`.
pub fn imat(
    masked: &MaskedSignal,
    params: &ImatParams,
    reference: Option<&Frame>,
) -> Result<ReconOutput> {
    imat_observed(masked, params, reference, |_| {})
}

/// [`imat`] with a callback after every step.
pub fn imat_observed(
    masked: &MaskedSignal,
    params: &ImatParams,
    reference: Option<&Frame>,
    mut observe: impl FnMut(&IterationState<'_>),
) -> Result<ReconOutput> {
    let n = masked.len();
    if n == 0 {
        return Err(Error::EmptyFrame);
    }
    let p = masked.mask().rate();
    params.validate(p)?;
    if let Some(r) = reference {
        if r.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: r.len(),
            });
        }
    }

    let plan = DftPlan::cached(n);
    let lambda = params.lambda;
    let y = masked.values();
    let relax: Vec<f64> = masked
        .mask()
        .bits()
        .iter()
        .map(|&d| 1.0 - lambda * if d { 1.0 } else { 0.0 })
        .collect();
    let floor = params
        .guard
        .map(|g| g.gamma * g.sigma(lambda, p, n))
        .unwrap_or(0.0);

    let mut diag = ReconDiagnostics::default();
    let mut x = vec![0.0; n];
    let mut thresholded = vec![0.0; n];
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    let mut schedule: Option<ThresholdSchedule> = match params.beta {
        Beta::Fixed(b) => Some(ThresholdSchedule::new(b, params.alpha)?),
        Beta::FromFirstIterate(_) => None,
    };

    for k in 0..params.max_iters {
        let th = match (&schedule, k) {
            (Some(s), _) => s.at(k),
            // T(x_0) = 0 whatever the threshold.
            (None, 0) => f64::INFINITY,
            (None, _) => unreachable!("schedule is fixed after the first iterate"),
        };
        if k > 0 && th < floor {
            diag.stopped_by_guard = true;
            break;
        }

        let kept = if k == 0 {
            thresholded.fill(0.0);
            spectrum.fill(Complex64::new(0.0, 0.0));
            0
        } else {
            spectrum = plan.forward_real(&x);
            let kept = threshold_spectrum(&mut spectrum, th);
            let mut buf = spectrum.clone();
            plan.inverse_in_place(&mut buf);
            for (t, c) in thresholded.iter_mut().zip(&buf) {
                *t = c.re;
            }
            kept
        };

        for i in 0..n {
            x[i] = lambda * y[i] + relax[i] * thresholded[i];
        }

        if k == 0 {
            if let Beta::FromFirstIterate(frac) = params.beta {
                let peak = plan
                    .forward_real(&x)
                    .iter()
                    .map(|c| c.norm())
                    .fold(0.0, f64::max);
                if peak == 0.0 {
                    // Nothing observed: the zero frame is the answer.
                    diag.thresholds.push(th);
                    diag.support_sizes.push(0);
                    diag.iterations = 1;
                    if reference.is_some() {
                        diag.snr_db.push(0.0);
                    }
                    return Ok(ReconOutput {
                        frame: Frame::from_parts(x, masked.sample_rate()),
                        diagnostics: diag,
                    });
                }
                schedule = Some(ThresholdSchedule::new(frac * peak, params.alpha)?);
            }
        }

        diag.thresholds.push(th);
        diag.support_sizes.push(kept);
        if let Some(r) = reference {
            diag.snr_db.push(snr_or_zero(r, &x, masked.sample_rate()));
        }
        diag.iterations = k + 1;
        observe(&IterationState {
            k,
            threshold: th,
            thresholded: &thresholded,
            thresholded_spectrum: &spectrum,
            next: &x,
        });
    }

    Ok(ReconOutput {
        frame: Frame::from_parts(x, masked.sample_rate()),
        diagnostics: diag,
    })
}

fn snr_or_zero(reference: &Frame, xs: &[f64], sample_rate: f64) -> f64 {
    snr_db(reference, &Frame::from_parts(xs.to_vec(), sample_rate))
        .map(|s| s.value)
        .unwrap_or(0.0)
}

/// IMATDM: smooth the retained samples with an even-length moving average,
/// then run IMAT.
pub fn imatdm(
    masked: &MaskedSignal,
    l: usize,
    params: &ImatParams,
    reference: Option<&Frame>,
) -> Result<ReconOutput> {
    params.validate(masked.mask().rate())?;
    let smoothed = smooth_retained(masked, l)?;
    imat(&smoothed, params, reference)
}
