use num_complex::Complex64;

use crate::codec::MaskedSignal;
use crate::error::{Error, Result};
use crate::signal::Frame;
use crate::spectral::DftPlan;

#[derive(Debug, Clone)]
pub struct LassoOutput {
    pub frame: Frame,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after every iteration, starting from the zero spectrum.
    pub objective: Vec<f64>,
}

fn zero_filled(masked: &MaskedSignal, x: &[f64]) -> Vec<f64> {
    // Residual on retained samples, zeros elsewhere.
    let mut r = vec![0.0; x.len()];
    for &i in masked.mask().retained() {
        r[i] = masked.values()[i] - x[i];
    }
    r
}

/// `||y - M F^-1 S||^2 + reg * ||S||_1` where `M` keeps the retained samples.
pub fn lasso_objective(masked: &MaskedSignal, spectrum: &[Complex64], reg: f64) -> f64 {
    let plan = DftPlan::cached(masked.len());
    let x = plan.inverse_real(spectrum);
    let r = zero_filled(masked, &x);
    let fit: f64 = r.iter().map(|v| v * v).sum();
    fit + reg * spectrum.iter().map(|c| c.norm()).sum::<f64>()
}

/// Smallest `reg` for which the zero spectrum is optimal.
pub fn lasso_reg_max(masked: &MaskedSignal) -> f64 {
    let n = masked.len();
    if n == 0 {
        return 0.0;
    }
    let plan = DftPlan::cached(n);
    let peak = plan
        .forward_real(masked.values())
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    2.0 * peak / n as f64
}

fn soft(c: Complex64, t: f64) -> Complex64 {
    let m = c.norm();
    if m <= t {
        Complex64::new(0.0, 0.0)
    } else {
        c * ((m - t) / m)
    }
}

/// l1-regularized least squares over DFT coefficients, solved by ISTA.
///
/// The partial inverse DFT has `A A^H = I / N`, so the step `1/L = N/2` turns
/// the gradient step into adding the DFT of the zero-filled residual.
/// Stops when the relative spectrum change falls below `tol`.
pub fn lasso(masked: &MaskedSignal, reg: f64, max_iters: usize, tol: f64) -> Result<LassoOutput> {
    let n = masked.len();
    if n == 0 {
        return Err(Error::EmptyFrame);
    }
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(Error::invalid(
            "reg",
            format!("{reg} must be finite and > 0"),
        ));
    }
    if max_iters == 0 {
        return Err(Error::invalid("max_iters", "must be at least 1"));
    }
    if !(tol >= 0.0) {
        return Err(Error::invalid("tol", format!("{tol} must be >= 0")));
    }
    if masked.mask().retained_count() == 0 {
        return Err(Error::TooFewRetained {
            retained: 0,
            required: 1,
        });
    }
    let plan = DftPlan::cached(n);
    let shrink = reg * n as f64 / 2.0;
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    let mut x = vec![0.0; n];
    let mut objective = vec![lasso_objective(masked, &spec, reg)];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        let grad = plan.forward_real(&zero_filled(masked, &x));
        let mut next: Vec<Complex64> = spec
            .iter()
            .zip(&grad)
            .map(|(&s, &g)| soft(s + g, shrink))
            .collect();
        // Keep the estimate exactly conjugate symmetric.
        for m in 1..n.div_ceil(2) {
            let avg = (next[m] + next[n - m].conj()) / 2.0;
            next[m] = avg;
            next[n - m] = avg.conj();
        }
        next[0].im = 0.0;
        if n % 2 == 0 {
            next[n / 2].im = 0.0;
        }

        let change: f64 = next
            .iter()
            .zip(&spec)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let size: f64 = next.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        spec = next;
        x = plan.inverse_real(&spec);
        objective.push(lasso_objective(masked, &spec, reg));
        if change <= tol * size.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    Ok(LassoOutput {
        frame: Frame::new(x, masked.sample_rate())?,
        converged,
        iterations,
        objective,
    })
}
