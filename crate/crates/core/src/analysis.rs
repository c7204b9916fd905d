//! Monte Carlo checks of the coding-model statistics and of IMAT's
//! convergence behaviour.
//!
//! Every routine draws trial `t` from `trial_seed(seed, t)`, processes trials
//! in fixed-size chunks and sums chunk results in index order, so results
//! are bit-identical for any thread count.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{iid_model_sample, MaskedSignal};
use crate::error::{Error, Result};
use crate::recon::{imat_observed, ImatParams};
use crate::signal::{sum_squares, Frame};
use crate::spectral::{DftPlan, ThresholdSchedule};

/// Trials summed sequentially inside one parallel work item.
const CHUNK: usize = 1024;

/// Bins with `|X(m)|` at most this fraction of the peak count as zero when
/// the support of a reference is read off its spectrum.
pub const SUPPORT_TOL: f64 = 1e-9;

/// Seed of trial `t`, derived from the master seed with SplitMix64.
pub fn trial_seed(seed: u64, t: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(seed ^ mix(t))
}

/// Runs `trial` for every index in `0..trials` and folds the results with
/// `add`, chunk by chunk in index order.
fn reduce_trials<T, F, A>(trials: usize, zero: T, trial: F, add: A) -> Result<T>
where
    T: Clone + Send + Sync,
    F: Fn(usize) -> Result<T> + Sync,
    A: Fn(&mut T, &T) + Sync,
{
    let chunks: Vec<Result<T>> = (0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = zero.clone();
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                add(&mut acc, &trial(t)?);
            }
            Ok(acc)
        })
        .collect();
    let mut total = zero;
    for c in chunks {
        add(&mut total, &c?);
    }
    Ok(total)
}

/// Nonzero bins of the reference spectrum.
pub fn support_of(spectrum: &[Complex64]) -> Vec<usize> {
    let peak = spectrum.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Vec::new();
    }
    (0..spectrum.len())
        .filter(|&m| spectrum[m].norm() > SUPPORT_TOL * peak)
        .collect()
}

/// `lambda^2 (p - p^2) (eps_r + eps_s) + lambda^2 p N delta^2 / 4`.
pub fn predicted_sigma2(lambda: f64, p: f64, eps_r: f64, eps_s: f64, n: usize, delta: f64) -> f64 {
    let l2 = lambda * lambda;
    l2 * (p - p * p) * (eps_r + eps_s) + l2 * p * n as f64 * delta * delta / 4.0
}

/// One line of a validation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub quantity: String,
    pub predicted: f64,
    pub empirical: f64,
    pub rel_error: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
}

impl ValidationReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "quantity",
            "predicted",
            "empirical",
            "rel_error",
            "trials",
            "seed",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.quantity.clone(),
                format!("{:.6}", r.predicted),
                format!("{:.6}", r.empirical),
                format!("{:.6}", r.rel_error),
                r.trials.to_string(),
                r.seed.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<22} {:>14} {:>14} {:>10} {:>8} {:>20}",
            "quantity", "predicted", "empirical", "rel_error", "trials", "seed"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<22} {:>14.6} {:>14.6} {:>10.6} {:>8} {:>20}",
                r.quantity, r.predicted, r.empirical, r.rel_error, r.trials, r.seed
            )?;
        }
        Ok(())
    }
}

/// Empirical versus predicted first and second moments of `Y_d(m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumStats {
    pub mean: Vec<Complex64>,
    /// `E|Y_d(m) - p X(m)|^2` per bin.
    pub variance: Vec<f64>,
    pub predicted_mean: Vec<Complex64>,
    /// Same for every bin.
    pub predicted_variance: f64,
    pub trials: usize,
    pub seed: u64,
}

fn rel(err: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        if err == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        err / scale
    }
}

impl SpectrumStats {
    /// `||mean - pX|| / ||pX||` over all bins.
    pub fn mean_rel_error(&self) -> f64 {
        let err: f64 = self
            .mean
            .iter()
            .zip(&self.predicted_mean)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let scale: f64 = self.predicted_mean.iter().map(|c| c.norm_sqr()).sum();
        rel(err.sqrt(), scale.sqrt())
    }

    pub fn mean_variance(&self) -> f64 {
        self.variance.iter().sum::<f64>() / self.variance.len() as f64
    }

    pub fn variance_rel_error(&self) -> f64 {
        rel(
            (self.mean_variance() - self.predicted_variance).abs(),
            self.predicted_variance,
        )
    }

    pub fn report(&self) -> ValidationReport {
        let norm = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        ValidationReport {
            rows: vec![
                ValidationRow {
                    quantity: "mean_spectrum_norm".into(),
                    predicted: norm(&self.predicted_mean),
                    empirical: norm(&self.mean),
                    rel_error: self.mean_rel_error(),
                    trials: self.trials,
                    seed: self.seed,
                },
                ValidationRow {
                    quantity: "bin_variance".into(),
                    predicted: self.predicted_variance,
                    empirical: self.mean_variance(),
                    rel_error: self.variance_rel_error(),
                    trials: self.trials,
                    seed: self.seed,
                },
            ],
        }
    }
}

/// Draws `trials` realisations of the iid coding model for `frame` and
/// measures the mean and spread of their spectra.
pub fn validate_theorem1(
    frame: &Frame,
    p: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<SpectrumStats> {
    if trials < 100 {
        return Err(Error::invalid(
            "trials",
            format!("{trials} must be at least 100"),
        ));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", format!("{p} is outside [0, 1]")));
    }
    let n = frame.len();
    let plan = DftPlan::cached(n);
    let x = plan.forward_real(frame.samples());
    let predicted_mean: Vec<Complex64> = x.iter().map(|c| c * p).collect();

    // Accumulates sum Y and sum |Y - pX|^2 per bin.
    let zero = (vec![Complex64::new(0.0, 0.0); n], vec![0.0; n]);
    let (sum, sq) = reduce_trials(
        trials,
        zero,
        |t| {
            let draw = iid_model_sample(frame, p, delta, trial_seed(seed, t as u64))?;
            let y = DftPlan::cached(n).forward_real(draw.signal.values());
            let dev = y
                .iter()
                .zip(&predicted_mean)
                .map(|(a, b)| (a - b).norm_sqr())
                .collect();
            Ok((y, dev))
        },
        |acc, (y, dev)| {
            for (a, b) in acc.0.iter_mut().zip(y) {
                *a += b;
            }
            for (a, b) in acc.1.iter_mut().zip(dev) {
                *a += b;
            }
        },
    )?;
    let m = trials as f64;
    Ok(SpectrumStats {
        mean: sum.iter().map(|c| c / m).collect(),
        variance: sq.iter().map(|v| v / m).collect(),
        predicted_mean,
        predicted_variance: predicted_sigma2(1.0, p, sum_squares(frame.samples()), 0.0, n, delta),
        trials,
        seed,
    })
}

/// Trial-averaged behaviour of IMAT on the tracked bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub bins: Vec<usize>,
    /// `e_k = X(m) - mean X_k(m)` for each tracked bin, starting at `x_0 = 0`.
    pub errors: Vec<Vec<Complex64>>,
    /// `||e_k||` over the tracked bins.
    pub bias: Vec<f64>,
    /// Trial spread `mean ||X_k - mean X_k||^2` over the tracked bins.
    pub variance: Vec<f64>,
    /// `mean ||X_k - X||^2` over the tracked bins.
    pub mse: Vec<f64>,
    /// Least-squares ratio of successive mean errors.
    pub fitted_ratio: f64,
    pub theoretical_ratio: f64,
    /// Number of `(e_k, e_{k+1})` pairs the fit used.
    pub fit_pairs: usize,
    /// The fit stopped early because the mean error sank into Monte Carlo
    /// noise.
    pub truncated: bool,
    pub trials: usize,
}

/// Runs IMAT on `trials` draws of the iid model around `reference` and
/// tracks the mean spectral error on the reference support.
///
/// The fit `r = sum Re(e_{k+1} conj e_k) / sum |e_k|^2` runs over the
/// leading iterations while `||e_k||` stays above three standard errors of
/// the trial mean.
pub fn geometric_error_check(
    reference: &Frame,
    params: &ImatParams,
    p: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<ConvergenceTrace> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let n = reference.len();
    let plan = DftPlan::cached(n);
    let x = plan.forward_real(reference.samples());
    let bins = support_of(&x);
    if bins.is_empty() {
        return Err(Error::invalid("reference", "has no nonzero bins to track"));
    }
    let target: Vec<Complex64> = bins.iter().map(|&m| x[m]).collect();

    let runs: Vec<Result<Vec<Vec<Complex64>>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let draw = iid_model_sample(reference, p, delta, trial_seed(seed, t as u64))?;
            let plan = DftPlan::cached(n);
            let mut track = vec![vec![Complex64::new(0.0, 0.0); bins.len()]];
            imat_observed(&draw.signal, params, None, |s| {
                let spec = plan.forward_real(s.next);
                track.push(bins.iter().map(|&m| spec[m]).collect());
            })?;
            Ok(track)
        })
        .collect();
    let runs: Vec<Vec<Vec<Complex64>>> = runs.into_iter().collect::<Result<_>>()?;
    let len = runs.iter().map(Vec::len).min().unwrap_or(0);
    let m = trials as f64;

    let mut errors = Vec::with_capacity(len);
    let mut bias = Vec::with_capacity(len);
    let mut variance = Vec::with_capacity(len);
    let mut mse = Vec::with_capacity(len);
    for k in 0..len {
        let mean: Vec<Complex64> = (0..bins.len())
            .map(|b| runs.iter().map(|r| r[k][b]).sum::<Complex64>() / m)
            .collect();
        let e: Vec<Complex64> = target.iter().zip(&mean).map(|(a, b)| a - b).collect();
        let var = runs
            .iter()
            .map(|r| {
                r[k].iter()
                    .zip(&mean)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
            })
            .sum::<f64>()
            / m;
        let sq = runs
            .iter()
            .map(|r| {
                r[k].iter()
                    .zip(&target)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
            })
            .sum::<f64>()
            / m;
        bias.push(e.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
        errors.push(e);
        variance.push(var);
        mse.push(sq);
    }

    let mut num = 0.0;
    let mut den = 0.0;
    let mut fit_pairs = 0;
    let mut truncated = false;
    for k in 0..len.saturating_sub(1) {
        let noise = 3.0 * (variance[k] / m).sqrt();
        if k > 0 && bias[k] <= noise {
            truncated = true;
            break;
        }
        for (a, b) in errors[k + 1].iter().zip(&errors[k]) {
            num += (a * b.conj()).re;
            den += b.norm_sqr();
        }
        fit_pairs += 1;
    }
    let fitted_ratio = if den > 0.0 { num / den } else { f64::NAN };

    Ok(ConvergenceTrace {
        bins,
        errors,
        bias,
        variance,
        mse,
        fitted_ratio,
        theoretical_ratio: 1.0 - params.lambda * p,
        fit_pairs,
        truncated,
        trials,
    })
}

/// Split of a thresholded iterate against a reference with known support.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceDecomposition {
    pub support: Vec<usize>,
    /// Part of `T(x_k)` on the support.
    pub reconstructed: Vec<f64>,
    /// Part of `T(x_k)` off the support.
    pub mistaken: Vec<f64>,
    /// `x - reconstructed`.
    pub residual: Vec<f64>,
    pub eps_r: f64,
    pub eps_s: f64,
    /// `lambda^2 p N delta^2 / 4`.
    pub coding_term: f64,
    /// `lambda^2 (p - p^2) eps_r`.
    pub residual_term: f64,
    /// `lambda^2 (p - p^2) eps_s`.
    pub mistaken_term: f64,
}

impl VarianceDecomposition {
    pub fn sigma2(&self) -> f64 {
        self.residual_term + self.mistaken_term + self.coding_term
    }
}

pub fn decompose_variance(
    reference: &Frame,
    thresholded: &[f64],
    p: f64,
    lambda: f64,
    delta: f64,
) -> Result<VarianceDecomposition> {
    let n = reference.len();
    if thresholded.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: thresholded.len(),
        });
    }
    let plan = DftPlan::cached(n);
    let support = support_of(&plan.forward_real(reference.samples()));
    let mut on = plan.forward_real(thresholded);
    let mut off = on.clone();
    let mut in_support = vec![false; n];
    for &m in &support {
        in_support[m] = true;
    }
    for m in 0..n {
        if in_support[m] {
            off[m] = Complex64::new(0.0, 0.0);
        } else {
            on[m] = Complex64::new(0.0, 0.0);
        }
    }
    let reconstructed = plan.inverse_real(&on);
    let mistaken = plan.inverse_real(&off);
    let residual: Vec<f64> = reference
        .samples()
        .iter()
        .zip(&reconstructed)
        .map(|(a, b)| a - b)
        .collect();
    let eps_r = sum_squares(&residual);
    let eps_s = sum_squares(&mistaken);
    let l2 = lambda * lambda;
    Ok(VarianceDecomposition {
        support,
        reconstructed,
        mistaken,
        residual,
        eps_r,
        eps_s,
        coding_term: predicted_sigma2(lambda, p, 0.0, 0.0, n, delta),
        residual_term: l2 * (p - p * p) * eps_r,
        mistaken_term: l2 * (p - p * p) * eps_s,
    })
}

/// Bin-averaged spread of the spectrum of one IMAT step
/// `lambda y_d + (1 - lambda d) t` over fresh model draws, with the
/// thresholded iterate `t` held fixed.
pub fn step_variance_mc(
    reference: &Frame,
    thresholded: &[f64],
    p: f64,
    lambda: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let n = reference.len();
    if thresholded.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: thresholded.len(),
        });
    }
    if trials < 2 {
        return Err(Error::invalid("trials", "need at least 2"));
    }
    let zero = (vec![Complex64::new(0.0, 0.0); n], vec![0.0; n]);
    let (sum, sq) = reduce_trials(
        trials,
        zero,
        |t| {
            let draw = iid_model_sample(reference, p, delta, trial_seed(seed, t as u64))?;
            let next = step(&draw.signal, thresholded, lambda);
            let spec = DftPlan::cached(n).forward_real(&next);
            let sq = spec.iter().map(|c| c.norm_sqr()).collect();
            Ok((spec, sq))
        },
        |acc, (s, q)| {
            for (a, b) in acc.0.iter_mut().zip(s) {
                *a += b;
            }
            for (a, b) in acc.1.iter_mut().zip(q) {
                *a += b;
            }
        },
    )?;
    let m = trials as f64;
    let total: f64 = sum
        .iter()
        .zip(&sq)
        .map(|(s, q)| (q - s.norm_sqr() / m) / (m - 1.0))
        .sum();
    Ok(total / n as f64)
}

fn step(masked: &MaskedSignal, t: &[f64], lambda: f64) -> Vec<f64> {
    masked
        .values()
        .iter()
        .zip(masked.mask().bits())
        .zip(t)
        .map(|((&y, &d), &t)| lambda * y + (1.0 - if d { lambda } else { 0.0 }) * t)
        .collect()
}

/// Outcome of comparing a schedule with the noise it has to stay above.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuardReport {
    pub passed: bool,
    pub first_violation: Option<usize>,
    /// Smallest `Th(k) / (gamma sigma_k)` seen.
    pub min_margin: f64,
}

/// Checks `Th(k) >= gamma sigma_k` for every `k` with an estimate.
pub fn guard_check(schedule: &ThresholdSchedule, gamma: f64, sigmas: &[f64]) -> GuardReport {
    let mut first_violation = None;
    let mut min_margin = f64::INFINITY;
    for (k, &s) in sigmas.iter().enumerate() {
        let th = schedule.at(k);
        let floor = gamma * s;
        if floor > 0.0 {
            min_margin = min_margin.min(th / floor);
        }
        if th < floor && first_violation.is_none() {
            first_violation = Some(k);
        }
    }
    GuardReport {
        passed: first_violation.is_none(),
        first_violation,
        min_margin,
    }
}

/// Noise level `sigma_k` at each IMAT step on one model draw, taking
/// `eps_s = 0` and `eps_r` from the current residual against the reference.
pub fn sigma_trace(
    reference: &Frame,
    masked: &MaskedSignal,
    params: &ImatParams,
    delta: f64,
) -> Result<Vec<f64>> {
    let p = masked.mask().rate();
    let mut sigmas = Vec::new();
    let mut failure = None;
    imat_observed(masked, params, None, |s| {
        if failure.is_some() {
            return;
        }
        match decompose_variance(reference, s.thresholded, p, params.lambda, delta) {
            Ok(d) => sigmas.push((d.residual_term + d.coding_term).sqrt()),
            Err(e) => failure = Some(e),
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(sigmas),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recon::{Beta, Guard};
    use std::f64::consts::PI;

    fn unit_energy(n: usize, seed: u64) -> Frame {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e = sum_squares(&xs).sqrt();
        Frame::from_samples(xs.iter().map(|v| v / e).collect()).unwrap()
    }

    fn tone(n: usize, m: usize, amp: f64) -> Frame {
        Frame::from_samples(
            (0..n)
                .map(|i| amp * (2.0 * PI * (m * i) as f64 / n as f64 + 0.3).cos())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn trial_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|t| trial_seed(7, t)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
    }

    #[test]
    fn theorem1_full_mask_is_deterministic() {
        let x = unit_energy(32, 1);
        let s = validate_theorem1(&x, 1.0, 0.0, 100, 3).unwrap();
        assert!(s.variance.iter().all(|&v| v < 1e-24));
        assert!(s.mean_rel_error() < 1e-12);
        assert_eq!(s.predicted_variance, 0.0);
    }

    #[test]
    fn theorem1_predicted_constants() {
        let x = unit_energy(64, 2);
        let s = validate_theorem1(&x, 0.5, 0.0, 100, 3).unwrap();
        assert!((s.predicted_variance - 0.25).abs() < 1e-12);
        let s = validate_theorem1(&x, 0.5, 0.1, 100, 3).unwrap();
        assert!((s.predicted_variance - 0.33).abs() < 1e-12);
    }

    #[test]
    fn theorem1_rejects_few_trials() {
        let x = unit_energy(8, 2);
        assert!(validate_theorem1(&x, 0.5, 0.1, 99, 0).is_err());
    }

    #[test]
    fn theorem1_monte_carlo_moderate() {
        let x = unit_energy(64, 5);
        let s = validate_theorem1(&x, 0.5, 0.1, 20_000, 11).unwrap();
        assert!(s.mean_rel_error() < 0.02, "{}", s.mean_rel_error());
        assert!(s.variance_rel_error() < 0.05, "{}", s.variance_rel_error());
    }

    #[test]
    fn theorem1_is_reproducible() {
        let x = unit_energy(16, 5);
        let a = validate_theorem1(&x, 0.3, 0.05, 3000, 9).unwrap();
        let b = validate_theorem1(&x, 0.3, 0.05, 3000, 9).unwrap();
        assert_eq!(a, b);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = single.install(|| validate_theorem1(&x, 0.3, 0.05, 3000, 9).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn report_csv_has_fixed_columns() {
        let x = unit_energy(16, 5);
        let s = validate_theorem1(&x, 0.5, 0.1, 200, 1).unwrap();
        let mut buf = Vec::new();
        s.report().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "quantity,predicted,empirical,rel_error,trials,seed"
        );
        assert_eq!(lines.count(), 2);
        assert!(s.report().to_string().contains("bin_variance"));
    }

    fn fixed_params(lambda: f64, beta: f64, iters: usize) -> ImatParams {
        ImatParams {
            lambda,
            beta: Beta::Fixed(beta),
            alpha: -1e-3,
            max_iters: iters,
            guard: None,
        }
    }

    #[test]
    fn geometric_ratio_half() {
        let n = 256;
        let x = tone(n, 10, 1.0);
        // Bin magnitude N/2 = 128; first iterate holds about 64.
        let t = geometric_error_check(&x, &fixed_params(1.0, 30.0, 12), 0.5, 0.0, 100, 4).unwrap();
        assert_eq!(t.bins, vec![10, 246]);
        assert!((t.fitted_ratio - 0.5).abs() < 0.05, "{}", t.fitted_ratio);
        assert_eq!(t.theoretical_ratio, 0.5);
        for k in 0..t.mse.len() {
            assert!(
                (t.mse[k] - t.bias[k].powi(2) - t.variance[k]).abs() <= 1e-9 * t.mse[k].max(1.0)
            );
        }
    }

    #[test]
    fn geometric_ratio_zero_collapses() {
        let n = 256;
        let x = tone(n, 10, 1.0);
        let t = geometric_error_check(&x, &fixed_params(2.0, 30.0, 6), 0.5, 0.0, 100, 4).unwrap();
        let e0 = t.bias[0];
        assert!(t.bias[1] < 0.05 * e0, "{} vs {}", t.bias[1], e0);
        assert!(t.fitted_ratio.abs() < 0.05, "{}", t.fitted_ratio);
    }

    #[test]
    fn decomposition_examples() {
        let x = tone(64, 3, 0.5);
        let e = sum_squares(x.samples());
        let d = decompose_variance(&x, x.samples(), 0.5, 1.0, 0.0).unwrap();
        assert!(d.eps_r < 1e-24 && d.eps_s < 1e-24 && d.coding_term == 0.0);
        assert!(d.sigma2() < 1e-20);

        let d = decompose_variance(&x, &vec![0.0; 64], 0.5, 1.0, 0.1).unwrap();
        assert!((d.eps_r - e).abs() < 1e-12);
        assert_eq!(d.eps_s, 0.0);
        assert!((d.coding_term - 0.5 * 64.0 * 0.01 / 4.0).abs() < 1e-12);
        assert_eq!(d.support, vec![3, 61]);
    }

    #[test]
    fn closed_form_direction() {
        let base = predicted_sigma2(1.0, 0.5, 1.0, 0.0, 64, 0.1);
        assert!(predicted_sigma2(1.0, 0.5, 1.0, 0.2, 64, 0.1) > base);
        assert!(predicted_sigma2(1.0, 0.5, 0.5, 0.0, 64, 0.1) < base);
    }

    #[test]
    fn step_variance_matches_closed_form() {
        let x = tone(64, 3, 0.5);
        let t = tone(64, 3, 0.3);
        let d = decompose_variance(&x, t.samples(), 0.5, 1.0, 0.1).unwrap();
        let mc = step_variance_mc(&x, t.samples(), 0.5, 1.0, 0.1, 20_000, 2).unwrap();
        assert!(
            (mc / d.sigma2() - 1.0).abs() < 0.05,
            "{mc} vs {}",
            d.sigma2()
        );
    }

    #[test]
    fn mistaken_picks_raise_variance() {
        let n = 128;
        let x = tone(n, 5, 0.5);
        let p = 0.5;
        let delta = 0.05;
        let draw = iid_model_sample(&x, p, delta, 17).unwrap();
        // Thresholds far below the noise pass spurious bins; a guarded run
        // keeps only the true pair.
        let mut low = None;
        imat_observed(&draw.signal, &fixed_params(1.0, 1e-3, 2), None, |s| {
            low = Some(s.thresholded.to_vec())
        })
        .unwrap();
        let mut guarded = None;
        imat_observed(&draw.signal, &fixed_params(1.0, 12.0, 2), None, |s| {
            guarded = Some(s.thresholded.to_vec())
        })
        .unwrap();
        let (low, guarded) = (low.unwrap(), guarded.unwrap());
        let dl = decompose_variance(&x, &low, p, 1.0, delta).unwrap();
        let dg = decompose_variance(&x, &guarded, p, 1.0, delta).unwrap();
        assert!(dl.eps_s > 0.0);
        assert!(dg.eps_s < 1e-20);
        assert!(dl.sigma2() > dg.sigma2());
        let vl = step_variance_mc(&x, &low, p, 1.0, delta, 4000, 5).unwrap();
        let vg = step_variance_mc(&x, &guarded, p, 1.0, delta, 4000, 5).unwrap();
        assert!(vl > vg, "{vl} vs {vg}");
    }

    #[test]
    fn guard_examples() {
        let sched = ThresholdSchedule::new(1.0, -0.1).unwrap();
        let r = guard_check(&sched, 2.0, &[0.0; 50]);
        assert!(r.passed && r.first_violation.is_none());

        // A schedule whose floor is exactly gamma sigma passes.
        let sigma = 0.2;
        let sched = ThresholdSchedule::new(2.0 * sigma, -1e-9).unwrap();
        assert!(guard_check(&sched, 2.0, &[sigma * (1.0 - 1e-6); 5]).passed);

        let x = tone(256, 7, 0.5);
        let draw = iid_model_sample(&x, 0.5, 0.05, 3).unwrap();
        let params = ImatParams {
            alpha: -2.0,
            max_iters: 10,
            ..Default::default()
        };
        let sigmas = sigma_trace(&x, &draw.signal, &params, 0.05).unwrap();
        let out = crate::recon::imat(&draw.signal, &params, None).unwrap();
        let sched = ThresholdSchedule::new(out.diagnostics.thresholds[1], -2.0).unwrap();
        // The recorded schedule starts at k = 1; realign it to k = 0.
        let r = guard_check(&sched, 1.5, &sigmas[1..]);
        assert!(!r.passed);
        assert!(r.first_violation.unwrap() <= 3, "{:?}", r);
    }

    #[test]
    fn guarded_mse_does_not_grow() {
        let n = 256;
        let x = tone(n, 9, 0.5);
        let delta = 0.05;
        let params = ImatParams {
            lambda: 1.0,
            beta: Beta::Fixed(30.0),
            alpha: -0.2,
            max_iters: 40,
            guard: Some(Guard { gamma: 3.0, delta }),
        };
        let t = geometric_error_check(&x, &params, 0.5, delta, 200, 8).unwrap();
        assert!(t.mse.len() > 3);
        for w in t.mse[1..].windows(2) {
            assert!(w[1] <= w[0] * 1.02, "{} -> {}", w[0], w[1]);
        }
    }
}
