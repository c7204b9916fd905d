use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::codec::MaskedSignal;
use crate::error::{Error, Result};
use crate::signal::Frame;
use crate::spectral::DftPlan;

/// Smallest `L_ii^2 / G_ii` accepted from the Cholesky factor of the Gram
/// matrix before a refit is called rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OmpOutput {
    pub frame: Frame,
    /// Selected frequency bins in `0..=N/2`, in selection order. Each bin
    /// stands for the conjugate pair `(m, N-m)`.
    pub support: Vec<usize>,
    /// Residual norm before the first selection and after every refit.
    pub residual_norms: Vec<f64>,
}

/// Real atoms of bin `m` restricted to `rows`: a cosine, plus a sine unless
/// `m` is DC or Nyquist.
fn atoms(m: usize, n: usize, rows: &[usize]) -> Vec<Vec<f64>> {
    let w = 2.0 * PI * m as f64 / n as f64;
    let cos: Vec<f64> = rows.iter().map(|&i| (w * i as f64).cos()).collect();
    if m == 0 || 2 * m == n {
        vec![cos]
    } else {
        let sin = rows.iter().map(|&i| (w * i as f64).sin()).collect();
        vec![cos, sin]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthogonal matching pursuit over the partial inverse-DFT dictionary.
///
/// Each step picks the conjugate bin pair whose (normalized) atoms correlate
/// best with the residual, then refits all selected atoms by least squares.
/// Stops after `max_atoms` pairs or once the residual norm is at most
/// `residual_tol`.
pub fn omp(masked: &MaskedSignal, max_atoms: usize, residual_tol: f64) -> Result<OmpOutput> {
    let n = masked.len();
    if n == 0 {
        return Err(Error::EmptyFrame);
    }
    let rows = masked.mask().retained().to_vec();
    let r_count = rows.len();
    if max_atoms > r_count {
        return Err(Error::TooFewRetained {
            retained: r_count,
            required: max_atoms,
        });
    }
    if !(residual_tol >= 0.0) {
        return Err(Error::invalid(
            "residual_tol",
            format!("{residual_tol} must be >= 0"),
        ));
    }
    let y: Vec<f64> = masked.retained_values();
    let plan = DftPlan::cached(n);

    // Atom norms from the mask spectrum:
    // sum cos^2 = (R + Re D(2m)) / 2, sum sin^2 = (R - Re D(2m)) / 2.
    let mask_indicator: Vec<f64> = masked
        .mask()
        .bits()
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    let mask_spec = plan.forward_real(&mask_indicator);
    let half = n / 2;
    let norms: Vec<(f64, f64)> = (0..=half)
        .map(|m| {
            let d2 = mask_spec[(2 * m) % n].re;
            let r = r_count as f64;
            if m == 0 || 2 * m == n {
                (r, 0.0)
            } else {
                ((r + d2) / 2.0, (r - d2) / 2.0)
            }
        })
        .collect();

    let mut support: Vec<usize> = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut gram: Vec<Vec<f64>> = Vec::new();
    let mut aty: Vec<f64> = Vec::new();
    let mut coef: Vec<f64> = Vec::new();
    let mut residual = y.clone();
    let mut residual_norms = vec![dot(&residual, &residual).sqrt()];

    while support.len() < max_atoms && *residual_norms.last().unwrap() > residual_tol {
        let mut zero_filled = vec![0.0; n];
        for (&i, &v) in rows.iter().zip(&residual) {
            zero_filled[i] = v;
        }
        let corr = plan.forward_real(&zero_filled);
        let best = (0..=half)
            .filter(|m| !support.contains(m))
            .map(|m| {
                let (nc, ns) = norms[m];
                let c = corr[m];
                let mut score = if nc > 0.0 { c.re * c.re / nc } else { 0.0 };
                if ns > 0.0 {
                    score += c.im * c.im / ns;
                }
                (m, score)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((m, _)) = best else { break };

        for atom in atoms(m, n, &rows) {
            let mut row: Vec<f64> = columns.iter().map(|c| dot(c, &atom)).collect();
            row.push(dot(&atom, &atom));
            for (g, &v) in gram.iter_mut().zip(&row) {
                g.push(v);
            }
            gram.push(row);
            aty.push(dot(&atom, &y));
            columns.push(atom);
        }
        support.push(m);

        let c = columns.len();
        let g = DMatrix::from_fn(c, c, |i, j| gram[i][j]);
        let chol = g
            .clone()
            .cholesky()
            .ok_or(Error::RankDeficient { columns: c })?;
        let l = chol.l();
        if (0..c).any(|i| l[(i, i)] * l[(i, i)] < RANK_TOL * g[(i, i)]) {
            return Err(Error::RankDeficient { columns: c });
        }
        coef = chol
            .solve(&DVector::from_vec(aty.clone()))
            .as_slice()
            .to_vec();

        residual = y.clone();
        for (col, &a) in columns.iter().zip(&coef) {
            for (r, &v) in residual.iter_mut().zip(col) {
                *r -= a * v;
            }
        }
        residual_norms.push(dot(&residual, &residual).sqrt());
    }

    // Synthesize the full frame from the fitted atoms.
    let mut out = vec![0.0; n];
    let mut coefs = coef.iter();
    for &m in &support {
        let w = 2.0 * PI * m as f64 / n as f64;
        let a = *coefs.next().unwrap();
        let b = if m == 0 || 2 * m == n {
            0.0
        } else {
            *coefs.next().unwrap()
        };
        for (i, o) in out.iter_mut().enumerate() {
            let t = w * i as f64;
            *o += a * t.cos() + b * t.sin();
        }
    }

    Ok(OmpOutput {
        frame: Frame::new(out, masked.sample_rate())?,
        support,
        residual_norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{bernoulli_mask, SamplingMask};
    use crate::signal::snr_db;

    fn tones(n: usize, bins: &[(usize, f64, f64)]) -> Frame {
        Frame::from_samples(
            (0..n)
                .map(|i| {
                    bins.iter()
                        .map(|&(m, a, ph)| a * (2.0 * PI * (m * i) as f64 / n as f64 + ph).cos())
                        .sum()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_tone_exact() {
        let x = tones(240, &[(17, 0.6, 0.9)]);
        let m = MaskedSignal::from_frame(&x, bernoulli_mask(240, 0.5, 4).unwrap()).unwrap();
        let out = omp(&m, 1, 0.0).unwrap();
        assert_eq!(out.support, vec![17]);
        assert!(snr_db(&x, &out.frame).unwrap().value > 99.0);
    }

    #[test]
    fn zero_input_selects_nothing() {
        let x = Frame::zeros(64, 48e3).unwrap();
        let m = MaskedSignal::from_frame(&x, bernoulli_mask(64, 0.5, 1).unwrap()).unwrap();
        let out = omp(&m, 5, 0.0).unwrap();
        assert!(out.support.is_empty());
        assert!(out.frame.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dc_and_nyquist_atoms() {
        let n = 64;
        let x = Frame::from_samples(
            (0..n)
                .map(|i| 0.2 + if i % 2 == 0 { 0.1 } else { -0.1 })
                .collect(),
        )
        .unwrap();
        let m = MaskedSignal::from_frame(&x, bernoulli_mask(n, 0.6, 9).unwrap()).unwrap();
        let out = omp(&m, 2, 1e-12).unwrap();
        let mut s = out.support.clone();
        s.sort();
        assert_eq!(s, vec![0, 32]);
        assert!(snr_db(&x, &out.frame).unwrap().value > 99.0);
    }

    #[test]
    fn too_many_atoms_rejected() {
        let x = tones(32, &[(2, 1.0, 0.0)]);
        let mask = SamplingMask::from_bits((0..32).map(|i| i < 3).collect());
        let m = MaskedSignal::from_frame(&x, mask).unwrap();
        assert!(matches!(omp(&m, 4, 0.0), Err(Error::TooFewRetained { .. })));
    }

    #[test]
    fn rank_deficiency_is_reported() {
        // Two retained samples cannot support two sinusoid pairs (4 columns).
        let x = tones(32, &[(2, 1.0, 0.3), (5, 0.5, 0.1)]);
        let mask = SamplingMask::from_bits((0..32).map(|i| i == 3 || i == 11).collect());
        let m = MaskedSignal::from_frame(&x, mask).unwrap();
        assert!(matches!(omp(&m, 2, 0.0), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn atom_budget_and_monotone_residual() {
        for seed in 0..10 {
            let x = tones(
                200,
                &[
                    (3, 0.9, 0.1),
                    (20, 0.5, 2.0),
                    (41, 0.4, 1.0),
                    (77, 0.3, 0.5),
                ],
            );
            let m = MaskedSignal::from_frame(&x, bernoulli_mask(200, 0.4, seed).unwrap()).unwrap();
            let out = omp(&m, 3, 0.0).unwrap();
            assert!(out.support.len() <= 3);
            assert_eq!(out.residual_norms.len(), out.support.len() + 1);
            for w in out.residual_norms.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }
}
