use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{
    adm_encode, dm_encode, extract_mask, masked_signal, AdmParams, MaskedSignal, SamplingMask,
    Staircase,
};
use crate::error::{Error, Result};
use crate::recon::{
    imat, imatdm, lasso, lasso_reg_max, lowpass_reconstruct, omp, Guard, ImatParams, LowpassDesign,
    Method, DEFAULT_SMOOTHING_LEN,
};
use crate::signal::{snr_db, Frame};

use super::report::{ReportRow, ReportTable};

/// Success threshold for plain DM sweeps.
pub const DEFAULT_DM_SUCCESS_DB: f64 = 15.0;
/// Success threshold for ADM runs.
pub const DEFAULT_ADM_SUCCESS_DB: f64 = 20.0;
/// The grid of step sizes swept by default.
pub const DEFAULT_DELTAS: [f64; 5] = [0.001, 0.005, 0.01, 0.02, 0.03];
pub const DEFAULT_LASSO_MAX_ITERS: usize = 500;
pub const DEFAULT_LASSO_TOL: f64 = 1e-6;
/// LASSO weight used when the observation carries no coding error, as a
/// fraction of the kill threshold.
pub const NOISELESS_LASSO_FRACTION: f64 = 1e-3;

/// Settings shared by every reconstruction in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconConfig {
    pub imat: ImatParams,
    /// When set, IMAT and IMATDM stop once the threshold drops below
    /// `gamma` times the coding-error spread of the frame.
    pub guard_gamma: Option<f64>,
    pub smoothing_len: usize,
    /// Pair budget for OMP; `None` allows a quarter of the retained count.
    pub omp_max_atoms: Option<usize>,
    /// OMP stops once the residual norm reaches this multiple of the
    /// expected coding-error norm.
    pub omp_tol_factor: f64,
    /// Fixed LASSO weight; `None` picks it from the coding-error level.
    pub lasso_reg: Option<f64>,
    pub lasso_max_iters: usize,
    pub lasso_tol: f64,
    pub lowpass: LowpassDesign,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            imat: ImatParams::default(),
            guard_gamma: None,
            smoothing_len: DEFAULT_SMOOTHING_LEN,
            omp_max_atoms: None,
            omp_tol_factor: 1.0,
            lasso_reg: None,
            lasso_max_iters: DEFAULT_LASSO_MAX_ITERS,
            lasso_tol: DEFAULT_LASSO_TOL,
            lowpass: LowpassDesign::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    pub recon: ReconConfig,
    pub success_threshold_db: f64,
    /// Keep the DM mask but observe the true samples instead of the
    /// staircase.
    pub noiseless: bool,
}

impl SweepConfig {
    pub fn dm_default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            recon: ReconConfig::default(),
            success_threshold_db: DEFAULT_DM_SUCCESS_DB,
            noiseless: false,
        }
    }

    pub fn adm_default() -> Self {
        Self {
            success_threshold_db: DEFAULT_ADM_SUCCESS_DB,
            ..Self::dm_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::EmptyInput("methods"));
        }
        if !self.success_threshold_db.is_finite() {
            return Err(Error::invalid("success_threshold_db", "must be finite"));
        }
        let r = &self.recon;
        // Everything but the 2/p bound, which needs a mask.
        r.imat.validate(f64::MIN_POSITIVE)?;
        if let Some(g) = r.guard_gamma {
            if !(g > 1.0 && g.is_finite()) {
                return Err(Error::invalid("gamma", format!("{g} must exceed 1")));
            }
        }
        if r.smoothing_len < 2 || r.smoothing_len % 2 != 0 {
            return Err(Error::invalid(
                "smoothing_len",
                format!("{} must be even and >= 2", r.smoothing_len),
            ));
        }
        if !(r.omp_tol_factor >= 0.0 && r.omp_tol_factor.is_finite()) {
            return Err(Error::invalid(
                "omp_tol_factor",
                format!("{}", r.omp_tol_factor),
            ));
        }
        if let Some(reg) = r.lasso_reg {
            if !(reg > 0.0 && reg.is_finite()) {
                return Err(Error::invalid(
                    "lasso_reg",
                    format!("{reg} must be positive"),
                ));
            }
        }
        if r.lasso_max_iters == 0 {
            return Err(Error::invalid("lasso_max_iters", "must be at least 1"));
        }
        Ok(())
    }
}

/// How frames are coded before masking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coding {
    Dm(f64),
    Adm(AdmParams),
}

/// What a reconstructor gets to see of one frame.
#[derive(Debug, Clone)]
pub struct Observation {
    pub masked: MaskedSignal,
    /// Decoder staircase; needed by the lowpass baseline only.
    pub staircase: Option<Staircase>,
    /// Expected norm of the coding error on the retained samples,
    /// `sqrt(sum delta(n)^2 / 4)`; zero for clean observations.
    pub noise_norm: f64,
}

impl Observation {
    /// Code `frame`, keep the samples at bit alternations.
    pub fn coded(frame: &Frame, coding: &Coding, noiseless: bool) -> Result<Self> {
        let (bits, stair) = match coding {
            Coding::Dm(delta) => dm_encode(frame, *delta)?,
            Coding::Adm(params) => adm_encode(frame, params)?,
        };
        let mask = extract_mask(&bits)?;
        let (masked, noise_norm) = if noiseless {
            (MaskedSignal::from_frame(frame, mask)?, 0.0)
        } else {
            let steps = stair.delta_trace();
            let energy: f64 = mask
                .retained()
                .iter()
                .map(|&i| steps[i] * steps[i] / 4.0)
                .sum();
            (masked_signal(&stair, &mask)?, energy.sqrt())
        };
        Ok(Self {
            masked,
            staircase: Some(stair),
            noise_norm,
        })
    }

    /// True samples at the positions kept by `mask`.
    pub fn clean(frame: &Frame, mask: SamplingMask) -> Result<Self> {
        Ok(Self {
            masked: MaskedSignal::from_frame(frame, mask)?,
            staircase: None,
            noise_norm: 0.0,
        })
    }
}

fn imat_params(cfg: &ReconConfig, obs: &Observation) -> ImatParams {
    let mut params = cfg.imat;
    if let Some(gamma) = cfg.guard_gamma {
        let r = obs.masked.mask().retained_count().max(1) as f64;
        // Step size whose ±delta/2 errors carry the expected noise energy.
        params.guard = Some(Guard {
            gamma,
            delta: 2.0 * obs.noise_norm / r.sqrt(),
        });
    }
    params
}

/// LASSO weight from the universal threshold: the soft threshold
/// `reg N / 2` sits at `noise_norm sqrt(ln N)`, above the largest
/// spectral noise bin with high probability.
pub fn auto_lasso_reg(obs: &Observation) -> f64 {
    let n = obs.masked.len() as f64;
    let universal = 2.0 * obs.noise_norm * n.ln().sqrt() / n;
    let floor = NOISELESS_LASSO_FRACTION * lasso_reg_max(&obs.masked);
    universal.max(floor).max(f64::MIN_POSITIVE)
}

pub fn reconstruct(method: Method, obs: &Observation, cfg: &ReconConfig) -> Result<Frame> {
    let masked = &obs.masked;
    match method {
        Method::Imat => Ok(imat(masked, &imat_params(cfg, obs), None)?.frame),
        Method::Imatdm => {
            Ok(imatdm(masked, cfg.smoothing_len, &imat_params(cfg, obs), None)?.frame)
        }
        Method::Omp => {
            let retained = masked.mask().retained_count();
            let budget = cfg.omp_max_atoms.unwrap_or(retained / 4).min(retained);
            let tol = cfg.omp_tol_factor * obs.noise_norm;
            Ok(omp(masked, budget, tol)?.frame)
        }
        Method::Lasso => {
            let reg = cfg.lasso_reg.unwrap_or_else(|| auto_lasso_reg(obs));
            Ok(lasso(masked, reg, cfg.lasso_max_iters, cfg.lasso_tol)?.frame)
        }
        Method::Lowpass => {
            let stair = obs
                .staircase
                .as_ref()
                .ok_or_else(|| Error::invalid("method", "lowpass needs the decoded staircase"))?;
            lowpass_reconstruct(stair, &cfg.lowpass)
        }
    }
}

/// SNR of every method on one frame; `None` marks a failed reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub mask_rate: f64,
    pub snr_db: Vec<Option<f64>>,
}

pub fn evaluate(frame: &Frame, obs: &Observation, cfg: &SweepConfig) -> FrameOutcome {
    let snr_db = cfg
        .methods
        .iter()
        .map(|&m| {
            reconstruct(m, obs, &cfg.recon)
                .and_then(|est| snr_db(frame, &est))
                .map(|s| s.value)
                .ok()
        })
        .collect();
    FrameOutcome {
        mask_rate: obs.masked.mask().rate(),
        snr_db,
    }
}

/// Folds per-frame outcomes into one row per method. Failed frames count as
/// 0 dB.
pub fn aggregate(
    outcomes: &[FrameOutcome],
    methods: &[Method],
    delta: f64,
    threshold_db: f64,
) -> Vec<ReportRow> {
    let frames = outcomes.len();
    let p = outcomes.iter().map(|o| o.mask_rate).sum::<f64>() / frames as f64;
    methods
        .iter()
        .enumerate()
        .map(|(j, &method)| {
            let mut sum = 0.0;
            let mut hits = 0;
            let mut failures = 0;
            for o in outcomes {
                match o.snr_db[j] {
                    Some(s) => {
                        sum += s;
                        if s >= threshold_db {
                            hits += 1;
                        }
                    }
                    None => failures += 1,
                }
            }
            ReportRow {
                method,
                delta,
                p,
                mean_snr_db: sum / frames as f64,
                success_rate_pct: 100.0 * hits as f64 / frames as f64,
                frames,
                failures,
            }
        })
        .collect()
}

fn run(frames: &[Frame], coding: &Coding, cfg: &SweepConfig) -> Vec<FrameOutcome> {
    frames
        .par_iter()
        .map(|f| match Observation::coded(f, coding, cfg.noiseless) {
            Ok(obs) => evaluate(f, &obs, cfg),
            Err(_) => FrameOutcome {
                mask_rate: 0.0,
                snr_db: vec![None; cfg.methods.len()],
            },
        })
        .collect()
}

/// DM-code every frame at every step size and score each method.
pub fn delta_sweep(frames: &[Frame], deltas: &[f64], cfg: &SweepConfig) -> Result<ReportTable> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("frames"));
    }
    if deltas.is_empty() {
        return Err(Error::EmptyInput("deltas"));
    }
    cfg.validate()?;
    for &d in deltas {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::invalid("delta", format!("{d} must be positive")));
        }
    }
    let mut rows = Vec::new();
    for &delta in deltas {
        let outcomes = run(frames, &Coding::Dm(delta), cfg);
        rows.extend(aggregate(
            &outcomes,
            &cfg.methods,
            delta,
            cfg.success_threshold_db,
        ));
    }
    Ok(ReportTable { rows })
}

/// Same as [`delta_sweep`] for one ADM setting; rows carry the initial step.
pub fn adm_benchmark(frames: &[Frame], adm: &AdmParams, cfg: &SweepConfig) -> Result<ReportTable> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("frames"));
    }
    cfg.validate()?;
    adm.validate()?;
    let outcomes = run(frames, &Coding::Adm(*adm), cfg);
    Ok(ReportTable {
        rows: aggregate(
            &outcomes,
            &cfg.methods,
            adm.delta0,
            cfg.success_threshold_db,
        ),
    })
}
