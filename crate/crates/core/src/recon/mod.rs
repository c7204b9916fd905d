//! Reconstruction of a frame from its retained DM samples.
//!
//! [`imat`] and [`imatdm`] are the iterative adaptive-thresholding
//! reconstructors. [`lowpass_reconstruct`], [`omp`] and [`lasso`] are the
//! baselines they are compared against.

mod imat;
mod lasso;
mod lowpass;
mod omp;

pub use imat::{
    imat, imat_observed, imatdm, Beta, Guard, ImatParams, IterationState, ReconDiagnostics,
    ReconOutput, DEFAULT_ALPHA, DEFAULT_BETA_FRACTION, DEFAULT_LAMBDA, DEFAULT_MAX_ITERS,
    DEFAULT_SMOOTHING_LEN,
};
pub use lasso::{lasso, lasso_objective, lasso_reg_max, LassoOutput};
pub use lowpass::{
    lowpass_reconstruct, lowpass_taps, LowpassDesign, DEFAULT_CUTOFF_HZ, DEFAULT_LOWPASS_TAPS,
};
pub use omp::{omp, OmpOutput};

use serde::{Deserialize, Serialize};

/// Reconstruction methods compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Imatdm,
    Imat,
    Omp,
    Lasso,
    Lowpass,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Imatdm,
        Method::Imat,
        Method::Omp,
        Method::Lasso,
        Method::Lowpass,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Imatdm => "imatdm",
            Method::Imat => "imat",
            Method::Omp => "omp",
            Method::Lasso => "lasso",
            Method::Lowpass => "lowpass",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| crate::Error::invalid("method", format!("unknown method `{s}`")))
    }
}
