//! Audio ingestion, synthetic corpora, codec sweeps and report files.

mod report;
mod sweep;
mod synth;
mod wav;

pub use report::{
    config_hash, emit_report, report_path, ReportFormat, ReportRow, ReportTable, REPORT_COLUMNS,
};
pub use sweep::{
    adm_benchmark, aggregate, auto_lasso_reg, delta_sweep, evaluate, reconstruct, Coding,
    FrameOutcome, Observation, ReconConfig, SweepConfig, DEFAULT_ADM_SUCCESS_DB, DEFAULT_DELTAS,
    DEFAULT_DM_SUCCESS_DB, DEFAULT_LASSO_MAX_ITERS, DEFAULT_LASSO_TOL, NOISELESS_LASSO_FRACTION,
};
pub use synth::{
    synth_corpus, synth_sparse_frame, unit_energy_frame, AmplitudeLaw, SyntheticFrame,
    SyntheticSpec, DEFAULT_AMP_MAX, DEFAULT_AMP_MIN, DEFAULT_MAX_HZ,
};
pub use wav::{decode_wav, encode_wav, load_wav, write_wav, Audio, WavFormat};
