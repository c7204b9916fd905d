use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dmsparse::analysis::{
    geometric_error_check, validate_theorem1, ValidationReport, ValidationRow,
};
use dmsparse::codec::{
    adm_decode, adm_encode, dm_decode, dm_encode, extract_mask, read_bitstream, write_bitstream,
    AdmParams, Bitstream, Staircase,
};
use dmsparse::harness::{
    adm_benchmark, config_hash, delta_sweep, emit_report, load_wav, reconstruct, report_path,
    synth_corpus, unit_energy_frame, write_wav, AmplitudeLaw, Coding, Observation, ReconConfig,
    ReportFormat, SweepConfig, SyntheticSpec, WavFormat, DEFAULT_AMP_MAX, DEFAULT_AMP_MIN,
    DEFAULT_LASSO_MAX_ITERS, DEFAULT_LASSO_TOL, DEFAULT_MAX_HZ,
};
use dmsparse::recon::{
    Beta, ImatParams, LowpassDesign, Method, DEFAULT_ALPHA, DEFAULT_BETA_FRACTION,
    DEFAULT_CUTOFF_HZ, DEFAULT_LAMBDA, DEFAULT_LOWPASS_TAPS, DEFAULT_MAX_ITERS,
    DEFAULT_SMOOTHING_LEN,
};
use dmsparse::signal::{frame_split, snr_db, Frame, DEFAULT_FRAME_LEN, DEFAULT_SAMPLE_RATE};
use dmsparse::{Error, ErrorKind};

// Output goes to stdout; a closed pipe (e.g. `| head`) is not an error.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! say_raw {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

/// Delta-modulation coding and sparse reconstruction of voice frames.
#[derive(Parser, Debug)]
#[command(name = "dmsparse", version, about)]
struct Cli {
    /// Worker threads for sweeps and Monte Carlo runs [default: available cores]
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Print the resolved configuration as JSON and exit without running.
    #[arg(long, global = true)]
    dump_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// DM- or ADM-code a WAV file into a bitstream file.
    Encode(EncodeArgs),
    /// Decode a bitstream file to the staircase, written as WAV.
    Decode(DecodeArgs),
    /// Code a WAV file frame by frame and rebuild it from the retained samples.
    Reconstruct(ReconstructArgs),
    /// Score every method over a grid of DM step sizes.
    Sweep(SweepArgs),
    /// Score every method under adaptive DM.
    AdmBench(AdmBenchArgs),
    /// Monte Carlo check of the iid coding model's spectral mean, variance
    /// and IMAT's mean-error ratio.
    ValidateTheory(TheoryArgs),
    /// Write a synthetic sparse corpus as WAV.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct AdmArgs {
    /// Use adaptive DM; --delta is then the initial step.
    #[arg(long)]
    adm: bool,
    /// ADM step growth factor
    #[arg(long, default_value_t = 1.5)]
    growth: f64,
    /// Smallest ADM step [default: delta / 16]
    #[arg(long)]
    delta_min: Option<f64>,
    /// Largest ADM step [default: 16 * delta]
    #[arg(long)]
    delta_max: Option<f64>,
}

impl AdmArgs {
    fn params(&self, delta0: f64) -> Result<AdmParams, Error> {
        AdmParams::new(
            delta0,
            self.growth,
            self.delta_min.unwrap_or(delta0 / 16.0),
            self.delta_max.unwrap_or(delta0 * 16.0),
        )
    }

    fn coding(&self, delta: f64) -> Result<Coding, Error> {
        Ok(if self.adm {
            Coding::Adm(self.params(delta)?)
        } else {
            Coding::Dm(delta)
        })
    }
}

#[derive(Args, Debug, Serialize)]
struct EncodeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "out")]
    output: PathBuf,
    /// DM step, or the initial ADM step
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[command(flatten)]
    adm: AdmArgs,
}

#[derive(Args, Debug, Serialize)]
struct DecodeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "out")]
    output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE as u32)]
    sample_rate: u32,
    /// ADM growth factor (ADM streams only)
    #[arg(long, default_value_t = 1.5)]
    growth: f64,
    /// Smallest ADM step [default: delta / 16]
    #[arg(long)]
    delta_min: Option<f64>,
    /// Largest ADM step [default: 16 * delta]
    #[arg(long)]
    delta_max: Option<f64>,
    #[arg(long, value_enum, default_value_t = WavKind::Float32)]
    wav_format: WavKind,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
enum WavKind {
    Pcm16,
    Float32,
}

impl From<WavKind> for WavFormat {
    fn from(k: WavKind) -> Self {
        match k {
            WavKind::Pcm16 => WavFormat::Pcm16,
            WavKind::Float32 => WavFormat::Float32,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct ReconArgs {
    /// IMAT relaxation; must lie in (0, 2/p)
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    /// Threshold decay exponent (negative)
    #[arg(long, default_value_t = DEFAULT_ALPHA, allow_hyphen_values = true)]
    alpha: f64,
    /// Initial threshold as a fraction of the first iterate's spectral peak
    #[arg(long, default_value_t = DEFAULT_BETA_FRACTION)]
    beta_fraction: f64,
    /// Fixed initial threshold; overrides --beta-fraction
    #[arg(long)]
    beta: Option<f64>,
    /// IMAT iterations
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Stop IMAT once the threshold falls below gamma times the coding-error
    /// spread [default: off]
    #[arg(long)]
    gamma: Option<f64>,
    /// IMATDM moving-average length (even)
    #[arg(long, default_value_t = DEFAULT_SMOOTHING_LEN)]
    smoothing_len: usize,
    /// OMP pair budget [default: a quarter of the retained samples]
    #[arg(long)]
    omp_max_atoms: Option<usize>,
    /// OMP stops at this multiple of the expected coding-error norm
    #[arg(long, default_value_t = 1.0)]
    omp_tol_factor: f64,
    /// LASSO weight [default: universal threshold from the coding-error level]
    #[arg(long)]
    lasso_reg: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_LASSO_MAX_ITERS)]
    lasso_max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_LASSO_TOL)]
    lasso_tol: f64,
    /// Lowpass baseline cutoff in Hz
    #[arg(long, default_value_t = DEFAULT_CUTOFF_HZ)]
    cutoff_hz: f64,
    /// Lowpass FIR length (odd)
    #[arg(long, default_value_t = DEFAULT_LOWPASS_TAPS)]
    taps: usize,
}

impl ReconArgs {
    fn config(&self) -> ReconConfig {
        ReconConfig {
            imat: ImatParams {
                lambda: self.lambda,
                beta: match self.beta {
                    Some(b) => Beta::Fixed(b),
                    None => Beta::FromFirstIterate(self.beta_fraction),
                },
                alpha: self.alpha,
                max_iters: self.max_iters,
                guard: None,
            },
            guard_gamma: self.gamma,
            smoothing_len: self.smoothing_len,
            omp_max_atoms: self.omp_max_atoms,
            omp_tol_factor: self.omp_tol_factor,
            lasso_reg: self.lasso_reg,
            lasso_max_iters: self.lasso_max_iters,
            lasso_tol: self.lasso_tol,
            lowpass: LowpassDesign {
                cutoff_hz: self.cutoff_hz,
                taps: self.taps,
            },
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct ReconstructArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "out")]
    output: PathBuf,
    #[arg(long, value_parser = parse_method, default_value = "imatdm")]
    method: Method,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = DEFAULT_FRAME_LEN)]
    frame_len: usize,
    /// Observe the true samples at the DM mask positions instead of the staircase.
    #[arg(long)]
    noiseless: bool,
    #[command(flatten)]
    adm: AdmArgs,
    #[command(flatten)]
    recon: ReconArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CorpusArgs {
    /// WAV files or directories of WAV files; a synthetic corpus is used when absent
    #[arg(long = "in", num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FRAME_LEN)]
    frame_len: usize,
    /// Synthetic frames
    #[arg(long, default_value_t = 200)]
    frames: usize,
    /// Active conjugate pairs per synthetic frame
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_AMP_MIN)]
    amp_min: f64,
    #[arg(long, default_value_t = DEFAULT_AMP_MAX)]
    amp_max: f64,
    /// Draw amplitudes uniformly in dB
    #[arg(long)]
    log_amplitudes: bool,
    /// Fraction of the pairs above the cutoff
    #[arg(long, default_value_t = 0.5)]
    band_split: f64,
    /// Upper edge of the synthetic high band in Hz
    #[arg(long, default_value_t = DEFAULT_MAX_HZ)]
    max_hz: f64,
    /// Largest off-grid offset of a tone, in bins (0 to 0.5)
    #[arg(long, default_value_t = 0.0)]
    detune: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Where a run's frames come from, as recorded in the config hash.
#[derive(Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Corpus {
    Wav {
        files: Vec<PathBuf>,
        frame_len: usize,
    },
    Synthetic {
        spec: SyntheticSpec,
        frames: usize,
    },
}

impl CorpusArgs {
    fn spec(&self, cutoff_hz: f64) -> SyntheticSpec {
        SyntheticSpec {
            n: self.frame_len,
            k: self.k,
            amp_min: self.amp_min,
            amp_max: self.amp_max,
            law: if self.log_amplitudes {
                AmplitudeLaw::LogUniform
            } else {
                AmplitudeLaw::Uniform
            },
            band_split: self.band_split,
            cutoff_hz,
            max_hz: self.max_hz,
            detune: self.detune,
            sample_rate: DEFAULT_SAMPLE_RATE,
            seed: self.seed,
        }
    }

    fn resolve(&self, cutoff_hz: f64) -> Result<Corpus, Error> {
        if self.inputs.is_empty() {
            let spec = self.spec(cutoff_hz);
            spec.validate()?;
            if self.frames == 0 {
                return Err(Error::EmptyInput("frames"));
            }
            return Ok(Corpus::Synthetic {
                spec,
                frames: self.frames,
            });
        }
        Ok(Corpus::Wav {
            files: wav_files(&self.inputs)?,
            frame_len: self.frame_len,
        })
    }
}

impl Corpus {
    fn load(&self) -> Result<Vec<Frame>, Error> {
        match self {
            Corpus::Synthetic { spec, frames } => Ok(synth_corpus(spec, *frames)?
                .into_iter()
                .map(|s| s.frame)
                .collect()),
            Corpus::Wav { files, frame_len } => {
                let mut out = Vec::new();
                for f in files {
                    let audio = load_wav(f)?;
                    if audio.samples.len() >= *frame_len {
                        out.extend(frame_split(
                            &audio.samples,
                            *frame_len,
                            *frame_len,
                            audio.sample_rate,
                        )?);
                    }
                }
                if out.is_empty() {
                    return Err(Error::EmptyInput("no full frames in the input files"));
                }
                Ok(out)
            }
        }
    }
}

/// Expands directories to their `.wav` files, sorted by name.
fn wav_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Error> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| io_error(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::EmptyInput("no WAV files found"));
    }
    Ok(files)
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

#[derive(Args, Debug, Serialize)]
struct ReportArgs {
    /// Directory for the report file
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, value_parser = parse_format, default_value = "csv")]
    format: ReportFormat,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.001,0.005,0.01,0.02,0.03"
    )]
    deltas: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "imatdm,imat,omp,lasso,lowpass")]
    methods: Vec<Method>,
    /// Success-rate threshold in dB
    #[arg(long, default_value_t = 15.0)]
    threshold_db: f64,
    /// Observe the true samples at the DM mask positions instead of the staircase.
    #[arg(long)]
    noiseless: bool,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    recon: ReconArgs,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Args, Debug, Serialize)]
struct AdmBenchArgs {
    /// Initial ADM step
    #[arg(long, default_value_t = 0.01)]
    delta0: f64,
    #[arg(long, default_value_t = 1.5)]
    growth: f64,
    /// Smallest step [default: delta0 / 16]
    #[arg(long)]
    delta_min: Option<f64>,
    /// Largest step [default: 16 * delta0]
    #[arg(long)]
    delta_max: Option<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "imatdm,imat,omp,lasso,lowpass")]
    methods: Vec<Method>,
    /// Success-rate threshold in dB
    #[arg(long, default_value_t = 20.0)]
    threshold_db: f64,
    #[arg(long)]
    noiseless: bool,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    recon: ReconArgs,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Args, Debug, Serialize)]
struct TheoryArgs {
    /// Frame length
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Mask rate
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Coding step
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// IMAT relaxation for the mean-error ratio check
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Trials for the ratio check
    #[arg(long, default_value_t = 100)]
    ratio_trials: usize,
    /// Exit with status 4 if any relative error exceeds this
    #[arg(long)]
    max_rel_error: Option<f64>,
    /// Also write the report as CSV
    #[arg(long = "out")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    #[arg(long = "out")]
    output: PathBuf,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, default_value_t = DEFAULT_CUTOFF_HZ)]
    cutoff_hz: f64,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A failed run: the message and the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Numeric => EXIT_NUMERIC,
            ErrorKind::Input | ErrorKind::Io => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Flag validation failures, reported before any work starts.
fn usage(e: Error) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: e.to_string(),
    }
}

fn dump<T: Serialize>(config: &T) -> Outcome {
    let json = serde_json::to_string_pretty(config).map_err(Error::from)?;
    say!("{json}");
    Ok(())
}

fn encode(args: &EncodeArgs, dump_only: bool) -> Outcome {
    let coding = args.adm.coding(args.delta).map_err(usage)?;
    if dump_only {
        return dump(args);
    }
    let audio = load_wav(&args.input)?;
    let frame = Frame::new(audio.samples, audio.sample_rate)?;
    let (bits, _) = match coding {
        Coding::Dm(d) => dm_encode(&frame, d)?,
        Coding::Adm(p) => adm_encode(&frame, &p)?,
    };
    write_bitstream(&bits, &args.output)?;
    let mask = extract_mask(&bits)?;
    say!(
        "{} samples, mask rate {:.4}, wrote {}",
        bits.len(),
        mask.rate(),
        args.output.display()
    );
    Ok(())
}

fn decode_stream(bits: &Bitstream, args: &DecodeArgs) -> Result<Staircase, Error> {
    let rate = args.sample_rate as f64;
    if bits.is_adaptive() {
        let d = bits.delta();
        let p = AdmParams::new(
            d,
            args.growth,
            args.delta_min.unwrap_or(d / 16.0),
            args.delta_max.unwrap_or(d * 16.0),
        )?;
        adm_decode(bits, &p, rate)
    } else {
        dm_decode(bits, rate)
    }
}

fn decode(args: &DecodeArgs, dump_only: bool) -> Outcome {
    if args.sample_rate == 0 {
        return Err(Failure {
            code: EXIT_USAGE,
            message: "--sample-rate must be positive".into(),
        });
    }
    if dump_only {
        return dump(args);
    }
    let bits = read_bitstream(&args.input)?;
    let stair = decode_stream(&bits, args)?;
    write_wav(
        &args.output,
        stair.values(),
        args.sample_rate,
        args.wav_format.into(),
    )?;
    say!("{} samples, wrote {}", stair.len(), args.output.display());
    Ok(())
}

fn run_reconstruct(args: &ReconstructArgs, dump_only: bool) -> Outcome {
    let coding = args.adm.coding(args.delta).map_err(usage)?;
    let recon = args.recon.config();
    SweepConfig {
        methods: vec![args.method],
        recon: recon.clone(),
        ..SweepConfig::dm_default()
    }
    .validate()
    .map_err(usage)?;
    if dump_only {
        return dump(args);
    }
    let audio = load_wav(&args.input)?;
    let frames = frame_split(
        &audio.samples,
        args.frame_len,
        args.frame_len,
        audio.sample_rate,
    )?;
    if frames.is_empty() {
        return Err(Error::EmptyInput("input is shorter than one frame").into());
    }
    let mut out = Vec::with_capacity(frames.len() * args.frame_len);
    let mut snr_sum = 0.0;
    let mut failures = 0;
    for f in &frames {
        let obs = Observation::coded(f, &coding, args.noiseless)?;
        match reconstruct(args.method, &obs, &recon) {
            Ok(est) => {
                snr_sum += snr_db(f, &est).map(|s| s.value).unwrap_or(0.0);
                out.extend_from_slice(est.samples());
            }
            Err(e)
                if e.kind() == ErrorKind::Numeric || matches!(e, Error::TooFewRetained { .. }) =>
            {
                failures += 1;
                out.extend(std::iter::repeat(0.0).take(f.len()));
            }
            Err(e) => return Err(e.into()),
        }
    }
    write_wav(
        &args.output,
        &out,
        audio.sample_rate as u32,
        WavFormat::Float32,
    )?;
    say!(
        "{}: {} frames, mean SNR {:.4} dB, {} failed, wrote {}",
        args.method,
        frames.len(),
        snr_sum / frames.len() as f64,
        failures,
        args.output.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepRun<'a> {
    command: &'static str,
    corpus: &'a Corpus,
    deltas: &'a [f64],
    adm: Option<AdmParams>,
    config: &'a SweepConfig,
}

fn write_report(
    stem: &str,
    run: &SweepRun<'_>,
    report: &ReportArgs,
    table: &dmsparse::harness::ReportTable,
) -> Outcome {
    let hash = config_hash(run)?;
    let path = report_path(&report.out_dir, stem, &hash, report.format);
    emit_report(table, report.format, &path)?;
    say_raw!("{table}");
    say!("wrote {}", path.display());
    Ok(())
}

fn sweep(args: &SweepArgs, dump_only: bool) -> Outcome {
    let cfg = SweepConfig {
        methods: args.methods.clone(),
        recon: args.recon.config(),
        success_threshold_db: args.threshold_db,
        noiseless: args.noiseless,
    };
    cfg.validate().map_err(usage)?;
    if args.deltas.is_empty() || args.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(usage(Error::EmptyInput(
            "--deltas needs positive step sizes",
        )));
    }
    let corpus = args.corpus.resolve(args.recon.cutoff_hz).map_err(usage)?;
    let run = SweepRun {
        command: "sweep",
        corpus: &corpus,
        deltas: &args.deltas,
        adm: None,
        config: &cfg,
    };
    if dump_only {
        return dump(&run);
    }
    let frames = corpus.load()?;
    let table = delta_sweep(&frames, &args.deltas, &cfg)?;
    write_report("sweep", &run, &args.report, &table)
}

fn adm_bench(args: &AdmBenchArgs, dump_only: bool) -> Outcome {
    let adm = AdmParams::new(
        args.delta0,
        args.growth,
        args.delta_min.unwrap_or(args.delta0 / 16.0),
        args.delta_max.unwrap_or(args.delta0 * 16.0),
    )
    .map_err(usage)?;
    let cfg = SweepConfig {
        methods: args.methods.clone(),
        recon: args.recon.config(),
        success_threshold_db: args.threshold_db,
        noiseless: args.noiseless,
    };
    cfg.validate().map_err(usage)?;
    let corpus = args.corpus.resolve(args.recon.cutoff_hz).map_err(usage)?;
    let run = SweepRun {
        command: "adm-bench",
        corpus: &corpus,
        deltas: &[],
        adm: Some(adm),
        config: &cfg,
    };
    if dump_only {
        return dump(&run);
    }
    let frames = corpus.load()?;
    let table = adm_benchmark(&frames, &adm, &cfg)?;
    write_report("adm-bench", &run, &args.report, &table)
}

/// Tone at bin `n / 16` whose first iterate clears the fixed threshold
/// while the mask's spectral leakage stays below it.
fn ratio_check(args: &TheoryArgs) -> Result<ValidationRow, Error> {
    let n = args.n;
    let m = (n / 16).max(1);
    let xs: Vec<f64> = (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * (m * i) as f64 / n as f64 + 0.3).cos())
        .collect();
    let frame = Frame::new(xs, DEFAULT_SAMPLE_RATE)?;
    let first = args.lambda * args.p * n as f64 / 2.0;
    let params = ImatParams {
        lambda: args.lambda,
        beta: Beta::Fixed(0.5 * first.min(n as f64 / 2.0)),
        alpha: -1e-3,
        max_iters: 12,
        guard: None,
    };
    let t = geometric_error_check(
        &frame,
        &params,
        args.p,
        args.delta,
        args.ratio_trials,
        args.seed,
    )?;
    let rel = (t.fitted_ratio - t.theoretical_ratio).abs() / t.theoretical_ratio.abs().max(1e-12);
    Ok(ValidationRow {
        quantity: "common_ratio".into(),
        predicted: t.theoretical_ratio,
        empirical: t.fitted_ratio,
        rel_error: rel,
        trials: t.trials,
        seed: args.seed,
    })
}

fn validate_theory(args: &TheoryArgs, dump_only: bool) -> Outcome {
    if args.n < 16 {
        return Err(usage(Error::InvalidParameter {
            name: "n",
            reason: format!("{} is below 16", args.n),
        }));
    }
    ImatParams {
        lambda: args.lambda,
        ..ImatParams::default()
    }
    .validate(args.p)
    .map_err(usage)?;
    if dump_only {
        return dump(args);
    }
    let frame = unit_energy_frame(args.n, DEFAULT_SAMPLE_RATE, args.seed)?;
    let stats = validate_theorem1(&frame, args.p, args.delta, args.trials, args.seed)?;
    let mut report: ValidationReport = stats.report();
    // The ratio is undefined once the mean error vanishes in one step.
    if (1.0 - args.lambda * args.p).abs() > 1e-9 {
        report.rows.push(ratio_check(args)?);
    }
    say_raw!("{report}");
    if let Some(path) = &args.output {
        report.save_csv(path)?;
        say!("wrote {}", path.display());
    }
    if let Some(limit) = args.max_rel_error {
        if let Some(row) = report.rows.iter().find(|r| !(r.rel_error <= limit)) {
            return Err(Failure {
                code: EXIT_NUMERIC,
                message: format!(
                    "{} relative error {:.6} exceeds {limit}",
                    row.quantity, row.rel_error
                ),
            });
        }
    }
    Ok(())
}

fn synth(args: &SynthArgs, dump_only: bool) -> Outcome {
    let spec = args.corpus.spec(args.cutoff_hz);
    spec.validate().map_err(usage)?;
    if dump_only {
        return dump(&(&spec, args.corpus.frames));
    }
    let frames = synth_corpus(&spec, args.corpus.frames)?;
    let samples: Vec<f64> = frames
        .iter()
        .flat_map(|f| f.frame.samples().to_vec())
        .collect();
    write_wav(
        &args.output,
        &samples,
        spec.sample_rate as u32,
        WavFormat::Float32,
    )?;
    say!(
        "{} frames of {} samples, wrote {}",
        frames.len(),
        spec.n,
        args.output.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let d = cli.dump_config;
    let result = match &cli.command {
        Command::Encode(a) => encode(a, d),
        Command::Decode(a) => decode(a, d),
        Command::Reconstruct(a) => run_reconstruct(a, d),
        Command::Sweep(a) => sweep(a, d),
        Command::AdmBench(a) => adm_bench(a, d),
        Command::ValidateTheory(a) => validate_theory(a, d),
        Command::Synth(a) => synth(a, d),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
