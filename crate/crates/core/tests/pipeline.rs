use dmsparse::codec::{
    dm_decode, dm_encode, extract_mask, masked_signal, read_bitstream, write_bitstream, AdmParams,
};
use dmsparse::harness::{
    adm_benchmark, delta_sweep, load_wav, synth_corpus, write_wav, ReportTable, SweepConfig,
    SyntheticSpec, WavFormat,
};
use dmsparse::recon::{imatdm, ImatParams, Method};
use dmsparse::signal::{frame_split, Frame};

fn corpus(frames: usize) -> Vec<Frame> {
    let spec = SyntheticSpec {
        detune: 0.5,
        seed: 77,
        ..SyntheticSpec::default()
    };
    synth_corpus(&spec, frames)
        .unwrap()
        .into_iter()
        .map(|s| s.frame)
        .collect()
}

fn snr(t: &ReportTable, m: Method, delta: f64) -> f64 {
    t.rows
        .iter()
        .find(|r| r.method == m && r.delta == delta)
        .unwrap()
        .mean_snr_db
}

#[test]
fn wav_file_bitstream_file_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    let frames = corpus(3);
    let samples: Vec<f64> = frames.iter().flat_map(|f| f.samples().to_vec()).collect();
    let wav = dir.path().join("x.wav");
    write_wav(&wav, &samples, 48_000, WavFormat::Float32).unwrap();
    let audio = load_wav(&wav).unwrap();
    let read = frame_split(&audio.samples, 960, 960, audio.sample_rate).unwrap();
    assert_eq!(read.len(), 3);

    for (i, f) in read.iter().enumerate() {
        let (bits, stair) = dm_encode(f, 0.01).unwrap();
        let path = dir.path().join(format!("{i}.dmbs"));
        write_bitstream(&bits, &path).unwrap();
        let back = read_bitstream(&path).unwrap();
        let decoded = dm_decode(&back, f.sample_rate()).unwrap();
        assert_eq!(decoded.values(), stair.values());

        // The decoder side alone recovers the same masked signal.
        let mask = extract_mask(&back).unwrap();
        let y = masked_signal(&decoded, &mask).unwrap();
        let direct = masked_signal(&stair, &extract_mask(&bits).unwrap()).unwrap();
        assert_eq!(y, direct);
        let a = imatdm(&y, 2, &ImatParams::default(), None).unwrap();
        let b = imatdm(&direct, 2, &ImatParams::default(), None).unwrap();
        assert_eq!(a.frame, b.frame);
    }
}

#[test]
fn noiseless_imat_improves_with_step() {
    let frames = corpus(40);
    let deltas = [0.001, 0.005, 0.01, 0.02];
    let cfg = SweepConfig {
        methods: vec![Method::Imat],
        noiseless: true,
        ..SweepConfig::dm_default()
    };
    let t = delta_sweep(&frames, &deltas, &cfg).unwrap();
    let ps: Vec<f64> = t.rows.iter().map(|r| r.p).collect();
    let snrs: Vec<f64> = deltas.iter().map(|&d| snr(&t, Method::Imat, d)).collect();
    for w in ps.windows(2) {
        assert!(w[1] >= w[0], "{ps:?}");
    }
    for w in snrs.windows(2) {
        assert!(w[1] >= w[0], "{snrs:?}");
    }
}

#[test]
fn dm_imatdm_beats_lowpass() {
    let frames = corpus(40);
    let cfg = SweepConfig {
        methods: vec![Method::Imatdm, Method::Lowpass],
        ..SweepConfig::dm_default()
    };
    let t = delta_sweep(&frames, &[0.01], &cfg).unwrap();
    assert!(
        snr(&t, Method::Imatdm, 0.01) > snr(&t, Method::Lowpass, 0.01),
        "{t}"
    );
}

#[test]
fn adm_keeps_half_and_imatdm_leads_imat_and_lowpass() {
    let frames = corpus(40);
    let adm = AdmParams::with_defaults(0.005).unwrap();
    let t = adm_benchmark(&frames, &adm, &SweepConfig::adm_default()).unwrap();
    assert_eq!(t.rows.len(), 5);
    assert!((t.rows[0].p - 0.5).abs() < 0.05, "{t}");
    let imatdm = snr(&t, Method::Imatdm, 0.005);
    assert!(imatdm >= snr(&t, Method::Imat, 0.005), "{t}");
    assert!(imatdm >= snr(&t, Method::Lowpass, 0.005), "{t}");
    assert!(imatdm >= snr(&t, Method::Omp, 0.005), "{t}");
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let frames = corpus(12);
    let cfg = SweepConfig::dm_default();
    let a = delta_sweep(&frames, &[0.005, 0.02], &cfg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let b = pool.install(|| delta_sweep(&frames, &[0.005, 0.02], &cfg).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
}
