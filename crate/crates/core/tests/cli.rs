use std::path::Path;
use std::process::{Command, Output};

use dmsparse::codec::{dm_encode, read_bitstream};
use dmsparse::harness::{load_wav, write_wav, ReportTable, WavFormat};
use dmsparse::signal::Frame;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmsparse"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn tone_wav(path: &Path, n: usize) -> Vec<f64> {
    let xs: Vec<f64> = (0..n)
        .map(|i| 0.2 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 48_000.0).sin())
        .collect();
    write_wav(path, &xs, 48_000, WavFormat::Float32).unwrap();
    xs.iter().map(|&v| v as f32 as f64).collect()
}

#[test]
fn encode_matches_library_and_decode_writes_staircase() {
    let dir = tempfile::tempdir().unwrap();
    let xs = tone_wav(&dir.path().join("in.wav"), 2000);
    let o = run(
        &[
            "encode", "--in", "in.wav", "--out", "in.dmbs", "--delta", "0.02",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{o:?}");
    let bits = read_bitstream(dir.path().join("in.dmbs")).unwrap();
    let (want, stair) = dm_encode(&Frame::from_samples(xs).unwrap(), 0.02).unwrap();
    assert_eq!(bits, want);

    let o = run(
        &["decode", "--in", "in.dmbs", "--out", "out.wav"],
        dir.path(),
    );
    assert!(o.status.success(), "{o:?}");
    let audio = load_wav(&dir.path().join("out.wav")).unwrap();
    assert_eq!(audio.sample_rate, 48_000.0);
    for (a, b) in audio.samples.iter().zip(stair.values()) {
        assert_eq!(*a, *b as f32 as f64);
    }
}

#[test]
fn adm_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    tone_wav(&dir.path().join("in.wav"), 1500);
    let o = run(
        &[
            "encode", "--in", "in.wav", "--out", "a.dmbs", "--adm", "--delta", "0.005",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{o:?}");
    assert!(read_bitstream(dir.path().join("a.dmbs"))
        .unwrap()
        .is_adaptive());
    let o = run(&["decode", "--in", "a.dmbs", "--out", "a.wav"], dir.path());
    assert!(o.status.success(), "{o:?}");
}

#[test]
fn reconstruct_reports_snr() {
    let dir = tempfile::tempdir().unwrap();
    tone_wav(&dir.path().join("in.wav"), 960 * 2 + 100);
    let o = run(
        &[
            "reconstruct",
            "--in",
            "in.wav",
            "--out",
            "r.wav",
            "--method",
            "lowpass",
            "--delta",
            "0.005",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("2 frames"));
    // The trailing partial frame is dropped.
    assert_eq!(
        load_wav(&dir.path().join("r.wav")).unwrap().samples.len(),
        1920
    );
}

#[test]
fn sweep_over_wav_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("corpus")).unwrap();
    tone_wav(&dir.path().join("corpus/a.wav"), 960 * 3);
    tone_wav(&dir.path().join("corpus/b.wav"), 960);
    let o = run(
        &[
            "sweep",
            "--in",
            "corpus",
            "--deltas",
            "0.01",
            "--methods",
            "imat,lowpass",
            "--format",
            "json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{o:?}");
    let report = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "json"))
        .unwrap();
    assert!(report
        .file_name()
        .unwrap()
        .to_string_lossy()
        .starts_with("sweep-"));
    let t = ReportTable::from_json(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert!(t.rows.iter().all(|r| r.frames == 4));
}

#[test]
fn config_hash_tracks_settings() {
    let dir = tempfile::tempdir().unwrap();
    let name = |extra: &[&str]| {
        let mut args = vec![
            "sweep",
            "--frames",
            "3",
            "--deltas",
            "0.01",
            "--methods",
            "lowpass",
        ];
        args.extend_from_slice(extra);
        let o = run(&args, dir.path());
        assert!(o.status.success(), "{o:?}");
        stdout(&o).lines().last().unwrap().to_string()
    };
    let a = name(&[]);
    let b = name(&["--seed", "1"]);
    let c = name(&["--jobs", "1"]);
    assert_ne!(a, b);
    assert_eq!(a, c);
}

#[test]
fn dump_config_runs_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["--dump-config", "sweep", "--deltas", "0.01,0.02"],
        dir.path(),
    );
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["deltas"], serde_json::json!([0.01, 0.02]));
    assert_eq!(v["config"]["success_threshold_db"], 15.0);
    assert_eq!(v["config"]["recon"]["imat"]["lambda"], 1.0);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);

    let o = run(&["adm-bench", "--dump-config"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["config"]["success_threshold_db"], 20.0);
    assert_eq!(v["adm"]["growth"], 1.5);
}

#[test]
fn help_shows_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let h = stdout(&run(&["sweep", "--help"], dir.path()));
    for want in [
        "[default: 0.001,0.005,0.01,0.02,0.03]",
        "[default: imatdm,imat,omp,lasso,lowpass]",
        "[default: 15]",
        "[default: 200]",
        "[default: 1]",
        "[default: -0.1]",
        "[default: 0.9]",
        "[default: 100]",
        "[default: 2]",
        "[default: 3300]",
        "[default: 255]",
    ] {
        assert!(h.contains(want), "sweep help lacks {want}");
    }
    let h = stdout(&run(&["adm-bench", "--help"], dir.path()));
    assert!(h.contains("[default: 20]") && h.contains("[default: 1.5]"));
    let h = stdout(&run(&["validate-theory", "--help"], dir.path()));
    assert!(h.contains("[default: 100000]") && h.contains("[default: 64]"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| run(args, dir.path()).status.code().unwrap();
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["sweep", "--methods", "fft"]), 2);
    assert_eq!(code(&["sweep", "--lambda", "0"]), 2);
    assert_eq!(code(&["sweep", "--alpha", "0.1"]), 2);
    assert_eq!(code(&["sweep", "--smoothing-len", "3"]), 2);
    assert_eq!(
        code(&["validate-theory", "--lambda", "4.5", "--p", "0.5"]),
        2
    );
    assert_eq!(
        code(&["encode", "--in", "missing.wav", "--out", "x.dmbs"]),
        3
    );
    std::fs::write(dir.path().join("junk.dmbs"), b"not a bitstream at all").unwrap();
    assert_eq!(code(&["decode", "--in", "junk.dmbs", "--out", "x.wav"]), 3);
    assert_eq!(
        code(&[
            "validate-theory",
            "--trials",
            "100",
            "--max-rel-error",
            "1e-9"
        ]),
        4
    );
    assert_eq!(code(&["--jobs", "0", "synth", "--out", "s.wav"]), 2);
}

#[test]
fn validate_theory_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "validate-theory",
            "--trials",
            "5000",
            "--seed",
            "3",
            "--out",
            "v.csv",
            "--max-rel-error",
            "0.1",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(dir.path().join("v.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "quantity,predicted,empirical,rel_error,trials,seed"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("bin_variance,0.330000,"));
}

#[test]
fn synth_writes_frames() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "synth", "--out", "s.wav", "--frames", "5", "--detune", "0.5",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{o:?}");
    assert_eq!(
        load_wav(&dir.path().join("s.wav")).unwrap().samples.len(),
        4800
    );
}
