//! MFCC checked against a frozen reference computed by torchaudio's
//! Kaldi-compatible implementation, plus closed-form cases.

use std::path::{Path, PathBuf};

use pseudolabel::features::{add_deltas, frame_count, MfccExtractor, BASE_DIM, FULL_DIM};
use pseudolabel::{read_wav, MfccConfig, WaveRecord};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn reference() -> (usize, usize, Vec<f64>) {
    let text = std::fs::read_to_string(data("sine440_mfcc13.txt")).unwrap();
    let mut lines = text.lines();
    let header: Vec<usize> = lines.next().unwrap()[1..]
        .split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect();
    let vals = lines
        .flat_map(|l| l.split_whitespace().map(|v| v.parse::<f64>().unwrap()))
        .collect();
    (header[0], header[1], vals)
}

#[test]
fn sine_matches_reference_within_1e3() {
    let (t, d, want) = reference();
    let wave = read_wav(data("sine440_pcm16.wav")).unwrap();
    let ex = MfccExtractor::new(MfccConfig::default()).unwrap();
    let got = ex.mfcc(&wave).unwrap();
    assert_eq!((got.num_frames, got.dim), (t, d));
    let worst = got
        .values
        .iter()
        .zip(&want)
        .map(|(&a, &b)| (a as f64 - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "max abs deviation {worst}");
}

#[test]
fn zero_signal_closed_form() {
    let cfg = MfccConfig::default();
    let ex = MfccExtractor::new(cfg.clone()).unwrap();
    let m = ex.mfcc39(&WaveRecord::new("z", 16_000, vec![0.0; 16_000]).unwrap()).unwrap();
    assert_eq!(m.num_frames, 98);
    let c0 = (cfg.num_mel_bins as f64).sqrt() * cfg.log_floor.ln();
    for row in m.rows() {
        assert!((row[0] as f64 - c0).abs() < 1e-5, "c0 = {}", row[0]);
        assert!(row[1..BASE_DIM].iter().all(|&v| v == 0.0));
        assert!(row[BASE_DIM..FULL_DIM].iter().all(|&v| v == 0.0));
    }
}

#[test]
fn constant_signal_deltas_are_zero() {
    let ex = MfccExtractor::new(MfccConfig::default()).unwrap();
    for level in [0.25f32, -0.5, 1.0] {
        let m = ex.mfcc39(&WaveRecord::new("c", 16_000, vec![level; 8000]).unwrap()).unwrap();
        assert!(m.num_frames > 0);
        for row in m.rows() {
            assert!(row[BASE_DIM..].iter().all(|&v| v == 0.0), "level {level}");
        }
    }
}

#[test]
fn frame_counts() {
    let c = MfccConfig::default();
    assert_eq!(frame_count(400, &c), 1);
    assert_eq!(frame_count(399, &c), 0);
    assert_eq!(frame_count(16_000, &c), 98);
}

#[test]
fn full_features_are_cepstra_plus_deltas() {
    let wave = read_wav(data("corpus/synth05.wav")).unwrap();
    let ex = MfccExtractor::new(MfccConfig::default()).unwrap();
    let base = ex.mfcc(&wave).unwrap();
    let full = ex.mfcc39(&wave).unwrap();
    let batch = add_deltas(&base, 2).unwrap();
    assert_eq!(full.values, batch.values);
}
