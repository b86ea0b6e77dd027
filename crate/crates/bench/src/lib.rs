//! Deterministic inputs for the benchmarks.

use pseudolabel::{kmeanspp_init, Codebook, FeatureMatrix, SampleBuffer, WaveRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `frames x dim` uniform features in [-1, 1).
pub fn features(frames: usize, dim: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..frames * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    FeatureMatrix::new("bench", frames, dim, values).unwrap()
}

/// A k-means++ codebook drawn from random frames.
pub fn codebook(k: usize, dim: usize, seed: u64) -> Codebook {
    let m = features(k * 20, dim, seed);
    let mut buf = SampleBuffer::new(k * 20, dim, seed).unwrap();
    for row in m.rows() {
        buf.offer(row).unwrap();
    }
    kmeanspp_init(&buf, k, seed).unwrap()
}

/// Noisy chirp, `secs` long at 16 kHz.
pub fn waveform(secs: f64, seed: u64) -> WaveRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (secs * 16_000.0) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f32 / 16_000.0;
            0.5 * (2.0 * std::f32::consts::PI * (200.0 + 300.0 * t) * t).sin() + rng.random_range(-0.05..0.05)
        })
        .collect();
    WaveRecord::new("bench", 16_000, samples).unwrap()
}

/// `(utt_id, samples)` pairs spanning 1 to 35 seconds of 16 kHz audio.
pub fn lengths(n: usize, seed: u64) -> Vec<(String, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| (format!("utt{i:06}"), rng.random_range(16_000..=560_000))).collect()
}
