use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sq_dist, Codebook, SampleBuffer};
use crate::error::{Error, Result};

const INIT_STREAM: u64 = 1;

pub(crate) fn count_distinct(frames: &[f32], dim: usize) -> usize {
    frames
        .chunks_exact(dim)
        .map(|row| row.iter().map(|v| v.to_bits()).collect::<Vec<u32>>())
        .collect::<HashSet<_>>()
        .len()
}

/// k-means++ seeding over the sample: the first centroid is a uniform draw,
/// each further one is drawn with probability proportional to its squared
/// distance from the nearest centroid chosen so far.
pub fn kmeanspp_init(buffer: &SampleBuffer, k: usize, seed: u64) -> Result<Codebook> {
    let n = buffer.len();
    let dim = buffer.dim();
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let insufficient = || Error::InsufficientDistinctFrames {
        needed: k,
        found: count_distinct(buffer.frames(), dim),
    };
    if n < k {
        return Err(insufficient());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);

    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(buffer.frame(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(buffer.frame(i), buffer.frame(first))).collect();

    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        if !(total > 0.0) {
            return Err(insufficient());
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in nearest.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            acc += d;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let pick = pick.ok_or_else(insufficient)?;
        let chosen = buffer.frame(pick);
        centroids.extend_from_slice(chosen);
        for (i, d) in nearest.iter_mut().enumerate() {
            let nd = sq_dist(buffer.frame(i), chosen);
            if nd < *d {
                *d = nd;
            }
        }
    }
    Codebook::new(k, dim, centroids)
}
