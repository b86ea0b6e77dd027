use super::{sq_dist, Codebook, SampleBuffer};
use crate::corpus_io::{AssignmentSeq, FeatureMatrix};
use crate::error::{Error, Result};

/// Mergeable Lloyd statistics: per-cluster sums and counts plus the summed
/// squared distance of every accumulated frame to its centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialStats {
    pub k: usize,
    pub dim: usize,
    pub sums: Vec<f64>,
    pub counts: Vec<u64>,
    pub inertia: f64,
}

impl PartialStats {
    pub fn zeros(k: usize, dim: usize) -> Self {
        PartialStats {
            k,
            dim,
            sums: vec![0.0; k * dim],
            counts: vec![0; k],
            inertia: 0.0,
        }
    }

    /// Adds one frame that is already in codebook space.
    pub fn add(&mut self, codebook: &Codebook, frame: &[f32]) {
        let (c, d) = codebook.nearest(frame);
        for (s, &v) in self.sums[c * self.dim..(c + 1) * self.dim].iter_mut().zip(frame) {
            *s += v as f64;
        }
        self.counts[c] += 1;
        self.inertia += d;
    }

    pub fn merge_from(&mut self, other: &PartialStats) -> Result<()> {
        if (other.k, other.dim) != (self.k, self.dim) {
            return Err(Error::DimMismatch {
                expected: self.k * self.dim,
                found: other.k * other.dim,
            });
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.inertia += other.inertia;
        Ok(())
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn check_dim(codebook: &Codebook, dim: usize) -> Result<()> {
    if dim != codebook.dim {
        return Err(Error::DimMismatch {
            expected: codebook.dim,
            found: dim,
        });
    }
    Ok(())
}

/// Labels every frame with its nearest centroid; returns the labels and the
/// summed squared distances.
pub fn assign_frames(codebook: &Codebook, m: &FeatureMatrix) -> Result<(AssignmentSeq, f64)> {
    check_dim(codebook, m.dim)?;
    let mut scratch = Vec::new();
    let mut inertia = 0.0;
    let labels = m
        .rows()
        .map(|row| {
            let (c, d) = codebook.nearest(codebook.project(row, &mut scratch));
            inertia += d;
            c as u32
        })
        .collect();
    Ok((
        AssignmentSeq {
            utt_id: m.utt_id.clone(),
            labels,
            codebook_size: codebook.k,
        },
        inertia,
    ))
}

/// Accumulates raw frames (normalized through the codebook if it carries a
/// normalizer). Memory is `O(k * dim)` whatever the stream length.
pub fn accumulate_partial<'a>(
    codebook: &Codebook,
    frames: impl IntoIterator<Item = &'a [f32]>,
) -> Result<PartialStats> {
    let mut stats = PartialStats::zeros(codebook.k, codebook.dim);
    let mut scratch = Vec::new();
    for f in frames {
        check_dim(codebook, f.len())?;
        let f = codebook.project(f, &mut scratch);
        stats.add(codebook, f);
    }
    Ok(stats)
}

/// Sums partials in slice order; the order is fixed so results do not depend
/// on which worker finished first.
pub fn merge_partials(parts: &[PartialStats]) -> Result<PartialStats> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Config("no partial statistics to merge".into()))?;
    let mut out = PartialStats::zeros(first.k, first.dim);
    for p in parts {
        out.merge_from(p)?;
    }
    Ok(out)
}

/// One Lloyd update. Non-empty clusters move to their mean. Each empty
/// cluster, in index order, is reseeded to the buffer frame farthest from
/// its nearest already-placed centroid (ties to the lowest frame index).
/// Returns the new codebook and the largest centroid displacement.
pub fn update_centroids(
    codebook: &Codebook,
    stats: &PartialStats,
    buffer: &SampleBuffer,
) -> Result<(Codebook, f64)> {
    if (stats.k, stats.dim) != (codebook.k, codebook.dim) {
        return Err(Error::DimMismatch {
            expected: codebook.k * codebook.dim,
            found: stats.k * stats.dim,
        });
    }
    check_dim(codebook, buffer.dim())?;
    let dim = codebook.dim;
    let mut next = codebook.clone();
    let mut placed = vec![false; codebook.k];
    for c in 0..codebook.k {
        let n = stats.counts[c];
        if n > 0 {
            let sums = &stats.sums[c * dim..(c + 1) * dim];
            for (dst, s) in next.centroids[c * dim..(c + 1) * dim].iter_mut().zip(sums) {
                *dst = (s / n as f64) as f32;
            }
            placed[c] = true;
        }
    }
    let empty: Vec<usize> = (0..codebook.k).filter(|&c| !placed[c]).collect();
    if !empty.is_empty() {
        if buffer.is_empty() {
            return Err(Error::InsufficientDistinctFrames {
                needed: codebook.k,
                found: 0,
            });
        }
        // nearest placed-centroid distance per buffer frame, kept up to date as
        // empty clusters are filled
        let mut nearest: Vec<f64> = (0..buffer.len())
            .map(|i| {
                (0..codebook.k)
                    .filter(|&c| placed[c])
                    .map(|c| sq_dist(buffer.frame(i), next.centroid(c)))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        for c in empty {
            let mut far = 0usize;
            for i in 1..nearest.len() {
                if nearest[i] > nearest[far] {
                    far = i;
                }
            }
            let frame = buffer.frame(far).to_vec();
            next.centroids[c * dim..(c + 1) * dim].copy_from_slice(&frame);
            for (i, d) in nearest.iter_mut().enumerate() {
                *d = d.min(sq_dist(buffer.frame(i), &frame));
            }
        }
    }
    let max_shift = (0..codebook.k)
        .map(|c| sq_dist(codebook.centroid(c), next.centroid(c)).sqrt())
        .fold(0.0, f64::max);
    Ok((next, max_shift))
}
