use super::sq_dist;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Mfcc39,
    /// Hidden representations exported from layer `layer_index` of another model.
    External { layer_index: u32 },
}

/// How a codebook was produced. `notes` holds free-form `key = value` lines
/// (feature config, config hash, tool version).
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub feature_kind: FeatureKind,
    pub seed: u64,
    pub sample_budget: u64,
    pub final_inertia: f64,
    pub iterations_run: u32,
    pub notes: String,
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance {
            feature_kind: FeatureKind::Mfcc39,
            seed: 0,
            sample_budget: 0,
            final_inertia: 0.0,
            iterations_run: 0,
            notes: String::new(),
        }
    }
}

impl Provenance {
    pub fn to_text(&self) -> String {
        let kind = match self.feature_kind {
            FeatureKind::Mfcc39 => "mfcc39".to_string(),
            FeatureKind::External { layer_index } => format!("external(layer {layer_index})"),
        };
        let mut s = format!(
            "feature_kind = {kind}\nseed = {}\nsample_budget = {}\nfinal_inertia = {}\niterations_run = {}\n",
            self.seed, self.sample_budget, self.final_inertia, self.iterations_run
        );
        s.push_str(&self.notes);
        if !s.ends_with('\n') {
            s.push('\n');
        }
        s
    }
}

/// Per-dimension standardization `x' = (x - mean) * scale` applied before
/// distances are measured.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f32>,
    pub scale: Vec<f32>,
}

impl Normalizer {
    /// Fits mean and inverse standard deviation over row-major `frames`;
    /// constant dimensions get scale 1.
    pub fn fit(frames: &[f32], dim: usize) -> Normalizer {
        let n = (frames.len() / dim).max(1) as f64;
        let mut mean = vec![0.0f64; dim];
        for row in frames.chunks_exact(dim) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0f64; dim];
        for row in frames.chunks_exact(dim) {
            for ((s, &v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v as f64 - m).powi(2);
            }
        }
        let scale = var
            .iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    (1.0 / sd) as f32
                } else {
                    1.0
                }
            })
            .collect();
        Normalizer {
            mean: mean.into_iter().map(|m| m as f32).collect(),
            scale,
        }
    }

    pub fn apply_into(&self, frame: &[f32], out: &mut [f32]) {
        for (((o, &x), m), s) in out.iter_mut().zip(frame).zip(&self.mean).zip(&self.scale) {
            *o = (x - m) * s;
        }
    }

    pub fn apply_in_place(&self, frames: &mut [f32]) {
        let dim = self.mean.len();
        for row in frames.chunks_exact_mut(dim) {
            for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *x = (*x - m) * s;
            }
        }
    }
}

/// `k` centroids of dimension `dim`, row-major. Frames are assigned to the
/// nearest centroid by squared Euclidean distance, ties to the lower index.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub k: usize,
    pub dim: usize,
    pub centroids: Vec<f32>,
    pub normalizer: Option<Normalizer>,
    pub provenance: Provenance,
}

impl Codebook {
    pub fn new(k: usize, dim: usize, centroids: Vec<f32>) -> Result<Self> {
        let cb = Codebook {
            k,
            dim,
            centroids,
            normalizer: None,
            provenance: Provenance::default(),
        };
        cb.validate()?;
        Ok(cb)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.dim == 0 {
            return Err(Error::InvalidRecord(format!("codebook shape {}x{}", self.k, self.dim)));
        }
        if self.centroids.len() != self.k * self.dim {
            return Err(Error::InvalidRecord(format!(
                "{} centroid values for a {}x{} codebook",
                self.centroids.len(),
                self.k,
                self.dim
            )));
        }
        if self.centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord("non-finite centroid".into()));
        }
        if let Some(n) = &self.normalizer {
            if n.mean.len() != self.dim || n.scale.len() != self.dim {
                return Err(Error::InvalidRecord("normalizer dimension differs from codebook".into()));
            }
        }
        Ok(())
    }

    pub fn centroid(&self, c: usize) -> &[f32] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    /// Nearest centroid for a frame already in codebook space.
    pub fn nearest(&self, frame: &[f32]) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for (c, centroid) in self.centroids.chunks_exact(self.dim).enumerate() {
            let d = sq_dist(frame, centroid);
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    }

    /// Maps a raw frame into codebook space (identity without a normalizer).
    pub(crate) fn project<'a>(&self, frame: &'a [f32], scratch: &'a mut Vec<f32>) -> &'a [f32] {
        match &self.normalizer {
            None => frame,
            Some(n) => {
                scratch.resize(self.dim, 0.0);
                n.apply_into(frame, scratch);
                scratch
            }
        }
    }
}
