use crate::clustering::{FeatureKind, FrameSource};
use crate::corpus_io::{probe_matrix_header, read_ark_matrix, read_wav_as, FeatureMatrix, ManifestEntry};
use crate::error::{Error, Result};
use crate::features::{frame_count, MfccConfig, MfccExtractor, FULL_DIM};

/// Where frames come from: MFCC computed on the fly from WAV entries, or
/// float matrices exported from another model's layer.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSource {
    MfccFromWav(MfccConfig),
    PrecomputedArk { layer_index: u32 },
}

impl FeatureSource {
    pub fn feature_kind(&self) -> FeatureKind {
        match self {
            FeatureSource::MfccFromWav(_) => FeatureKind::Mfcc39,
            FeatureSource::PrecomputedArk { layer_index } => FeatureKind::External {
                layer_index: *layer_index,
            },
        }
    }
}

/// Loads features for a list of manifest entries on demand.
#[derive(Debug)]
pub struct ManifestSource {
    entries: Vec<ManifestEntry>,
    extractor: Option<MfccExtractor>,
    dim: usize,
}

impl ManifestSource {
    /// For archive input the dimension is read from the first record header
    /// (0 for an empty list).
    pub fn new(entries: Vec<ManifestEntry>, source: &FeatureSource) -> Result<Self> {
        let dim = match (source, entries.first()) {
            (FeatureSource::MfccFromWav(_), _) => FULL_DIM,
            (FeatureSource::PrecomputedArk { .. }, Some(e)) => probe_matrix_header(e)?.1,
            (FeatureSource::PrecomputedArk { .. }, None) => 0,
        };
        Self::with_dim(entries, source, dim)
    }

    /// Archive matrices of any other width are rejected on load.
    pub fn with_dim(entries: Vec<ManifestEntry>, source: &FeatureSource, dim: usize) -> Result<Self> {
        match source {
            FeatureSource::MfccFromWav(cfg) => {
                if dim != FULL_DIM {
                    return Err(Error::DimMismatch {
                        expected: dim,
                        found: FULL_DIM,
                    });
                }
                Ok(ManifestSource {
                    entries,
                    extractor: Some(MfccExtractor::new(cfg.clone())?),
                    dim,
                })
            }
            FeatureSource::PrecomputedArk { .. } => Ok(ManifestSource {
                entries,
                extractor: None,
                dim,
            }),
        }
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    /// Features for one entry, checked against the announced frame count.
    pub fn features(&self, entry: &ManifestEntry) -> Result<FeatureMatrix> {
        match &self.extractor {
            Some(ex) => {
                let wave = read_wav_as(&entry.source_path, entry.utt_id.clone())?;
                ex.mfcc39(&wave)
            }
            None => {
                let m = read_ark_matrix(entry)?;
                if m.dim != self.dim {
                    return Err(Error::DimMismatch {
                        expected: self.dim,
                        found: m.dim,
                    });
                }
                Ok(m)
            }
        }
    }
}

impl FrameSource for ManifestSource {
    fn dim(&self) -> usize {
        self.dim
    }

    fn utterance_count(&self) -> usize {
        self.entries.len()
    }

    fn frames_in(&self, utt: usize) -> u64 {
        let e = &self.entries[utt];
        match &self.extractor {
            Some(ex) => frame_count(e.length as usize, ex.config()) as u64,
            None => e.length,
        }
    }

    fn load(&self, utt: usize) -> Result<FeatureMatrix> {
        self.features(&self.entries[utt])
    }
}
