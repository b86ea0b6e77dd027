//! Audio and archive I/O: WAV decoding, Kaldi-convention binary archives
//! (float matrices and int vectors) with their scp indices, and corpus
//! manifests split across workers.

mod ark;
mod manifest;
mod wav;

pub use ark::{
    probe_matrix_header, read_ark_ints, read_ark_matrix, ArkReader, ArkRecord, ArkWriter,
};
pub use manifest::{
    load_ark_manifest, load_wav_manifest, parse_scp, shard_manifest, write_scp, ManifestEntry,
    ShardManifest,
};
pub(crate) use wav::read_wav_as;
pub use wav::{probe_wav, read_wav, write_wav_f32, write_wav_pcm16, WavEncoding, WavInfo, WavReader};

use crate::error::{Error, Result};

/// A decoded mono utterance with samples normalized to `[-1.0, 1.0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveRecord {
    pub utt_id: String,
    pub sample_rate: u32,
    pub samples: Vec<f32>,
}

impl WaveRecord {
    pub fn new(utt_id: impl Into<String>, sample_rate: u32, samples: Vec<f32>) -> Result<Self> {
        let rec = WaveRecord {
            utt_id: utt_id.into(),
            sample_rate,
            samples,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        validate_key(&self.utt_id)?;
        if self.sample_rate == 0 {
            return Err(Error::InvalidRecord("sample rate must be positive".into()));
        }
        if let Some(v) = self.samples.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::InvalidRecord(format!(
                "sample {v} of {} outside [-1, 1]",
                self.utt_id
            )));
        }
        Ok(())
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Per-utterance `T x D` frame features, row-major.
///
/// `frame_shift` is in-memory metadata only; it is not part of the archive
/// payload and reads back as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub utt_id: String,
    pub num_frames: usize,
    pub dim: usize,
    pub frame_shift: Option<f32>,
    pub values: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(
        utt_id: impl Into<String>,
        num_frames: usize,
        dim: usize,
        values: Vec<f32>,
    ) -> Result<Self> {
        let m = FeatureMatrix {
            utt_id: utt_id.into(),
            num_frames,
            dim,
            frame_shift: None,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_frame_shift(mut self, shift: f32) -> Self {
        self.frame_shift = Some(shift);
        self
    }

    pub fn validate(&self) -> Result<()> {
        validate_key(&self.utt_id)?;
        if self.dim == 0 {
            return Err(Error::InvalidRecord(format!("{}: dim must be positive", self.utt_id)));
        }
        if self.values.len() != self.num_frames * self.dim {
            return Err(Error::InvalidRecord(format!(
                "{}: {} values for a {}x{} matrix",
                self.utt_id,
                self.values.len(),
                self.num_frames,
                self.dim
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord(format!("{}: non-finite value", self.utt_id)));
        }
        Ok(())
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.values.chunks_exact(self.dim)
    }
}

/// Cluster labels for one utterance; every label lies in `[0, codebook_size)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentSeq {
    pub utt_id: String,
    pub labels: Vec<u32>,
    pub codebook_size: usize,
}

impl AssignmentSeq {
    pub fn new(utt_id: impl Into<String>, labels: Vec<u32>, codebook_size: usize) -> Result<Self> {
        let seq = AssignmentSeq {
            utt_id: utt_id.into(),
            labels,
            codebook_size,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        validate_key(&self.utt_id)?;
        if let Some(&l) = self.labels.iter().find(|&&l| l as usize >= self.codebook_size) {
            return Err(Error::LabelOutOfRange {
                label: l as i64,
                k: self.codebook_size,
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub(crate) fn validate_key(key: &str) -> Result<()> {
    if key.is_empty() {
        return Err(Error::InvalidRecord("empty utterance id".into()));
    }
    if key.chars().any(char::is_whitespace) {
        return Err(Error::InvalidRecord(format!("utterance id {key:?} contains whitespace")));
    }
    Ok(())
}
