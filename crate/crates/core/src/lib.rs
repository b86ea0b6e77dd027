//! Pseudo-label generation for HuBERT-style self-supervised speech pre-training.
//!
//! The pipeline turns audio (or exported hidden representations) into integer
//! cluster targets while keeping memory and storage bounded:
//!
//! * [`corpus_io`]: WAV decoding, Kaldi binary ark/scp archives, manifest sharding.
//! * [`features`]: deterministic streaming 39-dimensional MFCC extraction.
//! * [`clustering`]: sample-before-load k-means with worker-parallel Lloyd iterations.
//! * [`labeling`]: fused feature extraction and cluster assignment; only labels hit disk.
//! * [`batching`]: numel-style batch bins, masked-span targets, gradient accumulation.
//! * [`metrics`]: SUPERB score aggregation.
//! * [`pipeline`]: config-file driven orchestration used by the command-line tool.

pub mod batching;
pub mod clustering;
pub mod corpus_io;
mod error;
pub mod features;
pub mod labeling;
pub mod metrics;
pub mod pipeline;

pub use crate::batching::{
    accum_plan, masked_accuracy, plan_batches, sample_masks, AccumPlan, BatchPlan, MaskSet,
    MaskSpec, OrderPolicy, PayloadUnit,
};
pub use crate::clustering::{
    kmeanspp_init, train_kmeans, Codebook, FeatureKind, FrameSource, PartialStats, Provenance,
    SampleBuffer, TrainParams,
};
pub use crate::corpus_io::{
    read_wav, shard_manifest, AssignmentSeq, FeatureMatrix, ManifestEntry, ShardManifest,
    WaveRecord,
};
pub use crate::error::{Error, ErrorKind, Result};
pub use crate::features::{extract_mfcc39, MfccConfig, MfccExtractor};
pub use crate::labeling::{cluster_diagnostics, label_corpus, Diagnostics, FeatureSource, LabelReport};
pub use crate::metrics::{superb_score, SuperbRow};

/// Version string recorded into every provenance block.
pub const TOOL_VERSION: &str = concat!("pseudolabel ", env!("CARGO_PKG_VERSION"));
