//! Memory-bounded k-means for pseudo-label codebooks.
//!
//! Training never holds more than the sample budget of frames: positions are
//! drawn by reservoir sampling over frame counts known from the manifest, and
//! only the utterances that contribute a sampled frame are ever loaded. Lloyd
//! iterations then run over the sample, split across workers by shard, each
//! worker reducing its frames to [`PartialStats`] that the coordinator merges
//! in worker order.

mod codebook;
mod init;
mod io;
mod lloyd;
mod reservoir;
mod train;

pub use codebook::{Codebook, FeatureKind, Normalizer, Provenance};
pub use init::kmeanspp_init;
pub use io::{
    read_checkpoint, read_codebook, read_partial_stats, read_sample, write_checkpoint,
    write_codebook, write_partial_stats, write_sample,
};
pub use lloyd::{
    accumulate_partial, assign_frames, merge_partials, update_centroids, PartialStats,
};
pub use reservoir::{reservoir_positions, reservoir_sample, SampleBuffer};
pub use train::{
    draw_sample, fit_sample, train_kmeans, FitResult, FrameSource, LloydState, MatrixSource,
    TrainParams, TrainingSample,
};

pub(crate) fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}
