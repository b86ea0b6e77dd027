//! Deterministic 39-dimensional MFCC features: 13 cepstra plus first and
//! second regression deltas, computed frame by frame from streamed samples.

mod config;
mod delta;
mod mfcc;

pub use config::{MfccConfig, WindowKind};
pub(crate) use config::{parse_key_values, parse_num};
pub use delta::{add_deltas, BASE_DIM, FULL_DIM};
pub use mfcc::{
    dct_matrix, extract_mfcc39, frame_count, mel_scale, CepstraStream, Mfcc39Stream, MfccExtractor,
};
