use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use super::io::{read_partial_stats, write_partial_stats};
use super::{
    accumulate_partial, kmeanspp_init, merge_partials, reservoir_positions, update_centroids,
    Codebook, FeatureKind, Normalizer, PartialStats, SampleBuffer,
};
use crate::corpus_io::FeatureMatrix;
use crate::error::{Error, Result};

/// A shard of utterances whose frame counts are known without loading them.
pub trait FrameSource: Sync {
    fn dim(&self) -> usize;
    fn utterance_count(&self) -> usize;
    fn frames_in(&self, utt: usize) -> u64;
    fn load(&self, utt: usize) -> Result<FeatureMatrix>;
}

/// In-memory [`FrameSource`]; counts loads so tests can see what was touched.
#[derive(Debug)]
pub struct MatrixSource {
    dim: usize,
    matrices: Vec<FeatureMatrix>,
    loads: AtomicUsize,
}

impl MatrixSource {
    pub fn new(dim: usize, matrices: Vec<FeatureMatrix>) -> Result<Self> {
        for m in &matrices {
            if m.dim != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: m.dim,
                });
            }
        }
        Ok(MatrixSource {
            dim,
            matrices,
            loads: AtomicUsize::new(0),
        })
    }

    pub fn loads(&self) -> usize {
        self.loads.load(Ordering::Relaxed)
    }
}

impl FrameSource for MatrixSource {
    fn dim(&self) -> usize {
        self.dim
    }

    fn utterance_count(&self) -> usize {
        self.matrices.len()
    }

    fn frames_in(&self, utt: usize) -> u64 {
        self.matrices[utt].num_frames as u64
    }

    fn load(&self, utt: usize) -> Result<FeatureMatrix> {
        self.loads.fetch_add(1, Ordering::Relaxed);
        Ok(self.matrices[utt].clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    pub k: usize,
    pub budget: usize,
    pub tol: f64,
    pub max_iter: u32,
    pub workers: usize,
    pub seed: u64,
    /// Per-dimension standardization before clustering (off by default).
    pub standardize: bool,
    pub feature_kind: FeatureKind,
    /// When set, worker partials travel through `partial-<iter>-<worker>.plps`
    /// files in this directory instead of memory.
    pub exchange_dir: Option<PathBuf>,
}

impl TrainParams {
    pub fn new(k: usize, budget: usize, seed: u64) -> Self {
        TrainParams {
            k,
            budget,
            tol: 1e-4,
            max_iter: 100,
            workers: 1,
            seed,
            standardize: false,
            feature_kind: FeatureKind::Mfcc39,
            exchange_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.budget == 0 {
            return Err(Error::Config("sample budget must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config(format!("tol must be non-negative, got {}", self.tol)));
        }
        Ok(())
    }
}

/// The sampled frames plus the shard each came from, sorted by global
/// position (shard-major, then utterance, then frame).
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub buffer: SampleBuffer,
    pub shard_of: Vec<u32>,
}

/// Iteration state; enough to resume a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydState {
    pub codebook: Codebook,
    /// Lloyd updates applied so far.
    pub iteration: u32,
    pub prev_inertia: Option<f64>,
    /// Inertia of the sample under each codebook visited, in order.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub codebook: Codebook,
    pub inertia_history: Vec<f64>,
}

fn shard_totals<S: FrameSource>(shards: &[S]) -> Vec<u64> {
    shards
        .iter()
        .map(|s| (0..s.utterance_count()).map(|u| s.frames_in(u)).sum())
        .collect()
}

fn fill_shard<S: FrameSource>(
    source: &S,
    start: u64,
    positions: &[u64],
    out: &mut [f32],
    dim: usize,
) -> Result<()> {
    let mut offset = start;
    let mut next = 0;
    for u in 0..source.utterance_count() {
        if next == positions.len() {
            break;
        }
        let n = source.frames_in(u);
        if positions[next] < offset + n {
            let m = source.load(u)?;
            if m.dim != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: m.dim,
                });
            }
            if m.num_frames as u64 != n {
                return Err(Error::InvalidRecord(format!(
                    "{}: {} frames loaded, {} announced",
                    m.utt_id, m.num_frames, n
                )));
            }
            while next < positions.len() && positions[next] < offset + n {
                let t = (positions[next] - offset) as usize;
                out[next * dim..(next + 1) * dim].copy_from_slice(m.row(t));
                next += 1;
            }
        }
        offset += n;
    }
    Ok(())
}

/// Shard index, its first global frame position, picked positions, output rows.
type ShardJob<'a> = (usize, u64, &'a [u64], &'a mut [f32]);

/// Picks `budget` frame positions uniformly over all shards before anything
/// is read, then loads only the utterances that hold a picked frame. Shards
/// are spread over `workers` threads (worker `w` takes shards `w, w+W, ...`),
/// each writing its own region of the preallocated buffer.
pub fn draw_sample<S: FrameSource>(
    shards: &[S],
    budget: usize,
    seed: u64,
    workers: usize,
) -> Result<TrainingSample> {
    if workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    // empty shards may not know their dimension
    let dim = shards
        .iter()
        .find(|s| s.utterance_count() > 0)
        .or(shards.first())
        .map(|s| s.dim())
        .ok_or_else(|| Error::Config("no shards to sample from".into()))?;
    if let Some(s) = shards.iter().find(|s| s.utterance_count() > 0 && s.dim() != dim) {
        return Err(Error::DimMismatch {
            expected: dim,
            found: s.dim(),
        });
    }
    let totals = shard_totals(shards);
    let total: u64 = totals.iter().sum();
    let mut positions = reservoir_positions(total, budget, seed);
    positions.sort_unstable();

    let mut frames = vec![0f32; positions.len() * dim];
    let mut shard_of = Vec::with_capacity(positions.len());
    let mut jobs: Vec<Vec<ShardJob>> = (0..workers).map(|_| Vec::new()).collect();
    {
        let mut rest_pos: &[u64] = &positions;
        let mut rest_frames: &mut [f32] = &mut frames;
        let mut start = 0u64;
        for (s, &n) in totals.iter().enumerate() {
            let end = start + n;
            let cnt = rest_pos.partition_point(|&p| p < end);
            let (pos, tail) = rest_pos.split_at(cnt);
            let (buf, ftail) = std::mem::take(&mut rest_frames).split_at_mut(cnt * dim);
            rest_pos = tail;
            rest_frames = ftail;
            shard_of.extend(std::iter::repeat_n(s as u32, cnt));
            if cnt > 0 {
                jobs[s % workers].push((s, start, pos, buf));
            }
            start = end;
        }
    }
    let results: Vec<Result<()>> = if workers == 1 {
        vec![jobs
            .pop()
            .unwrap()
            .into_iter()
            .try_for_each(|(s, start, pos, buf)| fill_shard(&shards[s], start, pos, buf, dim))]
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .into_iter()
                .map(|job| {
                    scope.spawn(move || {
                        job.into_iter()
                            .try_for_each(|(s, start, pos, buf)| fill_shard(&shards[s], start, pos, buf, dim))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("sampling worker panicked")).collect()
        })
    };
    results.into_iter().collect::<Result<()>>()?;

    let buffer = SampleBuffer::from_parts(budget, dim, seed, total, positions, frames)?;
    Ok(TrainingSample { buffer, shard_of })
}

fn worker_partials(
    codebook: &Codebook,
    sample: &TrainingSample,
    workers: usize,
) -> Result<Vec<PartialStats>> {
    let buffer = &sample.buffer;
    let rows = |w: usize| {
        (0..buffer.len())
            .filter(move |&i| sample.shard_of[i] as usize % workers == w)
            .map(|i| buffer.frame(i))
    };
    if workers == 1 {
        return Ok(vec![accumulate_partial(codebook, rows(0))?]);
    }
    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| scope.spawn(move || accumulate_partial(codebook, rows(w))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("lloyd worker panicked"))
            .collect()
    })
}

fn exchange(dir: &std::path::Path, iteration: u32, parts: Vec<PartialStats>) -> Result<Vec<PartialStats>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths: Vec<PathBuf> = (0..parts.len())
        .map(|w| dir.join(format!("partial-{iteration}-{w}.plps")))
        .collect();
    for (p, path) in parts.iter().zip(&paths) {
        write_partial_stats(path, p)?;
    }
    drop(parts);
    let mut merged_in = Vec::with_capacity(paths.len());
    for path in &paths {
        merged_in.push(read_partial_stats(path)?);
        std::fs::remove_file(path).map_err(|e| Error::io(path, e))?;
    }
    Ok(merged_in)
}

/// Lloyd iterations over a drawn sample. Worker `w` reduces the rows whose
/// shard index is `w` mod `workers`; partials are merged in worker order.
/// Stops when the relative inertia improvement falls below `tol` or after
/// `max_iter` updates. `observer` sees the state after every update.
pub fn fit_sample(
    mut sample: TrainingSample,
    params: &TrainParams,
    resume: Option<LloydState>,
    observer: &mut dyn FnMut(&LloydState) -> Result<()>,
) -> Result<FitResult> {
    params.validate()?;
    if sample.shard_of.len() != sample.buffer.len() {
        return Err(Error::LengthMismatch {
            left: sample.shard_of.len(),
            right: sample.buffer.len(),
        });
    }
    let dim = sample.buffer.dim();
    let normalizer = if params.standardize {
        let n = Normalizer::fit(sample.buffer.frames(), dim);
        n.apply_in_place(sample.buffer.frames_mut());
        Some(n)
    } else {
        None
    };

    let mut state = match resume {
        Some(s) => {
            if (s.codebook.k, s.codebook.dim) != (params.k, dim) {
                return Err(Error::DimMismatch {
                    expected: params.k * dim,
                    found: s.codebook.k * s.codebook.dim,
                });
            }
            s
        }
        None => LloydState {
            codebook: kmeanspp_init(&sample.buffer, params.k, params.seed)?,
            iteration: 0,
            prev_inertia: None,
            history: Vec::new(),
        },
    };
    // iterate in normalized space; the normalizer is attached at the end
    state.codebook.normalizer = None;

    let final_inertia = loop {
        let parts = worker_partials(&state.codebook, &sample, params.workers)?;
        let parts = match &params.exchange_dir {
            Some(dir) => exchange(dir, state.iteration, parts)?,
            None => parts,
        };
        let merged = merge_partials(&parts)?;
        let cur = merged.inertia;
        if state.history.len() <= state.iteration as usize {
            state.history.push(cur);
        }
        let converged = match state.prev_inertia {
            Some(prev) => prev <= 0.0 || (prev - cur) / prev < params.tol,
            None => cur == 0.0,
        };
        if converged || state.iteration >= params.max_iter {
            break cur;
        }
        let (next, _shift) = update_centroids(&state.codebook, &merged, &sample.buffer)?;
        state.codebook = next;
        state.iteration += 1;
        state.prev_inertia = Some(cur);
        let mut shown = state.clone();
        shown.codebook.normalizer = normalizer.clone();
        observer(&shown)?;
    };

    let mut codebook = state.codebook;
    codebook.normalizer = normalizer;
    codebook.provenance.feature_kind = params.feature_kind;
    codebook.provenance.seed = params.seed;
    codebook.provenance.sample_budget = params.budget as u64;
    codebook.provenance.final_inertia = final_inertia;
    codebook.provenance.iterations_run = state.iteration;
    Ok(FitResult {
        codebook,
        inertia_history: state.history,
    })
}

/// Samples, seeds and fits a codebook over `shards`.
pub fn train_kmeans<S: FrameSource>(shards: &[S], params: &TrainParams) -> Result<Codebook> {
    params.validate()?;
    let sample = draw_sample(shards, params.budget, params.seed, params.workers)?;
    Ok(fit_sample(sample, params, None, &mut |_| Ok(()))?.codebook)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn source(utts: &[Vec<[f32; 2]>]) -> MatrixSource {
        let ms = utts
            .iter()
            .enumerate()
            .map(|(i, u)| {
                FeatureMatrix::new(format!("u{i}"), u.len(), 2, u.iter().flatten().copied().collect()).unwrap()
            })
            .collect();
        MatrixSource::new(2, ms).unwrap()
    }

    #[test]
    fn sample_matches_positions_and_skips_untouched_utterances() {
        // 50 utterances of 10 frames; frame value encodes its global position
        let shards: Vec<MatrixSource> = (0..2)
            .map(|s| {
                source(
                    &(0..25)
                        .map(|u| (0..10).map(|t| [(s * 250 + u * 10 + t) as f32, 0.0]).collect())
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        let sample = draw_sample(&shards, 7, 42, 2).unwrap();
        let b = &sample.buffer;
        assert_eq!(b.len(), 7);
        assert_eq!(b.seen(), 500);
        for i in 0..b.len() {
            assert_eq!(b.frame(i)[0] as u64, b.positions()[i]);
            assert_eq!(sample.shard_of[i], (b.positions()[i] / 250) as u32);
        }
        let loads: usize = shards.iter().map(|s| s.loads()).sum();
        assert!(loads <= 7);
        let mut want = reservoir_positions(500, 7, 42);
        want.sort_unstable();
        assert_eq!(b.positions(), &want[..]);
    }

    #[test]
    fn worker_count_does_not_change_the_sample() {
        let shards: Vec<MatrixSource> = (0..3)
            .map(|s| source(&[(0..40).map(|t| [s as f32, t as f32]).collect()]))
            .collect();
        let a = draw_sample(&shards, 30, 5, 1).unwrap();
        let b = draw_sample(&shards, 30, 5, 3).unwrap();
        assert_eq!(a.buffer.frames(), b.buffer.frames());
        assert_eq!(a.shard_of, b.shard_of);
    }

    #[test]
    fn k_equal_distinct_points_gives_zero_inertia() {
        let pts = [[0.0, 0.0], [4.0, 1.0], [-3.0, 2.0]];
        let shards = vec![source(&[pts.repeat(5)])];
        let cb = train_kmeans(&shards, &TrainParams::new(3, 100, 1)).unwrap();
        assert_eq!(cb.provenance.final_inertia, 0.0);
    }

    #[test]
    fn degenerate_corpus_is_a_numeric_error() {
        let shards = vec![source(&[vec![[1.0, 1.0]; 20]])];
        let err = train_kmeans(&shards, &TrainParams::new(2, 100, 1)).unwrap_err();
        assert!(matches!(err, Error::InsufficientDistinctFrames { needed: 2, found: 1 }));
    }

    #[test]
    fn resume_reproduces_uninterrupted_fit() {
        let pts: Vec<[f32; 2]> = (0..300).map(|i| [((i * 37) % 101) as f32, ((i * 53) % 97) as f32]).collect();
        let shards = vec![source(&[pts[..150].to_vec()]), source(&[pts[150..].to_vec()])];
        let mut params = TrainParams::new(5, 200, 9);
        params.workers = 2;
        params.tol = 0.0;
        params.max_iter = 12;
        let sample = draw_sample(&shards, params.budget, params.seed, 2).unwrap();
        let mut states = Vec::new();
        let full = fit_sample(sample.clone(), &params, None, &mut |s| {
            states.push(s.clone());
            Ok(())
        })
        .unwrap();
        let mid = states[3].clone();
        let resumed = fit_sample(sample, &params, Some(mid), &mut |_| Ok(())).unwrap();
        assert_eq!(resumed.codebook, full.codebook);
        assert_eq!(resumed.inertia_history, full.inertia_history);
    }

    #[test]
    fn standardized_codebook_labels_raw_frames() {
        let mut pts = Vec::new();
        for i in 0..40 {
            pts.push([1000.0 + (i % 5) as f32, (i % 3) as f32 * 0.01]);
            pts.push([-1000.0 + (i % 5) as f32, 1.0 + (i % 3) as f32 * 0.01]);
        }
        let shards = vec![source(&[pts.clone()])];
        let mut params = TrainParams::new(2, 1000, 3);
        params.standardize = true;
        let cb = train_kmeans(&shards, &params).unwrap();
        assert!(cb.normalizer.is_some());
        let m = FeatureMatrix::new("x", 2, 2, vec![1002.0, 0.0, -998.0, 1.0]).unwrap();
        let (seq, _) = super::super::assign_frames(&cb, &m).unwrap();
        assert_ne!(seq.labels[0], seq.labels[1]);
    }
}
