use std::collections::VecDeque;

use crate::corpus_io::FeatureMatrix;
use crate::error::{Error, Result};

pub const BASE_DIM: usize = 13;
pub const FULL_DIM: usize = 3 * BASE_DIM;

/// Regression slope over offsets `-w..=w`; `frame(o)` yields the frame at
/// offset `o` from the centre. Shared by the batch and streaming paths so both
/// produce identical bits.
fn regress<'a>(frame: impl Fn(isize) -> &'a [f32], w: usize, out: &mut [f32]) {
    let denom: f64 = 2.0 * (1..=w).map(|n| (n * n) as f64).sum::<f64>();
    for (d, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0f64;
        for n in 1..=w as isize {
            acc += n as f64 * (frame(n)[d] as f64 - frame(-n)[d] as f64);
        }
        *o = (acc / denom) as f32;
    }
}

fn deltas_of(frames: &[f32], dim: usize, w: usize) -> Vec<f32> {
    let t_len = frames.len() / dim;
    let mut out = vec![0.0f32; frames.len()];
    for t in 0..t_len {
        let at = |o: isize| {
            let idx = (t as isize + o).clamp(0, t_len as isize - 1) as usize;
            &frames[idx * dim..(idx + 1) * dim]
        };
        regress(at, w, &mut out[t * dim..(t + 1) * dim]);
    }
    out
}

/// Appends first- and second-order regression deltas (window `+/-w`, edge
/// frames replicated) to a `T x 13` cepstral matrix, giving `T x 39`.
pub fn add_deltas(m: &FeatureMatrix, w: usize) -> Result<FeatureMatrix> {
    if m.dim != BASE_DIM {
        return Err(Error::DimMismatch {
            expected: BASE_DIM,
            found: m.dim,
        });
    }
    if w == 0 {
        return Err(Error::Config("delta window must be at least 1".into()));
    }
    let d1 = deltas_of(&m.values, BASE_DIM, w);
    let d2 = deltas_of(&d1, BASE_DIM, w);
    let mut values = Vec::with_capacity(m.num_frames * FULL_DIM);
    for t in 0..m.num_frames {
        let r = t * BASE_DIM..(t + 1) * BASE_DIM;
        values.extend_from_slice(&m.values[r.clone()]);
        values.extend_from_slice(&d1[r.clone()]);
        values.extend_from_slice(&d2[r]);
    }
    Ok(FeatureMatrix {
        utt_id: m.utt_id.clone(),
        num_frames: m.num_frames,
        dim: FULL_DIM,
        frame_shift: m.frame_shift,
        values,
    })
}

/// Streaming delta computation with a lag of `w` frames. Holds at most
/// `2w + 1` frames.
pub(crate) struct DeltaStage {
    dim: usize,
    w: usize,
    window: VecDeque<Vec<f32>>,
}

impl DeltaStage {
    pub(crate) fn new(dim: usize, w: usize) -> Self {
        DeltaStage {
            dim,
            w,
            window: VecDeque::with_capacity(2 * w + 1),
        }
    }

    pub(crate) fn push(&mut self, frame: &[f32], emit: &mut impl FnMut(Vec<f32>)) {
        if self.window.is_empty() {
            for _ in 0..self.w {
                self.window.push_back(frame.to_vec());
            }
        }
        self.window.push_back(frame.to_vec());
        if self.window.len() == 2 * self.w + 1 {
            let mut out = vec![0.0f32; self.dim];
            let w = self.w as isize;
            let win = &self.window;
            regress(|o| &win[(w + o) as usize], self.w, &mut out);
            self.window.pop_front();
            emit(out);
        }
    }

    /// Flushes the trailing frames by replicating the last one.
    pub(crate) fn finish(&mut self, emit: &mut impl FnMut(Vec<f32>)) {
        if let Some(last) = self.window.back().cloned() {
            for _ in 0..self.w {
                self.push(&last, emit);
            }
        }
        self.window.clear();
    }
}

/// Joins cepstra with their first and second deltas as frames stream in.
pub(crate) struct DeltaPipeline {
    first: DeltaStage,
    second: DeltaStage,
    base: VecDeque<Vec<f32>>,
    d1: VecDeque<Vec<f32>>,
}

impl DeltaPipeline {
    pub(crate) fn new(w: usize) -> Self {
        DeltaPipeline {
            first: DeltaStage::new(BASE_DIM, w),
            second: DeltaStage::new(BASE_DIM, w),
            base: VecDeque::new(),
            d1: VecDeque::new(),
        }
    }

    pub(crate) fn push(&mut self, cepstra: &[f32], out: &mut Vec<f32>) {
        self.base.push_back(cepstra.to_vec());
        let mut firsts = Vec::new();
        self.first.push(cepstra, &mut |d| firsts.push(d));
        for d in firsts {
            self.feed_second(d, out);
        }
    }

    pub(crate) fn finish(&mut self, out: &mut Vec<f32>) {
        let mut firsts = Vec::new();
        self.first.finish(&mut |d| firsts.push(d));
        for d in firsts {
            self.feed_second(d, out);
        }
        let (base, d1) = (&mut self.base, &mut self.d1);
        self.second.finish(&mut |dd| join(base, d1, &dd, out));
    }

    fn feed_second(&mut self, d: Vec<f32>, out: &mut Vec<f32>) {
        self.d1.push_back(d.clone());
        let (base, d1) = (&mut self.base, &mut self.d1);
        self.second.push(&d, &mut |dd| join(base, d1, &dd, out));
    }
}

fn join(base: &mut VecDeque<Vec<f32>>, d1: &mut VecDeque<Vec<f32>>, dd: &[f32], out: &mut Vec<f32>) {
    let c = base.pop_front().expect("cepstra queued ahead of deltas");
    let d = d1.pop_front().expect("deltas queued ahead of delta-deltas");
    out.extend_from_slice(&c);
    out.extend_from_slice(&d);
    out.extend_from_slice(dd);
}
