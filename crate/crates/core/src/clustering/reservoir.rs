use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub(crate) const RESERVOIR_STREAM: u64 = 0;

fn reservoir_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(RESERVOIR_STREAM);
    rng
}

/// Fixed-capacity uniform sample of a frame stream (Algorithm R).
///
/// Holds `min(seen, budget)` frames together with the stream position each
/// was taken from; memory is `budget * dim` floats regardless of stream length.
#[derive(Debug, Clone)]
pub struct SampleBuffer {
    budget: usize,
    dim: usize,
    seed: u64,
    seen: u64,
    frames: Vec<f32>,
    positions: Vec<u64>,
    rng: ChaCha8Rng,
}

impl SampleBuffer {
    pub fn new(budget: usize, dim: usize, seed: u64) -> Result<Self> {
        if budget == 0 {
            return Err(Error::Config("sample budget must be at least 1".into()));
        }
        if dim == 0 {
            return Err(Error::Config("frame dimension must be positive".into()));
        }
        Ok(SampleBuffer {
            budget,
            dim,
            seed,
            seen: 0,
            frames: Vec::new(),
            positions: Vec::new(),
            rng: reservoir_rng(seed),
        })
    }

    /// Rebuilds a buffer from stored parts (e.g. a sample file). Further
    /// `offer` calls are not meaningful on a rebuilt buffer.
    pub fn from_parts(
        budget: usize,
        dim: usize,
        seed: u64,
        seen: u64,
        positions: Vec<u64>,
        frames: Vec<f32>,
    ) -> Result<Self> {
        let mut b = SampleBuffer::new(budget, dim, seed)?;
        if frames.len() != positions.len() * dim || positions.len() > budget {
            return Err(Error::InvalidRecord(format!(
                "sample of {} positions and {} values does not fit budget {budget} x dim {dim}",
                positions.len(),
                frames.len()
            )));
        }
        if positions.len() as u64 > seen {
            return Err(Error::InvalidRecord("sample holds more frames than were seen".into()));
        }
        b.seen = seen;
        b.positions = positions;
        b.frames = frames;
        Ok(b)
    }

    pub fn offer(&mut self, frame: &[f32]) -> Result<()> {
        if frame.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: frame.len(),
            });
        }
        let pos = self.seen;
        if self.positions.len() < self.budget {
            self.frames.extend_from_slice(frame);
            self.positions.push(pos);
        } else {
            let j = self.rng.random_range(0..=pos);
            if j < self.budget as u64 {
                let j = j as usize;
                self.frames[j * self.dim..(j + 1) * self.dim].copy_from_slice(frame);
                self.positions[j] = pos;
            }
        }
        self.seen += 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        &self.frames[i * self.dim..(i + 1) * self.dim]
    }

    pub fn frames(&self) -> &[f32] {
        &self.frames
    }

    pub(crate) fn frames_mut(&mut self) -> &mut [f32] {
        &mut self.frames
    }

    /// Stream position of each stored frame, in slot order.
    pub fn positions(&self) -> &[u64] {
        &self.positions
    }

    /// Reorders slots by ascending stream position.
    pub fn sort_by_position(&mut self) {
        let mut order: Vec<usize> = (0..self.positions.len()).collect();
        order.sort_by_key(|&i| self.positions[i]);
        let mut frames = Vec::with_capacity(self.frames.len());
        for &i in &order {
            frames.extend_from_slice(self.frame(i));
        }
        self.positions = order.iter().map(|&i| self.positions[i]).collect();
        self.frames = frames;
    }
}

/// Samples `budget` frames from a stream in one pass.
pub fn reservoir_sample<'a>(
    frames: impl IntoIterator<Item = &'a [f32]>,
    dim: usize,
    budget: usize,
    seed: u64,
) -> Result<SampleBuffer> {
    let mut buf = SampleBuffer::new(budget, dim, seed)?;
    for f in frames {
        buf.offer(f)?;
    }
    Ok(buf)
}

/// The positions [`SampleBuffer`] would retain from a stream of `total`
/// frames, in slot order, computed without touching any frame data. Makes
/// the same random draws as `offer`.
pub fn reservoir_positions(total: u64, budget: usize, seed: u64) -> Vec<u64> {
    let mut rng = reservoir_rng(seed);
    let mut slots: Vec<u64> = (0..total.min(budget as u64)).collect();
    for pos in budget as u64..total {
        let j = rng.random_range(0..=pos);
        if j < budget as u64 {
            slots[j as usize] = pos;
        }
    }
    slots
}
