//! Little-endian binary files: codebooks (`PLKM`), partial statistics
//! (`PLPS`), training samples (`PLSB`) and fit checkpoints (`PLCK`).
//! Every file starts with a 4-byte magic and a u32 version.

use std::fs;
use std::path::{Path, PathBuf};

use super::train::{LloydState, TrainingSample};
use super::{Codebook, FeatureKind, Normalizer, PartialStats, Provenance, SampleBuffer};
use crate::error::{Error, Result};

const VERSION: u32 = 1;

#[derive(Default)]
struct Out(Vec<u8>);

impl Out {
    fn header(magic: &[u8; 4]) -> Self {
        let mut o = Out(magic.to_vec());
        o.u32(VERSION);
        o
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, vs: &[f32]) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn len_u32(&mut self, n: usize) -> Result<()> {
        let n = u32::try_from(n).map_err(|_| Error::OutOfRange(format!("{n} does not fit in u32")))?;
        self.u32(n);
        Ok(())
    }
}

struct In<'a> {
    buf: &'a [u8],
    what: &'static str,
}

impl<'a> In<'a> {
    fn open(buf: &'a [u8], magic: &[u8; 4], what: &'static str) -> Result<Self> {
        let mut r = In { buf, what };
        if r.take(4)? != magic {
            return Err(Error::CorruptArchive(format!("{what}: bad magic")));
        }
        let v = r.u32()?;
        if v != VERSION {
            return Err(Error::CorruptArchive(format!("{what}: unsupported version {v}")));
        }
        Ok(r)
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::CorruptArchive(format!("{}: truncated", self.what)));
        }
        let (a, b) = self.buf.split_at(n);
        self.buf = b;
        Ok(a)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn count(&mut self, n: u64, width: usize) -> Result<usize> {
        let n = usize::try_from(n).map_err(|_| Error::CorruptArchive(format!("{}: bad count", self.what)))?;
        if n.checked_mul(width).is_none_or(|b| b > self.buf.len()) {
            return Err(Error::CorruptArchive(format!("{}: truncated", self.what)));
        }
        Ok(n)
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let n = self.count(n as u64, 4)?;
        Ok(self
            .take(n * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn finish(self) -> Result<()> {
        if !self.buf.is_empty() {
            return Err(Error::CorruptArchive(format!("{}: trailing bytes", self.what)));
        }
        Ok(())
    }
}

/// Write-then-rename so an interrupted run never leaves a half-written file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn put_codebook(o: &mut Out, cb: &Codebook) -> Result<()> {
    cb.validate()?;
    o.len_u32(cb.k)?;
    o.len_u32(cb.dim)?;
    let p = &cb.provenance;
    match p.feature_kind {
        FeatureKind::Mfcc39 => {
            o.u8(0);
            o.u32(0);
        }
        FeatureKind::External { layer_index } => {
            o.u8(1);
            o.u32(layer_index);
        }
    }
    o.u64(p.seed);
    o.u64(p.sample_budget);
    o.f64(p.final_inertia);
    o.u32(p.iterations_run);
    o.len_u32(p.notes.len())?;
    o.0.extend_from_slice(p.notes.as_bytes());
    match &cb.normalizer {
        None => o.u8(0),
        Some(n) => {
            o.u8(1);
            o.f32s(&n.mean);
            o.f32s(&n.scale);
        }
    }
    o.f32s(&cb.centroids);
    Ok(())
}

fn get_codebook(r: &mut In) -> Result<Codebook> {
    let k = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let feature_kind = match (r.u8()?, r.u32()?) {
        (0, _) => FeatureKind::Mfcc39,
        (1, layer_index) => FeatureKind::External { layer_index },
        (t, _) => return Err(Error::CorruptArchive(format!("codebook: unknown feature kind {t}"))),
    };
    let seed = r.u64()?;
    let sample_budget = r.u64()?;
    let final_inertia = r.f64()?;
    let iterations_run = r.u32()?;
    let notes_len = r.u32()? as usize;
    let notes = String::from_utf8(r.take(notes_len)?.to_vec())
        .map_err(|_| Error::CorruptArchive("codebook: notes are not UTF-8".into()))?;
    let normalizer = match r.u8()? {
        0 => None,
        1 => Some(Normalizer {
            mean: r.f32s(dim)?,
            scale: r.f32s(dim)?,
        }),
        t => return Err(Error::CorruptArchive(format!("codebook: bad normalizer flag {t}"))),
    };
    let n = k
        .checked_mul(dim)
        .ok_or_else(|| Error::CorruptArchive("codebook: shape overflow".into()))?;
    let centroids = r.f32s(n)?;
    let cb = Codebook {
        k,
        dim,
        centroids,
        normalizer,
        provenance: Provenance {
            feature_kind,
            seed,
            sample_budget,
            final_inertia,
            iterations_run,
            notes,
        },
    };
    cb.validate()?;
    Ok(cb)
}

/// Sidecar path holding the human-readable provenance: `<path>.txt`.
pub(crate) fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

/// Writes the binary codebook and its `<path>.txt` provenance sidecar.
pub fn write_codebook(path: impl AsRef<Path>, cb: &Codebook) -> Result<()> {
    let path = path.as_ref();
    let mut o = Out::header(b"PLKM");
    put_codebook(&mut o, cb)?;
    write_atomic(path, &o.0)?;
    let text = format!("k = {}\ndim = {}\n{}", cb.k, cb.dim, cb.provenance.to_text());
    write_atomic(&sidecar_path(path), text.as_bytes())
}

pub fn read_codebook(path: impl AsRef<Path>) -> Result<Codebook> {
    let bytes = read_all(path.as_ref())?;
    let mut r = In::open(&bytes, b"PLKM", "codebook")?;
    let cb = get_codebook(&mut r)?;
    r.finish()?;
    Ok(cb)
}

pub fn write_partial_stats(path: impl AsRef<Path>, p: &PartialStats) -> Result<()> {
    if p.sums.len() != p.k * p.dim || p.counts.len() != p.k {
        return Err(Error::InvalidRecord("partial statistics shape".into()));
    }
    let mut o = Out::header(b"PLPS");
    o.len_u32(p.k)?;
    o.len_u32(p.dim)?;
    o.f64(p.inertia);
    p.counts.iter().for_each(|&c| o.u64(c));
    p.sums.iter().for_each(|&s| o.f64(s));
    write_atomic(path.as_ref(), &o.0)
}

pub fn read_partial_stats(path: impl AsRef<Path>) -> Result<PartialStats> {
    let bytes = read_all(path.as_ref())?;
    let mut r = In::open(&bytes, b"PLPS", "partial stats")?;
    let k = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let inertia = r.f64()?;
    let nk = r.count(k as u64, 8)?;
    let counts = (0..nk).map(|_| r.u64()).collect::<Result<_>>()?;
    let ns = r.count((k * dim) as u64, 8)?;
    let sums = (0..ns).map(|_| r.f64()).collect::<Result<_>>()?;
    r.finish()?;
    Ok(PartialStats {
        k,
        dim,
        sums,
        counts,
        inertia,
    })
}

pub fn write_sample(path: impl AsRef<Path>, s: &TrainingSample) -> Result<()> {
    let b = &s.buffer;
    let mut o = Out::header(b"PLSB");
    o.len_u32(b.dim())?;
    o.u64(b.budget() as u64);
    o.u64(b.seen());
    o.u64(b.seed());
    o.u64(b.len() as u64);
    b.positions().iter().for_each(|&p| o.u64(p));
    s.shard_of.iter().for_each(|&x| o.u32(x));
    o.f32s(b.frames());
    write_atomic(path.as_ref(), &o.0)
}

pub fn read_sample(path: impl AsRef<Path>) -> Result<TrainingSample> {
    let bytes = read_all(path.as_ref())?;
    let mut r = In::open(&bytes, b"PLSB", "sample")?;
    let dim = r.u32()? as usize;
    let budget = usize::try_from(r.u64()?).map_err(|_| Error::CorruptArchive("sample: budget".into()))?;
    let seen = r.u64()?;
    let seed = r.u64()?;
    let n = r.u64()?;
    let n = r.count(n, 12)?;
    let positions = (0..n).map(|_| r.u64()).collect::<Result<_>>()?;
    let shard_of = (0..n).map(|_| r.u32()).collect::<Result<_>>()?;
    let frames = r.f32s(n * dim)?;
    r.finish()?;
    let buffer = SampleBuffer::from_parts(budget, dim, seed, seen, positions, frames)?;
    Ok(TrainingSample { buffer, shard_of })
}

pub fn write_checkpoint(path: impl AsRef<Path>, s: &LloydState) -> Result<()> {
    let mut o = Out::header(b"PLCK");
    o.u32(s.iteration);
    match s.prev_inertia {
        None => o.u8(0),
        Some(v) => {
            o.u8(1);
            o.f64(v);
        }
    }
    o.len_u32(s.history.len())?;
    s.history.iter().for_each(|&v| o.f64(v));
    put_codebook(&mut o, &s.codebook)?;
    write_atomic(path.as_ref(), &o.0)
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<LloydState> {
    let bytes = read_all(path.as_ref())?;
    let mut r = In::open(&bytes, b"PLCK", "checkpoint")?;
    let iteration = r.u32()?;
    let prev_inertia = match r.u8()? {
        0 => None,
        1 => Some(r.f64()?),
        t => return Err(Error::CorruptArchive(format!("checkpoint: bad flag {t}"))),
    };
    let n = r.u32()?;
    let n = r.count(n as u64, 8)?;
    let history = (0..n).map(|_| r.f64()).collect::<Result<_>>()?;
    let codebook = get_codebook(&mut r)?;
    r.finish()?;
    Ok(LloydState {
        codebook,
        iteration,
        prev_inertia,
        history,
    })
}
