use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::ark::probe_matrix_header;
use super::validate_key;
use super::wav::probe_wav;
use crate::error::{Error, Result};

/// One addressable record of a corpus: a WAV file (`byte_offset: None`) or an
/// archive payload. `length` is samples for audio, frames for archive records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub utt_id: String,
    pub source_path: PathBuf,
    pub byte_offset: Option<u64>,
    pub length: u64,
}

/// The slice of a manifest owned by one worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardManifest {
    pub worker_index: usize,
    pub total_workers: usize,
    pub entries: Vec<ManifestEntry>,
}

/// Round-robin split: entry `i` goes to worker `i % total_workers`, keeping
/// manifest order within each shard.
pub fn shard_manifest(entries: &[ManifestEntry], total_workers: usize) -> Result<Vec<ShardManifest>> {
    if total_workers == 0 {
        return Err(Error::Config("total_workers must be at least 1".into()));
    }
    let mut shards: Vec<ShardManifest> = (0..total_workers)
        .map(|w| ShardManifest {
            worker_index: w,
            total_workers,
            entries: Vec::with_capacity(entries.len() / total_workers + 1),
        })
        .collect();
    for (i, e) in entries.iter().enumerate() {
        shards[i % total_workers].entries.push(e.clone());
    }
    Ok(shards)
}

/// Writes `<utt_id> <path>[:<offset>]` lines.
pub fn write_scp<W: Write>(entries: &[ManifestEntry], mut w: W) -> std::io::Result<()> {
    for e in entries {
        match e.byte_offset {
            Some(off) => writeln!(w, "{} {}:{}", e.utt_id, e.source_path.display(), off)?,
            None => writeln!(w, "{} {}", e.utt_id, e.source_path.display())?,
        }
    }
    Ok(())
}

/// Parses scp text. Relative paths are resolved against `base_dir`; lengths
/// are left at zero (see [`load_wav_manifest`] / [`load_ark_manifest`]).
pub fn parse_scp(text: &str, base_dir: &Path) -> Result<Vec<ManifestEntry>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (utt, rest) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::Config(format!("scp line {}: missing path", lineno + 1)))?;
        let rest = rest.trim();
        validate_key(utt)?;
        if !seen.insert(utt.to_string()) {
            return Err(Error::Config(format!("scp line {}: duplicate id {utt}", lineno + 1)));
        }
        let (path, offset) = match rest.rsplit_once(':') {
            Some((p, off)) if !off.is_empty() && off.bytes().all(|b| b.is_ascii_digit()) => {
                (p, Some(off.parse::<u64>().map_err(|e| Error::Config(e.to_string()))?))
            }
            _ => (rest, None),
        };
        let path = Path::new(path);
        let source_path = if path.is_absolute() {
            path.to_path_buf()
        } else {
            base_dir.join(path)
        };
        out.push(ManifestEntry {
            utt_id: utt.to_string(),
            source_path,
            byte_offset: offset,
            length: 0,
        });
    }
    Ok(out)
}

fn read_scp(scp: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(scp).map_err(|e| Error::io(scp, e))?;
    parse_scp(&text, scp.parent().unwrap_or(Path::new(".")))
}

/// Loads a `wav.scp`-style manifest, filling `length` (samples) from each header.
pub fn load_wav_manifest(scp: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let mut entries = read_scp(scp.as_ref())?;
    for e in &mut entries {
        if e.byte_offset.is_some() {
            return Err(Error::Config(format!("{}: WAV entries take no byte offset", e.utt_id)));
        }
        e.length = probe_wav(&e.source_path)?.num_samples;
    }
    Ok(entries)
}

/// Loads a `feats.scp`-style manifest, filling `length` (frames) from each
/// record header; also returns the common feature dimension (`None` when empty).
pub fn load_ark_manifest(scp: impl AsRef<Path>) -> Result<(Vec<ManifestEntry>, Option<usize>)> {
    let mut entries = read_scp(scp.as_ref())?;
    let mut dim = None;
    for e in &mut entries {
        let (rows, cols) = probe_matrix_header(e)?;
        match dim {
            None => dim = Some(cols),
            Some(d) if d != cols => return Err(Error::DimMismatch { expected: d, found: cols }),
            _ => {}
        }
        e.length = rows as u64;
    }
    Ok((entries, dim))
}
