//! Fused labeling: features are computed (or read) one utterance at a time,
//! assigned against an in-memory codebook, and only the integer labels are
//! written out.

mod diagnostics;
mod ledger;
mod source;

pub use diagnostics::{cluster_diagnostics, Diagnostics};
pub use ledger::{CountingWriter, IoCategory, IoLedger};
pub use source::{FeatureSource, ManifestSource};

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;

use crate::clustering::{assign_frames, Codebook};
use crate::corpus_io::{write_scp, ArkWriter, ShardManifest};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabelReport {
    pub shard_index: usize,
    pub utterances: usize,
    pub frames: u64,
    pub inertia: f64,
    pub histogram: Vec<u64>,
    /// `(utt_id, reason)` for every entry that could not be labeled.
    pub failures: Vec<(String, String)>,
    pub archive: PathBuf,
    pub index: PathBuf,
    pub archive_bytes: u64,
    pub index_bytes: u64,
}

impl LabelReport {
    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics::from_histogram(self.histogram.clone())
    }

    pub fn to_text(&self) -> String {
        let d = self.diagnostics();
        let mut s = format!(
            "shard = {}\nutterances = {}\nframes = {}\ninertia = {}\narchive_bytes = {}\nindex_bytes = {}\nfailures = {}\n",
            self.shard_index,
            self.utterances,
            self.frames,
            self.inertia,
            self.archive_bytes,
            self.index_bytes,
            self.failures.len()
        );
        for (utt, why) in &self.failures {
            s.push_str(&format!("failed {utt}: {why}\n"));
        }
        s.push_str(&d.to_text());
        s
    }
}

pub fn archive_name(shard: usize) -> String {
    format!("labels.{shard}.ark")
}

pub fn index_name(shard: usize) -> String {
    format!("labels.{shard}.scp")
}

/// Labels one shard into `out_dir/labels.<shard>.{ark,scp}`. The scp refers
/// to the archive by file name so the output directory can be moved.
///
/// A feature width that disagrees with the codebook aborts the shard; any
/// other per-utterance failure is listed in the report and skipped.
pub fn label_corpus(
    shard: &ShardManifest,
    codebook: &Codebook,
    source: &FeatureSource,
    out_dir: &Path,
    ledger: &IoLedger,
) -> Result<LabelReport> {
    codebook.validate()?;
    let frames_src = ManifestSource::with_dim(shard.entries.clone(), source, codebook.dim)?;
    let ark_name = archive_name(shard.worker_index);
    let archive = out_dir.join(&ark_name);
    let index = out_dir.join(index_name(shard.worker_index));
    let file = File::create(&archive).map_err(|e| Error::io(&archive, e))?;
    let mut ark = ArkWriter::new(
        ledger.counting(BufWriter::new(file), IoCategory::Labels),
        &ark_name,
        0,
    );

    let mut report = LabelReport {
        shard_index: shard.worker_index,
        utterances: 0,
        frames: 0,
        inertia: 0.0,
        histogram: vec![0; codebook.k],
        failures: Vec::new(),
        archive: archive.clone(),
        index: index.clone(),
        archive_bytes: 0,
        index_bytes: 0,
    };
    let mut written = Vec::with_capacity(shard.entries.len());
    for entry in &shard.entries {
        let m = match frames_src.features(entry) {
            Ok(m) => m,
            Err(e @ Error::DimMismatch { .. }) => return Err(e),
            Err(e) => {
                report.failures.push((entry.utt_id.clone(), e.to_string()));
                continue;
            }
        };
        let (seq, inertia) = assign_frames(codebook, &m)?;
        for &l in &seq.labels {
            report.histogram[l as usize] += 1;
        }
        report.frames += seq.len() as u64;
        report.inertia += inertia;
        report.utterances += 1;
        written.push(ark.write_ints(&seq)?);
    }
    ark.flush()?;
    report.archive_bytes = ark.position();
    drop(ark);

    let file = File::create(&index).map_err(|e| Error::io(&index, e))?;
    let mut w = ledger.counting(BufWriter::new(file), IoCategory::Index);
    let mut text = Vec::new();
    write_scp(&written, &mut text).map_err(|e| Error::io(&index, e))?;
    w.write_all(&text)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&index, e))?;
    report.index_bytes = text.len() as u64;
    Ok(report)
}

/// Labels every shard concurrently (one thread per shard), then joins the
/// shard indices in shard order into `out_dir/labels.scp`.
pub fn label_shards(
    shards: &[ShardManifest],
    codebook: &Codebook,
    source: &FeatureSource,
    out_dir: &Path,
    ledger: &IoLedger,
) -> Result<Vec<LabelReport>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let reports: Vec<Result<LabelReport>> = thread::scope(|scope| {
        let handles: Vec<_> = shards
            .iter()
            .map(|s| scope.spawn(move || label_corpus(s, codebook, source, out_dir, ledger)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("labeling worker panicked"))
            .collect()
    });
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let parts: Vec<PathBuf> = reports.iter().map(|r| r.index.clone()).collect();
    merge_scp(&parts, &out_dir.join("labels.scp"), ledger)?;
    Ok(reports)
}

/// Concatenates scp files in the given order.
pub fn merge_scp(parts: &[PathBuf], out: &Path, ledger: &IoLedger) -> Result<()> {
    let mut text = Vec::new();
    for p in parts {
        text.extend(fs::read(p).map_err(|e| Error::io(p, e))?);
    }
    let file = File::create(out).map_err(|e| Error::io(out, e))?;
    let mut w = ledger.counting(BufWriter::new(file), IoCategory::Index);
    w.write_all(&text)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(out, e))
}
