use std::fs;
use std::path::Path;

use crate::corpus_io::{parse_scp, read_ark_ints, ArkReader, ArkRecord};
use crate::error::{Error, Result};

/// Cluster occupancy summary of a label archive.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub k: usize,
    pub histogram: Vec<u64>,
    pub total: u64,
    /// Shannon entropy of the occupancy divided by `ln k`; 0 for `k = 1` or
    /// no labels.
    pub normalized_entropy: f64,
    pub empty_clusters: usize,
}

impl Diagnostics {
    pub fn from_histogram(histogram: Vec<u64>) -> Self {
        let k = histogram.len();
        let total: u64 = histogram.iter().sum();
        let normalized_entropy = if k <= 1 || total == 0 {
            0.0
        } else {
            let h: f64 = histogram
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / total as f64;
                    -p * p.ln()
                })
                .sum();
            h / (k as f64).ln()
        };
        Diagnostics {
            k,
            empty_clusters: histogram.iter().filter(|&&c| c == 0).count(),
            histogram,
            total,
            normalized_entropy,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "k = {}\nframes = {}\nnormalized_entropy = {:.6}\nempty_clusters = {}\n",
            self.k, self.total, self.normalized_entropy, self.empty_clusters
        );
        s.push_str("histogram =");
        for c in &self.histogram {
            s.push_str(&format!(" {c}"));
        }
        s.push('\n');
        s
    }
}

/// Tallies cluster occupancy over a label archive. A path ending in `.scp`
/// is read as an index (possibly spanning several archives); anything else
/// as a single archive read front to back.
pub fn cluster_diagnostics(archive: impl AsRef<Path>, k: usize) -> Result<Diagnostics> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let archive = archive.as_ref();
    let mut histogram = vec![0u64; k];
    if archive.extension().is_some_and(|e| e == "scp") {
        let text = fs::read_to_string(archive).map_err(|e| Error::io(archive, e))?;
        for entry in parse_scp(&text, archive.parent().unwrap_or(Path::new(".")))? {
            for l in read_ark_ints(&entry, k)?.labels {
                histogram[l as usize] += 1;
            }
        }
        return Ok(Diagnostics::from_histogram(histogram));
    }
    for rec in ArkReader::open(archive)? {
        let (key, rec) = rec?;
        match rec {
            ArkRecord::Ints(ints) => {
                for v in ints {
                    if v < 0 || v as usize >= k {
                        return Err(Error::LabelOutOfRange { label: v as i64, k });
                    }
                    histogram[v as usize] += 1;
                }
            }
            ArkRecord::Matrix(_) => {
                return Err(Error::InvalidRecord(format!("{key}: float matrix in a label archive")))
            }
        }
    }
    Ok(Diagnostics::from_histogram(histogram))
}
