//! Config-file driven orchestration: training a codebook from a manifest,
//! labeling a corpus with it, and recording provenance alongside.
//!
//! Configs are `key = value` text. Relative paths are resolved against the
//! config file's directory; keys prefixed with `mfcc.` set [`MfccConfig`]
//! fields.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::clustering::{
    draw_sample, fit_sample, read_checkpoint, read_codebook, read_sample, write_checkpoint,
    write_codebook, write_sample, Codebook, FeatureKind, TrainParams,
};
use crate::corpus_io::{load_ark_manifest, load_wav_manifest, shard_manifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::features::{parse_key_values, parse_num, MfccConfig};
use crate::labeling::{label_shards, Diagnostics, FeatureSource, IoLedger, LabelReport, ManifestSource};
use crate::TOOL_VERSION;

pub const CODEBOOK_FILE: &str = "codebook.plkm";
pub const LABEL_DIR: &str = "labels";
pub const LABEL_REPORT_FILE: &str = "label_report.txt";

#[derive(Debug, Clone, PartialEq)]
pub enum SourceKind {
    Mfcc,
    Ark { layer_index: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// As written in the config; resolved with [`PipelineConfig::resolve`].
    pub manifest: PathBuf,
    pub source: SourceKind,
    pub mfcc: MfccConfig,
    pub k: usize,
    pub budget: usize,
    pub tol: f64,
    pub max_iter: u32,
    pub workers: usize,
    pub seed: u64,
    pub standardize: bool,
    pub output_dir: PathBuf,
    pub base_dir: PathBuf,
    /// Directory for partial-statistics exchange files; not part of the
    /// config identity.
    pub scratch_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_text(text: &str, base_dir: &Path) -> Result<Self> {
        let mut manifest = None;
        let mut source = "mfcc".to_string();
        let mut layer_index = 0u32;
        let mut mfcc_pairs = Vec::new();
        let mut cfg = PipelineConfig {
            manifest: PathBuf::new(),
            source: SourceKind::Mfcc,
            mfcc: MfccConfig::default(),
            k: 100,
            budget: 100_000,
            tol: 1e-4,
            max_iter: 100,
            workers: 1,
            seed: 0,
            standardize: false,
            output_dir: PathBuf::from("out"),
            base_dir: base_dir.to_path_buf(),
            scratch_dir: None,
        };
        for (k, v) in parse_key_values(text)? {
            if let Some(m) = k.strip_prefix("mfcc.") {
                mfcc_pairs.push((m.to_string(), v));
                continue;
            }
            match k.as_str() {
                "manifest" => manifest = Some(PathBuf::from(v)),
                "source" => source = v,
                "layer_index" => layer_index = parse_num(&v, &k)?,
                "k" => cfg.k = parse_num(&v, &k)?,
                "budget" => cfg.budget = parse_num(&v, &k)?,
                "tol" => cfg.tol = parse_num(&v, &k)?,
                "max_iter" => cfg.max_iter = parse_num(&v, &k)?,
                "workers" => cfg.workers = parse_num(&v, &k)?,
                "seed" => cfg.seed = parse_num(&v, &k)?,
                "standardize" => cfg.standardize = parse_num(&v, &k)?,
                "output_dir" => cfg.output_dir = PathBuf::from(v),
                other => return Err(Error::Config(format!("unknown config key {other:?}"))),
            }
        }
        cfg.manifest = manifest.ok_or_else(|| Error::Config("missing `manifest`".into()))?;
        cfg.source = match source.as_str() {
            "mfcc" => SourceKind::Mfcc,
            "ark" => SourceKind::Ark { layer_index },
            other => return Err(Error::Config(format!("unknown source {other:?} (mfcc or ark)"))),
        };
        cfg.mfcc = MfccConfig::from_pairs(mfcc_pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        self.train_params().validate()?;
        self.mfcc.validate()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn feature_source(&self) -> FeatureSource {
        match self.source {
            SourceKind::Mfcc => FeatureSource::MfccFromWav(self.mfcc.clone()),
            SourceKind::Ark { layer_index } => FeatureSource::PrecomputedArk { layer_index },
        }
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            k: self.k,
            budget: self.budget,
            tol: self.tol,
            max_iter: self.max_iter,
            workers: self.workers,
            seed: self.seed,
            standardize: self.standardize,
            feature_kind: match self.source {
                SourceKind::Mfcc => FeatureKind::Mfcc39,
                SourceKind::Ark { layer_index } => FeatureKind::External { layer_index },
            },
            exchange_dir: self.scratch_dir.clone(),
        }
    }

    /// Canonical form; paths appear as written so the text (and its hash)
    /// does not depend on where the run happens.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "manifest = {}", self.manifest.display());
        match self.source {
            SourceKind::Mfcc => {
                let _ = writeln!(s, "source = mfcc");
            }
            SourceKind::Ark { layer_index } => {
                let _ = writeln!(s, "source = ark\nlayer_index = {layer_index}");
            }
        }
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "budget = {}", self.budget);
        let _ = writeln!(s, "tol = {}", self.tol);
        let _ = writeln!(s, "max_iter = {}", self.max_iter);
        let _ = writeln!(s, "workers = {}", self.workers);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "standardize = {}", self.standardize);
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        if self.source == SourceKind::Mfcc {
            for line in self.mfcc.to_text().lines() {
                let _ = writeln!(s, "mfcc.{line}");
            }
        }
        s
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `config_sha256`, `seed` and `tool_version` lines.
    pub fn provenance_text(&self) -> String {
        format!(
            "config_sha256 = {}\nseed = {}\ntool_version = {}\n",
            self.hash(),
            self.seed,
            TOOL_VERSION
        )
    }

    pub fn load_manifest(&self) -> Result<(Vec<ManifestEntry>, Option<usize>)> {
        let path = self.resolve(&self.manifest);
        match self.source {
            SourceKind::Mfcc => Ok((load_wav_manifest(&path)?, Some(crate::features::FULL_DIM))),
            SourceKind::Ark { .. } => load_ark_manifest(&path),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub codebook: Codebook,
    pub codebook_path: PathBuf,
    pub inertia_history: Vec<f64>,
    /// The fit continued from an earlier interrupted run.
    pub resumed: bool,
}

fn state_paths(cfg: &PipelineConfig, out: &Path) -> (PathBuf, PathBuf) {
    let tag = &cfg.hash()[..16];
    (
        out.join(format!("kmeans-{tag}.sample")),
        out.join(format!("kmeans-{tag}.ckpt")),
    )
}

fn remove_if_present(p: &Path) -> Result<()> {
    match fs::remove_file(p) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(Error::io(p, e)),
        _ => Ok(()),
    }
}

fn sources(cfg: &PipelineConfig) -> Result<Vec<ManifestSource>> {
    let (entries, dim) = cfg.load_manifest()?;
    let source = cfg.feature_source();
    let dim = dim.unwrap_or(0);
    shard_manifest(&entries, cfg.workers)?
        .into_iter()
        .map(|s| ManifestSource::with_dim(s.entries, &source, dim))
        .collect()
}

/// Trains and writes `<output_dir>/codebook.plkm`. The drawn sample and the
/// per-iteration state are kept next to it until the fit completes; a rerun
/// of the same config picks them up instead of starting over.
pub fn train(cfg: &PipelineConfig) -> Result<TrainOutcome> {
    let out = cfg.output_path();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let params = cfg.train_params();
    let (sample_path, ckpt_path) = state_paths(cfg, &out);

    let sample = if sample_path.exists() {
        read_sample(&sample_path)?
    } else {
        let sample = draw_sample(&sources(cfg)?, params.budget, params.seed, params.workers)?;
        write_sample(&sample_path, &sample)?;
        sample
    };
    let resume = if ckpt_path.exists() {
        Some(read_checkpoint(&ckpt_path)?)
    } else {
        None
    };
    let resumed = resume.is_some();
    let fit = fit_sample(sample, &params, resume, &mut |state| write_checkpoint(&ckpt_path, state))?;

    let mut codebook = fit.codebook;
    // the seed already has its own provenance field
    let mut notes: String = cfg
        .provenance_text()
        .lines()
        .filter(|l| !l.starts_with("seed "))
        .map(|l| format!("{l}\n"))
        .collect();
    if cfg.source == SourceKind::Mfcc {
        for line in cfg.mfcc.to_text().lines() {
            let _ = writeln!(notes, "mfcc.{line}");
        }
    }
    codebook.provenance.notes = notes;
    let codebook_path = out.join(CODEBOOK_FILE);
    write_codebook(&codebook_path, &codebook)?;
    remove_if_present(&ckpt_path)?;
    remove_if_present(&sample_path)?;
    Ok(TrainOutcome {
        codebook,
        codebook_path,
        inertia_history: fit.inertia_history,
        resumed,
    })
}

#[derive(Debug)]
pub struct LabelOutcome {
    pub reports: Vec<LabelReport>,
    pub diagnostics: Diagnostics,
    pub label_dir: PathBuf,
    pub report_path: PathBuf,
}

/// Labels the manifest with `codebook` into `<output_dir>/labels/`, one
/// archive per worker shard plus a merged `labels.scp`, and writes a plain
/// text report with provenance.
pub fn label(cfg: &PipelineConfig, codebook: &Codebook, ledger: &IoLedger) -> Result<LabelOutcome> {
    let (entries, dim) = cfg.load_manifest()?;
    if let Some(d) = dim {
        if d != codebook.dim {
            return Err(Error::DimMismatch {
                expected: codebook.dim,
                found: d,
            });
        }
    }
    let out = cfg.output_path();
    let label_dir = out.join(LABEL_DIR);
    let shards = shard_manifest(&entries, cfg.workers)?;
    let reports = label_shards(&shards, codebook, &cfg.feature_source(), &label_dir, ledger)?;

    let mut histogram = vec![0u64; codebook.k];
    for r in &reports {
        for (h, c) in histogram.iter_mut().zip(&r.histogram) {
            *h += c;
        }
    }
    let diagnostics = Diagnostics::from_histogram(histogram);
    let mut text = cfg.provenance_text();
    let _ = writeln!(text, "codebook_k = {}", codebook.k);
    for r in &reports {
        text.push('\n');
        text.push_str(&r.to_text());
    }
    text.push_str("\n# overall\n");
    text.push_str(&diagnostics.to_text());
    let report_path = out.join(LABEL_REPORT_FILE);
    fs::write(&report_path, text).map_err(|e| Error::io(&report_path, e))?;
    Ok(LabelOutcome {
        reports,
        diagnostics,
        label_dir,
        report_path,
    })
}

pub fn load_codebook_for(cfg: &PipelineConfig, path: Option<&Path>) -> Result<Codebook> {
    match path {
        Some(p) => read_codebook(p),
        None => read_codebook(cfg.output_path().join(CODEBOOK_FILE)),
    }
}
