use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pseudolabel::batching::{parse_lengths, MaskSet};
use pseudolabel::corpus_io::{parse_scp, read_ark_ints};
use pseudolabel::labeling::IoLedger;
use pseudolabel::metrics::{parse_rows, round1};
use pseudolabel::pipeline::{self, PipelineConfig};
use pseudolabel::{
    cluster_diagnostics, masked_accuracy, plan_batches, sample_masks, superb_score, Error, ErrorKind,
    MaskSpec, OrderPolicy, PayloadUnit,
};

const SCRATCH_ENV: &str = "PSEUDOLABEL_SCRATCH";

#[derive(Parser)]
#[command(name = "pseudolabel", version, about = "Pseudo-label generation for self-supervised speech pre-training")]
struct Cli {
    /// Pipeline config file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Sample budget in frames for codebook training.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Codebook size.
    #[arg(short = 'k', global = true)]
    k: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample frames, fit a k-means codebook and write it to the output directory.
    TrainKmeans,
    /// Assign every frame of the manifest to its nearest centroid.
    Label {
        /// Codebook file; defaults to the one in the output directory.
        #[arg(long)]
        codebook: Option<PathBuf>,
    },
    /// Pack utterances into batches bounded by total payload.
    PlanBatches(PlanArgs),
    /// Sample masked spans over a sequence of the given length.
    SampleMasks(MaskArgs),
    /// Compute SUPERB scores for rows of ten task results.
    ScoreSuperb {
        /// Rows file (`-` for stdin).
        input: PathBuf,
    },
    /// Cluster occupancy of a label archive or index, optionally with masked accuracy.
    Diagnose(DiagnoseArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    Sorted,
    Manifest,
}

#[derive(Clone, Copy, ValueEnum)]
enum Unit {
    Samples,
    Frames,
}

#[derive(Args)]
struct PlanArgs {
    /// `<utt_id> <length>` lines.
    #[arg(long)]
    lengths: PathBuf,
    #[arg(long, default_value_t = 45_000_000)]
    bin_size: u64,
    #[arg(long, value_enum, default_value_t = Order::Sorted)]
    order: Order,
    #[arg(long, value_enum, default_value_t = Unit::Samples)]
    unit: Unit,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long)]
    length: usize,
    #[command(flatten)]
    spec: SpecArgs,
}

#[derive(Args)]
struct SpecArgs {
    #[arg(long, default_value_t = 0.08)]
    start_prob: f64,
    #[arg(long, default_value_t = 10)]
    span_length: usize,
    #[arg(long, default_value_t = 1)]
    min_spans: usize,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Label archive (`.ark`) or index (`.scp`).
    labels: PathBuf,
    /// Predicted labels (`.scp`) to score against `labels` on sampled masks.
    #[arg(long)]
    predicted: Option<PathBuf>,
    #[command(flatten)]
    spec: SpecArgs,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --config <file>".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(b) = cli.budget {
        cfg.budget = b;
    }
    if let Some(k) = cli.k {
        cfg.k = k;
    }
    if let Some(dir) = std::env::var_os(SCRATCH_ENV) {
        cfg.scratch_dir = Some(PathBuf::from(dir));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_input(path: &Path) -> Result<String, Error> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| io_err("<stdin>", e))?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| io_err(path, e))
    }
}

fn io_err(path: impl AsRef<Path>, e: io::Error) -> Error {
    Error::Io {
        path: path.as_ref().to_path_buf(),
        source: e,
    }
}

fn mask_spec(a: &SpecArgs, seed: u64) -> MaskSpec {
    MaskSpec {
        start_prob: a.start_prob,
        span_length: a.span_length,
        min_spans: a.min_spans,
        seed,
    }
}

fn spans_text(m: &MaskSet) -> String {
    let mut s = format!("# length={} masked={}\n", m.t, m.masked_frames());
    for (a, b) in &m.spans {
        s.push_str(&format!("{a}\t{b}\n"));
    }
    s
}

fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), Error> {
    let w = |out: &mut dyn Write, s: &str| out.write_all(s.as_bytes()).map_err(|e| io_err("<stdout>", e));
    match &cli.command {
        Command::TrainKmeans => {
            let cfg = load_config(cli)?;
            let t = pipeline::train(&cfg)?;
            let p = &t.codebook.provenance;
            w(
                out,
                &format!(
                    "codebook {}\nk = {}\ndim = {}\niterations = {}\nfinal_inertia = {}\nresumed = {}\n",
                    t.codebook_path.display(),
                    t.codebook.k,
                    t.codebook.dim,
                    p.iterations_run,
                    p.final_inertia,
                    t.resumed
                ),
            )
        }
        Command::Label { codebook } => {
            let cfg = load_config(cli)?;
            let cb = pipeline::load_codebook_for(&cfg, codebook.as_deref())?;
            let ledger = IoLedger::new();
            let o = pipeline::label(&cfg, &cb, &ledger)?;
            let frames: u64 = o.reports.iter().map(|r| r.frames).sum();
            let failures: usize = o.reports.iter().map(|r| r.failures.len()).sum();
            w(
                out,
                &format!(
                    "labels {}\nreport {}\nframes = {frames}\nfailures = {failures}\nbytes_written = {}\n{}",
                    o.label_dir.join("labels.scp").display(),
                    o.report_path.display(),
                    ledger.total(),
                    o.diagnostics.to_text()
                ),
            )
        }
        Command::PlanBatches(a) => {
            let lengths = parse_lengths(&read_input(&a.lengths)?)?;
            let order = match a.order {
                Order::Sorted => OrderPolicy::SortedDescending,
                Order::Manifest => OrderPolicy::ManifestOrder,
            };
            let unit = match a.unit {
                Unit::Samples => PayloadUnit::Samples,
                Unit::Frames => PayloadUnit::Frames,
            };
            let plan = plan_batches(&lengths, a.bin_size, order, unit)?;
            let text = plan.to_text();
            match &a.out {
                Some(p) => fs::write(p, &text).map_err(|e| io_err(p, e))?,
                None => w(out, &text)?,
            }
            let oversized = plan.batches.iter().filter(|b| b.oversized).count();
            eprintln!("{} batches, {} oversized", plan.batches.len(), oversized);
            Ok(())
        }
        Command::SampleMasks(a) => {
            let m = sample_masks(a.length, &mask_spec(&a.spec, cli.seed.unwrap_or(0)))?;
            w(out, &spans_text(&m))
        }
        Command::ScoreSuperb { input } => {
            let rows = parse_rows(&read_input(input)?)?;
            if rows.is_empty() {
                return Err(Error::Config("no rows to score".into()));
            }
            for (label, row) in rows {
                let score = round1(superb_score(&row)?);
                match label {
                    Some(l) => w(out, &format!("{l}\t{score:.1}\n"))?,
                    None => w(out, &format!("{score:.1}\n"))?,
                }
            }
            Ok(())
        }
        Command::Diagnose(a) => {
            let k = cli
                .k
                .ok_or_else(|| Error::Config("diagnose needs -k <codebook size>".into()))?;
            let d = cluster_diagnostics(&a.labels, k)?;
            w(out, &d.to_text())?;
            if let Some(pred) = &a.predicted {
                let acc = masked_accuracy_over(&a.labels, pred, k, &mask_spec(&a.spec, cli.seed.unwrap_or(0)))?;
                match acc {
                    Some(v) => w(out, &format!("masked_accuracy = {v:.6}\n"))?,
                    None => w(out, "masked_accuracy = undefined\n")?,
                }
            }
            Ok(())
        }
    }
}

/// Pools masked-frame accuracy over every utterance of two label indices.
/// Each utterance gets masks from `spec` with its seed offset by the
/// utterance's position in the reference index.
fn masked_accuracy_over(reference: &Path, predicted: &Path, k: usize, spec: &MaskSpec) -> Result<Option<f64>, Error> {
    let load = |p: &Path| -> Result<_, Error> {
        let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
        parse_scp(&text, p.parent().unwrap_or(Path::new(".")))
    };
    let refs = load(reference)?;
    let preds = load(predicted)?;
    let mut correct = 0.0;
    let mut total = 0usize;
    for (i, r) in refs.iter().enumerate() {
        let p = preds
            .iter()
            .find(|p| p.utt_id == r.utt_id)
            .ok_or_else(|| Error::InvalidRecord(format!("{} missing from predictions", r.utt_id)))?;
        let r = read_ark_ints(r, k)?;
        let p = read_ark_ints(p, k)?;
        let spec = MaskSpec {
            seed: spec.seed.wrapping_add(i as u64),
            ..*spec
        };
        let mask = sample_masks(r.len(), &spec)?;
        if let Some(acc) = masked_accuracy(&p, &r, &mask)? {
            let n = mask.masked_frames();
            correct += acc * n as f64;
            total += n;
        }
    }
    Ok((total > 0).then(|| correct / total as f64))
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Io => 3,
        ErrorKind::Numeric => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
