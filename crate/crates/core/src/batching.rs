//! Trainer-side utilities: batch bins bounded by total payload, masked-span
//! sampling over label sequences, masked-prediction accuracy and gradient
//! accumulation arithmetic.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus_io::AssignmentSeq;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderPolicy {
    /// Longest first; equal lengths keep manifest order.
    SortedDescending,
    ManifestOrder,
}

/// What the lengths count: raw audio samples or label frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadUnit {
    Samples,
    Frames,
}

impl PayloadUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            PayloadUnit::Samples => "samples",
            PayloadUnit::Frames => "frames",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "samples" => Ok(PayloadUnit::Samples),
            "frames" => Ok(PayloadUnit::Frames),
            _ => Err(Error::Config(format!("unknown payload unit {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub utts: Vec<String>,
    pub payload: u64,
    /// A single utterance longer than the bin.
    pub oversized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub bin_size: u64,
    pub unit: PayloadUnit,
    pub batches: Vec<Batch>,
    /// Input lengths, in input order.
    pub payload: Vec<(String, u64)>,
}

impl BatchPlan {
    /// `# bin_size=` and `# unit=` header lines, then one tab-separated batch per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("# bin_size={}\n# unit={}\n", self.bin_size, self.unit.as_str());
        for b in &self.batches {
            s.push_str(&b.utts.join("\t"));
            s.push('\n');
        }
        s
    }

    pub fn total_payload(&self) -> u64 {
        self.batches.iter().map(|b| b.payload).sum()
    }
}

/// Greedy bin filling: utterances are taken in policy order and a new batch
/// starts whenever the next one would push the running total past
/// `bin_size`. An utterance longer than the bin on its own becomes a
/// flagged singleton batch.
pub fn plan_batches(
    lengths: &[(String, u64)],
    bin_size: u64,
    order: OrderPolicy,
    unit: PayloadUnit,
) -> Result<BatchPlan> {
    if bin_size == 0 {
        return Err(Error::Config("bin_size must be at least 1".into()));
    }
    let mut seen = HashSet::with_capacity(lengths.len());
    for (id, _) in lengths {
        if !seen.insert(id.as_str()) {
            return Err(Error::Config(format!("duplicate utterance id {id:?}")));
        }
    }
    let mut idx: Vec<usize> = (0..lengths.len()).collect();
    if order == OrderPolicy::SortedDescending {
        idx.sort_by(|&a, &b| lengths[b].1.cmp(&lengths[a].1));
    }
    let mut batches = Vec::new();
    let mut cur = Batch {
        utts: Vec::new(),
        payload: 0,
        oversized: false,
    };
    for i in idx {
        let (id, len) = &lengths[i];
        let len = *len;
        if !cur.utts.is_empty() && cur.payload + len > bin_size {
            batches.push(std::mem::replace(
                &mut cur,
                Batch {
                    utts: Vec::new(),
                    payload: 0,
                    oversized: false,
                },
            ));
        }
        if len > bin_size {
            batches.push(Batch {
                utts: vec![id.clone()],
                payload: len,
                oversized: true,
            });
            continue;
        }
        cur.utts.push(id.clone());
        cur.payload += len;
    }
    if !cur.utts.is_empty() {
        batches.push(cur);
    }
    Ok(BatchPlan {
        bin_size,
        unit,
        batches,
        payload: lengths.to_vec(),
    })
}

/// Parses `<utt_id> <length>` lines (blank lines and `#` comments skipped).
pub fn parse_lengths(text: &str) -> Result<Vec<(String, u64)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(id), Some(len), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::Config(format!("line {}: expected `<utt_id> <length>`", n + 1)));
        };
        let len = len
            .parse()
            .map_err(|_| Error::Config(format!("line {}: bad length {len:?}", n + 1)))?;
        out.push((id.to_string(), len));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    pub start_prob: f64,
    pub span_length: usize,
    pub min_spans: usize,
    pub seed: u64,
}

impl Default for MaskSpec {
    fn default() -> Self {
        MaskSpec {
            start_prob: 0.08,
            span_length: 10,
            min_spans: 1,
            seed: 0,
        }
    }
}

impl MaskSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.start_prob) {
            return Err(Error::Config(format!("start_prob {} outside [0, 1]", self.start_prob)));
        }
        if self.span_length == 0 {
            return Err(Error::Config("span_length must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sorted, disjoint, non-empty `[start, end)` spans within `[0, t)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSet {
    pub t: usize,
    pub spans: Vec<(usize, usize)>,
}

impl MaskSet {
    pub fn masked_frames(&self) -> usize {
        self.spans.iter().map(|(s, e)| e - s).sum()
    }

    pub fn masked_fraction(&self) -> f64 {
        if self.t == 0 {
            0.0
        } else {
            self.masked_frames() as f64 / self.t as f64
        }
    }

    pub fn is_masked(&self, i: usize) -> bool {
        let k = self.spans.partition_point(|&(_, e)| e <= i);
        self.spans.get(k).is_some_and(|&(s, _)| s <= i)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.spans.iter().flat_map(|&(s, e)| s..e)
    }

    pub fn check(&self) -> Result<()> {
        let mut prev_end = 0;
        for (i, &(s, e)) in self.spans.iter().enumerate() {
            if s >= e || e > self.t || (i > 0 && s <= prev_end) {
                return Err(Error::InvalidRecord(format!("bad span [{s}, {e}) in mask over {}", self.t)));
            }
            prev_end = e;
        }
        Ok(())
    }

    fn insert(&mut self, s: usize, e: usize) {
        let mut spans = Vec::with_capacity(self.spans.len() + 1);
        let mut new = (s, e);
        let mut placed = false;
        for &(a, b) in &self.spans {
            if b < new.0 {
                spans.push((a, b));
            } else if a > new.1 {
                if !placed {
                    spans.push(new);
                    placed = true;
                }
                spans.push((a, b));
            } else {
                new = (new.0.min(a), new.1.max(b));
            }
        }
        if !placed {
            spans.push(new);
        }
        self.spans = spans;
    }
}

/// Each index starts a span with probability `start_prob`; spans are
/// clipped to `t` and merged where they touch or overlap. If fewer than
/// `min_spans` spans result and `t >= span_length`, one span is forced at a
/// uniformly drawn start.
pub fn sample_masks(t: usize, spec: &MaskSpec) -> Result<MaskSet> {
    spec.validate()?;
    let l = spec.span_length;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for i in 0..t {
        if rng.random::<f64>() < spec.start_prob {
            let end = (i + l).min(t);
            match spans.last_mut() {
                Some(last) if i <= last.1 => last.1 = last.1.max(end),
                _ => spans.push((i, end)),
            }
        }
    }
    let mut set = MaskSet { t, spans };
    if set.spans.len() < spec.min_spans && t >= l {
        let s = rng.random_range(0..=t - l);
        set.insert(s, s + l);
    }
    Ok(set)
}

/// Fraction of masked frames whose predicted label equals the reference;
/// `None` when nothing is masked.
pub fn masked_accuracy(
    predicted: &AssignmentSeq,
    reference: &AssignmentSeq,
    mask: &MaskSet,
) -> Result<Option<f64>> {
    if predicted.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: reference.len(),
        });
    }
    if mask.t != reference.len() {
        return Err(Error::LengthMismatch {
            left: mask.t,
            right: reference.len(),
        });
    }
    let total = mask.masked_frames();
    if total == 0 {
        return Ok(None);
    }
    let correct = mask
        .indices()
        .filter(|&i| predicted.labels[i] == reference.labels[i])
        .count();
    Ok(Some(correct as f64 / total as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccumPlan {
    pub micro_batches_per_step: u64,
    pub per_gpu_batch: u64,
    pub devices: u64,
    pub effective_batch: u64,
}

impl AccumPlan {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "micro_batches_per_step = {}", self.micro_batches_per_step);
        let _ = writeln!(s, "per_gpu_batch = {}", self.per_gpu_batch);
        let _ = writeln!(s, "devices = {}", self.devices);
        let _ = writeln!(s, "effective_batch = {}", self.effective_batch);
        s
    }
}

/// Accumulation steps needed to reach at least `target_effective` with
/// `devices` devices each taking `per_gpu_batch` per micro-batch.
pub fn accum_plan(target_effective: u64, per_gpu_batch: u64, devices: u64) -> Result<AccumPlan> {
    if target_effective == 0 || per_gpu_batch == 0 || devices == 0 {
        return Err(Error::Config("accumulation factors must all be at least 1".into()));
    }
    let step = per_gpu_batch
        .checked_mul(devices)
        .ok_or_else(|| Error::OutOfRange("per_gpu_batch * devices overflows".into()))?;
    let a = target_effective.div_ceil(step);
    Ok(AccumPlan {
        micro_batches_per_step: a,
        per_gpu_batch,
        devices,
        effective_batch: a * step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lens(v: &[(&str, u64)]) -> Vec<(String, u64)> {
        v.iter().map(|(a, b)| (a.to_string(), *b)).collect()
    }

    #[test]
    fn exact_fit_and_overflow() {
        let p = plan_batches(&lens(&[("a", 3), ("b", 3), ("c", 3)]), 9, OrderPolicy::SortedDescending, PayloadUnit::Frames).unwrap();
        assert_eq!(p.batches.len(), 1);
        assert_eq!(p.batches[0].utts, vec!["a", "b", "c"]);
        let p = plan_batches(&lens(&[("a", 5), ("b", 5)]), 9, OrderPolicy::ManifestOrder, PayloadUnit::Frames).unwrap();
        assert_eq!(p.batches.len(), 2);
    }

    #[test]
    fn oversized_is_flagged_singleton() {
        let p = plan_batches(&lens(&[("a", 2), ("big", 20), ("b", 3)]), 9, OrderPolicy::ManifestOrder, PayloadUnit::Samples).unwrap();
        let flags: Vec<_> = p.batches.iter().map(|b| (b.utts.join(","), b.oversized)).collect();
        assert_eq!(flags, vec![("a".into(), false), ("big".into(), true), ("b".into(), false)]);
        assert!(plan_batches(&[], 0, OrderPolicy::ManifestOrder, PayloadUnit::Samples).is_err());
        assert!(plan_batches(&lens(&[("a", 1), ("a", 2)]), 9, OrderPolicy::ManifestOrder, PayloadUnit::Samples).is_err());
    }

    #[test]
    fn text_format() {
        let p = plan_batches(&lens(&[("a", 5), ("b", 5), ("c", 1)]), 9, OrderPolicy::SortedDescending, PayloadUnit::Samples).unwrap();
        assert_eq!(p.to_text(), "# bin_size=9\n# unit=samples\na\nb\tc\n");
        assert_eq!(parse_lengths("# x\na 5\n\nb 7\n").unwrap(), lens(&[("a", 5), ("b", 7)]));
        assert!(parse_lengths("a").is_err());
    }

    #[test]
    fn mask_edge_cases() {
        let none = MaskSpec { start_prob: 0.0, min_spans: 0, ..MaskSpec::default() };
        assert!(sample_masks(100, &none).unwrap().spans.is_empty());
        let full = MaskSpec { start_prob: 1.0, span_length: 50, ..MaskSpec::default() };
        assert_eq!(sample_masks(50, &full).unwrap().spans, vec![(0, 50)]);
        let forced = MaskSpec { start_prob: 0.0, min_spans: 1, span_length: 10, seed: 4 };
        let m = sample_masks(30, &forced).unwrap();
        assert_eq!(m.masked_frames(), 10);
        assert!(sample_masks(5, &forced).unwrap().spans.is_empty());
        assert_eq!(sample_masks(0, &MaskSpec::default()).unwrap().spans, vec![]);
    }

    #[test]
    fn insert_merges() {
        let mut m = MaskSet { t: 100, spans: vec![(0, 5), (10, 20), (30, 40)] };
        m.insert(4, 12);
        assert_eq!(m.spans, vec![(0, 20), (30, 40)]);
        m.insert(50, 60);
        m.insert(21, 25);
        assert_eq!(m.spans, vec![(0, 20), (21, 25), (30, 40), (50, 60)]);
        assert!(m.is_masked(19) && !m.is_masked(20) && m.is_masked(21));
    }

    #[test]
    fn accuracy_cases() {
        let r = AssignmentSeq::new("u", (0..10).collect(), 10).unwrap();
        let mut p = r.clone();
        let all = MaskSet { t: 10, spans: vec![(0, 10)] };
        assert_eq!(masked_accuracy(&p, &r, &all).unwrap(), Some(1.0));
        for i in [1, 4, 8] {
            p.labels[i] = (p.labels[i] + 1) % 10;
        }
        assert_eq!(masked_accuracy(&p, &r, &all).unwrap(), Some(0.7));
        let q = AssignmentSeq::new("u", vec![0; 10], 10).unwrap();
        let outside = MaskSet { t: 10, spans: vec![(1, 10)] };
        assert_eq!(masked_accuracy(&q, &r, &outside).unwrap(), Some(0.0));
        let empty = MaskSet { t: 10, spans: vec![] };
        assert_eq!(masked_accuracy(&q, &r, &empty).unwrap(), None);
        let short = AssignmentSeq::new("u", vec![0; 9], 10).unwrap();
        assert!(masked_accuracy(&short, &r, &all).is_err());
    }

    #[test]
    fn accumulation() {
        assert_eq!(accum_plan(64, 8, 8).unwrap().micro_batches_per_step, 1);
        let b = 1_400_000;
        let a = accum_plan(32 * b, b, 8).unwrap();
        assert_eq!(a.micro_batches_per_step, 4);
        let a = accum_plan(100, 10, 3).unwrap();
        assert_eq!((a.micro_batches_per_step, a.effective_batch), (4, 120));
    }
}
