//! Fused labeling compared with the two-phase oracle (write every feature
//! matrix to disk, read it back, then assign), with byte accounting.

use std::fs;
use std::path::{Path, PathBuf};

use pseudolabel::clustering::assign_frames;
use pseudolabel::corpus_io::{load_ark_manifest, load_wav_manifest, parse_scp, read_ark_ints, read_ark_matrix, write_scp, ArkWriter};
use pseudolabel::labeling::{label_shards, IoCategory, IoLedger, ManifestSource};
use pseudolabel::{
    cluster_diagnostics, ManifestEntry, extract_mfcc39, read_wav, shard_manifest, train_kmeans, AssignmentSeq, Codebook,
    FeatureSource, MfccConfig, TrainParams,
};

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus/wav.scp")
}

fn codebook(k: usize) -> Codebook {
    let entries = load_wav_manifest(corpus()).unwrap();
    let src = FeatureSource::MfccFromWav(MfccConfig::default());
    let shards: Vec<ManifestSource> = shard_manifest(&entries, 2)
        .unwrap()
        .into_iter()
        .map(|s| ManifestSource::new(s.entries, &src).unwrap())
        .collect();
    let mut p = TrainParams::new(k, 2000, 17);
    p.workers = 2;
    train_kmeans(&shards, &p).unwrap()
}

fn read_labels(scp: &Path, k: usize) -> Vec<AssignmentSeq> {
    let text = fs::read_to_string(scp).unwrap();
    parse_scp(&text, scp.parent().unwrap())
        .unwrap()
        .iter()
        .map(|e| read_ark_ints(e, k).unwrap())
        .collect()
}

fn dir_bytes(dir: &Path) -> u64 {
    fs::read_dir(dir).unwrap().map(|e| e.unwrap().metadata().unwrap().len()).sum()
}

/// Phase 1 persists all features to `feats.ark`; phase 2 assigns from disk.
fn two_phase(cb: &Codebook, dir: &Path, ledger: &IoLedger) -> (Vec<AssignmentSeq>, Vec<ManifestEntry>) {
    let entries = load_wav_manifest(corpus()).unwrap();
    let ark = dir.join("feats.ark");
    let file = fs::File::create(&ark).unwrap();
    let mut w = ArkWriter::new(ledger.counting(std::io::BufWriter::new(file), IoCategory::Features), &ark, 0);
    let mut feats = Vec::new();
    for e in &entries {
        let mut wave = read_wav(&e.source_path).unwrap();
        wave.utt_id = e.utt_id.clone();
        feats.push(w.write_matrix(&extract_mfcc39(&wave, &MfccConfig::default()).unwrap()).unwrap());
    }
    w.flush().unwrap();
    drop(w);
    let labels = feats
        .iter()
        .map(|e| assign_frames(cb, &read_ark_matrix(e).unwrap()).unwrap().0)
        .collect();
    (labels, feats)
}

#[test]
fn fused_mfcc_labels_equal_two_phase_and_persist_no_features() {
    let cb = codebook(8);
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fused");
    let ledger = IoLedger::new();
    let entries = load_wav_manifest(corpus()).unwrap();
    let shards = shard_manifest(&entries, 3).unwrap();
    let src = FeatureSource::MfccFromWav(MfccConfig::default());
    let reports = label_shards(&shards, &cb, &src, &out, &ledger).unwrap();

    assert_eq!(ledger.bytes(IoCategory::Features), 0);
    assert_eq!(ledger.total(), dir_bytes(&out));
    let label_files: u64 = reports.iter().map(|r| r.archive_bytes).sum();
    assert_eq!(ledger.bytes(IoCategory::Labels), label_files);
    assert!(fs::read_dir(&out).unwrap().all(|e| {
        let n = e.unwrap().file_name().into_string().unwrap();
        n.starts_with("labels.") && (n.ends_with(".ark") || n.ends_with(".scp"))
    }));

    let oracle_ledger = IoLedger::new();
    let oracle_dir = tmp.path().join("oracle");
    fs::create_dir_all(&oracle_dir).unwrap();
    let (oracle, _) = two_phase(&cb, &oracle_dir, &oracle_ledger);
    assert!(oracle_ledger.bytes(IoCategory::Features) > 10 * ledger.total());

    let mut fused = read_labels(&out.join("labels.scp"), 8);
    fused.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
    assert_eq!(fused, oracle);
    for (s, o) in fused.iter().zip(&oracle) {
        assert_eq!(s.len(), 98);
        assert_eq!(s.labels, o.labels);
    }
    let frames: u64 = reports.iter().map(|r| r.frames).sum();
    assert_eq!(frames, 980);
    let d = cluster_diagnostics(out.join("labels.scp"), 8).unwrap();
    assert_eq!(d.total, 980);
}

#[test]
fn fused_ark_labels_equal_two_phase() {
    let cb = codebook(6);
    let tmp = tempfile::tempdir().unwrap();
    let ledger = IoLedger::new();
    let (oracle, feats) = two_phase(&cb, tmp.path(), &ledger);
    let scp = tmp.path().join("feats.scp");
    let mut text = Vec::new();
    write_scp(&feats, &mut text).unwrap();
    fs::write(&scp, text).unwrap();

    let (entries, dim) = load_ark_manifest(&scp).unwrap();
    assert_eq!(dim, Some(39));
    let out = tmp.path().join("ark_out");
    let src = FeatureSource::PrecomputedArk { layer_index: 6 };
    let ark_ledger = IoLedger::new();
    label_shards(&shard_manifest(&entries, 2).unwrap(), &cb, &src, &out, &ark_ledger).unwrap();
    let mut got = read_labels(&out.join("labels.scp"), 6);
    got.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
    assert_eq!(got, oracle);
}

#[test]
fn merged_index_is_in_shard_order() {
    let cb = codebook(4);
    let tmp = tempfile::tempdir().unwrap();
    let entries = load_wav_manifest(corpus()).unwrap();
    let shards = shard_manifest(&entries, 3).unwrap();
    let src = FeatureSource::MfccFromWav(MfccConfig::default());
    label_shards(&shards, &cb, &src, tmp.path(), &IoLedger::new()).unwrap();
    let text = fs::read_to_string(tmp.path().join("labels.scp")).unwrap();
    let ids: Vec<&str> = text.lines().map(|l| l.split(' ').next().unwrap()).collect();
    let want: Vec<&str> = shards.iter().flat_map(|s| s.entries.iter().map(|e| e.utt_id.as_str())).collect();
    assert_eq!(ids, want);
    assert!(text.lines().all(|l| l.split(' ').nth(1).unwrap().starts_with("labels.")));
}
