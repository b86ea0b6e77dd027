use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pseudolabel"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name)
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn corpus_config(dir: &Path, k: usize) -> PathBuf {
    let path = dir.join("pipeline.cfg");
    fs::write(
        &path,
        format!(
            "manifest = {}\nk = {k}\nbudget = 4000\nseed = 3\nworkers = 2\noutput_dir = out\n",
            data("corpus/wav.scp").display()
        ),
    )
    .unwrap();
    path
}

fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .to_string()
}

#[test]
fn train_then_label_fills_every_cluster() {
    let tmp = tempfile::tempdir().unwrap();
    corpus_config(tmp.path(), 8);
    let o = run(tmp.path(), &["--config", "pipeline.cfg", "train-kmeans"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(field(&stdout(&o), "k"), "8");
    assert_eq!(field(&stdout(&o), "dim"), "39");
    assert!(tmp.path().join("out/codebook.plkm").is_file());

    let o = run(tmp.path(), &["--config", "pipeline.cfg", "label"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(field(&text, "frames"), "980");
    assert_eq!(field(&text, "empty_clusters"), "0");
    assert!(tmp.path().join("out/labels/labels.scp").is_file());

    let o = run(tmp.path(), &["-k", "8", "diagnose", "out/labels/labels.scp"]);
    assert!(o.status.success());
    assert_eq!(field(&stdout(&o), "empty_clusters"), "0");

    // a model that predicts the reference exactly scores 1 on any mask
    let o = run(
        tmp.path(),
        &["-k", "8", "diagnose", "out/labels/labels.scp", "--predicted", "out/labels/labels.scp"],
    );
    assert!(o.status.success());
    assert_eq!(field(&stdout(&o), "masked_accuracy"), "1.000000");
}

#[test]
fn oversized_codebook_exits_numeric() {
    let tmp = tempfile::tempdir().unwrap();
    corpus_config(tmp.path(), 5000);
    let o = run(tmp.path(), &["--config", "pipeline.cfg", "train-kmeans"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("distinct frames"));
}

#[test]
fn identical_configs_give_identical_codebooks() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        corpus_config(d, 8);
        assert!(run(d, &["--config", "pipeline.cfg", "train-kmeans"]).status.success());
    }
    let read = |d: &Path| fs::read(d.join("out/codebook.plkm")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn cli_overrides_take_effect() {
    let tmp = tempfile::tempdir().unwrap();
    corpus_config(tmp.path(), 8);
    let o = run(tmp.path(), &["--config", "pipeline.cfg", "-k", "4", "--seed", "9", "train-kmeans"]);
    assert!(o.status.success());
    assert_eq!(field(&stdout(&o), "k"), "4");
}

#[test]
fn empty_manifest_labels_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    corpus_config(tmp.path(), 8);
    assert!(run(tmp.path(), &["--config", "pipeline.cfg", "train-kmeans"]).status.success());
    fs::write(tmp.path().join("empty.scp"), "").unwrap();
    fs::write(tmp.path().join("empty.cfg"), "manifest = empty.scp\nk = 8\noutput_dir = empty_out\n").unwrap();
    let o = run(tmp.path(), &["--config", "empty.cfg", "label", "--codebook", "out/codebook.plkm"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(field(&stdout(&o), "frames"), "0");
}

#[test]
fn dimension_mismatch_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    corpus_config(tmp.path(), 8);
    assert!(run(tmp.path(), &["--config", "pipeline.cfg", "train-kmeans"]).status.success());
    fs::write(tmp.path().join("feats.scp"), format!("utt1 {}:5\n", data("matrix_2x3.ark").display())).unwrap();
    fs::write(
        tmp.path().join("ark.cfg"),
        "manifest = feats.scp\nsource = ark\nlayer_index = 6\nk = 8\noutput_dir = ark_out\n",
    )
    .unwrap();
    let o = run(tmp.path(), &["--config", "ark.cfg", "label", "--codebook", "out/codebook.plkm"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dimension mismatch: expected 39, found 3"));
}

#[test]
fn missing_config_and_bad_keys_exit_config() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(tmp.path(), &["train-kmeans"]).status.code(), Some(2));
    fs::write(tmp.path().join("bad.cfg"), "manifest = x.scp\nbogus = 1\n").unwrap();
    assert_eq!(run(tmp.path(), &["--config", "bad.cfg", "train-kmeans"]).status.code(), Some(2));
    fs::write(tmp.path().join("gone.cfg"), "manifest = nowhere.scp\n").unwrap();
    assert_eq!(run(tmp.path(), &["--config", "gone.cfg", "train-kmeans"]).status.code(), Some(3));
}

#[test]
fn plan_batches_respects_bin() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("lens.txt"), "a 30\nb 20\nc 50\nd 10\ne 120\n").unwrap();
    let o = run(tmp.path(), &["plan-batches", "--lengths", "lens.txt", "--bin-size", "60"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("# bin_size=60\n"));
    let batches: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    let mut seen: Vec<String> = batches.iter().flat_map(|l| l.split('\t').map(str::to_string)).collect();
    seen.retain(|t| t.chars().all(|c| c.is_ascii_lowercase()) && !t.is_empty());
    seen.sort();
    seen.dedup();
    assert_eq!(seen, ["a", "b", "c", "d", "e"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("1 oversized"));

    let o = run(tmp.path(), &["plan-batches", "--lengths", "lens.txt", "--bin-size", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sample_masks_is_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run(tmp.path(), &["--seed", "5", "sample-masks", "--length", "500"]);
    let b = run(tmp.path(), &["--seed", "5", "sample-masks", "--length", "500"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("# length=500 masked="));
    for line in text.lines().skip(1) {
        let (s, e) = line.split_once('\t').unwrap();
        let (s, e): (usize, usize) = (s.parse().unwrap(), e.parse().unwrap());
        assert!(s < e && e <= 500);
    }
    let o = run(tmp.path(), &["sample-masks", "--length", "10", "--start-prob", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn score_superb_from_stdin() {
    let mut child = bin()
        .args(["score-superb", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"hubert_base 5.4 6.4 96.3 7.4 98.3 88.5 25.2 5.1 5.9 64.9\n")
        .unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    assert_eq!(stdout(&o), "hubert_base\t80.7\n");
}
