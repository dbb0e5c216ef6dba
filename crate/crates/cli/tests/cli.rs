use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nametype::synth::{name_typing_corpus, NameTypingSpec};
use tempfile::TempDir;

fn nametype(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nametype"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = nametype(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    /// Small synthetic corpus plus a pre-built `name<TAB>types` file.
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let spec = NameTypingSpec {
            names: 400,
            types: 6,
            fillers: 30,
            ..Default::default()
        };
        let c = name_typing_corpus(4, &spec);
        fs::write(dir.path().join("corpus.txt"), c.lines.join("\n") + "\n").unwrap();
        let rows: String = c
            .name_types
            .iter()
            .map(|(n, t)| format!("{n}\t{}\n", t.iter().cloned().collect::<Vec<_>>().join(",")))
            .collect();
        fs::write(dir.path().join("names.tsv"), rows).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn vocab(&self) -> String {
        let out = self.p("vocab.tsv");
        ok(&["build-vocab", "--corpus", &self.p("corpus.txt"), "--min-count", "5", "--out", &out]);
        out
    }

    fn dataset(&self, dir: &str, seed: &str) -> String {
        let vocab = self.vocab();
        let out = self.p(dir);
        ok(&[
            "build-dataset",
            "--prebuilt",
            &self.p("names.tsv"),
            "--vocab",
            &vocab,
            "--top-k",
            "6",
            "--min-freq",
            "5",
            "--sample",
            "300",
            "--seed",
            seed,
            "--out",
            &out,
        ]);
        out
    }

    fn embeddings(&self, model: &str, epochs: &str) -> String {
        let out = self.p(&format!("{model}.bin"));
        ok(&[
            "train-embeddings",
            "--corpus",
            &self.p("corpus.txt"),
            "--min-count",
            "5",
            "--model",
            model,
            "--dim",
            "16",
            "--window",
            "2",
            "--negatives",
            "5",
            "--epochs",
            epochs,
            "--neg-table-size",
            "100000",
            "--out",
            &out,
        ]);
        out
    }
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn build_vocab_writes_counts_in_descending_order() {
    let f = Fixture::new();
    let out = f.vocab();
    let text = read(Path::new(&out));
    let counts: Vec<u64> = text
        .lines()
        .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(!counts.is_empty());
    assert!(counts.windows(2).all(|w| w[0] >= w[1]));
    assert!(counts.iter().all(|&c| c >= 5));
}

#[test]
fn missing_corpus_fails_with_message() {
    let f = Fixture::new();
    let out = nametype(&["build-vocab", "--corpus", &f.p("nope.txt"), "--out", &f.p("v.tsv")]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.txt"));
    assert!(!f.path("v.tsv").exists());
}

#[test]
fn min_count_excluding_everything_fails() {
    let f = Fixture::new();
    let out = nametype(&[
        "build-vocab",
        "--corpus",
        &f.p("corpus.txt"),
        "--min-count",
        "100000000",
        "--out",
        &f.p("v.tsv"),
    ]);
    assert!(!out.status.success());
}

#[test]
fn zero_epochs_emit_initialization() {
    let f = Fixture::new();
    let out = f.p("init.txt");
    ok(&[
        "train-embeddings",
        "--corpus",
        &f.p("corpus.txt"),
        "--min-count",
        "5",
        "--model",
        "sskip",
        "--dim",
        "8",
        "--epochs",
        "0",
        "--neg-table-size",
        "1000",
        "--format",
        "w2v-text",
        "--out",
        &out,
    ]);
    let text = read(Path::new(&out));
    let mut lines = text.lines();
    let header: Vec<usize> = lines
        .next()
        .unwrap()
        .split(' ')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(header[1], 8);
    for line in lines {
        for v in line.split(' ').skip(1) {
            let v: f32 = v.parse().unwrap();
            assert!(v.abs() <= 0.5 / 8.0);
        }
    }
}

#[test]
fn unknown_model_is_a_usage_error() {
    let f = Fixture::new();
    let out = nametype(&[
        "train-embeddings",
        "--corpus",
        &f.p("corpus.txt"),
        "--model",
        "glove",
        "--out",
        &f.p("e.bin"),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_fractions_are_a_usage_error() {
    let f = Fixture::new();
    let out = nametype(&[
        "build-dataset",
        "--prebuilt",
        &f.p("names.tsv"),
        "--fractions",
        "0.5,0.2,0.2",
        "--out",
        &f.p("ds"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = f.p("bad.toml");
    fs::write(&cfg, "fractions = \"0.6,0.6,0.1\"\n").unwrap();
    let out = nametype(&["build-dataset", "--config", &cfg, "--prebuilt", &f.p("names.tsv"), "--out", &f.p("ds")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dataset_has_splits_and_stats_and_is_seeded() {
    let f = Fixture::new();
    let a = f.dataset("ds_a", "7");
    let b = f.dataset("ds_b", "7");
    let c = f.dataset("ds_c", "8");
    for file in ["types.txt", "train.tsv", "dev.tsv", "test.tsv", "stats.tsv"] {
        let left = fs::read(Path::new(&a).join(file)).unwrap();
        assert_eq!(left, fs::read(Path::new(&b).join(file)).unwrap(), "{file}");
    }
    let rows = |d: &str, s: &str| read(&Path::new(d).join(s)).lines().count();
    assert_eq!((rows(&a, "train.tsv"), rows(&a, "dev.tsv"), rows(&a, "test.tsv")), (150, 60, 90));
    assert_ne!(read(&Path::new(&a).join("train.tsv")), read(&Path::new(&c).join("train.tsv")));
    assert!(read(&Path::new(&a).join("stats.tsv")).starts_with("split\tn_names\tavg_types"));
}

#[test]
fn same_seed_gives_identical_embeddings() {
    let f = Fixture::new();
    let a = fs::read(f.embeddings("cwin", "1")).unwrap();
    let b = fs::read(f.embeddings("cwin", "1")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_file_values_yield_to_flags() {
    let f = Fixture::new();
    let cfg = f.p("run.toml");
    fs::write(
        &cfg,
        format!(
            "corpus = {:?}\nmin_count = 5\nmodel = \"cbow\"\ndim = 7\nepochs = 0\nneg_table_size = 1000\nformat = \"w2v-text\"\n",
            f.p("corpus.txt")
        ),
    )
    .unwrap();
    let from_file = f.p("file.txt");
    ok(&["train-embeddings", "--config", &cfg, "--out", &from_file]);
    let overridden = f.p("flag.txt");
    ok(&["train-embeddings", "--config", &cfg, "--dim", "3", "--out", &overridden]);
    let dim = |p: &str| read(Path::new(p)).lines().next().unwrap().split(' ').nth(1).unwrap().to_string();
    assert_eq!(dim(&from_file), "7");
    assert_eq!(dim(&overridden), "3");
}

#[test]
fn evaluate_grid_and_report() {
    let f = Fixture::new();
    let ds = f.dataset("ds", "3");
    let skip = f.embeddings("skip", "2");
    let sskip = f.embeddings("sskip", "2");
    let out = f.p("report.tsv");
    ok(&[
        "evaluate",
        "--embeddings",
        &skip,
        "--embeddings",
        &format!("ordered={sskip}"),
        "--dataset",
        &ds,
        "--classifier",
        "lr,mlp",
        "--clf-epochs",
        "5",
        "--min-group",
        "0",
        "--out",
        &out,
    ]);
    let text = read(Path::new(&out));
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 4);
    let keys: Vec<(&str, &str)> = rows.iter().map(|r| (r[0], r[1])).collect();
    assert_eq!(keys, [("SKIP", "LR"), ("SKIP", "MLP"), ("ordered", "LR"), ("ordered", "MLP")]);
    for r in &rows {
        for v in &r[2..] {
            let v: f64 = v.parse().unwrap();
            assert!((0.0..=100.0).contains(&v));
        }
    }
    assert!(f.path("report.json").exists());
    assert!(f.path("report.SKIP.LR.breakdown.csv").exists());

    let table = f.p("table.txt");
    ok(&["report", "--input", &f.p("report.json"), "--out", &table]);
    assert!(read(Path::new(&table)).contains("ordered"));
}

#[test]
fn evaluate_fails_on_missing_split() {
    let f = Fixture::new();
    let ds = f.dataset("ds", "3");
    let emb = f.embeddings("skip", "0");
    fs::remove_file(Path::new(&ds).join("dev.tsv")).unwrap();
    let out = nametype(&["evaluate", "--embeddings", &emb, "--dataset", &ds, "--out", &f.p("r.tsv")]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dev.tsv"));
    assert!(!f.path("r.tsv").exists());
}
