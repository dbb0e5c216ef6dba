//! `nametype`: corpus to vocabulary to embeddings to name typing reports.

mod config;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use nametype::classify::{ClassifierConfig, ClassifierKind};
use nametype::dataset::{
    dataset_stats, derive_name_types, filter_names, load_entity_types, load_name_entities,
    load_prebuilt, load_type_mapping, sample_and_split, select_top_k_types, write_stats,
    NameTypingDataset, Split, TypeSet, TypeSystem,
};
use nametype::embed::{self, ModelKind, TrainingConfig};
use nametype::embed_io::{read_embeddings, write_embeddings, EmbeddingFileFormat};
use nametype::evaluate::{emit_report, evaluate_grid, read_reports, ReportFormat, DEFAULT_MIN_GROUP};
use nametype::par::Strategy;
use nametype::vocab::{
    build_vocabulary, EncodedCorpus, NegativeTable, Vocabulary, DEFAULT_NEGATIVE_POWER,
    DEFAULT_NEGATIVE_TABLE_SIZE,
};
use nametype::EmbeddingMatrix;

use config::{usage, FileConfig, Fractions, UsageError};

#[derive(Parser, Debug)]
#[command(name = "nametype", version, about = "Train word embeddings and score them on fine-grained name typing")]
struct Cli {
    /// Seed for every stochastic stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 gives bit-reproducible training.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Flat `key = value` settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Embedding file format: w2v-text, w2v-bin or glove.
    #[arg(long, global = true)]
    format: Option<EmbeddingFileFormat>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Count corpus tokens and write a `token<TAB>count` dump.
    BuildVocab(BuildVocabArgs),
    /// Train one embedding model and write its input vectors.
    TrainEmbeddings(TrainArgs),
    /// Derive, filter, sample and split a name typing dataset.
    BuildDataset(DatasetArgs),
    /// Fit classifiers on embeddings and score the test split.
    Evaluate(EvaluateArgs),
    /// Merge JSON reports and render them again.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct BuildVocabArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Default 100.
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    lowercase: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Vocabulary dump; built from the corpus when absent.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    lowercase: bool,
    /// skip, cbow, sskip or cwin.
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f32>,
    #[arg(long)]
    min_lr: Option<f32>,
    /// Subsampling threshold, e.g. 1e-4. Off by default.
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long)]
    dynamic_window: bool,
    #[arg(long)]
    neg_table_size: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DatasetArgs {
    /// Ready-made `name<TAB>type,type` file.
    #[arg(long)]
    prebuilt: Option<PathBuf>,
    /// `name<TAB>entity,entity` rows.
    #[arg(long)]
    name_entities: Option<PathBuf>,
    /// `entity<TAB>raw_type,raw_type` rows.
    #[arg(long)]
    entity_types: Option<PathBuf>,
    /// `raw_type<TAB>coarse_type` rows.
    #[arg(long)]
    type_mapping: Option<PathBuf>,
    /// Vocabulary dump for the corpus frequency filter.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Fixed type inventory, one per line; otherwise the top-k types.
    #[arg(long)]
    types: Option<PathBuf>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    min_freq: Option<u64>,
    #[arg(long)]
    sample: Option<usize>,
    /// train,dev,test; default 0.5,0.2,0.3.
    #[arg(long)]
    fractions: Option<Fractions>,
    #[arg(long)]
    lowercase: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// `NAME=PATH` or `PATH` (name taken from the file stem). Repeatable.
    #[arg(long = "embeddings")]
    embeddings: Vec<String>,
    /// Directory written by build-dataset.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// lr, mlp or both (comma-separated or repeated).
    #[arg(long, value_delimiter = ',')]
    classifier: Vec<ClassifierKind>,
    /// Standardize features with train-split statistics.
    #[arg(long)]
    standardize: bool,
    /// One single-output MLP per type instead of a shared hidden layer.
    #[arg(long)]
    mlp_per_type: bool,
    #[arg(long)]
    clf_epochs: Option<usize>,
    #[arg(long)]
    clf_lr: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Smallest group size kept in the per-count breakdown (exclusive).
    #[arg(long)]
    min_group: Option<usize>,
    /// tsv or table.
    #[arg(long)]
    report_format: Option<ReportFormat>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// JSON reports written by evaluate.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    report_format: Option<ReportFormat>,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Globals {
    seed: u64,
    workers: usize,
    format: Option<EmbeddingFileFormat>,
    file: FileConfig,
}

impl Globals {
    fn strategy(&self) -> Strategy {
        if self.workers > 1 {
            Strategy::default()
        } else {
            Strategy::Sequential
        }
    }
}

fn existing(path: PathBuf) -> Result<PathBuf> {
    if !path.exists() {
        bail!("input {} does not exist", path.display());
    }
    Ok(path)
}

fn build_vocab(g: &Globals, a: BuildVocabArgs) -> Result<()> {
    let corpus = existing(g.file.require(a.corpus, "corpus")?)?;
    let out: PathBuf = g.file.require(a.out, "out")?;
    let min_count = g.file.pick_or(a.min_count, "min_count", 100)?;
    let lowercase = g.file.switch(a.lowercase, "lowercase")?;
    let (vocab, stats) = build_vocabulary(&corpus, min_count, lowercase)?;
    info!(
        "{} lines, {} tokens, {} types kept, {} tokens dropped",
        stats.total_lines,
        stats.total_tokens,
        vocab.len(),
        stats.oov_tokens_dropped
    );
    vocab.write_tsv(&out)?;
    info!("wrote {}", out.display());
    Ok(())
}

fn train_embeddings(g: &Globals, a: TrainArgs) -> Result<()> {
    let f = &g.file;
    let corpus = existing(f.require(a.corpus, "corpus")?)?;
    let out: PathBuf = f.require(a.out, "out")?;
    let model: ModelKind = f.require(a.model, "model")?;
    let min_count = f.pick_or(a.min_count, "min_count", 100)?;
    let lowercase = f.switch(a.lowercase, "lowercase")?;

    let vocab = match f.pick::<PathBuf>(a.vocab, "vocab")? {
        Some(p) => Vocabulary::read_tsv(&existing(p)?, min_count, lowercase)?,
        None => build_vocabulary(&corpus, min_count, lowercase)?.0,
    };
    let mut cfg = TrainingConfig::new(model);
    cfg.dim = f.pick_or(a.dim, "dim", cfg.dim)?;
    cfg.window = f.pick_or(a.window, "window", cfg.window)?;
    cfg.negatives = f.pick_or(a.negatives, "negatives", cfg.negatives)?;
    cfg.epochs = f.pick_or(a.epochs, "epochs", cfg.epochs)?;
    cfg.initial_lr = f.pick_or(a.lr, "lr", cfg.initial_lr)?;
    cfg.min_lr = f.pick_or(a.min_lr, "min_lr", cfg.initial_lr * 1e-4)?;
    cfg.subsample = f.pick(a.subsample, "subsample")?;
    cfg.dynamic_window = f.switch(a.dynamic_window, "dynamic_window")?;
    cfg.seed = g.seed;
    cfg.workers = g.workers;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let table_size = f.pick_or(a.neg_table_size, "neg_table_size", DEFAULT_NEGATIVE_TABLE_SIZE)?;

    let encoded = EncodedCorpus::load(&corpus, &vocab)?;
    let table = NegativeTable::new(&vocab, table_size, DEFAULT_NEGATIVE_POWER)?;
    info!(
        "training {} on {} tokens, vocabulary {}, dim {}, window {}, {} negatives, {} epochs",
        model,
        encoded.n_tokens(),
        vocab.len(),
        cfg.dim,
        cfg.window,
        cfg.negatives,
        cfg.epochs
    );
    let trained = embed::train_with(&cfg, &encoded, &vocab, &table, g.strategy())?;
    let format = g
        .format
        .map_or_else(|| f.pick_or(None, "format", EmbeddingFileFormat::Word2VecBinary), Ok)?;
    write_embeddings(&trained.embeddings, &out, format)?;
    info!("wrote {} ({format})", out.display());
    Ok(())
}

fn build_dataset(g: &Globals, a: DatasetArgs) -> Result<()> {
    let f = &g.file;
    let out: PathBuf = f.require(a.out, "out")?;
    let lowercase = f.switch(a.lowercase, "lowercase")?;
    let fractions = f.pick_or(a.fractions, "fractions", Fractions(0.5, 0.2, 0.3))?;
    let sample = f.pick_or(a.sample, "sample", 100_000)?;
    let min_freq = f.pick_or(a.min_freq, "min_freq", 100)?;
    let top_k = f.pick_or(a.top_k, "top_k", 50)?;

    let name_types = match f.pick::<PathBuf>(a.prebuilt, "prebuilt")? {
        Some(p) => {
            let raw = load_prebuilt(&existing(p)?)?;
            if lowercase {
                let mut merged: BTreeMap<String, _> = BTreeMap::new();
                for (name, types) in raw {
                    merged
                        .entry(name.to_lowercase())
                        .or_insert_with(std::collections::BTreeSet::new)
                        .extend(types);
                }
                merged
            } else {
                raw
            }
        }
        None => {
            let index = load_name_entities(&existing(f.require(a.name_entities, "name_entities")?)?)?;
            let entities = load_entity_types(&existing(f.require(a.entity_types, "entity_types")?)?)?;
            let mapping = load_type_mapping(&existing(f.require(a.type_mapping, "type_mapping")?)?)?;
            let (derived, stats) = derive_name_types(&index, &entities, &mapping, lowercase);
            info!(
                "{} names derived; {} untyped entity references, {} names without a mapped type",
                derived.len(),
                stats.untyped_entities,
                stats.empty_names
            );
            derived
        }
    };

    let type_system = match f.pick::<PathBuf>(a.types, "types")? {
        Some(p) => TypeSystem::read(&existing(p)?)?,
        None => select_top_k_types(&name_types, top_k)?,
    };
    let filtered = match f.pick::<PathBuf>(a.vocab, "vocab")? {
        Some(p) => {
            let vocab = Vocabulary::read_tsv(&existing(p)?, 1, false)?;
            filter_names(&name_types, &type_system, &vocab, min_freq)
        }
        None => {
            warn!("no --vocab given; skipping the corpus frequency filter");
            name_types
                .iter()
                .filter(|(n, _)| !n.is_empty() && !n.contains(char::is_whitespace))
                .map(|(n, t)| (n.clone(), type_system.encode(t.iter().map(String::as_str))))
                .filter(|(_, s): &(String, TypeSet)| !s.is_empty())
                .collect()
        }
    };
    info!("{} names pass the filters over {} types", filtered.len(), type_system.len());
    if filtered.is_empty() {
        bail!("no name survives filtering");
    }
    let Fractions(tr, dv, te) = fractions;
    let dataset = sample_and_split(&filtered, &type_system, sample, (tr, dv, te), g.seed)?;
    dataset.write(&out)?;
    write_stats(&dataset_stats(&dataset), &out.join("stats.tsv"))?;
    info!(
        "wrote {}: train {}, dev {}, test {}",
        out.display(),
        dataset.train.len(),
        dataset.dev.len(),
        dataset.test.len()
    );
    Ok(())
}

fn embedding_name(spec: &str) -> (String, PathBuf) {
    if let Some((name, path)) = spec.split_once('=') {
        if !name.is_empty() && !name.contains(['/', '\\']) {
            return (name.to_string(), PathBuf::from(path));
        }
    }
    let path = PathBuf::from(spec);
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| spec.to_string());
    let name = stem
        .parse::<ModelKind>()
        .map(|k| k.name().to_string())
        .unwrap_or(stem);
    (name, path)
}

fn load_dataset(dir: &Path) -> Result<NameTypingDataset> {
    let dir = existing(dir.to_path_buf())?;
    for split in Split::ALL {
        let p = dir.join(split.file_name());
        if !p.exists() {
            bail!("dataset split {} is missing", p.display());
        }
    }
    NameTypingDataset::read(&dir).with_context(|| format!("reading dataset {}", dir.display()))
}

fn evaluate(g: &Globals, a: EvaluateArgs) -> Result<()> {
    let f = &g.file;
    let specs = f.list(&a.embeddings, "embeddings");
    if specs.is_empty() {
        return Err(usage("--embeddings is required"));
    }
    let dataset = load_dataset(&f.require::<PathBuf>(a.dataset, "dataset")?)?;
    let out: PathBuf = f.require(a.out, "out")?;
    let kinds: Vec<ClassifierKind> = if a.classifier.is_empty() {
        let listed = f.list(&[], "classifier");
        if listed.is_empty() {
            vec![ClassifierKind::Lr, ClassifierKind::Mlp]
        } else {
            listed
                .iter()
                .map(|s| s.parse().map_err(|e| usage(format!("config key classifier: {e}"))))
                .collect::<Result<_>>()?
        }
    } else {
        a.classifier.clone()
    };
    let standardize = f.switch(a.standardize, "standardize")?;
    let per_type = f.switch(a.mlp_per_type, "mlp_per_type")?;
    let mut classifiers = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let d = ClassifierConfig::for_kind(kind);
        let c = ClassifierConfig {
            epochs: f.pick_or(a.clf_epochs, "clf_epochs", d.epochs)?,
            learning_rate: f.pick_or(a.clf_lr, "clf_lr", d.learning_rate)?,
            l2: f.pick_or(a.l2, "l2", d.l2)?,
            hidden: f.pick_or(a.hidden, "hidden", d.hidden)?,
            batch_size: f.pick_or(a.batch_size, "batch_size", d.batch_size)?,
            momentum: f.pick_or(a.momentum, "momentum", d.momentum)?,
            patience: f.pick_or(a.patience, "patience", d.patience)?,
            threshold: f.pick_or(a.threshold, "threshold", d.threshold)?,
            seed: g.seed,
            standardize,
            mlp_per_type: per_type,
            strategy: g.strategy(),
            ..d
        };
        c.validate().map_err(|e| usage(e.to_string()))?;
        classifiers.push(c);
    }
    let min_group = f.pick_or(a.min_group, "min_group", DEFAULT_MIN_GROUP)?;
    let report_format = f.pick_or(a.report_format, "report_format", ReportFormat::Tsv)?;

    let wanted: HashSet<String> = Split::ALL
        .iter()
        .flat_map(|&s| dataset.split(s).iter().map(|e| e.name.clone()))
        .collect();
    let mut embeddings: Vec<(String, EmbeddingMatrix)> = Vec::with_capacity(specs.len());
    for spec in &specs {
        let (name, path) = embedding_name(spec);
        let path = existing(path)?;
        let format = match g.format.or(f.pick(None, "format")?) {
            Some(fmt) => fmt,
            None => EmbeddingFileFormat::detect(&path)?,
        };
        let emb = read_embeddings(&path, format, Some(&wanted))
            .with_context(|| format!("reading {}", path.display()))?;
        info!("{name}: {} of {} dataset names embedded, dim {}", emb.len(), wanted.len(), emb.dim());
        if embeddings.iter().any(|(n, _)| *n == name) {
            return Err(usage(format!("embedding name {name:?} given twice")));
        }
        embeddings.push((name, emb));
    }

    let reports = evaluate_grid(&embeddings, &dataset, &classifiers, min_group, g.strategy())?;
    for p in emit_report(&reports, &out, report_format)? {
        info!("wrote {}", p.display());
    }
    Ok(())
}

fn report(g: &Globals, a: ReportArgs) -> Result<()> {
    let out: PathBuf = g.file.require(a.out, "out")?;
    let format = g.file.pick_or(a.report_format, "report_format", ReportFormat::HumanTable)?;
    let mut reports = Vec::new();
    for p in a.inputs {
        let p = existing(p)?;
        reports.extend(read_reports(&p).with_context(|| format!("reading {}", p.display()))?);
    }
    for p in emit_report(&reports, &out, format)? {
        info!("wrote {}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = file.pick_or(cli.seed, "seed", 1)?;
    let workers = file.pick_or(cli.workers, "workers", 1)?;
    if workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    if workers > 1 && std::env::var_os("RAYON_NUM_THREADS").is_none() {
        std::env::set_var("RAYON_NUM_THREADS", workers.to_string());
    }
    let g = Globals {
        seed,
        workers,
        format: cli.format,
        file,
    };
    match cli.command {
        Command::BuildVocab(a) => build_vocab(&g, a),
        Command::TrainEmbeddings(a) => train_embeddings(&g, a),
        Command::BuildDataset(a) => build_dataset(&g, a),
        Command::Evaluate(a) => evaluate(&g, a),
        Command::Report(a) => report(&g, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
