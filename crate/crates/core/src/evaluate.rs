//! Strict accuracy, micro-F1, the micro-F1 breakdown by gold-type count, and
//! report emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::classify::{ClassifierConfig, ClassifierKind, Features, TrainedClassifier};
use crate::dataset::{NameTypingDataset, NameTypingExample, Split, TypeSet};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::par::{self, Strategy};

/// Breakdown groups must have strictly more members than this.
pub const DEFAULT_MIN_GROUP: usize = 100;

/// Pooled decision counts over (example, type) pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn of(pred: &TypeSet, gold: &TypeSet) -> Self {
        let tp = pred.intersection_count(gold) as u64;
        Counts {
            tp,
            fp: pred.count() as u64 - tp,
            fn_: gold.count() as u64 - tp,
        }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2 TP / (2 TP + FP + FN)`, or 0 when nothing was predicted or gold.
    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

impl std::ops::Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl std::iter::Sum for Counts {
    fn sum<I: Iterator<Item = Counts>>(iter: I) -> Counts {
        iter.fold(Counts::default(), |a, b| a + b)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroF1 {
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn check_pair(pred: &[TypeSet], gold: &[TypeSet]) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} gold sets",
            pred.len(),
            gold.len()
        )));
    }
    for (p, g) in pred.iter().zip(gold) {
        if p.universe() != g.universe() {
            return Err(Error::Shape(format!(
                "prediction over {} types, gold over {}",
                p.universe(),
                g.universe()
            )));
        }
    }
    Ok(())
}

/// Fraction of examples whose predicted set equals the gold set exactly.
/// Zero examples give 0.
pub fn strict_accuracy(pred: &[TypeSet], gold: &[TypeSet]) -> Result<f64> {
    check_pair(pred, gold)?;
    let mut exact = 0u64;
    for (p, g) in pred.iter().zip(gold) {
        exact += (p == g) as u64;
    }
    Ok(ratio(exact, pred.len() as u64))
}

/// F1 over all (example, type) decisions pooled together.
pub fn micro_f1(pred: &[TypeSet], gold: &[TypeSet]) -> Result<MicroF1> {
    check_pair(pred, gold)?;
    let mut counts = Counts::default();
    for (p, g) in pred.iter().zip(gold) {
        let c = Counts::of(p, g);
        counts.tp += c.tp;
        counts.fp += c.fp;
        counts.fn_ += c.fn_;
    }
    Ok(MicroF1 {
        counts,
        precision: counts.precision(),
        recall: counts.recall(),
        f1: counts.f1(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    /// Number of gold types shared by every name in the group.
    pub n: usize,
    pub group_size: usize,
    pub counts: Counts,
    pub micro_f1: f64,
}

/// Micro-F1 within groups of names with the same gold-type count, keeping
/// groups with more than `min_group` members. Rows are ordered by `n`.
pub fn per_type_count_breakdown(
    pred: &[TypeSet],
    gold: &[TypeSet],
    min_group: usize,
) -> Result<Vec<BreakdownRow>> {
    check_pair(pred, gold)?;
    let mut groups: BTreeMap<usize, (usize, Counts)> = BTreeMap::new();
    for (p, g) in pred.iter().zip(gold) {
        let e = groups.entry(g.count()).or_default();
        e.0 += 1;
        e.1 = e.1 + Counts::of(p, g);
    }
    Ok(groups
        .into_iter()
        .filter(|(_, (size, _))| *size > min_group)
        .map(|(n, (group_size, counts))| BreakdownRow {
            n,
            group_size,
            counts,
            micro_f1: counts.f1(),
        })
        .collect())
}

/// Scores of one (embedding model, classifier) pair on the test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub classifier: String,
    pub acc: f64,
    pub micro_f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub counts: Counts,
    pub n_test: usize,
    pub per_n_breakdown: Vec<BreakdownRow>,
    /// Names without an embedding, over all splits.
    pub excluded_names: usize,
    pub excluded_by_split: BTreeMap<String, usize>,
}

impl EvalReport {
    pub fn from_predictions(
        model: &str,
        classifier: &str,
        pred: &[TypeSet],
        gold: &[TypeSet],
        min_group: usize,
    ) -> Result<Self> {
        let m = micro_f1(pred, gold)?;
        Ok(EvalReport {
            model: model.to_string(),
            classifier: classifier.to_string(),
            acc: strict_accuracy(pred, gold)?,
            micro_f1: m.f1,
            precision: m.precision,
            recall: m.recall,
            counts: m.counts,
            n_test: gold.len(),
            per_n_breakdown: per_type_count_breakdown(pred, gold, min_group)?,
            excluded_names: 0,
            excluded_by_split: BTreeMap::new(),
        })
    }
}

/// Features, labels, each example's feature row (if embedded), and the
/// number of names without a row.
type EmbeddedSplit = (Features, Vec<TypeSet>, Vec<Option<usize>>, usize);

fn embed_split(emb: &EmbeddingMatrix, examples: &[NameTypingExample]) -> Result<EmbeddedSplit> {
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut slots = Vec::with_capacity(examples.len());
    for ex in examples {
        match emb.lookup(&ex.name) {
            Some(row) => {
                slots.push(Some(labels.len()));
                data.extend(row.iter().map(|&v| v as f64));
                labels.push(ex.types.clone());
            }
            None => slots.push(None),
        }
    }
    let missing = slots.iter().filter(|s| s.is_none()).count();
    let x = Features::new(labels.len(), emb.dim(), data)?;
    Ok((x, labels, slots, missing))
}

/// Train on the embedded train names (selecting on dev), score the test
/// split. Test names without an embedding are predicted as the empty set.
pub fn evaluate_embeddings(
    model_name: &str,
    emb: &EmbeddingMatrix,
    dataset: &NameTypingDataset,
    config: &ClassifierConfig,
    min_group: usize,
) -> Result<EvalReport> {
    let (tx, ty, _, tmiss) = embed_split(emb, &dataset.train)?;
    let (dx, dy, _, dmiss) = embed_split(emb, &dataset.dev)?;
    let (sx, _, slots, smiss) = embed_split(emb, &dataset.test)?;
    if tx.is_empty() {
        return Err(Error::Training(format!(
            "no train name of {model_name} has an embedding"
        )));
    }
    let excluded = tmiss + dmiss + smiss;
    if excluded > 0 {
        warn!("{model_name}: {excluded} names lack an embedding (train {tmiss}, dev {dmiss}, test {smiss})");
    }

    let dev = (!dx.is_empty()).then_some((&dx, dy.as_slice()));
    let clf = TrainedClassifier::fit(&dataset.type_system, (&tx, &ty), dev, config)?;

    let n_types = dataset.type_system.len();
    let predicted: Vec<TypeSet> = sx.rows().map(|r| clf.predict(r)).collect::<Result<_>>()?;
    let pred: Vec<TypeSet> = slots
        .iter()
        .map(|s| s.map_or_else(|| TypeSet::empty(n_types), |i| predicted[i].clone()))
        .collect();
    let gold: Vec<TypeSet> = dataset.test.iter().map(|e| e.types.clone()).collect();

    let mut report =
        EvalReport::from_predictions(model_name, config.kind.name(), &pred, &gold, min_group)?;
    report.excluded_names = excluded;
    report.excluded_by_split = [(Split::Train, tmiss), (Split::Dev, dmiss), (Split::Test, smiss)]
        .into_iter()
        .map(|(s, n)| (s.name().to_string(), n))
        .collect();
    info!(
        "{model_name} {}: acc {:.4}, micro-F1 {:.4}",
        config.kind, report.acc, report.micro_f1
    );
    Ok(report)
}

/// Evaluate every (embedding, classifier) combination, in row-major order:
/// all classifiers for the first embedding, then the second, and so on.
pub fn evaluate_grid(
    embeddings: &[(String, EmbeddingMatrix)],
    dataset: &NameTypingDataset,
    classifiers: &[ClassifierConfig],
    min_group: usize,
    strategy: Strategy,
) -> Result<Vec<EvalReport>> {
    let jobs: Vec<(usize, usize)> = (0..embeddings.len())
        .flat_map(|e| (0..classifiers.len()).map(move |c| (e, c)))
        .collect();
    par::map_slice(strategy, &jobs, |&(e, c)| {
        let (name, emb) = &embeddings[e];
        evaluate_embeddings(name, emb, dataset, &classifiers[c], min_group)
    })
    .into_iter()
    .collect()
}

/// Layout of the main report file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Tsv,
    HumanTable,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(ReportFormat::Tsv),
            "table" | "human" | "human-table" => Ok(ReportFormat::HumanTable),
            _ => Err(Error::Config(format!("unknown report format {s:?}; expected tsv or table"))),
        }
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

/// Header plus one row per report: `model, classifier, acc, micro_f1`, the
/// scores as percentages with one decimal.
pub fn render_tsv(reports: &[EvalReport]) -> String {
    let mut s = String::from("model\tclassifier\tacc\tmicro_f1\n");
    for r in reports {
        let _ = writeln!(s, "{}\t{}\t{}\t{}", r.model, r.classifier, pct(r.acc), pct(r.micro_f1));
    }
    s
}

/// Aligned table with a `*` after the best value of each score column
/// within each classifier.
pub fn render_table(reports: &[EvalReport]) -> String {
    let best = |f: fn(&EvalReport) -> f64, clf: &str| {
        reports
            .iter()
            .filter(|r| r.classifier == clf)
            .map(f)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mw = reports.iter().map(|r| r.model.len()).max().unwrap_or(0).max(5);
    let cw = reports.iter().map(|r| r.classifier.len()).max().unwrap_or(0).max(10);
    let mut s = format!("{:<mw$}  {:<cw$}  {:>7}  {:>9}\n", "model", "classifier", "acc", "micro_f1");
    for r in reports {
        let mark = |v: f64, f: fn(&EvalReport) -> f64| {
            let star = if pct(v) == pct(best(f, &r.classifier)) { "*" } else { " " };
            format!("{}{star}", pct(v))
        };
        let _ = writeln!(
            s,
            "{:<mw$}  {:<cw$}  {:>7}  {:>9}",
            r.model,
            r.classifier,
            mark(r.acc, |r| r.acc),
            mark(r.micro_f1, |r| r.micro_f1),
        );
    }
    s
}

/// `n,group_size,micro_f1` rows of one report.
pub fn render_breakdown_csv(report: &EvalReport) -> String {
    let mut s = String::from("n,group_size,micro_f1\n");
    for b in &report.per_n_breakdown {
        let _ = writeln!(s, "{},{},{}", b.n, b.group_size, b.micro_f1);
    }
    s
}

/// Path of the breakdown CSV written next to `path` for one report.
pub fn breakdown_path(path: &Path, report: &EvalReport) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let clean = |s: &str| -> String {
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
            .collect()
    };
    path.with_file_name(format!(
        "{stem}.{}.{}.breakdown.csv",
        clean(&report.model),
        clean(&report.classifier)
    ))
}

/// Write the main report at `path`, a full-precision JSON copy next to it
/// (`.json` extension), and one breakdown CSV per report. Returns every path
/// written.
pub fn emit_report(reports: &[EvalReport], path: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Err(Error::Config("no evaluation results to report".into()));
    }
    let write = |p: &Path, body: &str| std::fs::write(p, body).map_err(|e| Error::io(p, e));
    let body = match format {
        ReportFormat::Tsv => render_tsv(reports),
        ReportFormat::HumanTable => render_table(reports),
    };
    write(path, &body)?;
    let mut written = vec![path.to_path_buf()];

    let json = path.with_extension("json");
    if json != path {
        write(&json, &serde_json::to_string_pretty(reports)?)?;
        written.push(json);
    }
    for r in reports {
        let p = breakdown_path(path, r);
        write(&p, &render_breakdown_csv(r))?;
        written.push(p);
    }
    Ok(written)
}

/// Reports previously written as JSON by [`emit_report`].
pub fn read_reports(path: &Path) -> Result<Vec<EvalReport>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// The classifier configurations for a set of kinds sharing one seed.
pub fn classifier_grid(kinds: &[ClassifierKind], seed: u64, strategy: Strategy) -> Vec<ClassifierConfig> {
    kinds
        .iter()
        .map(|&k| ClassifierConfig {
            seed,
            strategy,
            ..ClassifierConfig::for_kind(k)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(ids: &[usize]) -> TypeSet {
        TypeSet::from_ids(3, ids.iter().copied())
    }

    #[test]
    fn worked_example() {
        let gold = [s(&[0, 1]), s(&[0])];
        let pred = [s(&[0]), s(&[0, 2])];
        assert_eq!(strict_accuracy(&pred, &gold).unwrap(), 0.0);
        let m = micro_f1(&pred, &gold).unwrap();
        assert_eq!(m.counts, Counts { tp: 2, fp: 1, fn_: 1 });
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_cases() {
        let gold = [s(&[0]), s(&[1])];
        assert_eq!(strict_accuracy(&gold, &gold).unwrap(), 1.0);
        assert_eq!(micro_f1(&gold, &gold).unwrap().f1, 1.0);
        let empty = [s(&[]), s(&[])];
        let m = micro_f1(&empty, &gold).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert_eq!(strict_accuracy(&[s(&[0]), s(&[2])], &gold).unwrap(), 0.5);
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(strict_accuracy(&[s(&[])], &[]), Err(Error::Shape(_))));
        assert!(matches!(
            micro_f1(&[TypeSet::empty(2)], &[TypeSet::empty(3)]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn breakdown_threshold_is_strict() {
        let gold: Vec<TypeSet> = (0..101).map(|_| s(&[0, 1])).chain((0..100).map(|_| s(&[2]))).collect();
        let rows = per_type_count_breakdown(&gold, &gold, 100).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].n, rows[0].group_size), (2, 101));
        let all = per_type_count_breakdown(&gold, &gold, 0).unwrap();
        assert_eq!(all.iter().map(|r| r.group_size).sum::<usize>(), gold.len());
    }

    fn report(model: &str, clf: &str, acc: f64, f1: f64) -> EvalReport {
        EvalReport {
            model: model.into(),
            classifier: clf.into(),
            acc,
            micro_f1: f1,
            precision: 0.0,
            recall: 0.0,
            counts: Counts::default(),
            n_test: 0,
            per_n_breakdown: vec![],
            excluded_names: 0,
            excluded_by_split: BTreeMap::new(),
        }
    }

    #[test]
    fn tsv_row_shape() {
        let t = render_tsv(&[report("SSKIP", "LR", 0.234, 0.505), report("CWIN", "LR", 0.3, 0.5)]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "SSKIP\tLR\t23.4\t50.5");
    }

    #[test]
    fn table_marks_maxima() {
        let t = render_table(&[report("A", "LR", 0.1, 0.9), report("B", "LR", 0.2, 0.8)]);
        let a = t.lines().nth(1).unwrap();
        let b = t.lines().nth(2).unwrap();
        assert!(a.contains("90.0*") && !a.contains("10.0*"));
        assert!(b.contains("20.0*") && !b.contains("80.0*"));
    }

    #[test]
    fn emit_rejects_empty_and_writes_companions() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.tsv");
        assert!(emit_report(&[], &p, ReportFormat::Tsv).is_err());
        let files = emit_report(&[report("SKIP", "MLP", 0.5, 0.5)], &p, ReportFormat::Tsv).unwrap();
        assert_eq!(files.len(), 3);
        assert!(files.iter().all(|f| f.exists()));
        assert_eq!(read_reports(&dir.path().join("r.json")).unwrap()[0].model, "SKIP");
    }
}
