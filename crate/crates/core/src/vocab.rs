//! Corpus vocabulary, negative-sampling table and context windows.
//!
//! The corpus is pre-tokenized: one document per line, tokens separated by
//! whitespace. Every reader in this module applies the same tokenization, so
//! a [`Vocabulary`] built from a file can be used to encode it again.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signed offset of a context token relative to its center.
pub type Offset = i32;

/// Split a corpus line into tokens, optionally folding case.
pub fn tokenize(line: &str, lowercase: bool) -> impl Iterator<Item = Cow<'_, str>> {
    line.split_whitespace().map(move |tok| {
        if lowercase && tok.chars().any(char::is_uppercase) {
            Cow::Owned(tok.to_lowercase())
        } else {
            Cow::Borrowed(tok)
        }
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_tokens: u64,
    pub total_lines: u64,
    /// Tokens whose type did not make it into the vocabulary.
    pub oov_tokens_dropped: u64,
}

/// Frequency-filtered token inventory.
///
/// Tokens are ordered by descending count with ties broken lexicographically;
/// the position of a token in that order is its row id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    min_count: u64,
    lowercase: bool,
}

impl Vocabulary {
    /// Build from raw counts, dropping types below `min_count`.
    pub fn from_counts<I, S>(counts: I, min_count: u64, lowercase: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        if min_count == 0 {
            return Err(Error::Config("min_count must be positive".into()));
        }
        let mut kept: Vec<(String, u64)> = counts
            .into_iter()
            .map(|(t, c)| (t.into(), c))
            .filter(|&(_, c)| c >= min_count)
            .collect();
        if kept.is_empty() {
            return Err(Error::Config(format!(
                "vocabulary is empty after applying min_count {min_count}"
            )));
        }
        kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        if u32::try_from(kept.len()).is_err() {
            return Err(Error::Config("vocabulary exceeds u32 row ids".into()));
        }

        let mut index = HashMap::with_capacity(kept.len());
        let mut tokens = Vec::with_capacity(kept.len());
        let mut cs = Vec::with_capacity(kept.len());
        for (i, (tok, c)) in kept.into_iter().enumerate() {
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(Error::Config(format!("duplicate token {tok:?} in counts")));
            }
            tokens.push(tok);
            cs.push(c);
        }
        Ok(Vocabulary {
            tokens,
            counts: cs,
            index,
            min_count,
            lowercase,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Whether the vocabulary was built from case-folded tokens.
    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn count(&self, token: &str) -> Option<u64> {
        self.id(token).map(|i| self.counts[i as usize])
    }

    /// Sum of the retained counts.
    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Write the `token<TAB>count` dump, descending count order.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (tok, c) in self.tokens.iter().zip(&self.counts) {
            writeln!(w, "{tok}\t{c}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Read a dump written by [`Vocabulary::write_tsv`]. `min_count` is
    /// reapplied to the stored counts.
    pub fn read_tsv(path: &Path, min_count: u64, lowercase: bool) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut counts = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (tok, c) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, lineno + 1, "expected token<TAB>count"))?;
            let c: u64 = c
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, format!("bad count {c:?}")))?;
            counts.push((tok.to_string(), c));
        }
        Self::from_counts(counts, min_count, lowercase)
    }
}

/// Count tokens in `path` and keep those seen at least `min_count` times.
pub fn build_vocabulary(
    path: &Path,
    min_count: u64,
    lowercase: bool,
) -> Result<(Vocabulary, CorpusStats)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    build_vocabulary_from_reader(BufReader::new(file), path, min_count, lowercase)
}

pub fn build_vocabulary_from_reader<R: BufRead>(
    reader: R,
    path: &Path,
    min_count: u64,
    lowercase: bool,
) -> Result<(Vocabulary, CorpusStats)> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut stats = CorpusStats::default();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        stats.total_lines += 1;
        for tok in tokenize(&line, lowercase) {
            stats.total_tokens += 1;
            match counts.get_mut(tok.as_ref()) {
                Some(c) => *c += 1,
                None => {
                    counts.insert(tok.into_owned(), 1);
                }
            }
        }
    }
    let vocab = Vocabulary::from_counts(counts, min_count, lowercase)?;
    stats.oov_tokens_dropped = stats.total_tokens - vocab.total_count();
    Ok((vocab, stats))
}

/// Table of row ids whose empirical distribution follows `count^power`.
///
/// Slots are apportioned with the largest-remainder method, so each token's
/// share of the table is within `1/size` of its target probability.
#[derive(Clone, Debug)]
pub struct NegativeTable {
    table: Vec<u32>,
}

pub const DEFAULT_NEGATIVE_TABLE_SIZE: usize = 10_000_000;
pub const DEFAULT_NEGATIVE_POWER: f64 = 0.75;

impl NegativeTable {
    pub fn new(vocab: &Vocabulary, size: usize, power: f64) -> Result<Self> {
        Self::from_counts(vocab.counts(), size, power)
    }

    pub fn from_counts(counts: &[u64], size: usize, power: f64) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Config("negative table needs a non-empty vocabulary".into()));
        }
        if size < counts.len() {
            return Err(Error::Config(format!(
                "negative table size {size} is smaller than the vocabulary ({})",
                counts.len()
            )));
        }
        if !power.is_finite() {
            return Err(Error::Config("negative table power must be finite".into()));
        }
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(power)).collect();
        let norm: f64 = weights.iter().sum();

        let mut slots = Vec::with_capacity(counts.len());
        let mut remainders = Vec::with_capacity(counts.len());
        let mut assigned = 0usize;
        for (i, w) in weights.iter().enumerate() {
            let exact = w / norm * size as f64;
            let floor = exact.floor();
            slots.push(floor as usize);
            assigned += floor as usize;
            remainders.push((exact - floor, i));
        }
        // Hand out the leftover slots to the largest fractional parts; ties go
        // to the lower row id.
        remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, i) in remainders.iter().take(size.saturating_sub(assigned)) {
            slots[i] += 1;
        }

        let mut table = Vec::with_capacity(size);
        for (i, &n) in slots.iter().enumerate() {
            table.extend(std::iter::repeat_n(i as u32, n));
        }
        debug_assert_eq!(table.len(), size);
        Ok(NegativeTable { table })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.table
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.table[rng.gen_range(0..self.table.len())]
    }
}

/// Probability of keeping an occurrence of a token with relative corpus
/// frequency `freq` under subsampling threshold `threshold`.
pub fn keep_probability(freq: f64, threshold: f64) -> Result<f64> {
    if !(freq > 0.0 && freq <= 1.0) {
        return Err(Error::Domain(format!("token frequency {freq} outside (0, 1]")));
    }
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(Error::Domain(format!("threshold {threshold} must be positive")));
    }
    Ok((((freq / threshold).sqrt() + 1.0) * threshold / freq).min(1.0))
}

/// One center token with its in-window context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window {
    pub center: u32,
    pub context: Vec<(u32, Offset)>,
}

/// Windows over an already-encoded line (OOV tokens removed).
///
/// With `dynamic`, the effective window of each center is drawn uniformly
/// from `1..=window`; otherwise the full window is used.
pub fn line_windows<R: Rng + ?Sized>(
    ids: &[u32],
    window: usize,
    dynamic: Option<&mut R>,
) -> Vec<Window> {
    let mut out = Vec::with_capacity(ids.len());
    let mut rng = dynamic;
    for (pos, &center) in ids.iter().enumerate() {
        let w = match rng.as_mut() {
            Some(r) => r.gen_range(1..=window),
            None => window,
        };
        let mut context = Vec::with_capacity(2 * w);
        let lo = pos.saturating_sub(w);
        let hi = (pos + w).min(ids.len() - 1);
        for (j, &id) in ids.iter().enumerate().take(hi + 1).skip(lo) {
            if j != pos {
                context.push((id, j as Offset - pos as Offset));
            }
        }
        out.push(Window { center, context });
    }
    out
}

/// Map a line to row ids, dropping OOV tokens. Returns the ids and the
/// number of dropped tokens.
pub fn encode_line(line: &str, vocab: &Vocabulary) -> (Vec<u32>, u64) {
    let mut dropped = 0;
    let ids = tokenize(line, vocab.lowercase())
        .filter_map(|t| {
            let id = vocab.id(&t);
            if id.is_none() {
                dropped += 1;
            }
            id
        })
        .collect();
    (ids, dropped)
}

/// A corpus held in memory as row-id sentences.
#[derive(Clone, Debug, Default)]
pub struct EncodedCorpus {
    pub sentences: Vec<Vec<u32>>,
    pub stats: CorpusStats,
}

impl EncodedCorpus {
    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut corpus = EncodedCorpus::default();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            corpus.push_line(&line, vocab);
        }
        Ok(corpus)
    }

    pub fn from_lines<'a, I>(lines: I, vocab: &Vocabulary) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut corpus = EncodedCorpus::default();
        for line in lines {
            corpus.push_line(line, vocab);
        }
        corpus
    }

    fn push_line(&mut self, line: &str, vocab: &Vocabulary) {
        let (ids, dropped) = encode_line(line, vocab);
        self.stats.total_lines += 1;
        self.stats.total_tokens += ids.len() as u64 + dropped;
        self.stats.oov_tokens_dropped += dropped;
        if !ids.is_empty() {
            self.sentences.push(ids);
        }
    }

    /// Number of in-vocabulary tokens.
    pub fn n_tokens(&self) -> u64 {
        self.sentences.iter().map(|s| s.len() as u64).sum()
    }

    /// Split sentence indices into `parts` contiguous ranges of roughly equal
    /// token mass. Each range is consumed by one worker.
    pub fn partition(&self, parts: usize) -> Vec<std::ops::Range<usize>> {
        let parts = parts.max(1);
        let total = self.n_tokens().max(1);
        let mut ranges = Vec::with_capacity(parts);
        let mut start = 0;
        let mut acc = 0u64;
        for (i, s) in self.sentences.iter().enumerate() {
            acc += s.len() as u64;
            let boundary = total * (ranges.len() as u64 + 1) / parts as u64;
            if acc >= boundary && ranges.len() + 1 < parts {
                ranges.push(start..i + 1);
                start = i + 1;
            }
        }
        ranges.push(start..self.sentences.len());
        while ranges.len() < parts {
            ranges.push(self.sentences.len()..self.sentences.len());
        }
        ranges
    }
}

/// Streaming iterator of windows read lazily from a corpus file.
pub struct WindowStream<'v, R> {
    lines: std::io::Lines<BufReader<File>>,
    path: PathBuf,
    vocab: &'v Vocabulary,
    window: usize,
    rng: Option<R>,
    pending: std::vec::IntoIter<Window>,
}

/// Open `path` and iterate its windows. `rng` enables dynamic windows.
pub fn stream_windows<'v, R: Rng>(
    path: &Path,
    vocab: &'v Vocabulary,
    window: usize,
    rng: Option<R>,
) -> Result<WindowStream<'v, R>> {
    if window == 0 {
        return Err(Error::Config("window must be positive".into()));
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(WindowStream {
        lines: BufReader::new(file).lines(),
        path: path.to_path_buf(),
        vocab,
        window,
        rng,
        pending: Vec::new().into_iter(),
    })
}

impl<R: Rng> Iterator for WindowStream<'_, R> {
    type Item = Result<Window>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(w) = self.pending.next() {
                return Some(Ok(w));
            }
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            let (ids, _) = encode_line(&line, self.vocab);
            self.pending = line_windows(&ids, self.window, self.rng.as_mut()).into_iter();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vocab_from(text: &str, min_count: u64, lowercase: bool) -> Vocabulary {
        build_vocabulary_from_reader(text.as_bytes(), Path::new("<mem>"), min_count, lowercase)
            .unwrap()
            .0
    }

    #[test]
    fn threshold_drops_rare() {
        let v = vocab_from("a a b", 2, false);
        assert_eq!(v.tokens(), &["a".to_string()]);
        assert_eq!(v.counts(), &[2]);
    }

    #[test]
    fn case_folding_merges() {
        let v = vocab_from("A a", 2, true);
        assert_eq!(v.tokens(), &["a".to_string()]);
        assert_eq!(v.count("a"), Some(2));
    }

    #[test]
    fn descending_then_lexicographic() {
        let v = vocab_from("x y x", 1, false);
        assert_eq!(v.tokens(), &["x".to_string(), "y".to_string()]);
        let v = vocab_from("c b a c", 1, false);
        assert_eq!(v.tokens(), &["c", "a", "b"]);
    }

    #[test]
    fn empty_after_filter_is_config_error() {
        let r = build_vocabulary_from_reader("a b".as_bytes(), Path::new("x"), 5, false);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn stats_account_for_dropped() {
        let (v, s) =
            build_vocabulary_from_reader("a a b\nc a\n".as_bytes(), Path::new("x"), 2, false)
                .unwrap();
        assert_eq!(s.total_lines, 2);
        assert_eq!(s.total_tokens, 5);
        assert_eq!(s.oov_tokens_dropped, 2);
        assert!(v.total_count() <= s.total_tokens);
    }

    #[test]
    fn missing_file_is_io_error() {
        let r = build_vocabulary(Path::new("/nonexistent/corpus.txt"), 1, false);
        assert!(matches!(r, Err(Error::Io { .. })));
    }

    #[test]
    fn tsv_round_trip() {
        let v = vocab_from("b a b c c c", 1, false);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.tsv");
        v.write_tsv(&p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "c\t3\nb\t2\na\t1\n");
        assert_eq!(Vocabulary::read_tsv(&p, 1, false).unwrap(), v);
    }

    #[test]
    fn negative_table_share() {
        let t = NegativeTable::from_counts(&[4, 1], 10_000, 0.75).unwrap();
        let share_a = t.as_slice().iter().filter(|&&i| i == 0).count() as f64 / 10_000.0;
        let target = 4f64.powf(0.75) / (4f64.powf(0.75) + 1.0);
        assert!((share_a - target).abs() <= 1e-4, "{share_a} vs {target}");
        assert!((share_a - 0.7388).abs() <= 1e-4);
    }

    #[test]
    fn negative_table_symmetric_and_exact() {
        let t = NegativeTable::from_counts(&[1, 1], 10, 0.75).unwrap();
        assert_eq!(t.as_slice().iter().filter(|&&i| i == 0).count(), 5);
        let t = NegativeTable::from_counts(&[3, 1], 4, 1.0).unwrap();
        assert_eq!(t.as_slice(), &[0, 0, 0, 1]);
    }

    #[test]
    fn negative_table_too_small() {
        assert!(matches!(
            NegativeTable::from_counts(&[1, 1, 1], 2, 0.75),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn keep_probability_values() {
        let t = 1e-4;
        assert_eq!(keep_probability(t, t).unwrap(), 1.0);
        assert!((keep_probability(100.0 * t, t).unwrap() - 0.11).abs() < 1e-12);
        assert!((keep_probability(4.0 * t, t).unwrap() - 0.75).abs() < 1e-12);
        assert!(keep_probability(0.0, t).is_err());
        assert!(keep_probability(0.5, -1.0).is_err());
    }

    #[test]
    fn fixed_windows() {
        let w = line_windows::<ChaCha8Rng>(&[0, 1, 2], 1, None);
        assert_eq!(
            w,
            vec![
                Window { center: 0, context: vec![(1, 1)] },
                Window { center: 1, context: vec![(0, -1), (2, 1)] },
                Window { center: 2, context: vec![(1, -1)] },
            ]
        );
        assert!(line_windows::<ChaCha8Rng>(&[], 3, None).is_empty());
    }

    #[test]
    fn dynamic_windows_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ids: Vec<u32> = (0..30).collect();
        for w in line_windows(&ids, 3, Some(&mut rng)) {
            assert!(!w.context.is_empty());
            for &(_, off) in &w.context {
                assert!(off != 0 && off.abs() <= 3);
            }
        }
    }

    #[test]
    fn oov_removed_before_windowing() {
        let v = vocab_from("a b", 1, false);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.txt");
        std::fs::write(&p, "a x b\n\n").unwrap();
        let ws: Vec<Window> = stream_windows::<ChaCha8Rng>(&p, &v, 1, None)
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        let a = v.id("a").unwrap();
        let b = v.id("b").unwrap();
        assert_eq!(
            ws,
            vec![
                Window { center: a, context: vec![(b, 1)] },
                Window { center: b, context: vec![(a, -1)] },
            ]
        );
    }

    #[test]
    fn partition_covers_all_sentences() {
        let v = vocab_from("a b c", 1, false);
        let lines = ["a b", "c", "a a a", "b", "c c"];
        let corpus = EncodedCorpus::from_lines(lines, &v);
        for parts in 1..7 {
            let ranges = corpus.partition(parts);
            assert_eq!(ranges.len(), parts);
            let mut next = 0;
            for r in &ranges {
                assert_eq!(r.start, next);
                next = r.end;
            }
            assert_eq!(next, corpus.sentences.len());
        }
    }
}
