//! Multi-label name typing datasets built from knowledge-base assertions.
//!
//! A name's type set is the union of the (mapped) types of every entity the
//! name can refer to. Names are filtered to single corpus tokens, sampled and
//! split into train/dev/test.
//!
//! Input files are UTF-8 TSV:
//! - entity types: `entity<TAB>type1,type2,...`
//! - name entities: `name<TAB>entity1,entity2,...`
//! - type mapping: `raw_type<TAB>coarse_type`
//! - split files and pre-built datasets: `name<TAB>type1,type2,...`

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use fixedbitset::FixedBitSet;
use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

/// The 50 fine-grained types of the published name typing dataset.
pub const DEFAULT_TYPES: [&str; 50] = [
    "/art",
    "/art/film",
    "/astral_body",
    "/biology",
    "/broadcast_network",
    "/broadcast_program",
    "/building",
    "/building/restaurant",
    "/chemistry",
    "/computer/programming_language",
    "/disease",
    "/event",
    "/food",
    "/game",
    "/geography/island",
    "/geography/mountain",
    "/god",
    "/internet/website",
    "/living_thing",
    "/location",
    "/location/body_of_water",
    "/location/cemetery",
    "/location/city",
    "/location/county",
    "/medicine/drug",
    "/medicine/medical_treatment",
    "/medicine/symptom",
    "/music",
    "/organization",
    "/organization/airline",
    "/organization/company",
    "/organization/educational_institution",
    "/organization/sports_team",
    "/people/ethnicity",
    "/person",
    "/person/actor",
    "/person/artist",
    "/person/athlete",
    "/person/author",
    "/person/director",
    "/person/engineer",
    "/person/musician",
    "/play",
    "/product",
    "/product/airplane",
    "/product/instrument",
    "/product/ship",
    "/software",
    "/title",
    "/written_work",
];

/// Ordered type inventory; a type's position is its label bit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeSystem {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl TypeSystem {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::Config("type system must not be empty".into()));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || n.contains([',', '\t', '\n']) {
                return Err(Error::Config(format!("invalid type name {n:?}")));
            }
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate type {n:?}")));
            }
        }
        Ok(TypeSystem { names, index })
    }

    /// The 50-type inventory in its published order.
    pub fn default_inventory() -> Self {
        Self::new(DEFAULT_TYPES).expect("default inventory is valid")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    /// Hex SHA-256 of the ordered type names.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for n in &self.names {
            h.update(n.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Convert names to a bitset; names outside the system are ignored.
    pub fn encode<'a, I>(&self, types: I) -> TypeSet
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut set = TypeSet::empty(self.len());
        for t in types {
            if let Some(i) = self.id(t) {
                set.insert(i);
            }
        }
        set
    }

    pub fn decode<'a>(&'a self, set: &'a TypeSet) -> impl Iterator<Item = &'a str> + 'a {
        set.ones().map(move |i| self.name(i))
    }

    /// Comma-separated type names in system order.
    pub fn format_set(&self, set: &TypeSet) -> String {
        self.decode(set).collect::<Vec<_>>().join(",")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = self.names.join("\n");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(text.lines().map(str::trim).filter(|l| !l.is_empty()))
    }
}

/// Label bitset over a [`TypeSystem`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeSet(FixedBitSet);

impl TypeSet {
    pub fn empty(n_types: usize) -> Self {
        TypeSet(FixedBitSet::with_capacity(n_types))
    }

    pub fn from_ids(n_types: usize, ids: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(n_types);
        for i in ids {
            s.insert(i);
        }
        s
    }

    pub fn insert(&mut self, id: usize) {
        self.0.insert(id);
    }

    pub fn set(&mut self, id: usize, present: bool) {
        self.0.set(id, present);
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0.contains(id)
    }

    /// Number of types in the set.
    pub fn count(&self) -> usize {
        self.0.as_slice().iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    /// Size of the underlying type system.
    pub fn universe(&self) -> usize {
        self.0.len()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones()
    }

    pub fn intersection_count(&self, other: &TypeSet) -> usize {
        let (a, b) = (self.0.as_slice(), other.0.as_slice());
        a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as usize).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NameTypingExample {
    pub name: String,
    pub types: TypeSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.tsv", self.name())
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NameTypingDataset {
    pub type_system: TypeSystem,
    pub train: Vec<NameTypingExample>,
    pub dev: Vec<NameTypingExample>,
    pub test: Vec<NameTypingExample>,
    pub seed: u64,
}

impl NameTypingDataset {
    pub fn split(&self, split: Split) -> &[NameTypingExample] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    /// Types with no positive example in the training split.
    pub fn missing_train_types(&self) -> Vec<&str> {
        let mut seen = vec![false; self.type_system.len()];
        for ex in &self.train {
            for t in ex.types.ones() {
                seen[t] = true;
            }
        }
        seen.iter()
            .enumerate()
            .filter(|(_, &s)| !s)
            .map(|(i, _)| self.type_system.name(i))
            .collect()
    }

    /// Write `types.txt` and one TSV per split into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.type_system.write(&dir.join("types.txt"))?;
        for split in Split::ALL {
            let path = dir.join(split.file_name());
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(file);
            for ex in self.split(split) {
                writeln!(w, "{}\t{}", ex.name, self.type_system.format_set(&ex.types))
                    .map_err(|e| Error::io(&path, e))?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Read a directory written by [`NameTypingDataset::write`].
    pub fn read(dir: &Path) -> Result<Self> {
        let type_system = TypeSystem::read(&dir.join("types.txt"))?;
        let mut splits = Vec::with_capacity(3);
        for split in Split::ALL {
            let path = dir.join(split.file_name());
            let rows = read_name_types(&path)?;
            let mut examples = Vec::with_capacity(rows.len());
            for (lineno, name, types) in rows {
                let mut set = TypeSet::empty(type_system.len());
                for t in &types {
                    let id = type_system.id(t).ok_or_else(|| {
                        Error::parse(&path, lineno, format!("type {t:?} not in types.txt"))
                    })?;
                    set.insert(id);
                }
                examples.push(NameTypingExample { name, types: set });
            }
            splits.push(examples);
        }
        let test = splits.pop().unwrap_or_default();
        let dev = splits.pop().unwrap_or_default();
        let train = splits.pop().unwrap_or_default();
        let ds = NameTypingDataset {
            type_system,
            train,
            dev,
            test,
            seed: 0,
        };
        ds.check_disjoint()?;
        Ok(ds)
    }

    fn check_disjoint(&self) -> Result<()> {
        let mut seen = HashMap::new();
        for split in Split::ALL {
            for ex in self.split(split) {
                if let Some(prev) = seen.insert(ex.name.as_str(), split) {
                    return Err(Error::Config(format!(
                        "name {:?} appears in both {prev} and {split}",
                        ex.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Rows of `name<TAB>t1,t2,...`, as (1-based line, name, types).
fn read_name_types(path: &Path) -> Result<Vec<(usize, String, Vec<String>)>> {
    read_keyed_lists(path)
}

/// Parse `key<TAB>a,b,c` rows; each list must be non-empty.
fn read_keyed_lists(path: &Path) -> Result<Vec<(usize, String, Vec<String>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let (key, list) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, lineno, "expected key<TAB>comma-separated list"))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::parse(path, lineno, "empty key"));
        }
        let items: Vec<String> = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        if items.is_empty() {
            return Err(Error::parse(path, lineno, "empty list"));
        }
        rows.push((lineno, key.to_string(), items));
    }
    Ok(rows)
}

fn merge_rows(rows: Vec<(usize, String, Vec<String>)>) -> HashMap<String, BTreeSet<String>> {
    let mut out: HashMap<String, BTreeSet<String>> = HashMap::new();
    for (_, key, items) in rows {
        out.entry(key).or_default().extend(items);
    }
    out
}

/// Map entity id to its raw types; duplicate rows are merged by union.
pub fn load_entity_types(path: &Path) -> Result<HashMap<String, BTreeSet<String>>> {
    Ok(merge_rows(read_keyed_lists(path)?))
}

/// Map name to the entities it can refer to; duplicate rows are merged.
pub fn load_name_entities(path: &Path) -> Result<HashMap<String, BTreeSet<String>>> {
    Ok(merge_rows(read_keyed_lists(path)?))
}

/// Raw type to coarse type(s), from `raw<TAB>coarse` rows.
pub fn load_type_mapping(path: &Path) -> Result<HashMap<String, BTreeSet<String>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out: HashMap<String, BTreeSet<String>> = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (raw, coarse) = line
            .split_once('\t')
            .filter(|(r, c)| !r.trim().is_empty() && !c.trim().is_empty())
            .ok_or_else(|| Error::parse(path, i + 1, "expected raw_type<TAB>coarse_type"))?;
        out.entry(raw.trim().to_string())
            .or_default()
            .insert(coarse.trim().to_string());
    }
    Ok(out)
}

/// Read a pre-built `name<TAB>types` dataset file. Duplicate names are merged.
pub fn load_prebuilt(path: &Path) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (_, name, types) in read_keyed_lists(path)? {
        out.entry(name).or_default().extend(types);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DeriveStats {
    /// Raw type occurrences with no mapping.
    pub unmapped_types: usize,
    /// Entity references with no type row.
    pub untyped_entities: usize,
    /// Names whose mapped type set came out empty.
    pub empty_names: usize,
}

/// Union the mapped types of every entity of every name.
///
/// With `lowercase`, names that differ only by case are merged.
pub fn derive_name_types(
    index: &HashMap<String, BTreeSet<String>>,
    entity_types: &HashMap<String, BTreeSet<String>>,
    mapping: &HashMap<String, BTreeSet<String>>,
    lowercase: bool,
) -> (BTreeMap<String, BTreeSet<String>>, DeriveStats) {
    let mut stats = DeriveStats::default();
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (name, entities) in index {
        let key = if lowercase {
            name.to_lowercase()
        } else {
            name.clone()
        };
        let types = out.entry(key).or_default();
        for e in entities {
            let Some(raw) = entity_types.get(e) else {
                stats.untyped_entities += 1;
                continue;
            };
            for r in raw {
                match mapping.get(r) {
                    Some(coarse) => types.extend(coarse.iter().cloned()),
                    None => stats.unmapped_types += 1,
                }
            }
        }
    }
    stats.empty_names = out.values().filter(|t| t.is_empty()).count();
    if stats.unmapped_types > 0 {
        warn!("{} raw type occurrences had no mapping", stats.unmapped_types);
    }
    (out, stats)
}

/// The `k` types that occur in the most names, ties broken lexicographically,
/// returned in lexicographic order.
pub fn select_top_k_types(
    name_types: &BTreeMap<String, BTreeSet<String>>,
    k: usize,
) -> Result<TypeSystem> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for types in name_types.values() {
        for t in types {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    if freq.len() < k {
        return Err(Error::Config(format!(
            "only {} distinct types available, {k} requested",
            freq.len()
        )));
    }
    let mut ranked: Vec<(&str, usize)> = freq.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut top: Vec<&str> = ranked.into_iter().take(k).map(|(t, _)| t).collect();
    top.sort_unstable();
    TypeSystem::new(top)
}

/// Keep single-token names with corpus frequency at least `min_corpus_freq`
/// and at least one type in `type_system`. Frequencies are looked up on the
/// lowercased name.
pub fn filter_names(
    name_types: &BTreeMap<String, BTreeSet<String>>,
    type_system: &TypeSystem,
    vocab: &Vocabulary,
    min_corpus_freq: u64,
) -> BTreeMap<String, TypeSet> {
    name_types
        .iter()
        .filter(|(name, _)| !name.is_empty() && !name.contains(char::is_whitespace))
        .filter(|(name, _)| {
            vocab
                .count(&name.to_lowercase())
                .is_some_and(|c| c >= min_corpus_freq)
        })
        .filter_map(|(name, types)| {
            let set = type_system.encode(types.iter().map(String::as_str));
            (!set.is_empty()).then(|| (name.clone(), set))
        })
        .collect()
}

/// Uniformly sample `sample_size` names without replacement and split them.
///
/// Train and dev sizes are `floor(fraction * n)`; test takes the remainder.
pub fn sample_and_split(
    filtered: &BTreeMap<String, TypeSet>,
    type_system: &TypeSystem,
    sample_size: usize,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<NameTypingDataset> {
    let (ftrain, fdev, ftest) = fractions;
    if [ftrain, fdev, ftest].iter().any(|f| !(0.0..=1.0).contains(f))
        || (ftrain + fdev + ftest - 1.0).abs() > 1e-9
    {
        return Err(Error::Config(format!(
            "split fractions ({ftrain}, {fdev}, {ftest}) must be in [0, 1] and sum to 1"
        )));
    }
    if let Some((_, set)) = filtered.iter().find(|(_, s)| s.universe() != type_system.len()) {
        return Err(Error::Shape(format!(
            "type set over {} types, system has {}",
            set.universe(),
            type_system.len()
        )));
    }
    let n = if sample_size > filtered.len() {
        warn!(
            "requested {sample_size} names but only {} pass the filters; using all",
            filtered.len()
        );
        filtered.len()
    } else {
        sample_size
    };

    let entries: Vec<(&String, &TypeSet)> = filtered.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, entries.len(), n);
    let mut examples: Vec<NameTypingExample> = picked
        .into_iter()
        .map(|i| NameTypingExample {
            name: entries[i].0.clone(),
            types: entries[i].1.clone(),
        })
        .collect();

    // A tiny epsilon keeps e.g. 0.7 * 10 from flooring to 6.
    let n_train = ((ftrain * n as f64) + 1e-9).floor() as usize;
    let n_dev = (((fdev * n as f64) + 1e-9).floor() as usize).min(n - n_train);
    let test = examples.split_off(n_train + n_dev);
    let dev = examples.split_off(n_train);
    let ds = NameTypingDataset {
        type_system: type_system.clone(),
        train: examples,
        dev,
        test,
        seed,
    };
    let missing = ds.missing_train_types();
    if !missing.is_empty() {
        warn!("{} types have no training example: {}", missing.len(), missing.join(", "));
    }
    Ok(ds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub split: Split,
    pub n_names: usize,
    /// `None` for an empty split.
    pub avg_types: Option<f64>,
    /// Number of names carrying each type, in type-system order.
    pub type_frequency: Vec<usize>,
}

pub fn dataset_stats(dataset: &NameTypingDataset) -> Vec<SplitStats> {
    Split::ALL
        .iter()
        .map(|&split| {
            let examples = dataset.split(split);
            let mut type_frequency = vec![0; dataset.type_system.len()];
            let mut total = 0usize;
            for ex in examples {
                total += ex.types.count();
                for t in ex.types.ones() {
                    type_frequency[t] += 1;
                }
            }
            SplitStats {
                split,
                n_names: examples.len(),
                avg_types: (!examples.is_empty()).then(|| total as f64 / examples.len() as f64),
                type_frequency,
            }
        })
        .collect()
}

/// Write the stats as TSV: `split, n_names, avg_types` rows.
pub fn write_stats(stats: &[SplitStats], path: &Path) -> Result<()> {
    let mut text = String::from("split\tn_names\tavg_types\n");
    for s in stats {
        let avg = match s.avg_types {
            Some(a) => format!("{a:.2}"),
            None => "error:empty".to_string(),
        };
        text.push_str(&format!("{}\t{}\t{}\n", s.split, s.n_names, avg));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
