//! Seeded synthetic corpora and datasets for tests, benches and demos.

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::classify::Features;
use crate::dataset::TypeSet;

fn pick<'a, R: Rng>(words: &'a [String], rng: &mut R) -> &'a str {
    &words[rng.gen_range(0..words.len())]
}

fn vocab_list(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Sentences drawn entirely from one of two disjoint topic vocabularies.
#[derive(Clone, Debug)]
pub struct TopicCorpus {
    pub lines: Vec<String>,
    pub topics: [Vec<String>; 2],
}

pub fn two_topic_corpus(seed: u64, sentences: usize, topic_size: usize, length: usize) -> TopicCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topics = [vocab_list("a", topic_size), vocab_list("b", topic_size)];
    let lines = (0..sentences)
        .map(|_| {
            let t = &topics[rng.gen_range(0..2)];
            (0..length).map(|_| pick(t, &mut rng)).collect::<Vec<_>>().join(" ")
        })
        .collect();
    TopicCorpus { lines, topics }
}

/// Token that always sits immediately left of the marker.
pub const LEFT_TOKEN: &str = "x";
/// Token that always sits immediately right of the marker.
pub const RIGHT_TOKEN: &str = "y";
pub const MARKER: &str = "m";

/// Sentences of random fillers containing either `x m` or `m y` at a random
/// place. `x` and `y` see the same multiset of context words but at mirrored
/// positions.
pub fn positional_corpus(seed: u64, sentences: usize, fillers: usize, length: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fill = vocab_list("f", fillers);
    let length = length.max(4);
    (0..sentences)
        .map(|_| {
            let mut toks: Vec<&str> = (0..length).map(|_| pick(&fill, &mut rng)).collect();
            let at = rng.gen_range(1..length - 2);
            if rng.gen_bool(0.5) {
                toks[at] = LEFT_TOKEN;
                toks[at + 1] = MARKER;
            } else {
                toks[at] = MARKER;
                toks[at + 1] = RIGHT_TOKEN;
            }
            toks.join(" ")
        })
        .collect()
}

/// Parameters of [`name_typing_corpus`].
#[derive(Clone, Debug)]
pub struct NameTypingSpec {
    pub names: usize,
    /// Must be even: the first half of the types puts its cue word left of
    /// the name, the second half puts the same cue words right of it.
    pub types: usize,
    pub min_mentions: usize,
    pub max_mentions: usize,
    pub fillers: usize,
    /// Tokens on each side of the name.
    pub side: usize,
    /// Probability that a mention carries its type cue.
    pub cue_rate: f64,
}

impl Default for NameTypingSpec {
    fn default() -> Self {
        NameTypingSpec {
            names: 5200,
            types: 24,
            min_mentions: 10,
            max_mentions: 20,
            fillers: 100,
            side: 2,
            cue_rate: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NameTypingCorpus {
    pub lines: Vec<String>,
    pub name_types: BTreeMap<String, BTreeSet<String>>,
    pub type_names: Vec<String>,
}

pub fn type_name(t: usize) -> String {
    format!("/synthetic/t{t:02}")
}

/// Corpus in which every mention of a name shows a cue word for one of the
/// name's types. Type `t` and type `t + types/2` share a cue word and differ
/// only by the side of the name it appears on.
pub fn name_typing_corpus(seed: u64, spec: &NameTypingSpec) -> NameTypingCorpus {
    assert!(spec.types >= 2 && spec.types.is_multiple_of(2), "type count must be even");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = spec.types / 2;
    let cues = vocab_list("c", half);
    let fill = vocab_list("w", spec.fillers);
    let type_names: Vec<String> = (0..spec.types).map(type_name).collect();
    let popularity =
        WeightedIndex::new((0..spec.types).map(|t| 1.0 / ((t % half) as f64 + 2.0).sqrt())).unwrap();
    let arity = WeightedIndex::new([0.5, 0.35, 0.15]).unwrap();

    let mut lines = Vec::new();
    let mut name_types = BTreeMap::new();
    for i in 0..spec.names {
        let name = format!("n{i}");
        let k = arity.sample(&mut rng) + 1;
        let mut types = BTreeSet::new();
        while types.len() < k {
            types.insert(popularity.sample(&mut rng));
        }
        let types: Vec<usize> = types.into_iter().collect();
        for _ in 0..rng.gen_range(spec.min_mentions..=spec.max_mentions) {
            let mut toks: Vec<&str> = (0..2 * spec.side + 1).map(|_| pick(&fill, &mut rng)).collect();
            toks[spec.side] = &name;
            if rng.gen_bool(spec.cue_rate) {
                let t = types[rng.gen_range(0..types.len())];
                let at = if t < half { spec.side - 1 } else { spec.side + 1 };
                toks[at] = &cues[t % half];
            }
            lines.push(toks.join(" "));
        }
        name_types.insert(name, types.iter().map(|&t| type_names[t].clone()).collect());
    }
    lines.shuffle(&mut rng);
    NameTypingCorpus {
        lines,
        name_types,
        type_names,
    }
}

/// Multi-label inputs and labels.
#[derive(Clone, Debug)]
pub struct LabeledData {
    pub x: Features,
    pub y: Vec<TypeSet>,
}

/// Each type `t` is positive iff coordinates `2t` and `2t+1` have opposite
/// signs. Positive quadrants carry 40% of the mass, and the distribution is
/// symmetric under `x -> -x`, so no linear score beats a constant. `|x_i|` is
/// at least `margin` on the label coordinates.
pub fn xor_data(seed: u64, n: usize, types: usize, extra_dims: usize, margin: f64) -> LabeledData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 2 * types + extra_dims;
    let mut data = Vec::with_capacity(n * dim);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = vec![0.0; dim];
        let mut labels = TypeSet::empty(types);
        for t in 0..types {
            let positive = rng.gen_bool(0.4);
            let first: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let second = if positive { -first } else { first };
            row[2 * t] = first * rng.gen_range(margin..1.0);
            row[2 * t + 1] = second * rng.gen_range(margin..1.0);
            if positive {
                labels.insert(t);
            }
        }
        for v in &mut row[2 * types..] {
            *v = rng.gen_range(-1.0..1.0);
        }
        data.extend(row);
        y.push(labels);
    }
    LabeledData {
        x: Features::new(n, dim, data).expect("sizes agree"),
        y,
    }
}

/// Labels from random hyperplanes (fixed by `plane_seed`) through the cube
/// `[-1, 1]^dim`; points come from `point_seed`. Points closer than `margin`
/// to any hyperplane are resampled.
pub fn separable_data(
    plane_seed: u64,
    point_seed: u64,
    n: usize,
    types: usize,
    dim: usize,
    margin: f64,
) -> LabeledData {
    let mut rng = ChaCha8Rng::seed_from_u64(plane_seed);
    let planes: Vec<(Vec<f64>, f64)> = (0..types)
        .map(|_| {
            let mut w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            w.iter_mut().for_each(|v| *v /= norm);
            (w, rng.gen_range(-0.3..0.3))
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(point_seed);
    let mut data = Vec::with_capacity(n * dim);
    let mut y = Vec::with_capacity(n);
    while y.len() < n {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let scores: Vec<f64> = planes
            .iter()
            .map(|(w, b)| w.iter().zip(&x).map(|(a, c)| a * c).sum::<f64>() + b)
            .collect();
        if scores.iter().any(|s| s.abs() < margin) {
            continue;
        }
        y.push(TypeSet::from_ids(
            types,
            scores.iter().enumerate().filter(|(_, s)| **s > 0.0).map(|(t, _)| t),
        ));
        data.extend(x);
    }
    LabeledData {
        x: Features::new(n, dim, data).expect("sizes agree"),
        y,
    }
}
