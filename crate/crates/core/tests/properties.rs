use std::collections::{BTreeMap, HashSet};

use nametype::dataset::{sample_and_split, TypeSet, TypeSystem};
use nametype::embed_io::{read_embeddings, write_embeddings, EmbeddingFileFormat};
use nametype::evaluate::{micro_f1, per_type_count_breakdown, strict_accuracy, Counts};
use nametype::EmbeddingMatrix;
use proptest::prelude::*;

fn sets(n_types: usize, len: usize) -> impl Strategy<Value = Vec<TypeSet>> {
    prop::collection::vec(prop::collection::vec(any::<bool>(), n_types), len).prop_map(move |rows| {
        rows.into_iter()
            .map(|bits| TypeSet::from_ids(n_types, bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)))
            .collect()
    })
}

fn paired(n_types: usize, max_len: usize) -> impl Strategy<Value = (Vec<TypeSet>, Vec<TypeSet>)> {
    (0..max_len).prop_flat_map(move |n| (sets(n_types, n), sets(n_types, n)))
}

fn matrix() -> impl Strategy<Value = EmbeddingMatrix> {
    (1usize..12, 1usize..6).prop_flat_map(|(rows, dim)| {
        prop::collection::vec(-1e3f32..1e3, rows * dim).prop_map(move |data| {
            let tokens = (0..rows).map(|i| format!("tok{i}")).collect();
            EmbeddingMatrix::new(tokens, dim, data).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn metrics_ignore_example_order((pred, gold) in paired(5, 30), seed in any::<u64>()) {
        use rand::prelude::*;
        let mut order: Vec<usize> = (0..gold.len()).collect();
        order.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
        let p2: Vec<TypeSet> = order.iter().map(|&i| pred[i].clone()).collect();
        let g2: Vec<TypeSet> = order.iter().map(|&i| gold[i].clone()).collect();
        prop_assert_eq!(strict_accuracy(&pred, &gold).unwrap(), strict_accuracy(&p2, &g2).unwrap());
        prop_assert_eq!(micro_f1(&pred, &gold).unwrap(), micro_f1(&p2, &g2).unwrap());
    }

    #[test]
    fn metrics_stay_in_unit_interval((pred, gold) in paired(4, 20)) {
        let a = strict_accuracy(&pred, &gold).unwrap();
        let m = micro_f1(&pred, &gold).unwrap();
        for v in [a, m.f1, m.precision, m.recall] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        if !gold.is_empty() && pred == gold {
            prop_assert_eq!(a, 1.0);
        }
    }

    #[test]
    fn breakdown_groups_add_up((pred, gold) in paired(4, 40)) {
        let rows = per_type_count_breakdown(&pred, &gold, 0).unwrap();
        prop_assert_eq!(rows.iter().map(|r| r.group_size).sum::<usize>(), gold.len());
        let total: Counts = rows.iter().map(|r| r.counts).sum();
        prop_assert_eq!(total, micro_f1(&pred, &gold).unwrap().counts);
        prop_assert!(rows.windows(2).all(|w| w[0].n < w[1].n));
        let big = per_type_count_breakdown(&pred, &gold, 5).unwrap();
        prop_assert!(big.iter().all(|r| r.group_size > 5));
    }

    #[test]
    fn restrict_keeps_the_intersection(m in matrix(), keep in prop::collection::hash_set("tok[0-9]{1,2}", 0..15)) {
        let r = m.restrict(&keep);
        let expected: HashSet<&str> = m.tokens().iter().map(String::as_str).filter(|t| keep.contains(*t)).collect();
        prop_assert_eq!(r.tokens().iter().map(String::as_str).collect::<HashSet<_>>(), expected);
        for (t, row) in r.iter() {
            prop_assert_eq!(Some(row), m.lookup(t));
        }
    }

    #[test]
    fn splits_are_disjoint_and_sized(n_names in 1usize..300, sample in 1usize..400, train in 0u32..=10, dev in 0u32..=10, seed in any::<u64>()) {
        prop_assume!(train + dev <= 10);
        let ts = TypeSystem::new(["a", "b", "c"]).unwrap();
        let filtered: BTreeMap<String, TypeSet> = (0..n_names)
            .map(|i| (format!("n{i}"), TypeSet::from_ids(3, [i % 3])))
            .collect();
        let f = (train as f64 / 10.0, dev as f64 / 10.0, (10 - train - dev) as f64 / 10.0);
        let ds = sample_and_split(&filtered, &ts, sample, f, seed).unwrap();
        let n = sample.min(n_names);
        prop_assert_eq!(ds.train.len() + ds.dev.len() + ds.test.len(), n);
        prop_assert_eq!(ds.train.len(), (f.0 * n as f64 + 1e-9).floor() as usize);
        let names: HashSet<&str> = ds.train.iter().chain(&ds.dev).chain(&ds.test).map(|e| e.name.as_str()).collect();
        prop_assert_eq!(names.len(), n);
        for e in ds.train.iter().chain(&ds.dev).chain(&ds.test) {
            prop_assert_eq!(&filtered[&e.name], &e.types);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn embedding_files_round_trip(m in matrix()) {
        let dir = tempfile::tempdir().unwrap();
        for format in [EmbeddingFileFormat::Word2VecBinary, EmbeddingFileFormat::Word2VecText, EmbeddingFileFormat::GloveText] {
            let path = dir.path().join(format.flag());
            write_embeddings(&m, &path, format).unwrap();
            let back = read_embeddings(&path, format, None).unwrap();
            prop_assert_eq!(back.tokens(), m.tokens());
            if format == EmbeddingFileFormat::Word2VecBinary {
                prop_assert_eq!(back.as_slice(), m.as_slice());
            } else {
                for (a, b) in back.as_slice().iter().zip(m.as_slice()) {
                    prop_assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-6));
                }
            }
        }
    }
}
