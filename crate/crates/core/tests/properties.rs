mod common;

use proptest::prelude::*;
use sentcompare::corpus::{dice, group_sizes, partition_by_dice, partition_by_source, StsPair};
use sentcompare::encoder::{pool, EmbeddingStore, Pooling};
use sentcompare::numstat::{cosine, ranks_with_ties, softmax, spearman, RealVector};
use std::path::Path;

fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, d)
}

fn nonzero(v: &[f64]) -> bool {
    v.iter().any(|x| x.abs() > 1e-6)
}

const WORDS: [&str; 8] = ["a", "man", "guitar", "plays", "the", "dog", "runs", "red"];

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(&WORDS[..]), 1..7).prop_map(|w| w.join(" "))
}

fn sts_pairs(max: usize) -> impl Strategy<Value = Vec<StsPair>> {
    prop::collection::vec((sentence(), sentence(), 0.0..5.0f64, 0..4usize), 1..max).prop_map(|rows| {
        rows.into_iter()
            .map(|(a, b, g, s)| StsPair::new(format!("src{s}"), g, &a, &b).unwrap())
            .collect()
    })
}

proptest! {
    #[test]
    fn cosine_symmetric_and_scale_invariant(
        (u, v) in (1..12usize).prop_flat_map(|d| (vec_strategy(d), vec_strategy(d))),
        k in 0.1..100.0f64,
    ) {
        prop_assume!(nonzero(&u) && nonzero(&v));
        let c = cosine(&u, &v).unwrap();
        prop_assert!((c - cosine(&v, &u).unwrap()).abs() < 1e-12);
        let scaled: Vec<f64> = u.iter().map(|x| x * k).collect();
        prop_assert!((c - cosine(&scaled, &v).unwrap()).abs() < 1e-9);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c));
    }

    #[test]
    fn ranks_sum_to_triangular_number(x in prop::collection::vec(prop::sample::select(vec![0.0, 1.0, 1.5, 2.0, -3.0]), 1..60)) {
        let n = x.len() as f64;
        let r = ranks_with_ties(&x).unwrap();
        prop_assert!((r.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
        prop_assert_eq!(r, common::brute_ranks(&x));
    }

    #[test]
    fn spearman_invariant_under_monotone_maps(x in vec_strategy(20), y in vec_strategy(20)) {
        let rho = spearman(&x, &y).unwrap();
        let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let cubed: Vec<f64> = y.iter().map(|v| v * v * v + 1.0).collect();
        prop_assert!((rho - spearman(&ex, &cubed).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-500.0..500.0f64, 1..20)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&q| (0.0..=1.0).contains(&q)));
    }

    #[test]
    fn dice_symmetric_and_bounded(a in sentence(), b in sentence()) {
        let d = dice(&a, &b).unwrap();
        prop_assert_eq!(d, dice(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(dice(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn source_partition_is_a_permutation_cover(pairs in sts_pairs(80)) {
        let p = partition_by_source(&pairs).unwrap();
        let mut flat: Vec<&StsPair> = p.subsets.iter().flat_map(|s| &s.pairs).collect();
        prop_assert_eq!(flat.len(), pairs.len());
        for s in &p.subsets {
            prop_assert!(s.pairs.iter().all(|q| q.source == s.label));
        }
        flat.sort_by(|a, b| (&a.sentence1, &a.sentence2, a.gold.to_bits()).cmp(&(&b.sentence1, &b.sentence2, b.gold.to_bits())));
        let mut orig: Vec<&StsPair> = pairs.iter().collect();
        orig.sort_by(|a, b| (&a.sentence1, &a.sentence2, a.gold.to_bits()).cmp(&(&b.sentence1, &b.sentence2, b.gold.to_bits())));
        prop_assert_eq!(flat, orig);
    }

    #[test]
    fn dice_partition_sizes_and_order(pairs in sts_pairs(120), k in 1..8usize) {
        prop_assume!(pairs.len() >= k);
        let dp = partition_by_dice(&pairs, k).unwrap();
        let sizes: Vec<usize> = dp.partition.subsets.iter().map(|s| s.pairs.len()).collect();
        prop_assert_eq!(&sizes, &group_sizes(pairs.len(), k));
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for w in dp.bounds.windows(2) {
            prop_assert!(w[0].1 <= w[1].0);
            prop_assert!(w[0].0 <= w[1].0);
        }
    }

    #[test]
    fn mean_max_pooling_ignore_order(rows in (1..6usize).prop_flat_map(|d| prop::collection::vec(vec_strategy(d), 2..8)), seed in any::<u64>()) {
        let mut shuffled = rows.clone();
        let tail = &mut shuffled[1..];
        sentcompare::numstat::Rng::new(seed).shuffle(tail);
        for strategy in [Pooling::Mean, Pooling::Max] {
            let a = pool(&rows, strategy, false).unwrap();
            let b = pool(&shuffled, strategy, false).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
        let mean = pool(&rows, Pooling::Mean, false).unwrap();
        let max = pool(&rows, Pooling::Max, false).unwrap();
        prop_assert!(max.iter().zip(mean.iter()).all(|(m, a)| m >= a));
    }

    #[test]
    fn dump_round_trip_is_bit_exact(vectors in prop::collection::vec(vec_strategy(5), 1..30)) {
        let mut store = EmbeddingStore::new(5);
        for (i, v) in vectors.iter().enumerate() {
            store.insert(format!("sentence {i}"), RealVector::new(v.clone()).unwrap()).unwrap();
        }
        let back = EmbeddingStore::parse_dump(&store.to_dump_string(), Path::new("mem")).unwrap();
        for (k, v) in store.iter() {
            let w = back.get(k).unwrap();
            prop_assert!(v.iter().zip(w.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        prop_assert_eq!(back.len(), store.len());
    }
}
