use std::path::Path;

use sentcompare::corpus::{Partition, StsPair, Subset};
use sentcompare::encoder::EmbeddingStore;
use sentcompare::evalsuite::{aggregate_seeds, comparison_markdown, eval_sts_partitioned, StsReport};

/// Unit vector at `deg` degrees.
fn at(deg: f64) -> String {
    let r = deg.to_radians();
    format!("{} {}", r.cos(), r.sin())
}

/// Store with an anchor sentence at 0° and one sentence per angle.
fn store(angles: &[(&str, f64)]) -> EmbeddingStore {
    let mut text = format!("dim=2\nanchor\t{}\n", at(0.0));
    for (s, deg) in angles {
        text.push_str(&format!("{s}\t{}\n", at(*deg)));
    }
    EmbeddingStore::parse_dump(&text, Path::new("mem")).unwrap()
}

fn subset(label: &str, items: &[(&str, f64)]) -> Subset {
    Subset {
        label: label.into(),
        pairs: items.iter().map(|(s, g)| StsPair::new(label, *g, "anchor", *s).unwrap()).collect(),
    }
}

#[test]
fn pooled_score_can_fall_below_every_subset() {
    // Within each subset similarity tracks gold perfectly, but the subset
    // with higher gold has lower cosine overall.
    let provider = store(&[("a1", 10.0), ("a2", 5.0), ("a3", 1.0), ("b1", 80.0), ("b2", 70.0), ("b3", 60.0)]);
    let partition = Partition {
        name: "toy".into(),
        subsets: vec![
            subset("low-gold", &[("a1", 0.0), ("a2", 1.0), ("a3", 2.0)]),
            subset("high-gold", &[("b1", 3.0), ("b2", 4.0), ("b3", 5.0)]),
        ],
    };
    let rep = eval_sts_partitioned(&provider, &partition).unwrap();
    let min_subset = rep.rows.iter().map(|r| r.spearman.unwrap()).fold(f64::INFINITY, f64::min);
    assert!((min_subset - 100.0).abs() < 1e-9);
    assert!(rep.all.spearman.unwrap() < min_subset);
    assert_eq!(rep.all.n, 6);
}

#[test]
fn degenerate_subsets_are_flagged_not_fatal() {
    let provider = store(&[("a1", 10.0), ("a2", 20.0), ("b1", 30.0), ("c1", 40.0), ("c2", 50.0)]);
    let partition = Partition {
        name: "toy".into(),
        subsets: vec![
            subset("ok", &[("a1", 1.0), ("a2", 0.0)]),
            subset("single", &[("b1", 1.0)]),
            subset("flat-gold", &[("c1", 2.0), ("c2", 2.0)]),
        ],
    };
    let rep = eval_sts_partitioned(&provider, &partition).unwrap();
    assert!((rep.rows[0].spearman.unwrap() - 100.0).abs() < 1e-9);
    assert!(rep.rows[1].spearman.is_none() && rep.rows[1].note.is_some());
    assert!(rep.rows[2].spearman.is_none() && rep.rows[2].note.as_deref().unwrap().contains("gold"));
    assert!(rep.all.spearman.is_some());
    assert!(rep.to_markdown().contains("| single (too few pairs) | 1 | – | – |"));
}

#[test]
fn seed_aggregation_marks_run_count() {
    let provider = store(&[("a1", 10.0), ("a2", 20.0), ("a3", 30.0)]);
    let partition = Partition {
        name: "toy".into(),
        subsets: vec![subset("s", &[("a1", 2.0), ("a2", 1.0), ("a3", 0.0)])],
    };
    let one = eval_sts_partitioned(&provider, &partition).unwrap();
    let reports: Vec<StsReport> = (0..10)
        .map(|seed| StsReport {
            seeds: vec![seed],
            ..one.clone()
        })
        .collect();
    let agg = aggregate_seeds(&reports).unwrap();
    assert_eq!(agg.runs(), 10);
    assert_eq!(agg.seeds, (0..10).collect::<Vec<_>>());
    assert_eq!(agg.rows[0].per_seed_spearman.len(), 10);
    assert!(agg.to_markdown().contains("mean of 10 run(s)"));

    let table = comparison_markdown(&[("m".into(), agg)]);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "| Method | s | ALL | Avg |");
    assert_eq!(lines[2], "| m | 100.00 | 100.00 | 100.00 |");
}
