mod common;

use nextread::fixture::FixtureSpec;
use nextread::splits::{make_cold_split, make_warm_split, split_stats, DataSplit, SideStats, SplitKind};
use nextread::transitions::TripletSet;
use nextread::Error;

fn set(rows: &[(&str, &str, &str)]) -> TripletSet {
    TripletSet::from_rows(rows.iter().map(|&(u, i, j)| (u, i, j, 1.1))).unwrap()
}

#[test]
fn cold_holdout_moves_every_touching_triplet_to_test() {
    let s = set(&[("u", "A", "B"), ("u", "A", "C")]);
    // with three articles, ρ = 0.3 holds out exactly one; find a seed holding out B
    let split = (0..200)
        .map(|seed| make_cold_split(&s, 0.3, seed))
        .filter_map(Result::ok)
        .find(|sp| sp.holdout_articles.iter().eq(["B"].iter()))
        .expect("some seed holds out B");
    assert_eq!(split.test.rows().map(|r| (r.1, r.2)).collect::<Vec<_>>(), [("A", "B")]);
    assert_eq!(split.train.rows().map(|r| (r.1, r.2)).collect::<Vec<_>>(), [("A", "C")]);
}

#[test]
fn cold_holdout_with_no_triplets_on_one_side_is_degenerate() {
    // every triplet touches A, so holding out A empties train
    let s = set(&[("u", "A", "B"), ("v", "C", "A")]);
    let outcomes: Vec<_> = (0..50).map(|seed| make_cold_split(&s, 0.01, seed)).collect();
    assert!(outcomes.iter().any(|r| matches!(r, Err(Error::DegenerateSplit(_)))));
}

#[test]
fn warm_split_of_two_shared_triplets_puts_one_in_test() {
    let s = set(&[("u", "A", "B"), ("v", "A", "B")]);
    let split = make_warm_split(&s, 0.5, 1).unwrap();
    assert_eq!((split.train.len(), split.test.len()), (1, 1));
}

#[test]
fn warm_triplet_with_a_unique_article_stays_in_train() {
    let s = set(&[("u", "A", "B"), ("v", "A", "B"), ("w", "A", "Z")]);
    for seed in 0..30 {
        match make_warm_split(&s, 0.6, seed) {
            Ok(split) => assert!(split.train.rows().any(|r| r.2 == "Z"), "seed {seed}"),
            Err(e) => assert!(matches!(e, Error::DegenerateSplit(_))),
        }
    }
}

#[test]
fn fractions_outside_the_open_interval_are_rejected() {
    let s = set(&[("u", "A", "B"), ("v", "B", "C")]);
    for f in [0.0, 1.0, -0.1, f64::NAN] {
        assert!(matches!(make_cold_split(&s, f, 1), Err(Error::Parameter(_))));
        assert!(matches!(make_warm_split(&s, f, 1), Err(Error::Parameter(_))));
    }
}

#[test]
fn side_statistics() {
    let s = set(&[("u1", "A", "B"), ("u2", "A", "C")]);
    assert_eq!(SideStats::of(&s), SideStats { users: 2, items: 3, entries: 2 });
    assert_eq!(SideStats::of(&TripletSet::default()), SideStats::default());
}

#[test]
fn splits_roundtrip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let triplets = common::fixture_triplets(&FixtureSpec::default(), dir.path());
    for split in [make_cold_split(&triplets, 0.1, 7).unwrap(), make_warm_split(&triplets, 0.2, 7).unwrap()] {
        let out = dir.path().join(split.kind.as_str());
        split.save(&out).unwrap();
        assert_eq!(DataSplit::load(&out).unwrap(), split);
    }
}

#[test]
fn fixture_cold_split_regression() {
    let dir = tempfile::tempdir().unwrap();
    let triplets = common::fixture_triplets(&FixtureSpec::default(), dir.path());
    let split = make_cold_split(&triplets, 0.1, 7).unwrap();
    assert_eq!(split.kind, SplitKind::Cold);
    assert!(split.test.rows().all(|(_, i, j, _)| split.holdout_articles.contains(i) || split.holdout_articles.contains(j)));
    assert!(split.train.rows().all(|(_, i, j, _)| !split.holdout_articles.contains(i) && !split.holdout_articles.contains(j)));
    let stats = split_stats(&split);
    println!("cold: {stats:?} holdout={}", split.holdout_articles.len());
    assert_eq!(split.holdout_articles.len(), FROZEN_COLD.0);
    assert_eq!(stats.train, FROZEN_COLD.1);
    assert_eq!(stats.test, FROZEN_COLD.2);
}

#[test]
fn fixture_warm_split_regression() {
    let dir = tempfile::tempdir().unwrap();
    let triplets = common::fixture_triplets(&FixtureSpec::default(), dir.path());
    let split = make_warm_split(&triplets, 0.2, 7).unwrap();
    let train_articles: std::collections::HashSet<&str> = split.train.articles.ids().iter().map(String::as_str).collect();
    assert!(split.test.articles.ids().iter().all(|a| train_articles.contains(a.as_str())));
    let stats = split_stats(&split);
    println!("warm: {stats:?}");
    assert_eq!(stats.train, FROZEN_WARM.0);
    assert_eq!(stats.test, FROZEN_WARM.1);
}

// Derived once from the default fixture (50 users, 200 articles, β = 0.8, seed 7).
const FROZEN_COLD: (usize, SideStats, SideStats) = (
    20,
    SideStats { users: 50, items: 179, entries: 768 },
    SideStats { users: 41, items: 135, entries: 195 },
);
const FROZEN_WARM: (SideStats, SideStats) = (
    SideStats { users: 50, items: 199, entries: 772 },
    SideStats { users: 48, items: 166, entries: 191 },
);
