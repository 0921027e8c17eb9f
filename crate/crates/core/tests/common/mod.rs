//! Oracles and generators shared by the integration tests. Everything here is
//! written independently of the library's internals: the triplet enumerator
//! walks raw event lists, and the ridge oracle solves the normal equations
//! with nalgebra's LU.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nextread::features::{FeatureKind, FeatureMatrix};
use nextread::ingest::{ClickEvent, ClickStream};
use nextread::models::{TrainingInstance, TrainingSet};
use nextread::numerics::Matrix;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- triplets

/// Random click log: at most `max_users` users and `max_clicks` clicks in
/// total over a small article alphabet, with gaps that straddle the window
/// boundary often (including exactly 1800 and 1801 s).
pub fn random_streams(rng: &mut impl Rng, max_users: usize, max_clicks: usize) -> Vec<ClickStream> {
    let n_users = rng.random_range(1..=max_users);
    let n_articles = rng.random_range(2..=6);
    let total = rng.random_range(n_users..=max_clicks.max(n_users));
    let mut per_user: Vec<Vec<ClickEvent>> = vec![Vec::new(); n_users];
    let mut clock = vec![0i64; n_users];
    for _ in 0..total {
        let u = rng.random_range(0..n_users);
        let gap = match rng.random_range(0..6) {
            0 => 0,
            1 => 1800,
            2 => 1801,
            3 => rng.random_range(1..1800),
            4 => rng.random_range(1802..5000),
            _ => rng.random_range(0..120),
        };
        clock[u] += gap;
        per_user[u].push(ClickEvent {
            user: format!("U{u}"),
            news: format!("N{}", rng.random_range(0..n_articles)),
            timestamp: 1_000_000 + clock[u],
            within_impression_rank: 0,
        });
    }
    per_user
        .into_iter()
        .enumerate()
        .filter(|(_, e)| !e.is_empty())
        .map(|(u, e)| ClickStream::from_events(format!("U{u}"), e).unwrap())
        .collect()
}

/// Counts every consecutive pair that is at most `window` seconds apart and
/// moves between two different articles.
pub fn brute_force_counts(streams: &[ClickStream], window: i64) -> BTreeMap<(String, String, String), u64> {
    let mut out = BTreeMap::new();
    for s in streams {
        for k in 1..s.events.len() {
            let (a, b) = (&s.events[k - 1], &s.events[k]);
            if b.timestamp - a.timestamp <= window && a.news != b.news {
                *out.entry((s.user.clone(), a.news.clone(), b.news.clone())).or_insert(0) += 1;
            }
        }
    }
    out
}

/// `(u, i, j) → 1 + 0.1 · Σ_u' count(u', i, j)` from the brute-force counts.
pub fn brute_force_confidences(
    counts: &BTreeMap<(String, String, String), u64>,
) -> BTreeMap<(String, String, String), f64> {
    let mut global: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for ((_, i, j), c) in counts {
        *global.entry((i.as_str(), j.as_str())).or_insert(0) += c;
    }
    counts
        .keys()
        .map(|k| (k.clone(), 1.0 + 0.1 * global[&(k.1.as_str(), k.2.as_str())] as f64))
        .collect()
}

// ---------------------------------------------------------------- numerics

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect();
    Matrix::from_rows(&rows).unwrap()
}

/// `(GᵀG + λI)⁻¹ GᵀR`, formed explicitly and solved by LU.
pub fn normal_equations(g: &Matrix, r: &Matrix, lambda: f64) -> Matrix {
    let g = to_na(g);
    let r = to_na(r);
    let k = g.ncols();
    let lhs = g.transpose() * &g + DMatrix::identity(k, k) * lambda;
    let rhs = g.transpose() * r;
    from_na(&lhs.lu().solve(&rhs).expect("oracle system is nonsingular"))
}

pub fn relative_frobenius(a: &Matrix, b: &Matrix) -> f64 {
    let diff: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    diff / b.frobenius_norm().max(1e-300)
}

// ---------------------------------------------------------------- models

/// Random instance set over small index spaces; every user and article is
/// touched at least once.
pub fn random_training_set(
    rng: &mut impl Rng,
    n_users: usize,
    n_articles: usize,
    n_instances: usize,
) -> TrainingSet {
    let n_instances = n_instances.max(n_users).max(n_articles);
    let instances = (0..n_instances)
        .map(|k| {
            let user = if k < n_users { k } else { rng.random_range(0..n_users) };
            let last = k % n_articles;
            let mut next = rng.random_range(0..n_articles);
            if next == last {
                next = (next + 1) % n_articles;
            }
            let positive = rng.random_bool(0.6);
            TrainingInstance {
                user,
                last,
                next,
                target: if positive { 1.0 } else { 0.0 },
                weight: if positive { 1.0 + 0.1 * rng.random_range(1..4) as f64 } else { 1.0 },
            }
        })
        .collect();
    TrainingSet {
        instances,
        n_users,
        n_articles,
    }
}

pub fn dense_features(rng: &mut impl Rng, n_articles: usize, dim: usize) -> FeatureMatrix {
    let ids = (0..n_articles).map(|a| format!("N{a}")).collect();
    FeatureMatrix::from_dense(FeatureKind::External, ids, random_matrix(rng, n_articles, dim)).unwrap()
}

// ---------------------------------------------------------------- fixture

/// Generates the fixture into `dir` and runs ingest through triplets.
pub fn fixture_triplets(spec: &nextread::fixture::FixtureSpec, dir: &Path) -> nextread::transitions::TripletSet {
    use nextread::ingest::{parse_behaviors, parse_news, validate_clicks};
    use nextread::transitions::{build_tensor, build_triplets};
    let files = nextread::fixture::generate_fixture(spec, dir).unwrap();
    let (catalog, _) = parse_news(&files.news).unwrap();
    let (log, _) = parse_behaviors(&files.behaviors).unwrap();
    let (streams, _) = validate_clicks(&log.streams, &catalog);
    build_triplets(&build_tensor(&streams, 1800).unwrap()).unwrap()
}
