//! Ranking evaluation: MAP@K, Recall@K, Novelty@K and Diversity@K over test
//! triplets, with CSV curve emission and a fixed-layout summary table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::ingest::ClickTally;
use crate::models::{score_rows, FactorModel, ModelKind};
use crate::splits::{DataSplit, SplitKind};

pub const CURVE_HEADER: &str = "model,setting,k,metric,value";

/// Mean over queries of `1/rank` when the single relevant item ranks within
/// `k`, else 0. `None` marks a query whose truth was not ranked at all.
pub fn map_at_k(ranks: &[Option<usize>], k: usize) -> f64 {
    mean(ranks.iter().map(|r| match r {
        Some(r) if *r <= k => 1.0 / *r as f64,
        _ => 0.0,
    }))
}

/// Fraction of queries whose relevant item ranks within `k`.
pub fn recall_at_k(ranks: &[Option<usize>], k: usize) -> f64 {
    mean(ranks.iter().map(|r| match r {
        Some(r) if *r <= k => 1.0,
        _ => 0.0,
    }))
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Self-information of recommended items, `−log2(max(pop, 1) / total)`,
/// averaged within each top-`k` list and then across lists.
pub fn novelty_at_k(lists: &[Vec<usize>], popularity: &[u64], total_clicks: u64, k: usize) -> f64 {
    let total = total_clicks.max(1) as f64;
    mean(lists.iter().map(|list| {
        mean(list.iter().take(k).map(|&a| {
            let p = popularity.get(a).copied().unwrap_or(0).max(1) as f64;
            -(p / total).log2()
        }))
    }))
}

/// Mean pairwise cosine distance of the TF-IDF rows within each top-`k`
/// list, averaged across lists. Lists with fewer than two items score 0.
pub fn diversity_at_k(lists: &[Vec<usize>], tfidf: &FeatureMatrix, k: usize) -> f64 {
    mean(lists.iter().map(|list| {
        let top = &list[..list.len().min(k)];
        if top.len() < 2 {
            return 0.0;
        }
        let mut sum = 0.0;
        for b in 1..top.len() {
            for a in 0..b {
                sum += tfidf.cosine_distance(top[a], top[b]);
            }
        }
        sum / pair_count(top.len())
    }))
}

fn pair_count(n: usize) -> f64 {
    (n * (n - 1) / 2) as f64
}

// Largest number of distinct rows for which all pairwise distances are
// tabulated (2048² f64 = 32 MiB).
const MAX_TABLE_ROWS: usize = 2048;

/// Cosine distances between TF-IDF rows, memoized in a dense table over the
/// rows that occur in the ranked lists when there are few enough of them.
struct DistanceCache<'a> {
    tfidf: &'a FeatureMatrix,
    slot: Vec<u32>,
    n: usize,
    table: Vec<f64>,
}

impl<'a> DistanceCache<'a> {
    fn new(tfidf: &'a FeatureMatrix, lists: &[Vec<usize>]) -> Self {
        let mut slot = vec![u32::MAX; tfidf.len()];
        let mut n = 0;
        for &r in lists.iter().flatten() {
            if slot[r] == u32::MAX {
                slot[r] = n as u32;
                n += 1;
            }
        }
        let table = if n <= MAX_TABLE_ROWS { vec![f64::NAN; n * n] } else { Vec::new() };
        DistanceCache { tfidf, slot, n, table }
    }

    fn get(&mut self, a: usize, b: usize) -> f64 {
        if self.table.is_empty() {
            return self.tfidf.cosine_distance(a, b);
        }
        let (sa, sb) = (self.slot[a] as usize, self.slot[b] as usize);
        let cell = sa * self.n + sb;
        if self.table[cell].is_nan() {
            let d = self.tfidf.cosine_distance(a, b);
            self.table[cell] = d;
            self.table[sb * self.n + sa] = d;
        }
        self.table[cell]
    }

    /// `prefix[k]` = sum of distances over pairs within the first `k` items,
    /// accumulated in the same order as [`diversity_at_k`].
    fn prefix_pair_sums(&mut self, list: &[usize]) -> Vec<f64> {
        let mut prefix = vec![0.0; list.len() + 1];
        let mut sum = 0.0;
        for b in 1..list.len() {
            for a in 0..b {
                sum += self.get(list[a], list[b]);
            }
            prefix[b + 1] = sum;
        }
        prefix
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricValues {
    pub map: f64,
    pub recall: f64,
    pub novelty: f64,
    pub diversity: f64,
}

impl MetricValues {
    pub fn named(&self) -> [(&'static str, f64); 4] {
        [
            ("diversity", self.diversity),
            ("map", self.map),
            ("novelty", self.novelty),
            ("recall", self.recall),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.named().iter().all(|(_, v)| v.is_finite())
    }
}

/// Metrics keyed by `(model, setting, K)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub entries: BTreeMap<(ModelKind, SplitKind, usize), MetricValues>,
}

impl MetricReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, model: ModelKind, setting: SplitKind, k: usize, values: MetricValues) {
        self.entries.insert((model, setting, k), values);
    }

    pub fn extend(&mut self, model: ModelKind, setting: SplitKind, curve: &[(usize, MetricValues)]) {
        for &(k, v) in curve {
            self.insert(model, setting, k, v);
        }
    }

    pub fn get(&self, model: ModelKind, setting: SplitKind, k: usize) -> Option<&MetricValues> {
        self.entries.get(&(model, setting, k))
    }

    pub fn ks(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = self.entries.keys().map(|&(_, _, k)| k).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    /// CSV text with header `model,setting,k,metric,value`, rows sorted by
    /// (model, setting, metric, k).
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(&str, &str, &str, usize, f64)> = Vec::new();
        for (&(model, setting, k), values) in &self.entries {
            for (metric, value) in values.named() {
                rows.push((model.as_str(), setting.as_str(), metric, k, value));
            }
        }
        rows.sort_by(|a, b| (a.0, a.1, a.2, a.3).cmp(&(b.0, b.1, b.2, b.3)));
        let mut out = String::from(CURVE_HEADER);
        out.push('\n');
        for (model, setting, metric, k, value) in rows {
            let _ = writeln!(out, "{model},{setting},{k},{metric},{value}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<MetricReport> {
        let mut lines = text.lines();
        if lines.next() != Some(CURVE_HEADER) {
            return Err(Error::format("metrics csv", "missing header"));
        }
        let mut report = MetricReport::new();
        for (n, line) in lines.enumerate() {
            let bad = |m: &str| Error::format(format!("metrics csv line {}", n + 2), m);
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(bad("expected 5 columns"));
            }
            let model: ModelKind = cols[0].parse()?;
            let setting = match cols[1] {
                "warm" => SplitKind::Warm,
                "cold" => SplitKind::Cold,
                _ => return Err(bad("unknown setting")),
            };
            let k: usize = cols[2].parse().map_err(|_| bad("bad k"))?;
            let value: f64 = cols[4].parse().map_err(|_| bad("bad value"))?;
            let entry = report.entries.entry((model, setting, k)).or_default();
            match cols[3] {
                "map" => entry.map = value,
                "recall" => entry.recall = value,
                "novelty" => entry.novelty = value,
                "diversity" => entry.diversity = value,
                _ => return Err(bad("unknown metric")),
            }
        }
        Ok(report)
    }

    pub fn emit_curves(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Aligned text table: one block per setting, one row per model, MAP and
    /// Recall at K = 10 and 20 (or whichever of those the report holds).
    pub fn summary_table(&self) -> String {
        let ks: Vec<usize> = {
            let have = self.ks();
            let preferred: Vec<usize> = [10, 20].into_iter().filter(|k| have.contains(k)).collect();
            if preferred.is_empty() {
                have.into_iter().take(2).collect()
            } else {
                preferred
            }
        };
        let mut header = format!("{:<8}", "Model");
        for k in &ks {
            let _ = write!(header, " {:>10} {:>10}", format!("MAP@{k}"), format!("Recall@{k}"));
        }
        let mut out = String::new();
        let _ = writeln!(out, "{header}");
        for (setting, title) in [(SplitKind::Warm, "Standard Evaluation"), (SplitKind::Cold, "Cold-Start Evaluation")] {
            let models: Vec<ModelKind> = ModelKind::ALL
                .into_iter()
                .filter(|&m| ks.iter().any(|&k| self.get(m, setting, k).is_some()))
                .collect();
            if models.is_empty() {
                continue;
            }
            let _ = writeln!(out, "-- {title} --");
            for m in models {
                let mut row = format!("{:<8}", m.display_name());
                for &k in &ks {
                    match self.get(m, setting, k) {
                        Some(v) => {
                            let _ = write!(row, " {:>10.4} {:>10.4}", v.map, v.recall);
                        }
                        None => {
                            let _ = write!(row, " {:>10} {:>10}", "-", "-");
                        }
                    }
                }
                let _ = writeln!(out, "{row}");
            }
        }
        out
    }
}

/// Click counts for every catalog row, restricted to articles on the train
/// side (all others count 0), and their total.
#[derive(Debug, Clone, PartialEq)]
pub struct Popularity {
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Popularity {
    pub fn train_side(tally: &ClickTally, split: &DataSplit, catalog_rows: &FeatureMatrix) -> Popularity {
        let counts: Vec<u64> = catalog_rows
            .ids()
            .iter()
            .map(|id| {
                if split.train.articles.get(id).is_some() {
                    tally.get(id).copied().unwrap_or(0)
                } else {
                    0
                }
            })
            .collect();
        let total = counts.iter().sum();
        Popularity { counts, total }
    }
}

/// Per-query outcome: 1-based rank of the truth and the top of the ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedQuery {
    pub rank: Option<usize>,
    pub top: Vec<usize>,
}

/// Ranks, for every test triplet `(u, i, j*)`, all articles of the split's
/// train ∪ test universe except `i`, and records where `j*` lands. Article
/// indices are rows of `features`.
pub fn rank_test_queries(
    model: &FactorModel,
    split: &DataSplit,
    features: &FeatureMatrix,
    depth: usize,
) -> Result<Vec<RankedQuery>> {
    if split.test.is_empty() {
        return Err(Error::EmptyInput("test side has no triplets".into()));
    }
    let universe: Vec<usize> = split
        .article_universe()
        .iter()
        .map(|id| {
            features
                .row_of(id)
                .ok_or_else(|| Error::Input(format!("article {id} has no feature row")))
        })
        .collect::<Result<_>>()?;
    let items = model.item_vectors(features)?;
    let queries: Vec<(String, usize, usize)> = split
        .test
        .rows()
        .map(|(u, i, j, _)| {
            let row = |id: &str| features.row_of(id).expect("universe rows checked");
            (u.to_string(), row(i), row(j))
        })
        .collect();

    Ok(queries
        .par_iter()
        .map(|(user, last, truth)| {
            let u = model.user_vector(user);
            let candidates: Vec<usize> = universe.iter().copied().filter(|r| r != last).collect();
            let scores = score_rows(&u, items.last.row(*last), &items, &candidates);
            let mut order: Vec<usize> = (0..candidates.len()).collect();
            order.sort_by(|&a, &b| {
                scores[b]
                    .total_cmp(&scores[a])
                    .then(candidates[a].cmp(&candidates[b]))
            });
            let rank = order.iter().position(|&p| candidates[p] == *truth).map(|p| p + 1);
            let top = order.iter().take(depth).map(|&p| candidates[p]).collect();
            RankedQuery { rank, top }
        })
        .collect())
}

/// Metrics at each `K` for one model on one split. `features` are the inputs
/// the model was trained on; `tfidf` supplies the diversity rows. Both must
/// share the same row order.
pub fn evaluate(
    model: &FactorModel,
    split: &DataSplit,
    features: &FeatureMatrix,
    tfidf: &FeatureMatrix,
    popularity: &Popularity,
    ks: &[usize],
) -> Result<Vec<(usize, MetricValues)>> {
    if ks.contains(&0) {
        return Err(Error::Parameter("K must be >= 1".into()));
    }
    if tfidf.ids() != features.ids() {
        return Err(Error::Input("TF-IDF rows not aligned with model features".into()));
    }
    let depth = ks.iter().copied().max().unwrap_or(0);
    let ranked = rank_test_queries(model, split, features, depth)?;
    Ok(metrics_from_ranked(&ranked, tfidf, popularity, ks))
}

pub fn metrics_from_ranked(
    ranked: &[RankedQuery],
    tfidf: &FeatureMatrix,
    popularity: &Popularity,
    ks: &[usize],
) -> Vec<(usize, MetricValues)> {
    let ranks: Vec<Option<usize>> = ranked.iter().map(|q| q.rank).collect();
    let lists: Vec<Vec<usize>> = ranked.iter().map(|q| q.top.clone()).collect();
    let mut sorted: Vec<usize> = ks.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut cache = DistanceCache::new(tfidf, &lists);
    let prefixes: Vec<Vec<f64>> = lists.iter().map(|l| cache.prefix_pair_sums(l)).collect();
    sorted
        .into_iter()
        .map(|k| {
            let diversity = mean(lists.iter().zip(&prefixes).map(|(list, prefix)| {
                let n = list.len().min(k);
                if n < 2 {
                    0.0
                } else {
                    prefix[n] / pair_count(n)
                }
            }));
            (
                k,
                MetricValues {
                    map: map_at_k(&ranks, k),
                    recall: recall_at_k(&ranks, k),
                    novelty: novelty_at_k(&lists, &popularity.counts, popularity.total, k),
                    diversity,
                },
            )
        })
        .collect()
}
