//! Warm-start and cold-start train/test partitions of a [`TripletSet`].

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transitions::TripletSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Warm,
    Cold,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Warm => "warm",
            SplitKind::Cold => "cold",
        }
    }
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub kind: SplitKind,
    pub seed: u64,
    /// Holdout fraction for cold splits, test fraction for warm splits.
    pub fraction: f64,
    pub train: TripletSet,
    pub test: TripletSet,
    /// Empty for warm splits.
    pub holdout_articles: BTreeSet<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    kind: SplitKind,
    seed: u64,
    fraction: f64,
    train_entries: usize,
    test_entries: usize,
    holdout_articles: Vec<String>,
}

impl DataSplit {
    /// Writes `train.tsv`, `test.tsv` and `manifest.json` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.train.save(&dir.join("train.tsv"))?;
        self.test.save(&dir.join("test.tsv"))?;
        let manifest = Manifest {
            kind: self.kind,
            seed: self.seed,
            fraction: self.fraction,
            train_entries: self.train.len(),
            test_entries: self.test.len(),
            holdout_articles: self.holdout_articles.iter().cloned().collect(),
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<DataSplit> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        let train = TripletSet::load(&dir.join("train.tsv"))?;
        let test = TripletSet::load(&dir.join("test.tsv"))?;
        if train.len() != manifest.train_entries || test.len() != manifest.test_entries {
            return Err(Error::format(
                path.display().to_string(),
                "entry counts disagree with triplet files",
            ));
        }
        Ok(DataSplit {
            kind: manifest.kind,
            seed: manifest.seed,
            fraction: manifest.fraction,
            train,
            test,
            holdout_articles: manifest.holdout_articles.into_iter().collect(),
        })
    }

    /// Articles seen on either side, in train-then-test first-appearance order.
    pub fn article_universe(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.train
            .articles
            .ids()
            .iter()
            .chain(self.test.articles.ids())
            .filter(|id| seen.insert(id.as_str()))
            .cloned()
            .collect()
    }
}

fn check_fraction(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must lie in (0, 1), got {value}")))
    }
}

fn partition(set: &TripletSet, to_test: &[bool]) -> Result<(TripletSet, TripletSet)> {
    let mut train = TripletSet::default();
    let mut test = TripletSet::default();
    for ((u, i, j, c), &is_test) in set.rows().zip(to_test) {
        if is_test {
            test.push(u, i, j, c)?;
        } else {
            train.push(u, i, j, c)?;
        }
    }
    Ok((train, test))
}

fn ensure_both_sides(train: &TripletSet, test: &TripletSet) -> Result<()> {
    if test.is_empty() {
        return Err(Error::DegenerateSplit("test side is empty".into()));
    }
    if train.is_empty() {
        return Err(Error::DegenerateSplit("train side is empty".into()));
    }
    Ok(())
}

/// Holds out `⌈ρ·|articles|⌉` uniformly sampled articles; every triplet that
/// touches one goes to test.
pub fn make_cold_split(triplets: &TripletSet, holdout_fraction: f64, seed: u64) -> Result<DataSplit> {
    check_fraction("holdout fraction", holdout_fraction)?;
    if triplets.is_empty() {
        return Err(Error::EmptyInput("cannot split an empty triplet set".into()));
    }
    let n = triplets.articles.len();
    let k = ((holdout_fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = vec![false; n];
    for a in index::sample(&mut rng, n, k) {
        held[a] = true;
    }
    let to_test: Vec<bool> = triplets
        .triplets
        .iter()
        .map(|t| held[t.last] || held[t.next])
        .collect();
    let (train, test) = partition(triplets, &to_test)?;
    ensure_both_sides(&train, &test)?;
    let holdout_articles = held
        .iter()
        .enumerate()
        .filter(|(_, &h)| h)
        .map(|(a, _)| triplets.articles.id(a).to_string())
        .collect();
    Ok(DataSplit {
        kind: SplitKind::Cold,
        seed,
        fraction: holdout_fraction,
        train,
        test,
        holdout_articles,
    })
}

/// Samples `round(f·n)` triplets (at least one) as test candidates, then moves
/// back to train any candidate with an article the train side lacks.
pub fn make_warm_split(triplets: &TripletSet, test_fraction: f64, seed: u64) -> Result<DataSplit> {
    check_fraction("test fraction", test_fraction)?;
    if triplets.is_empty() {
        return Err(Error::EmptyInput("cannot split an empty triplet set".into()));
    }
    let n = triplets.len();
    let k = ((test_fraction * n as f64).round() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates = index::sample(&mut rng, n, k).into_vec();
    candidates.sort_unstable();

    let mut to_test = vec![false; n];
    for &c in &candidates {
        to_test[c] = true;
    }
    let mut in_train = vec![false; triplets.articles.len()];
    for (t, &is_test) in triplets.triplets.iter().zip(&to_test) {
        if !is_test {
            in_train[t.last] = true;
            in_train[t.next] = true;
        }
    }
    for &c in &candidates {
        let t = &triplets.triplets[c];
        if !(in_train[t.last] && in_train[t.next]) {
            to_test[c] = false;
            in_train[t.last] = true;
            in_train[t.next] = true;
        }
    }
    let (train, test) = partition(triplets, &to_test)?;
    ensure_both_sides(&train, &test)?;
    Ok(DataSplit {
        kind: SplitKind::Warm,
        seed,
        fraction: test_fraction,
        train,
        test,
        holdout_articles: BTreeSet::new(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SideStats {
    pub users: usize,
    pub items: usize,
    pub entries: usize,
}

impl SideStats {
    pub fn of(set: &TripletSet) -> SideStats {
        let mut users = HashSet::new();
        let mut items = HashSet::new();
        for t in &set.triplets {
            users.insert(t.user);
            items.insert(t.last);
            items.insert(t.next);
        }
        SideStats {
            users: users.len(),
            items: items.len(),
            entries: set.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SplitStats {
    pub train: SideStats,
    pub test: SideStats,
}

pub fn split_stats(split: &DataSplit) -> SplitStats {
    SplitStats {
        train: SideStats::of(&split.train),
        test: SideStats::of(&split.test),
    }
}
