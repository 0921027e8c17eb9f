//! User-centric transition counts and confidence-weighted training triplets.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{ClickEvent, ClickStream};

/// Thirty minutes.
pub const DEFAULT_WINDOW_SECONDS: i64 = 1800;

/// Confidence added per observed occurrence of an `(i, j)` transition.
pub const CONFIDENCE_STEP: f64 = 0.1;
pub const BASE_CONFIDENCE: f64 = 1.0;

/// Sparse `(user, last, next) → count` map. Never holds `last == next` or a
/// zero count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionTensor {
    entries: BTreeMap<(String, String, String), u64>,
    window_seconds: i64,
}

impl TransitionTensor {
    pub fn new(window_seconds: i64) -> Self {
        TransitionTensor {
            entries: BTreeMap::new(),
            window_seconds,
        }
    }

    pub fn window_seconds(&self) -> i64 {
        self.window_seconds
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, user: &str, last: &str, next: &str) -> u64 {
        self.entries
            .get(&(user.to_string(), last.to_string(), next.to_string()))
            .copied()
            .unwrap_or(0)
    }

    /// Sum of all counts.
    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = ((&str, &str, &str), u64)> {
        self.entries
            .iter()
            .map(|((u, i, j), &c)| ((u.as_str(), i.as_str(), j.as_str()), c))
    }

    /// Adds one observation; self-transitions are ignored.
    pub fn record(&mut self, user: &str, last: &str, next: &str) {
        if last == next {
            return;
        }
        *self
            .entries
            .entry((user.to_string(), last.to_string(), next.to_string()))
            .or_default() += 1;
    }

    /// Adds another tensor's counts into this one.
    pub fn merge(&mut self, other: TransitionTensor) {
        for (key, count) in other.entries {
            *self.entries.entry(key).or_default() += count;
        }
    }

    /// `Σ_u P^u_{i,j}` for every `(i, j)`.
    pub fn global_counts(&self) -> HashMap<(&str, &str), u64> {
        let mut counts = HashMap::new();
        for ((_, i, j), &c) in &self.entries {
            *counts.entry((i.as_str(), j.as_str())).or_default() += c;
        }
        counts
    }
}

/// Counts consecutive click pairs `(a, b)` of each user with
/// `0 ≤ Δt ≤ window_seconds` and `a ≠ b`.
pub fn build_tensor(streams: &[ClickStream], window_seconds: i64) -> Result<TransitionTensor> {
    if window_seconds <= 0 {
        return Err(Error::Parameter(format!(
            "window_seconds must be positive, got {window_seconds}"
        )));
    }
    let mut tensor = TransitionTensor::new(window_seconds);
    for stream in streams {
        let mut own = TransitionTensor::new(window_seconds);
        for pair in stream.events.windows(2) {
            let (prev, next) = (&pair[0], &pair[1]);
            if next.timestamp - prev.timestamp <= window_seconds {
                own.record(&stream.user, &prev.news, &next.news);
            }
        }
        tensor.merge(own);
    }
    Ok(tensor)
}

/// Splits a sorted stream into maximal runs whose consecutive gaps are at most
/// `window_seconds`, discarding runs of a single click.
pub fn transition_sessions(stream: &ClickStream, window_seconds: i64) -> Vec<&[ClickEvent]> {
    let events = &stream.events;
    let mut sessions = Vec::new();
    let mut start = 0;
    for k in 1..=events.len() {
        let boundary =
            k == events.len() || events[k].timestamp - events[k - 1].timestamp > window_seconds;
        if boundary {
            if k - start >= 2 {
                sessions.push(&events[start..k]);
            }
            start = k;
        }
    }
    sessions
}

/// Bijection between string ids and dense indices `0..n`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdIndex {
    ids: Vec<String>,
    positions: HashMap<String, usize>,
}

impl IdIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_ids<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut index = IdIndex::new();
        for id in ids {
            let id = id.into();
            if index.positions.contains_key(&id) {
                return Err(Error::Input(format!("duplicate id {id} in index")));
            }
            index.intern(&id);
        }
        Ok(index)
    }

    /// Returns the index of `id`, assigning the next free one on first sight.
    pub fn intern(&mut self, id: &str) -> usize {
        if let Some(&p) = self.positions.get(id) {
            return p;
        }
        let p = self.ids.len();
        self.ids.push(id.to_string());
        self.positions.insert(id.to_string(), p);
        p
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub user: usize,
    pub last: usize,
    pub next: usize,
    pub confidence: f64,
}

/// Training triplets with their own dense user and article indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripletSet {
    pub triplets: Vec<Triplet>,
    pub users: IdIndex,
    pub articles: IdIndex,
}

impl TripletSet {
    /// Builds a set from id-level rows, assigning indices in first-appearance
    /// order (user, then last, then next within each row).
    pub fn from_rows<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a str, f64)>,
    {
        let mut set = TripletSet::default();
        for (u, i, j, c) in rows {
            set.push(u, i, j, c)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, user: &str, last: &str, next: &str, confidence: f64) -> Result<()> {
        if last == next {
            return Err(Error::Input(format!("self-transition {last} -> {next}")));
        }
        if !(confidence >= BASE_CONFIDENCE) || !confidence.is_finite() {
            return Err(Error::Input(format!(
                "confidence {confidence} below base {BASE_CONFIDENCE}"
            )));
        }
        let triplet = Triplet {
            user: self.users.intern(user),
            last: self.articles.intern(last),
            next: self.articles.intern(next),
            confidence,
        };
        self.triplets.push(triplet);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &str, &str, f64)> {
        self.triplets.iter().map(|t| {
            (
                self.users.id(t.user),
                self.articles.id(t.last),
                self.articles.id(t.next),
                t.confidence,
            )
        })
    }

    /// Writes `user<TAB>last<TAB>next<TAB>confidence` rows.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (u, i, j, c) in self.rows() {
            writeln!(w, "{u}\t{i}\t{j}\t{c}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut set = TripletSet::default();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let context = || format!("{}:{}", path.display(), n + 1);
            if cols.len() != 4 {
                return Err(Error::format(context(), "expected 4 tab-separated columns"));
            }
            let c: f64 = cols[3]
                .parse()
                .map_err(|_| Error::format(context(), "bad confidence"))?;
            set.push(cols[0], cols[1], cols[2], c)
                .map_err(|e| Error::format(context(), e.to_string()))?;
        }
        Ok(set)
    }
}

/// One triplet per distinct tensor entry, weighted by
/// `1.0 + 0.1 × Σ_u P^u_{i,j}`.
pub fn build_triplets(tensor: &TransitionTensor) -> Result<TripletSet> {
    if tensor.is_empty() {
        return Err(Error::EmptyInput("transition tensor has no entries".into()));
    }
    let global = tensor.global_counts();
    let mut set = TripletSet::default();
    for ((u, i, j), _) in tensor.entries() {
        let k = global[&(i, j)];
        set.push(u, i, j, BASE_CONFIDENCE + CONFIDENCE_STEP * k as f64)?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(user: &str, clicks: &[(&str, i64)]) -> ClickStream {
        let events = clicks
            .iter()
            .map(|&(news, timestamp)| ClickEvent {
                user: user.into(),
                news: news.into(),
                timestamp,
                within_impression_rank: 0,
            })
            .collect();
        ClickStream::from_events(user, events).unwrap()
    }

    #[test]
    fn pair_within_window_counts() {
        let t = build_tensor(&[stream("u", &[("A", 1), ("B", 601)])], 1800).unwrap();
        assert_eq!(t.get("u", "A", "B"), 1);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn pair_past_window_is_dropped() {
        let t = build_tensor(&[stream("u", &[("A", 1), ("B", 1802)])], 1800).unwrap();
        assert!(t.is_empty());
        let edge = build_tensor(&[stream("u", &[("A", 1), ("B", 1801)])], 1800).unwrap();
        assert_eq!(edge.get("u", "A", "B"), 1);
    }

    #[test]
    fn self_transitions_are_dropped() {
        let t = build_tensor(&[stream("u", &[("A", 1), ("A", 61), ("B", 121)])], 1800).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get("u", "A", "B"), 1);
    }

    #[test]
    fn non_positive_window_rejected() {
        assert!(matches!(build_tensor(&[], 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn single_count_gives_confidence_1_1() {
        let t = build_tensor(&[stream("u", &[("A", 1), ("B", 2)])], 1800).unwrap();
        let set = build_triplets(&t).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.triplets[0].confidence, 1.0 + 0.1);
    }

    #[test]
    fn confidence_uses_cross_user_count() {
        let t = build_tensor(
            &[
                stream("u1", &[("A", 1), ("B", 2), ("A", 3), ("B", 4)]),
                stream("u2", &[("A", 1), ("B", 2)]),
            ],
            1800,
        )
        .unwrap();
        assert_eq!(t.get("u1", "A", "B"), 2);
        let set = build_triplets(&t).unwrap();
        // (u1,A,B), (u1,B,A), (u2,A,B)
        assert_eq!(set.len(), 3);
        for (u, i, j, c) in set.rows() {
            match (u, i, j) {
                (_, "A", "B") => assert_eq!(c, 1.0 + 0.1 * 3.0),
                ("u1", "B", "A") => assert_eq!(c, 1.0 + 0.1),
                other => panic!("unexpected triplet {other:?}"),
            }
        }
    }

    #[test]
    fn empty_tensor_is_an_error() {
        assert!(matches!(
            build_triplets(&TransitionTensor::new(1800)),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn indices_follow_first_appearance() {
        let set = TripletSet::from_rows([("u2", "C", "A", 1.1), ("u1", "A", "B", 1.1)]).unwrap();
        assert_eq!(set.users.ids(), &["u2", "u1"]);
        assert_eq!(set.articles.ids(), &["C", "A", "B"]);
    }

    #[test]
    fn sessions_split_on_gaps() {
        let s = stream("u", &[("A", 1), ("B", 101), ("C", 5001)]);
        let sessions = transition_sessions(&s, 1800);
        assert_eq!(sessions.len(), 1);
        assert_eq!(sessions[0].len(), 2);

        assert!(transition_sessions(&stream("u", &[("A", 1)]), 1800).is_empty());

        let edge = stream("u", &[("A", 1), ("B", 1801)]);
        assert_eq!(transition_sessions(&edge, 1800)[0].len(), 2);
    }
}
