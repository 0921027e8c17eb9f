//! Parsing and validation of MIND-format `news.tsv` / `behaviors.tsv` logs.
//!
//! Malformed rows never abort a parse: they are skipped and tallied in a
//! [`ValidationReport`]. URLs and entity columns are discarded at parse time.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDateTime;

use crate::error::{Error, Result};

const MAX_MESSAGES: usize = 50;
const MIND_TIME_FORMAT: &str = "%m/%d/%Y %I:%M:%S %p";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Article {
    pub id: String,
    pub category: String,
    pub subcategory: String,
    pub title: String,
    pub abstract_text: String,
}

impl Article {
    /// Title and abstract joined by a space, the text used for featurization.
    pub fn document(&self) -> String {
        if self.abstract_text.is_empty() {
            self.title.clone()
        } else {
            format!("{} {}", self.title, self.abstract_text)
        }
    }
}

/// Deduplicated articles in first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArticleCatalog {
    articles: Vec<Article>,
    positions: HashMap<String, usize>,
}

impl ArticleCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an article unless its id is empty or already present.
    pub fn insert(&mut self, article: Article) -> bool {
        if article.id.is_empty() || self.positions.contains_key(&article.id) {
            return false;
        }
        self.positions.insert(article.id.clone(), self.articles.len());
        self.articles.push(article);
        true
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Article> {
        self.positions.get(id).map(|&p| &self.articles[p])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.positions.contains_key(id)
    }

    /// Position of `id` in insertion order.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Article> {
        self.articles.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.articles.iter().map(|a| a.id.as_str())
    }

    /// Writes the catalog back out in the five leading `news.tsv` columns.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for a in &self.articles {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                a.id,
                clean_field(&a.category),
                clean_field(&a.subcategory),
                clean_field(&a.title),
                clean_field(&a.abstract_text)
            )
            .map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn clean_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClickEvent {
    pub user: String,
    pub news: String,
    pub timestamp: i64,
    pub within_impression_rank: u32,
}

impl ClickEvent {
    fn order_key(&self) -> (i64, u32) {
        (self.timestamp, self.within_impression_rank)
    }
}

/// One user's clicks, strictly ascending by `(timestamp, within_impression_rank)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClickStream {
    pub user: String,
    pub events: Vec<ClickEvent>,
}

impl ClickStream {
    /// Builds a stream from events of a single user, sorting them and
    /// renumbering ranks so that clicks sharing a timestamp (possibly from
    /// different impression rows) are totally ordered in input order.
    pub fn from_events(user: impl Into<String>, mut events: Vec<ClickEvent>) -> Result<Self> {
        let user = user.into();
        if let Some(e) = events.iter().find(|e| e.user != user) {
            return Err(Error::Input(format!(
                "event for user {} placed in stream of {}",
                e.user, user
            )));
        }
        events.sort_by_key(|e| e.timestamp);
        let mut prev_ts = None;
        let mut rank = 0;
        for e in &mut events {
            if prev_ts == Some(e.timestamp) {
                rank += 1;
            } else {
                rank = 0;
                prev_ts = Some(e.timestamp);
            }
            e.within_impression_rank = rank;
        }
        Ok(ClickStream { user, events })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn is_strictly_sorted(&self) -> bool {
        self.events
            .windows(2)
            .all(|w| w[0].order_key() < w[1].order_key())
    }
}

/// Per-article click counts from impression clicks plus reading histories.
pub type ClickTally = BTreeMap<String, u64>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BehaviorLog {
    /// Streams ordered by user id.
    pub streams: Vec<ClickStream>,
    pub popularity: ClickTally,
}

impl BehaviorLog {
    pub fn total_clicks(&self) -> usize {
        self.streams.iter().map(ClickStream::len).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub rows_read: u64,
    pub rows_kept: u64,
    pub rows_skipped_malformed: u64,
    pub duplicates_dropped: u64,
    pub tokens_skipped_malformed: u64,
    pub clicks_dropped_unknown_article: u64,
    pub users_dropped_empty: u64,
    pub messages: Vec<String>,
}

impl ValidationReport {
    fn note(&mut self, msg: String) {
        if self.messages.len() < MAX_MESSAGES {
            self.messages.push(msg);
        }
    }

    pub fn counters(&self) -> [(&'static str, u64); 7] {
        [
            ("rows_read", self.rows_read),
            ("rows_kept", self.rows_kept),
            ("rows_skipped_malformed", self.rows_skipped_malformed),
            ("duplicates_dropped", self.duplicates_dropped),
            ("tokens_skipped_malformed", self.tokens_skipped_malformed),
            (
                "clicks_dropped_unknown_article",
                self.clicks_dropped_unknown_article,
            ),
            ("users_dropped_empty", self.users_dropped_empty),
        ]
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn lines_of<'a, R: BufRead + 'a>(
    reader: R,
    context: &'a Path,
) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    reader.lines().enumerate().map(move |(n, line)| {
        line.map(|mut l| {
            if l.ends_with('\r') {
                l.pop();
            }
            (n + 1, l)
        })
        .map_err(|e| Error::io(context, e))
    })
}

pub fn parse_news(path: &Path) -> Result<(ArticleCatalog, ValidationReport)> {
    parse_news_from(open(path)?, path)
}

/// Parses `news.tsv` rows: id, category, subcategory, title, abstract, then
/// optional url and entity columns which are ignored.
pub fn parse_news_from<R: BufRead>(
    reader: R,
    context: &Path,
) -> Result<(ArticleCatalog, ValidationReport)> {
    let mut catalog = ArticleCatalog::new();
    let mut report = ValidationReport::default();
    for line in lines_of(reader, context) {
        let (lineno, line) = line?;
        report.rows_read += 1;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 5 {
            report.rows_skipped_malformed += 1;
            report.note(format!("news line {lineno}: {} columns, need 5", cols.len()));
            continue;
        }
        let id = cols[0].trim();
        if id.is_empty() {
            report.rows_skipped_malformed += 1;
            report.note(format!("news line {lineno}: empty news id"));
            continue;
        }
        let article = Article {
            id: id.to_string(),
            category: cols[1].to_string(),
            subcategory: cols[2].to_string(),
            title: cols[3].to_string(),
            abstract_text: cols[4].to_string(),
        };
        if catalog.insert(article) {
            report.rows_kept += 1;
        } else {
            report.duplicates_dropped += 1;
            report.note(format!("news line {lineno}: duplicate id {id}"));
        }
    }
    Ok((catalog, report))
}

/// Parses MIND's `M/D/YYYY H:MM:SS AM/PM` timestamps as UTC epoch seconds.
pub fn parse_mind_time(s: &str) -> Option<i64> {
    NaiveDateTime::parse_from_str(s.trim(), MIND_TIME_FORMAT)
        .ok()
        .map(|t| t.and_utc().timestamp())
}

pub fn format_mind_time(epoch: i64) -> String {
    let t = chrono::DateTime::from_timestamp(epoch, 0)
        .expect("timestamp in range")
        .naive_utc();
    // MIND writes month, day and hour without zero padding.
    t.format("%-m/%-d/%Y %-I:%M:%S %p").to_string()
}

pub fn parse_behaviors(path: &Path) -> Result<(BehaviorLog, ValidationReport)> {
    parse_behaviors_from(open(path)?, path)
}

/// Parses `behaviors.tsv` rows: impression id, user id, time, history,
/// impressions. Every `<id>-1` impression token becomes a [`ClickEvent`]
/// stamped with the row's time; history ids only feed the popularity tally,
/// counted once per (user, article).
pub fn parse_behaviors_from<R: BufRead>(
    reader: R,
    context: &Path,
) -> Result<(BehaviorLog, ValidationReport)> {
    let mut report = ValidationReport::default();
    let mut per_user: BTreeMap<String, Vec<ClickEvent>> = BTreeMap::new();
    let mut seen_history: BTreeSet<(String, String)> = BTreeSet::new();
    let mut popularity = ClickTally::new();

    for line in lines_of(reader, context) {
        let (lineno, line) = line?;
        report.rows_read += 1;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 5 {
            report.rows_skipped_malformed += 1;
            report.note(format!(
                "behaviors line {lineno}: {} columns, need 5",
                cols.len()
            ));
            continue;
        }
        let user = cols[1].trim();
        if user.is_empty() {
            report.rows_skipped_malformed += 1;
            report.note(format!("behaviors line {lineno}: empty user id"));
            continue;
        }
        let timestamp = match parse_mind_time(cols[2]) {
            Some(t) if t > 0 => t,
            _ => {
                report.rows_skipped_malformed += 1;
                report.note(format!(
                    "behaviors line {lineno}: unparseable time {:?}",
                    cols[2]
                ));
                continue;
            }
        };
        report.rows_kept += 1;

        for id in cols[3].split_whitespace() {
            if seen_history.insert((user.to_string(), id.to_string())) {
                *popularity.entry(id.to_string()).or_default() += 1;
            }
        }

        let events = per_user.entry(user.to_string()).or_default();
        let mut rank = 0u32;
        for token in cols[4].split_whitespace() {
            let (id, label) = match token.rsplit_once('-') {
                Some((id, label)) if !id.is_empty() && (label == "0" || label == "1") => {
                    (id, label)
                }
                _ => {
                    report.tokens_skipped_malformed += 1;
                    report.note(format!(
                        "behaviors line {lineno}: bad impression token {token:?}"
                    ));
                    continue;
                }
            };
            if label == "1" {
                events.push(ClickEvent {
                    user: user.to_string(),
                    news: id.to_string(),
                    timestamp,
                    within_impression_rank: rank,
                });
                *popularity.entry(id.to_string()).or_default() += 1;
                rank += 1;
            }
        }
    }

    let streams = per_user
        .into_iter()
        .filter(|(_, events)| !events.is_empty())
        .map(|(user, events)| ClickStream::from_events(user, events))
        .collect::<Result<Vec<_>>>()?;
    Ok((BehaviorLog { streams, popularity }, report))
}

/// Drops clicks on articles missing from the catalog, then users left with no
/// clicks.
pub fn validate_clicks(
    streams: &[ClickStream],
    catalog: &ArticleCatalog,
) -> (Vec<ClickStream>, ValidationReport) {
    let mut report = ValidationReport::default();
    let mut out = Vec::with_capacity(streams.len());
    for stream in streams {
        let before = stream.events.len();
        let events: Vec<ClickEvent> = stream
            .events
            .iter()
            .filter(|e| catalog.contains(&e.news))
            .cloned()
            .collect();
        let dropped = (before - events.len()) as u64;
        if dropped > 0 {
            report.clicks_dropped_unknown_article += dropped;
            report.note(format!(
                "user {}: dropped {dropped} click(s) on unknown articles",
                stream.user
            ));
        }
        if events.is_empty() {
            report.users_dropped_empty += 1;
            continue;
        }
        out.push(ClickStream {
            user: stream.user.clone(),
            events,
        });
    }
    (out, report)
}

/// Persists click streams as `user<TAB>news<TAB>timestamp<TAB>rank` rows.
pub fn save_clicks(streams: &[ClickStream], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in streams {
        for e in &s.events {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                e.user, e.news, e.timestamp, e.within_impression_rank
            )
            .map_err(|err| Error::io(path, err))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_clicks(path: &Path) -> Result<Vec<ClickStream>> {
    let mut per_user: BTreeMap<String, Vec<ClickEvent>> = BTreeMap::new();
    for line in lines_of(open(path)?, path) {
        let (lineno, line) = line?;
        let cols: Vec<&str> = line.split('\t').collect();
        let bad = || Error::format(format!("{}:{lineno}", path.display()), "bad click row");
        if cols.len() != 4 {
            return Err(bad());
        }
        let event = ClickEvent {
            user: cols[0].to_string(),
            news: cols[1].to_string(),
            timestamp: cols[2].parse().map_err(|_| bad())?,
            within_impression_rank: cols[3].parse().map_err(|_| bad())?,
        };
        per_user.entry(event.user.clone()).or_default().push(event);
    }
    per_user
        .into_iter()
        .map(|(user, events)| ClickStream::from_events(user, events))
        .collect()
}

pub fn save_tally(tally: &ClickTally, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (id, n) in tally {
        writeln!(w, "{id}\t{n}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_tally(path: &Path) -> Result<ClickTally> {
    let mut tally = ClickTally::new();
    for line in lines_of(open(path)?, path) {
        let (lineno, line) = line?;
        let (id, n) = line
            .split_once('\t')
            .and_then(|(id, n)| n.parse::<u64>().ok().map(|n| (id, n)))
            .ok_or_else(|| {
                Error::format(format!("{}:{lineno}", path.display()), "bad tally row")
            })?;
        tally.insert(id.to_string(), n);
    }
    Ok(tally)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn news(text: &str) -> (ArticleCatalog, ValidationReport) {
        parse_news_from(text.as_bytes(), Path::new("mem")).unwrap()
    }

    fn behaviors(text: &str) -> (BehaviorLog, ValidationReport) {
        parse_behaviors_from(text.as_bytes(), Path::new("mem")).unwrap()
    }

    #[test]
    fn duplicate_ids_first_wins() {
        let (cat, rep) = news(
            "N1\tnews\tus\tFirst\tabs\thttp://x\t[]\t[]\n\
             N2\tsports\tnfl\tSecond\t\n\
             N1\tnews\tus\tReplacement\tabs2\n",
        );
        assert_eq!(cat.len(), 2);
        assert_eq!(rep.duplicates_dropped, 1);
        assert_eq!(cat.get("N1").unwrap().title, "First");
        assert_eq!(cat.get("N2").unwrap().abstract_text, "");
        assert_eq!(rep.rows_read, rep.rows_kept + rep.rows_skipped_malformed + rep.duplicates_dropped);
    }

    #[test]
    fn empty_id_and_short_rows_are_skipped() {
        let (cat, rep) = news("\tnews\tus\tNo id\tabs\nN3\tonly\tthree\n");
        assert!(cat.is_empty());
        assert_eq!(rep.rows_skipped_malformed, 2);
    }

    #[test]
    fn mind_time_roundtrip() {
        let t = parse_mind_time("11/15/2019 8:55:22 AM").unwrap();
        assert_eq!(t, 1573808122);
        assert_eq!(format_mind_time(t), "11/15/2019 8:55:22 AM");
        assert_eq!(parse_mind_time("11/15/2019 12:05:00 PM").unwrap() - parse_mind_time("11/15/2019 12:05:00 AM").unwrap(), 43200);
        assert!(parse_mind_time("yesterday").is_none());
    }

    #[test]
    fn clicked_tokens_become_ranked_events() {
        let (log, rep) = behaviors("1\tU1\t11/15/2019 8:55:22 AM\t\tN1-1 N2-0 N3-1\n");
        assert_eq!(rep.rows_kept, 1);
        let events = &log.streams[0].events;
        assert_eq!(events.len(), 2);
        assert_eq!((events[0].news.as_str(), events[0].within_impression_rank), ("N1", 0));
        assert_eq!((events[1].news.as_str(), events[1].within_impression_rank), ("N3", 1));
        assert_eq!(events[0].timestamp, events[1].timestamp);
    }

    #[test]
    fn streams_sorted_by_time() {
        let (log, _) = behaviors(
            "1\tU1\t11/15/2019 9:00:00 AM\t\tN1-1\n\
             2\tU1\t11/15/2019 8:00:00 AM\t\tN2-1\n",
        );
        let s = &log.streams[0];
        assert_eq!(s.events[0].news, "N2");
        assert!(s.is_strictly_sorted());
    }

    #[test]
    fn same_timestamp_rows_are_totally_ordered() {
        let (log, _) = behaviors(
            "1\tU1\t11/15/2019 9:00:00 AM\t\tN1-1 N2-1\n\
             2\tU1\t11/15/2019 9:00:00 AM\t\tN3-1\n",
        );
        let s = &log.streams[0];
        let order: Vec<_> = s.events.iter().map(|e| (e.news.as_str(), e.within_impression_rank)).collect();
        assert_eq!(order, vec![("N1", 0), ("N2", 1), ("N3", 2)]);
        assert!(s.is_strictly_sorted());
    }

    #[test]
    fn bad_time_and_tokens_are_counted() {
        let (log, rep) = behaviors(
            "1\tU1\tnot a time\t\tN1-1\n\
             2\tU2\t11/15/2019 9:00:00 AM\tN7 N8\tN1-1 N2 N3-x N4-0\n",
        );
        assert_eq!(rep.rows_skipped_malformed, 1);
        assert_eq!(rep.tokens_skipped_malformed, 2);
        assert_eq!(log.streams.len(), 1);
        assert_eq!(log.popularity.get("N7"), Some(&1));
        assert_eq!(log.popularity.get("N1"), Some(&1));
        assert_eq!(log.popularity.get("N4"), None);
    }

    #[test]
    fn history_counted_once_per_user() {
        let (log, _) = behaviors(
            "1\tU1\t11/15/2019 9:00:00 AM\tN7\tN1-1\n\
             2\tU1\t11/15/2019 9:10:00 AM\tN7\tN2-1\n\
             3\tU2\t11/15/2019 9:10:00 AM\tN7\tN2-0\n",
        );
        assert_eq!(log.popularity["N7"], 2);
    }

    #[test]
    fn validation_drops_unknown_articles() {
        let (cat, _) = news("N1\tc\ts\tt\ta\n");
        let (log, _) = behaviors(
            "1\tU1\t11/15/2019 9:00:00 AM\t\tN1-1 NX-1\n\
             2\tU2\t11/15/2019 9:00:00 AM\t\tNY-1\n",
        );
        let (kept, rep) = validate_clicks(&log.streams, &cat);
        assert_eq!(rep.clicks_dropped_unknown_article, 2);
        assert_eq!(rep.users_dropped_empty, 1);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].events.len(), 1);

        let (again, rep2) = validate_clicks(&kept, &cat);
        assert_eq!(again, kept);
        assert_eq!(rep2.clicks_dropped_unknown_article, 0);
    }
}
