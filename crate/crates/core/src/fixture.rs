//! Synthetic MIND-format logs for desk-scale experiments.
//!
//! Articles belong to themed categories whose titles and abstracts draw mostly
//! from a category vocabulary. Users read in sessions; within a session the
//! next click stays in the previous click's category with probability
//! `content_signal` and is uniform over all articles otherwise. Sessions are
//! separated by gaps of several hours, so only within-session pairs pass the
//! thirty-minute transition window.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ingest::format_mind_time;
use crate::seed::{stage_rng, STAGE_FIXTURE};

pub const EMBEDDING_DIM: usize = 16;

// 2019-11-11 00:00:00 UTC
const START_EPOCH: i64 = 1_573_430_400;

const THEMES: &[(&str, &[&str])] = &[
    ("sports", &["game", "season", "coach", "team", "playoff", "score", "league", "quarterback", "injury", "victory", "stadium", "draft"]),
    ("finance", &["market", "stocks", "investors", "earnings", "bank", "rates", "economy", "shares", "trade", "inflation", "dollar", "profit"]),
    ("weather", &["storm", "snow", "forecast", "temperatures", "rain", "winds", "flooding", "cold", "hurricane", "warning", "degrees", "front"]),
    ("health", &["doctors", "study", "patients", "disease", "vaccine", "hospital", "diet", "cancer", "sleep", "heart", "treatment", "symptoms"]),
    ("politics", &["senate", "election", "president", "vote", "congress", "campaign", "governor", "impeachment", "policy", "democrats", "republicans", "law"]),
    ("food", &["recipe", "dinner", "chicken", "cheese", "restaurant", "thanksgiving", "baking", "pasta", "chef", "dessert", "soup", "menu"]),
    ("travel", &["flight", "airport", "hotel", "beach", "vacation", "cruise", "island", "passengers", "destination", "resort", "tourists", "road"]),
    ("tech", &["apple", "google", "phone", "software", "users", "data", "app", "privacy", "iphone", "chip", "startup", "robot"]),
];

const GENERIC: &[&str] = &[
    "new", "year", "people", "week", "first", "best", "report", "time", "says", "day", "world",
    "big", "home", "life", "news", "top", "city", "state", "things", "way", "family", "know",
    "photos", "video", "latest", "local", "national", "night", "season", "story",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub n_users: usize,
    pub n_articles: usize,
    /// Probability that a within-session click stays in the previous category.
    pub content_signal: f64,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            n_users: 50,
            n_articles: 200,
            content_signal: 0.8,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureFiles {
    pub news: PathBuf,
    pub behaviors: PathBuf,
    /// Dense per-article vectors of dimension [`EMBEDDING_DIM`].
    pub embeddings: PathBuf,
}

struct Writer {
    path: PathBuf,
    inner: BufWriter<File>,
}

impl Writer {
    fn create(path: PathBuf) -> Result<Self> {
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Writer {
            inner: BufWriter::new(file),
            path,
        })
    }

    fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.inner, "{text}").map_err(|e| Error::io(&self.path, e))
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.path)
    }
}

fn words(rng: &mut impl Rng, theme: &[&str], themed: usize, generic: usize) -> String {
    let mut out: Vec<&str> = (0..themed).map(|_| *theme.choose(rng).unwrap()).collect();
    for _ in 0..generic {
        let pos = rng.random_range(0..=out.len());
        out.insert(pos, GENERIC.choose(rng).unwrap());
    }
    let mut text = out.join(" ");
    if let Some(first) = text.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    text
}

/// Writes `news.tsv`, `behaviors.tsv` and `embeddings.emb` into `out_dir`.
pub fn generate_fixture(spec: &FixtureSpec, out_dir: &Path) -> Result<FixtureFiles> {
    if spec.n_users < 2 || spec.n_articles < 2 {
        return Err(Error::Parameter("fixture needs at least 2 users and 2 articles".into()));
    }
    if !(0.0..=1.0).contains(&spec.content_signal) {
        return Err(Error::Parameter(format!(
            "content_signal must lie in [0, 1], got {}",
            spec.content_signal
        )));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rng = stage_rng(spec.seed, STAGE_FIXTURE);
    let n_themes = THEMES.len();

    // articles
    let category: Vec<usize> = (0..spec.n_articles).map(|a| a % n_themes).collect();
    let id = |a: usize| format!("N{}", 1000 + a);
    let mut by_category: Vec<Vec<usize>> = vec![Vec::new(); n_themes];
    let mut news = Writer::create(out_dir.join("news.tsv"))?;
    for a in 0..spec.n_articles {
        let (name, vocab) = THEMES[category[a]];
        by_category[category[a]].push(a);
        let sub = format!("{name}{}", vocab.choose(&mut rng).unwrap());
        let title = words(&mut rng, vocab, 4, 1);
        let abstract_text = words(&mut rng, vocab, 8, 4);
        news.line(&format!(
            "{}\t{name}\t{sub}\t{title}\t{abstract_text}\thttps://example.invalid/{}\t[]\t[]",
            id(a),
            id(a)
        ))?;
    }
    let news = news.finish()?;

    // embeddings: category centroid plus noise
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let noise = Normal::new(0.0, 0.5).expect("valid normal");
    let centroids: Vec<Vec<f64>> = (0..n_themes)
        .map(|_| (0..EMBEDDING_DIM).map(|_| unit.sample(&mut rng)).collect())
        .collect();
    let mut emb = Writer::create(out_dir.join("embeddings.emb"))?;
    emb.line(&format!("#dim {EMBEDDING_DIM}"))?;
    for a in 0..spec.n_articles {
        let values: Vec<String> = centroids[category[a]]
            .iter()
            .map(|c| format!("{:.6}", c + noise.sample(&mut rng)))
            .collect();
        emb.line(&format!("{}\t{}", id(a), values.join(" ")))?;
    }
    let embeddings = emb.finish()?;

    // behaviors
    let mut behaviors = Writer::create(out_dir.join("behaviors.tsv"))?;
    let mut impression_id = 1;
    for u in 0..spec.n_users {
        let user = format!("U{}", 100 + u);
        let history: Vec<String> = (0..rng.random_range(0..=5))
            .map(|_| id(rng.random_range(0..spec.n_articles)))
            .collect();
        let history = history.join(" ");
        let mut t = START_EPOCH + rng.random_range(0..6 * 3600);
        for _ in 0..rng.random_range(3..=6) {
            let length = rng.random_range(3..=8);
            let mut clicks = Vec::with_capacity(length);
            let mut current = rng.random_range(0..spec.n_articles);
            clicks.push(current);
            while clicks.len() < length {
                let pool = &by_category[category[current]];
                let next = if rng.random_bool(spec.content_signal) && pool.len() > 1 {
                    loop {
                        let c = *pool.choose(&mut rng).unwrap();
                        if c != current {
                            break c;
                        }
                    }
                } else {
                    loop {
                        let c = rng.random_range(0..spec.n_articles);
                        if c != current {
                            break c;
                        }
                    }
                };
                clicks.push(next);
                current = next;
            }
            let mut k = 0;
            while k < clicks.len() {
                let take = rng.random_range(1..=2).min(clicks.len() - k);
                let mut tokens: Vec<String> =
                    clicks[k..k + take].iter().map(|&a| format!("{}-1", id(a))).collect();
                for _ in 0..rng.random_range(2..=4) {
                    let pos = rng.random_range(0..=tokens.len());
                    let shown = id(rng.random_range(0..spec.n_articles));
                    tokens.insert(pos, format!("{shown}-0"));
                }
                behaviors.line(&format!(
                    "{impression_id}\t{user}\t{}\t{history}\t{}",
                    format_mind_time(t),
                    tokens.join(" ")
                ))?;
                impression_id += 1;
                k += take;
                t += rng.random_range(60..=600);
            }
            t += rng.random_range(2 * 3600..=8 * 3600);
        }
    }
    let behaviors = behaviors.finish()?;
    Ok(FixtureFiles {
        news,
        behaviors,
        embeddings,
    })
}
