//! End-to-end orchestration. Every stage reads the previous stage's
//! persisted outputs from the run directory, so stages can be rerun on their
//! own and the one-shot run is just the stages in sequence.
//!
//! Run directory layout:
//!
//! ```text
//! <output>/
//!   ingest/catalog.tsv, clicks.tsv, popularity.tsv
//!   triplets.tsv
//!   splits/{warm,cold}/train.tsv, test.tsv, manifest.json
//!   features/vectorizer.json
//!   models/<model>_<split>/manifest.json, U.mat, X.mat, Y.mat, PsiX.mat, PsiY.mat
//!   metrics.csv
//!   logs/<stage>.log
//!   run.log
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate, MetricReport, Popularity};
use crate::features::{self, FeatureKind, FeatureMatrix, Vectorizer};
use crate::ingest::{self, ArticleCatalog};
use crate::models::{self, FactorModel, ModelKind};
use crate::seed::{derive_seed, STAGE_SPLIT};
use crate::splits::{self, split_stats, DataSplit, SplitKind};
use crate::transitions::{build_tensor, build_triplets, TripletSet};

pub const STAGES: [&str; 7] = [
    "ingest", "triplets", "split", "featurize", "train", "evaluate", "report",
];

/// Paths inside a run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn catalog(&self) -> PathBuf {
        self.root.join("ingest/catalog.tsv")
    }

    pub fn clicks(&self) -> PathBuf {
        self.root.join("ingest/clicks.tsv")
    }

    pub fn popularity(&self) -> PathBuf {
        self.root.join("ingest/popularity.tsv")
    }

    pub fn triplets(&self) -> PathBuf {
        self.root.join("triplets.tsv")
    }

    pub fn split(&self, kind: SplitKind) -> PathBuf {
        self.root.join("splits").join(kind.as_str())
    }

    pub fn vectorizer(&self) -> PathBuf {
        self.root.join("features/vectorizer.json")
    }

    pub fn model(&self, model: ModelKind, split: SplitKind) -> PathBuf {
        self.root.join("models").join(format!("{model}_{split}"))
    }

    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }

    pub fn stage_log(&self, stage: &str) -> PathBuf {
        self.root.join("logs").join(format!("{stage}.log"))
    }

    pub fn run_log(&self) -> PathBuf {
        self.root.join("run.log")
    }
}

/// `key = value` lines for the run log.
#[derive(Debug, Default)]
pub struct StageLog {
    lines: String,
}

impl StageLog {
    pub fn record(&mut self, key: impl AsRef<str>, value: impl std::fmt::Display) {
        let _ = writeln!(self.lines, "{} = {}", key.as_ref(), value);
    }

    pub fn text(&self) -> &str {
        &self.lines
    }

    fn write(&self, run: &RunDir, stage: &str) -> Result<()> {
        let path = run.stage_log(stage);
        ensure_parent(&path)?;
        fs::write(&path, &self.lines).map_err(|e| Error::io(&path, e))
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(())
}

fn require(path: &Path, produced_by: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{} not found; run the `{produced_by}` stage first",
            path.display()
        )))
    }
}

/// Parses both input files, drops clicks on unknown articles, and persists
/// the catalog, click streams and popularity tally.
pub fn stage_ingest(cfg: &RunConfig) -> Result<StageLog> {
    let run = RunDir::new(&cfg.output);
    let (catalog, news_report) = ingest::parse_news(&cfg.data.news)?;
    let (log, behavior_report) = ingest::parse_behaviors(&cfg.data.behaviors)?;
    let (streams, validation) = ingest::validate_clicks(&log.streams, &catalog);

    ensure_parent(&run.catalog())?;
    catalog.save(&run.catalog())?;
    ingest::save_clicks(&streams, &run.clicks())?;
    ingest::save_tally(&log.popularity, &run.popularity())?;

    let mut out = StageLog::default();
    let relevant: [(&str, &_, &[&str]); 3] = [
        ("news", &news_report, &["rows_read", "rows_kept", "rows_skipped_malformed", "duplicates_dropped"]),
        ("behaviors", &behavior_report, &["rows_read", "rows_kept", "rows_skipped_malformed", "tokens_skipped_malformed"]),
        ("validation", &validation, &["clicks_dropped_unknown_article", "users_dropped_empty"]),
    ];
    for (prefix, report, keys) in relevant {
        for (name, value) in report.counters() {
            if keys.contains(&name) {
                out.record(format!("ingest.{prefix}.{name}"), value);
            }
        }
    }
    out.record("ingest.articles", catalog.len());
    out.record("ingest.users", streams.len());
    out.record("ingest.clicks", streams.iter().map(|s| s.len()).sum::<usize>());
    out.write(&run, "ingest")?;
    Ok(out)
}

pub fn stage_triplets(cfg: &RunConfig) -> Result<StageLog> {
    let run = RunDir::new(&cfg.output);
    require(&run.clicks(), "ingest")?;
    let streams = ingest::load_clicks(&run.clicks())?;
    let tensor = build_tensor(&streams, cfg.transitions.window_seconds)?;
    let triplets = build_triplets(&tensor)?;
    triplets.save(&run.triplets())?;

    let mut out = StageLog::default();
    out.record("triplets.window_seconds", cfg.transitions.window_seconds);
    out.record("triplets.transitions", tensor.total());
    out.record("triplets.entries", triplets.len());
    out.record("triplets.users", triplets.users.len());
    out.record("triplets.articles", triplets.articles.len());
    out.write(&run, "triplets")?;
    Ok(out)
}

pub fn split_seed(seed: u64, kind: SplitKind) -> u64 {
    derive_seed(seed, &format!("{STAGE_SPLIT}.{kind}"))
}

pub fn stage_split(cfg: &RunConfig) -> Result<StageLog> {
    let run = RunDir::new(&cfg.output);
    require(&run.triplets(), "triplets")?;
    let triplets = TripletSet::load(&run.triplets())?;
    let mut out = StageLog::default();
    for &kind in &cfg.split.kinds {
        let seed = split_seed(cfg.seed, kind);
        let split = match kind {
            SplitKind::Warm => splits::make_warm_split(&triplets, cfg.split.warm_fraction, seed)?,
            SplitKind::Cold => splits::make_cold_split(&triplets, cfg.split.cold_fraction, seed)?,
        };
        split.save(&run.split(kind))?;
        let stats = split_stats(&split);
        for (side, s) in [("train", stats.train), ("test", stats.test)] {
            out.record(format!("split.{kind}.{side}.users"), s.users);
            out.record(format!("split.{kind}.{side}.items"), s.items);
            out.record(format!("split.{kind}.{side}.entries"), s.entries);
        }
        out.record(format!("split.{kind}.holdout_articles"), split.holdout_articles.len());
    }
    out.write(&run, "split")?;
    Ok(out)
}

pub fn stage_featurize(cfg: &RunConfig) -> Result<StageLog> {
    let run = RunDir::new(&cfg.output);
    require(&run.catalog(), "ingest")?;
    let (catalog, _) = ingest::parse_news(&run.catalog())?;
    let vectorizer = features::fit_tfidf(&catalog, &cfg.features.tfidf())?;
    ensure_parent(&run.vectorizer())?;
    vectorizer.save(&run.vectorizer())?;

    let mut out = StageLog::default();
    out.record("features.tfidf.vocabulary", vectorizer.dim());
    let tfidf = features::transform(&vectorizer, &catalog);
    let empty = (0..tfidf.len()).filter(|&r| tfidf.row_norm(r) == 0.0).count();
    out.record("features.tfidf.empty_rows", empty);
    if cfg.features.kind == FeatureKind::External {
        let ext = load_model_features(cfg, &catalog, &tfidf)?;
        out.record("features.external.dim", ext.dim());
    }
    out.write(&run, "featurize")?;
    Ok(out)
}

/// The catalog plus its TF-IDF rows and the rows the models consume.
pub struct FeatureInputs {
    pub catalog: ArticleCatalog,
    pub tfidf: FeatureMatrix,
    pub model_features: FeatureMatrix,
}

fn load_model_features(cfg: &RunConfig, catalog: &ArticleCatalog, tfidf: &FeatureMatrix) -> Result<FeatureMatrix> {
    match cfg.features.kind {
        FeatureKind::Tfidf => Ok(tfidf.clone()),
        FeatureKind::External => {
            let path = cfg.data.embeddings.as_ref().ok_or_else(|| {
                Error::Config("features.kind = \"external\" needs data.embeddings".into())
            })?;
            features::load_external_embeddings(path, catalog)
        }
    }
}

pub fn load_feature_inputs(cfg: &RunConfig) -> Result<FeatureInputs> {
    let run = RunDir::new(&cfg.output);
    require(&run.catalog(), "ingest")?;
    require(&run.vectorizer(), "featurize")?;
    let (catalog, _) = ingest::parse_news(&run.catalog())?;
    let vectorizer = Vectorizer::load(&run.vectorizer())?;
    let tfidf = features::transform(&vectorizer, &catalog);
    let model_features = load_model_features(cfg, &catalog, &tfidf)?;
    Ok(FeatureInputs {
        catalog,
        tfidf,
        model_features,
    })
}

pub fn stage_train(cfg: &RunConfig) -> Result<StageLog> {
    let run = RunDir::new(&cfg.output);
    let inputs = load_feature_inputs(cfg)?;
    let mut hyper = cfg.hyper.clone();
    hyper.seed = cfg.seed;
    let mut out = StageLog::default();
    for &split_kind in &cfg.split.kinds {
        require(&run.split(split_kind), "split")?;
        let split = DataSplit::load(&run.split(split_kind))?;
        for &model_kind in &cfg.model.kinds {
            let model = models::fit(model_kind, &split.train, &inputs.model_features, &hyper)?;
            model.save(&run.model(model_kind, split_kind))?;
            out.record(
                format!("train.{model_kind}.{split_kind}.users"),
                model.users.len(),
            );
            out.record(
                format!("train.{model_kind}.{split_kind}.articles"),
                model.articles.len(),
            );
        }
    }
    out.write(&run, "train")?;
    Ok(out)
}

pub fn stage_evaluate(cfg: &RunConfig) -> Result<(MetricReport, StageLog)> {
    let run = RunDir::new(&cfg.output);
    let inputs = load_feature_inputs(cfg)?;
    require(&run.popularity(), "ingest")?;
    let tally = ingest::load_tally(&run.popularity())?;
    let mut report = MetricReport::new();
    let mut out = StageLog::default();
    for &split_kind in &cfg.split.kinds {
        let split = DataSplit::load(&run.split(split_kind))?;
        let popularity = Popularity::train_side(&tally, &split, &inputs.tfidf);
        let candidates = split.article_universe().len().saturating_sub(1).max(1);
        for &k in &cfg.eval.ks {
            let random = (k as f64 / candidates as f64).min(1.0);
            out.record(format!("evaluate.{split_kind}.random_recall@{k}"), random);
        }
        for &model_kind in &cfg.model.kinds {
            let dir = run.model(model_kind, split_kind);
            require(&dir, "train")?;
            let model = FactorModel::load(&dir)?;
            let curve = evaluate(
                &model,
                &split,
                &inputs.model_features,
                &inputs.tfidf,
                &popularity,
                &cfg.eval.ks,
            )?;
            for (k, v) in &curve {
                out.record(format!("evaluate.{model_kind}.{split_kind}.recall@{k}"), v.recall);
                out.record(format!("evaluate.{model_kind}.{split_kind}.map@{k}"), v.map);
            }
            report.extend(model_kind, split_kind, &curve);
        }
    }
    // Relative cold-start standing of ALMM against both baselines, for inspection.
    for k in [10usize, 20] {
        let recall = |m| report.get(m, SplitKind::Cold, k).map(|v| v.recall);
        if let (Some(a), Some(f), Some(o)) = (
            recall(ModelKind::Almm),
            recall(ModelKind::Forbes),
            recall(ModelKind::Oord),
        ) {
            out.record(format!("evaluate.cold.almm_beats_baselines@{k}"), a > f && a > o);
        }
    }
    report.emit_curves(&run.metrics())?;
    out.write(&run, "evaluate")?;
    Ok((report, out))
}

pub fn stage_report(cfg: &RunConfig) -> Result<String> {
    let run = RunDir::new(&cfg.output);
    require(&run.metrics(), "evaluate")?;
    let path = run.metrics();
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(MetricReport::from_csv(&text)?.summary_table())
}

/// Runs a single named stage; returns its log text (or the summary table for
/// `report`).
pub fn run_stage(cfg: &RunConfig, stage: &str) -> Result<String> {
    cfg.validate()?;
    Ok(match stage {
        "ingest" => stage_ingest(cfg)?.text().to_string(),
        "triplets" => stage_triplets(cfg)?.text().to_string(),
        "split" => stage_split(cfg)?.text().to_string(),
        "featurize" => stage_featurize(cfg)?.text().to_string(),
        "train" => stage_train(cfg)?.text().to_string(),
        "evaluate" => stage_evaluate(cfg)?.1.text().to_string(),
        "report" => stage_report(cfg)?,
        other => return Err(Error::Config(format!("unknown stage {other:?}"))),
    })
}

/// All stages in order. Writes `run.log` with every stage's counters and
/// returns the metric report.
pub fn run_pipeline(cfg: &RunConfig) -> Result<MetricReport> {
    cfg.validate()?;
    let run = RunDir::new(&cfg.output);
    fs::create_dir_all(run.root()).map_err(|e| Error::io(run.root(), e))?;
    let mut log = String::new();
    let _ = writeln!(log, "seed = {}", cfg.seed);
    for stage in ["ingest", "triplets", "split", "featurize", "train"] {
        log.push_str(&run_stage(cfg, stage)?);
    }
    let (report, eval_log) = stage_evaluate(cfg)?;
    log.push_str(eval_log.text());
    let path = run.run_log();
    fs::write(&path, log).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}
