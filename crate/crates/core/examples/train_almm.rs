//! Train ALMM on a cold split and recommend next articles for one test click,
//! including articles the model never saw during training.
//!
//! ```bash
//! cargo run --release --example train_almm
//! ```

use nextread::features::{fit_tfidf, transform, TfidfConfig};
use nextread::fixture::{generate_fixture, FixtureSpec};
use nextread::ingest::{parse_behaviors, parse_news, validate_clicks};
use nextread::models::{fit, Hyperparams, ModelKind};
use nextread::splits::make_cold_split;
use nextread::transitions::{build_tensor, build_triplets};

fn main() -> nextread::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let files = generate_fixture(&FixtureSpec::default(), dir.path())?;
    let (catalog, _) = parse_news(&files.news)?;
    let (log, _) = parse_behaviors(&files.behaviors)?;
    let (streams, _) = validate_clicks(&log.streams, &catalog);
    let triplets = build_triplets(&build_tensor(&streams, 1800)?)?;
    let split = make_cold_split(&triplets, 0.1, 7)?;
    let features = transform(&fit_tfidf(&catalog, &TfidfConfig::default())?, &catalog);

    let hyper = Hyperparams::default();
    let model = fit(ModelKind::Almm, &split.train, &features, &hyper)?;
    println!("trained {} with d = {} on {} triplets", model.kind, hyper.latent_dim, split.train.len());

    let (user, last, truth, _) = split.test.rows().next().expect("non-empty test side");
    let universe = split.article_universe();
    let candidates: Vec<&str> = universe.iter().map(String::as_str).filter(|c| *c != last).collect();
    let ranked = model.predict(user, last, &candidates, &features)?;
    let title = |id: &str| catalog.get(id).map_or(String::new(), |a| format!("[{}] {}", a.category, a.title));
    println!("\n{user} just read {}", title(last));
    for (pos, (id, score)) in ranked.iter().take(5).enumerate() {
        let cold = if split.holdout_articles.contains(id) { " (cold)" } else { "" };
        println!("  {}. {score:+.3} {}{cold}", pos + 1, title(id));
    }
    let rank = ranked.iter().position(|(id, _)| id == truth).map_or(0, |p| p + 1);
    println!("actual next article ranked {rank} of {}", candidates.len());
    Ok(())
}
