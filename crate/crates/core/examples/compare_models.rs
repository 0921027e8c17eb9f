//! Train ALMM and the Forbes and Oord baselines on the same cold split and
//! compare MAP, Recall, Novelty and Diversity at several cutoffs.
//!
//! ```bash
//! cargo run --release --example compare_models
//! ```

use nextread::eval::{evaluate, Popularity};
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
    let tfidf = transform(&fit_tfidf(&catalog, &TfidfConfig::default())?, &catalog);
    let popularity = Popularity::train_side(&log.popularity, &split, &tfidf);

    let ks = [5, 10, 20];
    let candidates = split.article_universe().len() - 1;
    println!("{} cold test triplets, {candidates} candidates per query", split.test.len());
    println!("\n{:<8} {:>4} {:>8} {:>8} {:>8} {:>9}", "model", "K", "MAP", "Recall", "Novelty", "Diversity");
    for kind in ModelKind::ALL {
        let model = fit(kind, &split.train, &tfidf, &Hyperparams::default())?;
        for (k, v) in evaluate(&model, &split, &tfidf, &tfidf, &popularity, &ks)? {
            println!(
                "{:<8} {k:>4} {:>8.4} {:>8.4} {:>8.3} {:>9.3}",
                kind.display_name(),
                v.map,
                v.recall,
                v.novelty,
                v.diversity
            );
        }
    }
    for k in ks {
        println!("random Recall@{k}: {:.4}", k as f64 / candidates as f64);
    }
    Ok(())
}
