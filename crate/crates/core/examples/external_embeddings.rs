//! Use precomputed article embeddings instead of TF-IDF as the content
//! features, and show the error for a file that misses an article.
//!
//! ```bash
//! cargo run --release --example external_embeddings
//! ```

use nextread::eval::{evaluate, Popularity};
use nextread::features::{fit_tfidf, load_external_embeddings, transform, TfidfConfig};
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

    let embeddings = load_external_embeddings(&files.embeddings, &catalog)?;
    println!("{} embeddings of dimension {}", embeddings.len(), embeddings.dim());

    // Diversity is still measured on TF-IDF rows.
    let tfidf = transform(&fit_tfidf(&catalog, &TfidfConfig::default())?, &catalog);
    let popularity = Popularity::train_side(&log.popularity, &split, &tfidf);
    let model = fit(ModelKind::Almm, &split.train, &embeddings, &Hyperparams::default())?;
    for (k, v) in evaluate(&model, &split, &embeddings, &tfidf, &popularity, &[10, 20])? {
        println!("ALMM cold @{k}: MAP {:.4}  Recall {:.4}", v.map, v.recall);
    }

    let text = std::fs::read_to_string(&files.embeddings).expect("readable embeddings");
    let truncated: Vec<&str> = text.lines().filter(|l| !l.starts_with("N1005\t")).collect();
    let partial = dir.path().join("partial.emb");
    std::fs::write(&partial, truncated.join("\n")).expect("writable temp dir");
    match load_external_embeddings(&partial, &catalog) {
        Ok(_) => println!("unexpectedly loaded a partial file"),
        Err(e) => println!("partial file rejected: {e}"),
    }
    Ok(())
}
