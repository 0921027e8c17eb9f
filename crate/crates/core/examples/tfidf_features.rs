//! Fit a TF-IDF vocabulary over titles and abstracts and compare articles.
//!
//! ```bash
//! cargo run --example tfidf_features
//! ```

use nextread::features::{fit_tfidf, transform, TfidfConfig};
use nextread::fixture::{generate_fixture, FixtureSpec};
use nextread::ingest::parse_news;

fn main() -> nextread::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let files = generate_fixture(&FixtureSpec::default(), dir.path())?;
    let (catalog, _) = parse_news(&files.news)?;

    let vectorizer = fit_tfidf(&catalog, &TfidfConfig::default())?;
    let features = transform(&vectorizer, &catalog);
    println!("vocabulary: {} terms, {} articles", vectorizer.dim(), features.len());

    let article = catalog.iter().next().expect("non-empty catalog");
    println!("\n{} [{}] {}", article.id, article.category, article.title);
    let mut weights = Vec::new();
    features.for_each_entry(0, |col, w| weights.push((w, col)));
    weights.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (w, col) in weights.iter().take(5) {
        println!("  {:<12} {w:.3}", vectorizer.terms[*col]);
    }

    // Nearest neighbours by cosine distance.
    let mut nearest: Vec<(f64, usize)> = (1..features.len()).map(|r| (features.cosine_distance(0, r), r)).collect();
    nearest.sort_by(|a, b| a.0.total_cmp(&b.0));
    println!("\nclosest articles:");
    for (d, r) in nearest.iter().take(3) {
        let other = catalog.get(&features.ids()[*r]).expect("aligned rows");
        println!("  {:.3}  [{}] {}", d, other.category, other.title);
    }
    Ok(())
}
