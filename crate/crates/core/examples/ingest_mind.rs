//! Parse a MIND-format news/behaviors pair and report what validation kept.
//!
//! ```bash
//! cargo run --example ingest_mind
//! ```

use nextread::fixture::{generate_fixture, FixtureSpec};
use nextread::ingest::{parse_behaviors, parse_news, validate_clicks};

fn main() -> nextread::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let files = generate_fixture(&FixtureSpec::default(), dir.path())?;

    let (catalog, news_report) = parse_news(&files.news)?;
    let (log, behaviors_report) = parse_behaviors(&files.behaviors)?;
    let (streams, validation) = validate_clicks(&log.streams, &catalog);

    println!("articles: {}", catalog.len());
    println!("news rows read/kept: {}/{}", news_report.rows_read, news_report.rows_kept);
    println!(
        "behaviors rows read/kept: {}/{}",
        behaviors_report.rows_read, behaviors_report.rows_kept
    );
    println!("clicks dropped (unknown article): {}", validation.clicks_dropped_unknown_article);
    println!("users kept: {}", streams.len());

    let first = &streams[0];
    println!("\nfirst clicks of {}:", first.user);
    for event in first.events.iter().take(5) {
        let title = catalog.get(&event.news).map_or("?", |a| a.title.as_str());
        println!("  t={} {} [{}]", event.timestamp, event.news, title);
    }
    Ok(())
}
