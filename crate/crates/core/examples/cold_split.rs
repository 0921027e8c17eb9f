//! Hold out whole articles (cold start) or random triplets (warm start).
//!
//! ```bash
//! cargo run --example cold_split
//! ```

use nextread::fixture::{generate_fixture, FixtureSpec};
use nextread::ingest::{parse_behaviors, parse_news, validate_clicks};
use nextread::splits::{make_cold_split, make_warm_split, split_stats};
use nextread::transitions::{build_tensor, build_triplets};

fn main() -> nextread::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let files = generate_fixture(&FixtureSpec::default(), dir.path())?;
    let (catalog, _) = parse_news(&files.news)?;
    let (log, _) = parse_behaviors(&files.behaviors)?;
    let (streams, _) = validate_clicks(&log.streams, &catalog);
    let triplets = build_triplets(&build_tensor(&streams, 1800)?)?;

    for split in [make_cold_split(&triplets, 0.1, 7)?, make_warm_split(&triplets, 0.2, 7)?] {
        let stats = split_stats(&split);
        println!("{} split (fraction {}):", split.kind, split.fraction);
        for (side, s) in [("train", stats.train), ("test", stats.test)] {
            println!("  {side:<5} users {:>3}  articles {:>3}  triplets {:>4}", s.users, s.items, s.entries);
        }
        if !split.holdout_articles.is_empty() {
            let unseen = split
                .test
                .rows()
                .filter(|(_, i, j, _)| split.holdout_articles.contains(*i) || split.holdout_articles.contains(*j))
                .count();
            println!(
                "  {} held-out articles; {unseen}/{} test triplets touch one",
                split.holdout_articles.len(),
                split.test.len()
            );
        }
    }
    Ok(())
}
