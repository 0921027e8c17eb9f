//! Turn click streams into confidence-weighted (user, last, next) triplets.
//!
//! ```bash
//! cargo run --example build_triplets
//! ```

use nextread::fixture::{generate_fixture, FixtureSpec};
use nextread::ingest::{parse_behaviors, parse_news, validate_clicks};
use nextread::transitions::{build_tensor, build_triplets, transition_sessions};

fn main() -> nextread::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let files = generate_fixture(&FixtureSpec::default(), dir.path())?;
    let (catalog, _) = parse_news(&files.news)?;
    let (log, _) = parse_behaviors(&files.behaviors)?;
    let (streams, _) = validate_clicks(&log.streams, &catalog);

    // Consecutive clicks at most 30 minutes apart count as a transition.
    let window = 1800;
    let sessions: usize = streams.iter().map(|s| transition_sessions(s, window).len()).sum();
    let tensor = build_tensor(&streams, window)?;
    let triplets = build_triplets(&tensor)?;
    println!("sessions: {sessions}");
    println!("transitions: {} over {} distinct triplets", tensor.total(), triplets.len());

    let mut rows: Vec<_> = triplets.rows().collect();
    rows.sort_by(|a, b| b.3.total_cmp(&a.3).then((a.0, a.1, a.2).cmp(&(b.0, b.1, b.2))));
    println!("\nmost confident triplets:");
    for (user, last, next, confidence) in rows.iter().take(8) {
        println!("  {user:>6}  {last} -> {next}  c = {confidence:.1}");
    }
    Ok(())
}
