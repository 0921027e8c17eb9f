//! Run every stage from a TOML config and print the summary table. All stage
//! outputs land under the configured output directory.
//!
//! ```bash
//! cargo run --release --example full_pipeline
//! ```

use nextread::config::RunConfig;
use nextread::fixture::{generate_fixture, FixtureSpec};
use nextread::pipeline::{run_pipeline, RunDir};

fn main() -> nextread::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    generate_fixture(&FixtureSpec::default(), &dir.path().join("data"))?;

    let toml = r#"
seed = 42
output = "out"

[data]
news = "data/news.tsv"
behaviors = "data/behaviors.tsv"

[eval]
ks = [5, 10, 20]
"#;
    let cfg = RunConfig::from_toml_str(toml, dir.path())?;
    run_pipeline(&cfg)?;

    let run = RunDir::new(&cfg.output);
    print!("{}", std::fs::read_to_string(run.run_log()).expect("run.log written"));
    println!();
    print!("{}", nextread::pipeline::stage_report(&cfg)?);
    let rows = std::fs::read_to_string(run.metrics()).expect("metrics.csv written").lines().count() - 1;
    println!("\nmetrics.csv: {rows} (model, setting, K, metric) rows");
    Ok(())
}
