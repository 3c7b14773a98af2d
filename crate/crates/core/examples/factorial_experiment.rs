//! Full desk-scale factorial: 6 methods x 3 RRMs over 4 synthetic scenes.
//!
//! ```text
//! cargo run --release --example factorial_experiment [output-dir]
//! ```

use std::time::Instant;

use gapfill::harness::{run_all, ExperimentConfig};

pub fn run(cfg: &ExperimentConfig) -> gapfill::Result<()> {
    let start = Instant::now();
    let out = run_all(cfg)?;
    println!(
        "{} records in {:.1}s, results in {}",
        out.table.records.len(),
        start.elapsed().as_secs_f64(),
        out.results_path.display()
    );
    print!("{}", out.summary.by_method.to_csv_string());
    print!("{}", out.summary.by_rrm.to_csv_string());
    Ok(())
}

fn main() {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "gapfill-out".into());
    let cfg = ExperimentConfig {
        output_dir: dir.into(),
        ..ExperimentConfig::default()
    };
    if let Err(e) = run(&cfg) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
