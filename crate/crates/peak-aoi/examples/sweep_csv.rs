//! Run a small arrival-rate sweep over all six schemes and write the result
//! table as CSV.
//!
//! Run with: `cargo run --release --example sweep_csv`

use peak_aoi::config::Config;
use peak_aoi::sweep::{run_sweep, write_csv, SweepVar};

fn main() -> peak_aoi::Result<()> {
    let mut cfg = Config::default();
    cfg.sim.cycles = 20_000;
    cfg.sweep.lambdas = vec![0.5, 1.0, 2.0];

    let rows = run_sweep(SweepVar::Lambda, &cfg)?;

    let path = std::env::temp_dir().join("peak_aoi_lambda_sweep.csv");
    write_csv(&rows, std::fs::File::create(&path)?)?;

    println!("{} rows -> {}", rows.len(), path.display());
    for row in rows.iter().take(8) {
        println!(
            "  lambda={:<4} {:<14} sim={:.3} verdict={}",
            row.sweep_value.unwrap_or_default(),
            row.policy.scheme().name(),
            row.sim,
            row.verdict.as_str()
        );
    }
    println!("  ...");
    Ok(())
}
