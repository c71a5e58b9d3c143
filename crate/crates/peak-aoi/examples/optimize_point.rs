//! Tune every closed-form scheme at one parameter point and compare the
//! optimized peak ages.
//!
//! Run with: `cargo run --release --example optimize_point`

use peak_aoi::optimizer::{best_prob, best_window, default_w_hi};
use peak_aoi::{ScDistribution, ScLaw, SystemParams};

fn main() -> peak_aoi::Result<()> {
    let params = SystemParams::new(1.0, 0.2, 1.0)?;
    let dist = ScDistribution::from_theta(10.0)?;
    let sc: ScLaw = dist.clone().into();
    let w_range = (0.0, default_w_hi(&params, &sc));

    println!(
        "lambda = {}, pe = {}, D = {}; searching W in [{}, {:.1}]\n",
        params.lambda, params.pe, params.d, w_range.0, w_range.1
    );

    let mut results = Vec::new();
    for feedback in [true, false] {
        results.push(best_window(&params, &dist, feedback, w_range, 12, 1e-6)?);
        results.push(best_prob(&params, &dist, feedback, w_range, 24, 1e-6)?);
    }
    results.sort_by(|a, b| a.value.total_cmp(&b.value));

    println!("{:>34}  {:>10}  {:>6}", "best policy", "peak age", "evals");
    for r in &results {
        println!(
            "{:>34}  {:>10.4}  {:>6}",
            r.best.to_string(),
            r.value,
            r.evaluations
        );
    }
    Ok(())
}
