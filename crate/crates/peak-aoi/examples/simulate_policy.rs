//! Simulate one policy, print the peak-age estimate, and show the first few
//! delivery cycles in detail.
//!
//! Run with: `cargo run --release --example simulate_policy`

use peak_aoi::simulator::simulate_trace;
use peak_aoi::{PolicySpec, ScDistribution, ScLaw, SystemParams};

fn main() -> peak_aoi::Result<()> {
    let params = SystemParams::new(1.0, 0.2, 1.0)?;
    let sc: ScLaw = ScDistribution::from_theta(10.0)?.into();
    let policy = PolicySpec::WindowFb { w: 8.0, b: 3 };

    let (est, cycles) = simulate_trace(&policy, &params, &sc, 100_000, 42)?;

    println!("policy: {policy}");
    println!(
        "peak age: {:.4} +/- {:.4}  ({} cycles, seed {})",
        est.mean, est.stderr, est.n_cycles, est.seed
    );
    println!(
        "components: E[Y] = {:.4}, E[S] = {:.4}\n",
        est.mean_y, est.mean_s
    );

    println!(
        "{:>6}  {:>9}  {:>9}  {:>5}  {:>5}  {:>7}",
        "cycle", "Y", "S", "gens", "txs", "t_ext"
    );
    for c in cycles.iter().take(8) {
        println!(
            "{:>6}  {:>9.4}  {:>9.4}  {:>5}  {:>5}  {:>7.4}",
            c.cycle_index, c.y, c.s, c.n_generations, c.n_transmissions, c.t_ext
        );
    }
    Ok(())
}
