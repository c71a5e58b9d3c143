//! Drive the simulator with an empirical service-time sample instead of a
//! parametric law. The sample here is drawn from a known two-point law, so
//! the closed form for that law tells us what the empirical run should give.
//!
//! Run with: `cargo run --release --example empirical_sc`

use peak_aoi::analytic::peak_aoi_window_fb;
use peak_aoi::model::EmpiricalSc;
use peak_aoi::rng::unit53;
use peak_aoi::{simulate, PolicySpec, ScDistribution, ScLaw, SystemParams};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> peak_aoi::Result<()> {
    let params = SystemParams::new(1.0, 0.2, 1.0)?;
    let dist = ScDistribution::new(2.0, 12.0, 0.3)?;

    // Pretend these came from field measurements.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let values: Vec<f64> = (0..50_000)
        .map(|_| if unit53(&mut rng) < 0.3 { 12.0 } else { 2.0 })
        .collect();
    let empirical = ScLaw::Empirical(EmpiricalSc::from_values(values)?);

    let policy = PolicySpec::WindowFb { w: 9.0, b: 2 };
    let est = simulate(&policy, &params, &empirical, 200_000, 17)?;
    let exact = peak_aoi_window_fb(&params, &dist, 9.0, 2)?;

    println!("policy: {policy}");
    println!(
        "empirical sample mean: {:.4}  (law mean {:.4})",
        empirical.mean(),
        dist.mean()
    );
    println!(
        "simulated peak age:    {:.4} +/- {:.4}",
        est.mean, est.stderr
    );
    println!("two-point closed form: {:.4}", exact);
    println!("difference:            {:.4}", (est.mean - exact).abs());
    Ok(())
}
