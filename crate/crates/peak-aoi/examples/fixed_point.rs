//! Tune the feedback age-threshold scheme on the simulator and check the
//! result against its fixed-point identity: at the optimal threshold the
//! achieved peak age equals `D/(1-pe) + W + D + 1/((1-pe) lambda)`.
//!
//! Run with: `cargo run --release --example fixed_point`

use peak_aoi::analytic::threshold_fixed_point_value;
use peak_aoi::optimizer::{best_threshold_sim, default_w_hi, fixed_point_residual};
use peak_aoi::{ScDistribution, ScLaw, SystemParams};

fn main() -> peak_aoi::Result<()> {
    let params = SystemParams::new(1.0, 0.2, 1.0)?;
    let sc: ScLaw = ScDistribution::from_theta(10.0)?.into();
    let w_range = (0.0, default_w_hi(&params, &sc));

    let n_cycles = 200_000;
    let opt = best_threshold_sim(&params, &sc, true, w_range, n_cycles, 3, 1, 0.05)?;

    let line = threshold_fixed_point_value(&params, opt.best.w());
    let residual = fixed_point_residual(&params, &opt)?;

    println!("tuned policy:      {}", opt.best);
    println!(
        "simulated value:   {:.4} +/- {:.4}  ({} cycles per probe)",
        opt.value, opt.stderr, n_cycles
    );
    println!("fixed-point line:  {:.4}", line);
    println!("residual:          {:.4}", residual);
    println!("probes:            {}", opt.evaluations);
    Ok(())
}
