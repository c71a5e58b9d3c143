//! Evaluate the four closed-form schemes across an erasure-probability grid
//! and print the average peak age each one achieves.
//!
//! Run with: `cargo run --release --example closed_forms`

use peak_aoi::analytic::{
    peak_aoi_prob_fb, peak_aoi_prob_nofb, peak_aoi_window_fb, peak_aoi_window_nofb,
};
use peak_aoi::{ScDistribution, SystemParams};

fn main() -> peak_aoi::Result<()> {
    let dist = ScDistribution::from_theta(10.0)?;
    let (w, b, ptx) = (8.0, 3, 0.6);

    println!("service law: {dist:?}  (mean {:.2})", dist.mean());
    println!("knobs: W = {w}, B = {b}, pTx = {ptx}\n");
    println!(
        "{:>5}  {:>12}  {:>12}  {:>12}  {:>12}",
        "pe", "window-fb", "prob-fb", "window-nofb", "prob-nofb"
    );
    for pe10 in 0..=8 {
        let pe = pe10 as f64 / 10.0;
        let params = SystemParams::new(1.0, pe, 1.0)?;
        println!(
            "{:>5.2}  {:>12.4}  {:>12.4}  {:>12.4}  {:>12.4}",
            pe,
            peak_aoi_window_fb(&params, &dist, w, b)?,
            peak_aoi_prob_fb(&params, &dist, w, ptx)?,
            peak_aoi_window_nofb(&params, &dist, w, b)?,
            peak_aoi_prob_nofb(&params, &dist, w, ptx)?,
        );
    }
    Ok(())
}
