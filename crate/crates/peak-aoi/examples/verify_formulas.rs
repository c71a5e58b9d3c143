//! Cross-check every closed form against the Monte-Carlo engine on a small
//! parameter grid and report agreement verdicts.
//!
//! Run with: `cargo run --release --example verify_formulas`

use peak_aoi::analytic::{
    peak_aoi_prob_fb, peak_aoi_prob_nofb, peak_aoi_window_fb, peak_aoi_window_nofb,
};
use peak_aoi::sweep::agree;
use peak_aoi::{simulate, PolicySpec, ScDistribution, ScLaw, SystemParams};

fn main() -> peak_aoi::Result<()> {
    let dist = ScDistribution::from_theta(10.0)?;
    let sc: ScLaw = dist.clone().into();
    let (w, b, ptx) = (8.0, 3, 0.6);
    let n = 200_000;

    println!(
        "{:>12}  {:>6}  {:>5}  {:>10}  {:>10}  {:>8}  verdict",
        "scheme", "lambda", "pe", "analytic", "sim", "stderr"
    );
    let mut failures = 0;
    for lambda in [0.5, 1.0, 2.0] {
        for pe in [0.2, 0.5] {
            let params = SystemParams::new(lambda, pe, 1.0)?;
            let cases: [(PolicySpec, f64); 4] = [
                (
                    PolicySpec::WindowFb { w, b },
                    peak_aoi_window_fb(&params, &dist, w, b)?,
                ),
                (
                    PolicySpec::ProbFb { w, p_tx: ptx },
                    peak_aoi_prob_fb(&params, &dist, w, ptx)?,
                ),
                (
                    PolicySpec::WindowNoFb { w, b },
                    peak_aoi_window_nofb(&params, &dist, w, b)?,
                ),
                (
                    PolicySpec::ProbNoFb { w, p_tx: ptx },
                    peak_aoi_prob_nofb(&params, &dist, w, ptx)?,
                ),
            ];
            for (policy, analytic) in cases {
                let est = simulate(&policy, &params, &sc, n, 9)?;
                let ok = agree(analytic, est.mean, est.stderr);
                if !ok {
                    failures += 1;
                }
                println!(
                    "{:>12}  {:>6.1}  {:>5.2}  {:>10.4}  {:>10.4}  {:>8.4}  {}",
                    policy.scheme().name(),
                    lambda,
                    pe,
                    analytic,
                    est.mean,
                    est.stderr,
                    if ok { "ok" } else { "MISMATCH" }
                );
            }
        }
    }
    println!("\n{failures} mismatches");
    Ok(())
}
