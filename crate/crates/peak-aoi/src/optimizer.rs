//! Parameter search: smallest average peak AoI per scheme.
//!
//! The window and coin-flip schemes are searched on their closed forms. The
//! threshold schemes have no closed form, so their objective is the
//! simulator run with common random numbers: every candidate `W` reuses the
//! same seed, which makes the noisy estimate a deterministic, mostly smooth
//! function of `W` and lets golden-section refinement work on it.
//!
//! The scalar searcher never trusts unimodality alone: a coarse grid scan
//! brackets the minimum first, golden section then refines inside the
//! winning cell, and the best point seen anywhere wins. Ties are broken
//! toward the smallest `W`, then the smallest `B` or `pTx`, so results are
//! independent of evaluation order.

use std::collections::HashMap;

use crate::analytic::{
    peak_aoi_prob_fb, peak_aoi_prob_nofb, peak_aoi_window_fb, peak_aoi_window_nofb,
    threshold_fixed_point_value,
};
use crate::error::{Error, Result};
use crate::model::{PolicySpec, ScDistribution, ScLaw, SystemParams};
use crate::simulator::simulate_parallel_budget;

/// Grid points of the bracketing scan in [`minimize_scalar`].
pub const DEFAULT_GRID: usize = 64;

/// Coarser bracketing grid for simulated objectives, where every probe costs
/// a full Monte-Carlo run.
pub const SIM_GRID: usize = 32;

/// Golden-section W tolerance used for analytic objectives.
pub const DEFAULT_W_TOL: f64 = 1e-6;

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const MAX_GOLDEN_ITERS: u32 = 200;

/// Outcome of a one-dimensional minimization.
#[derive(Clone, Debug)]
pub struct ScalarMin {
    pub x: f64,
    pub value: f64,
    pub evaluations: u64,
    /// Every probed `(x, f(x))`, in evaluation order.
    pub trace: Vec<(f64, f64)>,
}

/// Outcome of a per-scheme search.
#[derive(Clone, Debug)]
pub struct OptResult {
    pub best: PolicySpec,
    pub value: f64,
    /// Standard error of `value` for simulated objectives, 0 for analytic.
    pub stderr: f64,
    pub evaluations: u64,
    /// Probed candidates: every `W` probe for scalar searches, the per-cell
    /// inner optimum for nested ones.
    pub trace: Vec<(PolicySpec, f64)>,
}

struct Track<F> {
    f: F,
    evaluations: u64,
    trace: Vec<(f64, f64)>,
    best_x: f64,
    best_v: f64,
}

impl<F: FnMut(f64) -> f64> Track<F> {
    fn new(f: F) -> Self {
        Self {
            f,
            evaluations: 0,
            trace: Vec::new(),
            best_x: f64::NAN,
            best_v: f64::INFINITY,
        }
    }

    fn eval(&mut self, x: f64) -> f64 {
        let mut v = (self.f)(x);
        if v.is_nan() {
            v = f64::INFINITY;
        }
        self.evaluations += 1;
        self.trace.push((x, v));
        if v < self.best_v || (v == self.best_v && x < self.best_x) || self.best_x.is_nan() {
            self.best_x = x;
            self.best_v = v;
        }
        v
    }
}

/// Minimizes `f` on `[lo, hi]` with the default bracketing grid.
pub fn minimize_scalar<F: FnMut(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<ScalarMin> {
    minimize_scalar_with_grid(f, lo, hi, tol, DEFAULT_GRID)
}

/// Minimizes `f` on `[lo, hi]`: an `n_grid`-point scan brackets the best
/// cell, golden section refines inside it to width `tol`, and the best point
/// probed anywhere is returned. `f` may return `+inf` (or NaN, treated the
/// same) on infeasible regions.
pub fn minimize_scalar_with_grid<F: FnMut(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    n_grid: usize,
) -> Result<ScalarMin> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidParam(format!(
            "search range must be finite with lo < hi, got [{lo}, {hi}]"
        )));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParam(format!("tol must be > 0, got {tol}")));
    }
    if n_grid < 2 {
        return Err(Error::InvalidParam(format!(
            "bracketing grid needs >= 2 points, got {n_grid}"
        )));
    }

    let mut t = Track::new(f);
    let step = (hi - lo) / (n_grid - 1) as f64;
    let mut best_i = 0usize;
    let mut best_v = f64::INFINITY;
    for i in 0..n_grid {
        let x = if i + 1 == n_grid {
            hi
        } else {
            lo + i as f64 * step
        };
        let v = t.eval(x);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    if !best_v.is_finite() {
        return Err(Error::NoFiniteValue);
    }

    // Bracket around the best grid cell, then golden section inside it.
    let mut a = lo + best_i.saturating_sub(1) as f64 * step;
    let mut b = (lo + (best_i + 1) as f64 * step).min(hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = t.eval(x1);
    let mut f2 = t.eval(x2);
    let mut iters = 0;
    while b - a > tol && iters < MAX_GOLDEN_ITERS {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = t.eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = t.eval(x2);
        }
        iters += 1;
    }

    Ok(ScalarMin {
        x: t.best_x,
        value: t.best_v,
        evaluations: t.evaluations,
        trace: t.trace,
    })
}

/// Default upper end of the `W` search range: past the largest service time
/// plus a generous recharge-and-airtime margin the gate passes with
/// probability `> 1 - 1e-8` and every objective is flat or rising.
pub fn default_w_hi(params: &SystemParams, sc: &ScLaw) -> f64 {
    sc.max_support() + 20.0 / params.lambda + 10.0 * params.d
}

/// `(value, W, secondary)` lexicographic order for winner selection.
fn better(candidate: (f64, f64, f64), incumbent: (f64, f64, f64)) -> bool {
    for (c, i) in [
        (candidate.0, incumbent.0),
        (candidate.1, incumbent.1),
        (candidate.2, incumbent.2),
    ] {
        match c.total_cmp(&i) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// Best window policy: for every attempt budget `b = 1..=b_max`, minimize
/// the closed form over `W`, then keep the best `(W, B)` pair.
pub fn best_window(
    params: &SystemParams,
    dist: &ScDistribution,
    feedback: bool,
    w_range: (f64, f64),
    b_max: u32,
    w_tol: f64,
) -> Result<OptResult> {
    if b_max == 0 {
        return Err(Error::InvalidParam("b_max must be >= 1, got 0".into()));
    }
    let mut evaluations = 0;
    let mut trace = Vec::new();
    let mut winner: Option<(f64, f64, f64)> = None; // (value, w, b)
    for b in 1..=b_max {
        let obj = |w: f64| {
            let r = if feedback {
                peak_aoi_window_fb(params, dist, w, b)
            } else {
                peak_aoi_window_nofb(params, dist, w, b)
            };
            r.unwrap_or(f64::INFINITY)
        };
        let m = minimize_scalar(obj, w_range.0, w_range.1, w_tol)?;
        evaluations += m.evaluations;
        trace.extend(
            m.trace
                .iter()
                .map(|&(w, v)| (window_policy(feedback, w, b), v)),
        );
        let key = (m.value, m.x, b as f64);
        if winner.is_none() || better(key, winner.unwrap()) {
            winner = Some(key);
        }
    }
    let (value, w, b) = winner.unwrap();
    Ok(OptResult {
        best: window_policy(feedback, w, b as u32),
        value,
        stderr: 0.0,
        evaluations,
        trace,
    })
}

fn window_policy(feedback: bool, w: f64, b: u32) -> PolicySpec {
    if feedback {
        PolicySpec::WindowFb { w, b }
    } else {
        PolicySpec::WindowNoFb { w, b }
    }
}

fn prob_policy(feedback: bool, w: f64, p_tx: f64) -> PolicySpec {
    if feedback {
        PolicySpec::ProbFb { w, p_tx }
    } else {
        PolicySpec::ProbNoFb { w, p_tx }
    }
}

/// Best coin-flip policy: an outer `pTx` grid (on `(0, 1]` with feedback,
/// `(0, 1)` without), an inner `W` minimization per cell, and one refinement
/// pass around the winning cell.
pub fn best_prob(
    params: &SystemParams,
    dist: &ScDistribution,
    feedback: bool,
    w_range: (f64, f64),
    resolution: u32,
    w_tol: f64,
) -> Result<OptResult> {
    if resolution < 8 {
        return Err(Error::InvalidParam(format!(
            "pTx grid resolution must be >= 8, got {resolution}"
        )));
    }
    let r = resolution as f64;
    let coarse: Vec<f64> = if feedback {
        (1..=resolution).map(|i| i as f64 / r).collect()
    } else {
        (1..=resolution).map(|i| i as f64 / (r + 1.0)).collect()
    };
    let step = if feedback { 1.0 / r } else { 1.0 / (r + 1.0) };

    let mut evaluations = 0;
    let mut trace = Vec::new();
    let mut winner: Option<(f64, f64, f64)> = None; // (value, w, ptx)

    let scan = |p_grid: &[f64],
                evaluations: &mut u64,
                trace: &mut Vec<(PolicySpec, f64)>,
                winner: &mut Option<(f64, f64, f64)>|
     -> Result<()> {
        for &p in p_grid {
            let obj = |w: f64| {
                let r = if feedback {
                    peak_aoi_prob_fb(params, dist, w, p)
                } else {
                    peak_aoi_prob_nofb(params, dist, w, p)
                };
                r.unwrap_or(f64::INFINITY)
            };
            let m = match minimize_scalar(obj, w_range.0, w_range.1, w_tol) {
                Ok(m) => m,
                Err(Error::NoFiniteValue) => continue,
                Err(e) => return Err(e),
            };
            *evaluations += m.evaluations;
            trace.push((prob_policy(feedback, m.x, p), m.value));
            let key = (m.value, m.x, p);
            if winner.is_none() || better(key, winner.unwrap()) {
                *winner = Some(key);
            }
        }
        Ok(())
    };

    scan(&coarse, &mut evaluations, &mut trace, &mut winner)?;
    let (_, _, p_best) = winner.ok_or(Error::NoFiniteValue)?;

    // One refinement sweep across the two cells flanking the winner.
    let hi_cap = if feedback { 1.0 } else { 1.0 - step / r };
    let fine: Vec<f64> = (0..=resolution)
        .map(|j| p_best - step + 2.0 * step * j as f64 / r)
        .filter(|&p| p > 0.0 && p <= hi_cap)
        .collect();
    scan(&fine, &mut evaluations, &mut trace, &mut winner)?;

    let (value, w, p_tx) = winner.unwrap();
    Ok(OptResult {
        best: prob_policy(feedback, w, p_tx),
        value,
        stderr: 0.0,
        evaluations,
        trace,
    })
}

/// Best age threshold, found on the simulator with common random numbers:
/// every probed `W` runs the identical `(n_cycles, seed)` experiment, so the
/// objective is a deterministic function of `W`. Simulation failures
/// (dead gate, cycle overflow) count as `+inf`.
#[allow(clippy::too_many_arguments)]
pub fn best_threshold_sim(
    params: &SystemParams,
    sc: &ScLaw,
    feedback: bool,
    w_range: (f64, f64),
    n_cycles: u64,
    seed: u64,
    n_workers: usize,
    w_tol: f64,
) -> Result<OptResult> {
    let mut cache: HashMap<u64, (f64, f64)> = HashMap::new();
    let obj = |w: f64| {
        if let Some(&(mean, _)) = cache.get(&w.to_bits()) {
            return mean;
        }
        let policy = if feedback {
            PolicySpec::ThresholdFb { w }
        } else {
            PolicySpec::ThresholdNoFb { w }
        };
        match simulate_parallel_budget(
            &policy,
            params,
            sc,
            n_cycles,
            seed,
            n_workers,
            crate::simulator::DEFAULT_EVENT_BUDGET,
        ) {
            Ok(e) => {
                cache.insert(w.to_bits(), (e.mean, e.stderr));
                e.mean
            }
            Err(_) => f64::INFINITY,
        }
    };
    let m = minimize_scalar_with_grid(obj, w_range.0, w_range.1, w_tol, SIM_GRID)?;
    let stderr = cache.get(&m.x.to_bits()).map(|&(_, se)| se).unwrap_or(0.0);
    let best = if feedback {
        PolicySpec::ThresholdFb { w: m.x }
    } else {
        PolicySpec::ThresholdNoFb { w: m.x }
    };
    Ok(OptResult {
        best,
        value: m.value,
        stderr,
        evaluations: m.evaluations,
        trace: m
            .trace
            .iter()
            .map(|&(w, v)| {
                (
                    if feedback {
                        PolicySpec::ThresholdFb { w }
                    } else {
                        PolicySpec::ThresholdNoFb { w }
                    },
                    v,
                )
            })
            .collect(),
    })
}

/// Distance between a feedback-threshold search result and the fixed-point
/// line [`threshold_fixed_point_value`] evaluated at its best `W`. Near zero
/// (up to Monte-Carlo noise and the `W` tolerance) when the search found the
/// true optimum.
pub fn fixed_point_residual(params: &SystemParams, opt: &OptResult) -> Result<f64> {
    match opt.best {
        PolicySpec::ThresholdFb { w } => {
            Ok((opt.value - threshold_fixed_point_value(params, w)).abs())
        }
        _ => Err(Error::InvalidParam(format!(
            "fixed-point residual needs a threshold-fb result, got {}",
            opt.best.scheme()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScDistribution;

    fn p(lambda: f64, pe: f64) -> SystemParams {
        SystemParams::new(lambda, pe, 1.0).unwrap()
    }

    fn theta10() -> ScDistribution {
        ScDistribution::from_theta(10.0).unwrap()
    }

    #[test]
    fn quadratic_minimum_is_found() {
        let m = minimize_scalar(|x| (x - 3.0) * (x - 3.0), 0.0, 10.0, 1e-6).unwrap();
        assert!((m.x - 3.0).abs() < 1e-6, "x = {}", m.x);
        assert!(m.value < 1e-11);
        assert!(m.evaluations > 64);
    }

    #[test]
    fn range_and_knob_validation() {
        assert!(minimize_scalar(|x| x, 5.0, 5.0, 1e-6).is_err());
        assert!(minimize_scalar(|x| x, 7.0, 5.0, 1e-6).is_err());
        assert!(minimize_scalar(|x| x, 0.0, 1.0, 0.0).is_err());
        assert!(matches!(
            minimize_scalar(|_| f64::INFINITY, 0.0, 1.0, 1e-6),
            Err(Error::NoFiniteValue)
        ));
        assert!(best_window(&p(1.0, 0.2), &theta10(), true, (0.0, 50.0), 0, 1e-6).is_err());
        assert!(best_prob(&p(1.0, 0.2), &theta10(), true, (0.0, 50.0), 7, 1e-6).is_err());
    }

    #[test]
    fn nan_objective_treated_as_infinite() {
        let m = minimize_scalar(
            |x| {
                if x < 0.5 {
                    f64::NAN
                } else {
                    (x - 0.75) * (x - 0.75)
                }
            },
            0.0,
            1.0,
            1e-6,
        )
        .unwrap();
        assert!((m.x - 0.75).abs() < 1e-5);
    }

    #[test]
    fn clean_channel_ties_break_to_smallest_knobs() {
        // With pe = 0 the window objective does not depend on B at all, so
        // every B produces the same curve and the tie must resolve to B = 1.
        let params = p(1.0, 0.0);
        let d = theta10();
        let opt = best_window(&params, &d, true, (0.0, 51.0), 5, 1e-6).unwrap();
        assert_eq!(opt.best.b(), Some(1));
        assert_eq!(opt.stderr, 0.0);
        // Coin-flip with feedback: a free coin is never worth biasing, the
        // best pTx is 1 (larger pTx strictly shortens the cycle at pe = 0).
        let opt = best_prob(&params, &d, true, (0.0, 51.0), 16, 1e-6).unwrap();
        assert_eq!(opt.best.p_tx(), Some(1.0));
    }

    #[test]
    fn search_is_deterministic() {
        let params = p(1.0, 0.3);
        let d = theta10();
        let a = best_window(&params, &d, false, (0.0, 51.0), 6, 1e-6).unwrap();
        let b = best_window(&params, &d, false, (0.0, 51.0), 6, 1e-6).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.evaluations, b.evaluations);
    }

    #[test]
    fn residual_requires_feedback_threshold() {
        let opt = OptResult {
            best: PolicySpec::ThresholdNoFb { w: 8.0 },
            value: 15.0,
            stderr: 0.01,
            evaluations: 1,
            trace: vec![],
        };
        assert!(fixed_point_residual(&p(1.0, 0.2), &opt).is_err());
        let opt = OptResult {
            best: PolicySpec::ThresholdFb { w: 10.0 },
            value: 13.5,
            stderr: 0.0,
            evaluations: 1,
            trace: vec![],
        };
        assert_eq!(fixed_point_residual(&p(1.0, 0.2), &opt).unwrap(), 0.0);
    }
}
