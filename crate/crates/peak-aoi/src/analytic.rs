//! Closed-form average peak AoI for the window and probabilistic schemes,
//! plus the fixed-point line satisfied by the optimal feedback threshold.
//!
//! All formulas come from a renewal decomposition of the delivery process.
//! Let `M = C + I` be an update's age at its first decision epoch, `n-hat`
//! the number of attempts an update receives, and `n-tilde` the number of
//! updates generated per delivery cycle. The average peak AoI is
//!
//! ```text
//! E[peak] = 1/lambda + E[n-tilde] * E[A] + E[A_stop]
//! ```
//!
//! where `A = C + I + T` is the time a generated update occupies the node
//! and `A_stop` is the same quantity for the delivered update, measured up
//! to its first successful transmission (plus, without feedback, the tail
//! the transmitter keeps spending on it).

use crate::error::{Error, Result};
use crate::model::{ScDistribution, SystemParams};

/// Number of transmission attempts a committed update receives under a
/// budget of `b`: success on attempt `v <= b`, or all `b` attempts erased.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttemptOutcome {
    /// First success on attempt `v`, `1 <= v <= b`.
    Success(u32),
    /// All `b` attempts erased (the update is released undelivered).
    AllFailed,
}

/// Truncated-geometric pmf of [`AttemptOutcome`] when each attempt is erased
/// independently with probability `pe`:
/// `Pr(v) = (1 - pe) pe^(v-1)` for `1 <= v <= b`, and `Pr(all failed) = pe^b`.
///
/// Out-of-range outcomes (`v = 0` or `v > b`) have probability zero. Powers
/// use integer exponents throughout, so `pe = 0` gives exact 0/1 masses.
pub fn trunc_geom_pmf(pe: f64, b: u32, outcome: AttemptOutcome) -> f64 {
    match outcome {
        AttemptOutcome::Success(v) => {
            if v == 0 || v > b {
                0.0
            } else {
                (1.0 - pe) * pe.powi(v as i32 - 1)
            }
        }
        AttemptOutcome::AllFailed => pe.powi(b as i32),
    }
}

/// Law of `M = C + I`, the age of an update at its first decision epoch:
/// the two-point service time plus an independent `Exp(lambda)` recharge.
///
/// The CDF and the partial mean `integral_0^x t f_M(t) dt` are shifted
/// exponentials mixed over the two atoms. `x = +inf` short-circuits to the
/// exact limits (`1` and `E[M]`) so an unbounded gate never goes through a
/// floating `inf * 0` path.
#[derive(Clone, Copy, Debug)]
pub struct MDistribution {
    m1: f64,
    m2: f64,
    p1: f64,
    p2: f64,
    lambda: f64,
}

impl MDistribution {
    pub fn new(dist: &ScDistribution, lambda: f64) -> Self {
        Self {
            m1: dist.m1,
            m2: dist.m2,
            p1: dist.p1(),
            p2: dist.p2,
            lambda,
        }
    }

    pub fn mean(&self) -> f64 {
        self.p1 * self.m1 + self.p2 * self.m2 + 1.0 / self.lambda
    }

    /// `Pr(M <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_infinite() && x > 0.0 {
            return 1.0;
        }
        let branch = |p: f64, m: f64| {
            if x >= m {
                p * (1.0 - (-self.lambda * (x - m)).exp())
            } else {
                0.0
            }
        };
        branch(self.p1, self.m1) + branch(self.p2, self.m2)
    }

    /// `integral_0^x t f_M(t) dt` (unnormalized mean of the part below `x`).
    pub fn partial_mean(&self, x: f64) -> f64 {
        if x.is_infinite() && x > 0.0 {
            return self.mean();
        }
        let inv_l = 1.0 / self.lambda;
        let branch = |p: f64, m: f64| {
            if x >= m {
                p * (m + inv_l - (x + inv_l) * (-self.lambda * (x - m)).exp())
            } else {
                0.0
            }
        };
        branch(self.p1, self.m1) + branch(self.p2, self.m2)
    }

    /// `E[M | M <= w]`. Errors with [`Error::GateNeverPasses`] when
    /// `Pr(M <= w) = 0`.
    pub fn cond_mean_below(&self, w: f64) -> Result<f64> {
        if w.is_infinite() && w > 0.0 {
            return Ok(self.mean());
        }
        let q = self.cdf(w);
        if q <= 0.0 {
            return Err(Error::GateNeverPasses);
        }
        Ok(self.partial_mean(w) / q)
    }
}

/// Shared per-scheme plumbing: validated inputs plus the gate mass `q`.
struct Gate {
    q: f64,
    cond_mean: f64,
    mean_c: f64,
    inv_l: f64,
    d: f64,
    pe: f64,
}

fn gate(params: &SystemParams, dist: &ScDistribution, w: f64) -> Result<Gate> {
    params.check()?;
    ScDistribution::new(dist.m1, dist.m2, dist.p2)?;
    if w.is_nan() || w < 0.0 {
        return Err(Error::InvalidParam(format!(
            "W must be >= 0 (or +inf), got {w}"
        )));
    }
    let md = MDistribution::new(dist, params.lambda);
    let q = md.cdf(w);
    if q <= 0.0 {
        return Err(Error::GateNeverPasses);
    }
    Ok(Gate {
        q,
        cond_mean: md.cond_mean_below(w)?,
        mean_c: dist.mean(),
        inv_l: 1.0 / params.lambda,
        d: params.d,
        pe: params.pe,
    })
}

fn check_b(b: u32) -> Result<()> {
    if b == 0 {
        return Err(Error::InvalidParam("B must be >= 1, got 0".into()));
    }
    Ok(())
}

/// Window scheme, with feedback: gate at `W`, then up to `b` attempts,
/// stopping at the first delivery.
pub fn peak_aoi_window_fb(
    params: &SystemParams,
    dist: &ScDistribution,
    w: f64,
    b: u32,
) -> Result<f64> {
    check_b(b)?;
    let g = gate(params, dist, w)?;
    let pe_b = g.pe.powi(b as i32);
    let bf = b as f64;
    // E[n-hat counting an exhausted budget as b] = (1 - pe^b)/(1 - pe).
    let geom = (1.0 - pe_b) / (1.0 - g.pe);
    // (1 - pe^b) * E[T | delivered]: b'th-attempt delivery has no trailing recharge.
    let t_deliv_mass = (geom - bf * pe_b) * g.d + (geom - (1.0 - pe_b) - bf * pe_b) * g.inv_l;
    let t_deliv = t_deliv_mass / (1.0 - pe_b);
    // Exhausted budget: b attempts and b recharges (the last one funds the next update).
    let t_exhaust = bf * (g.d + g.inv_l);
    let e_t = g.q * pe_b * t_exhaust + g.q * t_deliv_mass;
    let e_n = 1.0 / ((1.0 - pe_b) * g.q);
    let e_a = g.mean_c + g.inv_l + e_t;
    let a_stop = g.cond_mean + t_deliv;
    Ok(g.inv_l + e_n * e_a + a_stop)
}

/// Window scheme without feedback: the delivered update still spends its
/// whole budget, so the stopped term pays all `b` airtimes and the `b - 1`
/// recharges between them.
pub fn peak_aoi_window_nofb(
    params: &SystemParams,
    dist: &ScDistribution,
    w: f64,
    b: u32,
) -> Result<f64> {
    check_b(b)?;
    let g = gate(params, dist, w)?;
    let pe_b = g.pe.powi(b as i32);
    let bf = b as f64;
    let geom = (1.0 - pe_b) / (1.0 - g.pe);
    let t_deliv_mass = (geom - bf * pe_b) * g.d + (geom - (1.0 - pe_b) - bf * pe_b) * g.inv_l;
    let t_exhaust = bf * (g.d + g.inv_l);
    let e_t = g.q * pe_b * t_exhaust + g.q * t_deliv_mass;
    let e_n = 1.0 / ((1.0 - pe_b) * g.q);
    let e_a = g.mean_c + g.inv_l + e_t;
    let a_stop = g.cond_mean + (bf * g.d + (bf - 1.0) * g.inv_l);
    Ok(g.inv_l + e_n * e_a + a_stop)
}

/// Coin-flip scheme with feedback: gate at `W`, then transmit with
/// probability `p_tx` at every decision epoch until the first delivery.
pub fn peak_aoi_prob_fb(
    params: &SystemParams,
    dist: &ScDistribution,
    w: f64,
    p_tx: f64,
) -> Result<f64> {
    if !(p_tx > 0.0 && p_tx <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "pTx must satisfy 0 < pTx <= 1, got {p_tx}"
        )));
    }
    let g = gate(params, dist, w)?;
    let r = g.pe * p_tx;
    let denom = 1.0 - r;
    let e_n = denom / (g.q * p_tx * (1.0 - g.pe));
    // E[T | past the gate]: either the coin releases the update after some
    // failed attempts, or an attempt gets through first.
    let t_gate = ((1.0 - p_tx) * g.pe * p_tx / (denom * denom)) * (g.d + g.inv_l)
        + (p_tx * (1.0 - g.pe) / (denom * denom)) * (g.d + r * g.inv_l);
    let e_a = g.mean_c + g.inv_l + g.q * t_gate;
    let a_stop = g.cond_mean + (g.d + r * g.inv_l) / denom;
    Ok(g.inv_l + e_n * e_a + a_stop)
}

/// Coin-flip scheme without feedback: identical cycle structure, plus the
/// post-delivery tail `E[T_ext] = (D + 1/lambda) pTx / (1 - pTx)` the
/// transmitter keeps spending before the coin finally releases the update.
pub fn peak_aoi_prob_nofb(
    params: &SystemParams,
    dist: &ScDistribution,
    w: f64,
    p_tx: f64,
) -> Result<f64> {
    if !(p_tx > 0.0 && p_tx < 1.0) {
        return Err(Error::InvalidParam(format!(
            "pTx must satisfy 0 < pTx < 1 without feedback, got {p_tx}"
        )));
    }
    let g = gate(params, dist, w)?;
    let r = g.pe * p_tx;
    let denom = 1.0 - r;
    let e_n = denom / (g.q * p_tx * (1.0 - g.pe));
    let t_gate = ((1.0 - p_tx) * g.pe * p_tx / (denom * denom)) * (g.d + g.inv_l)
        + (p_tx * (1.0 - g.pe) / (denom * denom)) * (g.d + r * g.inv_l);
    let e_a = g.mean_c + g.inv_l + g.q * t_gate;
    let t_ext = (g.d + g.inv_l) * p_tx / (1.0 - p_tx);
    let a_stop = g.cond_mean + (g.d + r * g.inv_l) / denom + t_ext;
    Ok(g.inv_l + e_n * e_a + a_stop)
}

/// Value of the best feedback policy as a function of its switching
/// threshold:
///
/// ```text
/// D/(1 - pe) + W_th + D + 1/((1 - pe) lambda)
/// ```
///
/// At the optimal threshold the achieved average peak AoI equals this line,
/// which makes it a fixed-point check for the simulated threshold search:
/// `|best value - line(best W)|` should vanish up to noise.
pub fn threshold_fixed_point_value(params: &SystemParams, w_th: f64) -> f64 {
    let fail = 1.0 - params.pe;
    params.d / fail + w_th + params.d + 1.0 / (fail * params.lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda: f64, pe: f64) -> SystemParams {
        SystemParams::new(lambda, pe, 1.0).unwrap()
    }

    fn theta10() -> ScDistribution {
        ScDistribution::from_theta(10.0).unwrap()
    }

    #[test]
    fn trunc_geom_basic_masses() {
        // pe = 0.5, b = 2: {1: 0.5, 2: 0.25, all-failed: 0.25}.
        assert_eq!(trunc_geom_pmf(0.5, 2, AttemptOutcome::Success(1)), 0.5);
        assert_eq!(trunc_geom_pmf(0.5, 2, AttemptOutcome::Success(2)), 0.25);
        assert_eq!(trunc_geom_pmf(0.5, 2, AttemptOutcome::AllFailed), 0.25);
        assert_eq!(trunc_geom_pmf(0.5, 2, AttemptOutcome::Success(0)), 0.0);
        assert_eq!(trunc_geom_pmf(0.5, 2, AttemptOutcome::Success(3)), 0.0);
        // pe = 0: success on the first attempt with certainty.
        assert_eq!(trunc_geom_pmf(0.0, 4, AttemptOutcome::Success(1)), 1.0);
        assert_eq!(trunc_geom_pmf(0.0, 4, AttemptOutcome::Success(2)), 0.0);
        assert_eq!(trunc_geom_pmf(0.0, 4, AttemptOutcome::AllFailed), 0.0);
    }

    #[test]
    fn m_cdf_edges() {
        let md = MDistribution::new(&theta10(), 1.0);
        assert_eq!(md.cdf(0.0), 0.0);
        assert_eq!(md.cdf(1.0), 0.0); // zero mass at the atom itself
        assert!(md.cdf(1.0 + 1e-9) > 0.0);
        assert_eq!(md.cdf(f64::INFINITY), 1.0);
        assert!(md.cdf(1e9) > 1.0 - 1e-12);
        // Monotone on a coarse sweep.
        let mut last = -1.0;
        for i in 0..2000 {
            let x = i as f64 * 0.05;
            let c = md.cdf(x);
            assert!(c >= last && (0.0..=1.0).contains(&c));
            last = c;
        }
    }

    #[test]
    fn m_partial_and_cond_mean_edges() {
        let md = MDistribution::new(&theta10(), 1.0);
        assert_eq!(md.partial_mean(f64::INFINITY), md.mean());
        assert_eq!(md.mean(), 6.0);
        assert_eq!(md.cond_mean_below(f64::INFINITY).unwrap(), 6.0);
        assert!(matches!(
            md.cond_mean_below(0.5),
            Err(Error::GateNeverPasses)
        ));
        // E[M | M <= w] sits strictly inside (m1, w).
        for w in [1.5, 3.0, 8.0, 25.0, 80.0] {
            let m = md.cond_mean_below(w).unwrap();
            assert!(m > 1.0 && m < w, "w={w} m={m}");
        }
    }

    #[test]
    fn fixed_point_line_values() {
        assert_eq!(threshold_fixed_point_value(&params(1.0, 0.2), 10.0), 13.5);
        assert_eq!(threshold_fixed_point_value(&params(1.0, 0.0), 9.6), 12.6);
    }

    #[test]
    fn closed_forms_reject_dead_gates_and_bad_knobs() {
        let p = params(1.0, 0.2);
        let d = theta10();
        assert!(matches!(
            peak_aoi_window_fb(&p, &d, 0.5, 3),
            Err(Error::GateNeverPasses)
        ));
        assert!(peak_aoi_window_fb(&p, &d, 8.0, 0).is_err());
        assert!(peak_aoi_prob_fb(&p, &d, 8.0, 0.0).is_err());
        assert!(peak_aoi_prob_fb(&p, &d, 8.0, 1.0).is_ok());
        assert!(peak_aoi_prob_nofb(&p, &d, 8.0, 1.0).is_err());
    }

    #[test]
    fn window_fb_is_b_independent_when_channel_is_clean() {
        let p = params(1.0, 0.0);
        let d = theta10();
        let base = peak_aoi_window_fb(&p, &d, 8.0, 1).unwrap();
        for b in 2..10 {
            let v = peak_aoi_window_fb(&p, &d, 8.0, b).unwrap();
            assert_eq!(v.to_bits(), base.to_bits(), "b={b}");
        }
    }
}
