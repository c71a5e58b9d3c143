//! Domain types: channel/energy parameters, service-time laws, and the six
//! retransmission policies.

use std::fmt;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::rng::unit53;

/// Channel and energy-arrival parameters shared by every policy.
///
/// * `lambda` — rate of the Poisson energy arrivals; each arrival delivers
///   exactly the energy needed for one sensing operation or one transmission.
/// * `pe` — probability that a transmission is erased (`0 <= pe < 1`).
/// * `d` — fixed transmission airtime (`D > 0`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    pub lambda: f64,
    pub pe: f64,
    pub d: f64,
}

impl SystemParams {
    pub fn new(lambda: f64, pe: f64, d: f64) -> Result<Self> {
        let p = Self { lambda, pe, d };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidParam(format!(
                "lambda must be finite and > 0, got {}",
                self.lambda
            )));
        }
        if !(self.pe >= 0.0 && self.pe < 1.0) {
            return Err(Error::InvalidParam(format!(
                "pe must satisfy 0 <= pe < 1, got {}",
                self.pe
            )));
        }
        if !(self.d.is_finite() && self.d > 0.0) {
            return Err(Error::InvalidParam(format!(
                "D must be finite and > 0, got {}",
                self.d
            )));
        }
        Ok(())
    }
}

/// Two-point service-time law: `C = m1` with probability `1 - p2`, `C = m2`
/// with probability `p2` (`0 <= m1 <= m2`, `0 <= p2 <= 1`).
///
/// [`ScDistribution::from_theta`] builds the one-parameter family used by the
/// bundled sweeps: `m1 = 1`, `m2 = 10 + theta`, `p2 = 4 / (9 + theta)`, which
/// keeps the mean pinned at 5 while the variance grows as `20 + 4 theta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScDistribution {
    pub m1: f64,
    pub m2: f64,
    pub p2: f64,
}

impl ScDistribution {
    pub fn new(m1: f64, m2: f64, p2: f64) -> Result<Self> {
        if !(m1.is_finite() && m1 >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "m1 must be finite and >= 0, got {m1}"
            )));
        }
        if !(m2.is_finite() && m2 >= m1) {
            return Err(Error::InvalidParam(format!(
                "m2 must be finite and >= m1 ({m1}), got {m2}"
            )));
        }
        if !(0.0..=1.0).contains(&p2) {
            return Err(Error::InvalidParam(format!(
                "p2 must lie in [0, 1], got {p2}"
            )));
        }
        Ok(Self { m1, m2, p2 })
    }

    /// Fixed-mean family: `m1 = 1`, `m2 = 10 + theta`, `p2 = 4 / (9 + theta)`.
    pub fn from_theta(theta: f64) -> Result<Self> {
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "theta must be finite and >= 0, got {theta}"
            )));
        }
        Self::new(1.0, 10.0 + theta, 4.0 / (9.0 + theta))
    }

    pub fn p1(&self) -> f64 {
        1.0 - self.p2
    }

    pub fn mean(&self) -> f64 {
        self.p1() * self.m1 + self.p2 * self.m2
    }

    pub fn second_moment(&self) -> f64 {
        self.p1() * self.m1 * self.m1 + self.p2 * self.m2 * self.m2
    }

    pub fn variance(&self) -> f64 {
        self.second_moment() - self.mean() * self.mean()
    }

    /// Smallest value the law can produce with positive probability.
    pub fn min_support(&self) -> f64 {
        if self.p2 >= 1.0 {
            self.m2
        } else {
            self.m1
        }
    }

    /// Largest value the law can produce with positive probability.
    pub fn max_support(&self) -> f64 {
        if self.p2 > 0.0 {
            self.m2
        } else {
            self.m1
        }
    }

    /// One draw: `m2` with probability `p2` (uniform `u < p2`), else `m1`.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        if unit53(rng) < self.p2 {
            self.m2
        } else {
            self.m1
        }
    }
}

/// Service times resampled uniformly from a user-supplied list, for setups
/// the two-point family cannot express. Only the simulator accepts these;
/// the closed forms require [`ScDistribution`].
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalSc {
    values: Vec<f64>,
}

impl EmpiricalSc {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParam(
                "empirical service-time sample must be nonempty".into(),
            ));
        }
        for (i, v) in values.iter().enumerate() {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::InvalidParam(format!(
                    "empirical service-time sample entry {i} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(Self { values })
    }

    /// Loads newline-separated durations; blank lines and `#` comments are
    /// skipped. Errors name the file and line.
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| {
                Error::InvalidParam(format!(
                    "{}:{}: not a number: {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            values.push(v);
        }
        Self::from_values(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// One draw, uniform over the stored values. The index comes from the
    /// high bits of `next_u64` via a multiply-shift, so no draw is wasted on
    /// rejection and the mapping is platform-stable.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let idx = ((rng.next_u64() as u128 * self.values.len() as u128) >> 64) as usize;
        self.values[idx]
    }
}

/// Service-time law accepted by the simulator: the analytic two-point family
/// or an empirical sample.
#[derive(Clone, Debug, PartialEq)]
pub enum ScLaw {
    TwoPoint(ScDistribution),
    Empirical(EmpiricalSc),
}

impl ScLaw {
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ScLaw::TwoPoint(d) => d.sample(rng),
            ScLaw::Empirical(e) => e.sample(rng),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ScLaw::TwoPoint(d) => d.mean(),
            ScLaw::Empirical(e) => e.mean(),
        }
    }

    pub fn min_support(&self) -> f64 {
        match self {
            ScLaw::TwoPoint(d) => d.min_support(),
            ScLaw::Empirical(e) => e.min(),
        }
    }

    pub fn max_support(&self) -> f64 {
        match self {
            ScLaw::TwoPoint(d) => d.max_support(),
            ScLaw::Empirical(e) => e.max(),
        }
    }

    /// The two-point view, when this law has one (closed forms need it).
    pub fn two_point(&self) -> Option<&ScDistribution> {
        match self {
            ScLaw::TwoPoint(d) => Some(d),
            ScLaw::Empirical(_) => None,
        }
    }
}

impl From<ScDistribution> for ScLaw {
    fn from(d: ScDistribution) -> Self {
        ScLaw::TwoPoint(d)
    }
}

/// Scheme identity, without the tunable parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    ThresholdFb,
    WindowFb,
    ProbFb,
    ThresholdNoFb,
    WindowNoFb,
    ProbNoFb,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::ThresholdFb,
        Scheme::WindowFb,
        Scheme::ProbFb,
        Scheme::ThresholdNoFb,
        Scheme::WindowNoFb,
        Scheme::ProbNoFb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::ThresholdFb => "threshold-fb",
            Scheme::WindowFb => "window-fb",
            Scheme::ProbFb => "prob-fb",
            Scheme::ThresholdNoFb => "threshold-nofb",
            Scheme::WindowNoFb => "window-nofb",
            Scheme::ProbNoFb => "prob-nofb",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Whether the transmitter learns about each delivery.
    pub fn feedback(self) -> bool {
        matches!(
            self,
            Scheme::ThresholdFb | Scheme::WindowFb | Scheme::ProbFb
        )
    }

    /// Whether a closed form exists (threshold schemes are simulation-only).
    pub fn has_closed_form(self) -> bool {
        !matches!(self, Scheme::ThresholdFb | Scheme::ThresholdNoFb)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A fully parameterized retransmission policy.
///
/// Every scheme gates on the initial age: an update whose age `C + I` at the
/// first decision epoch exceeds `W` is discarded unsent (the comparison is
/// `C + I <= W`, non-strict). Past that gate:
///
/// * `ThresholdFb` / `ThresholdNoFb` — transmit whenever the current age is
///   still `<= W`; with feedback, stop at the first delivery.
/// * `WindowFb` / `WindowNoFb` — transmit unconditionally until the update
///   has used `B` attempts in total; with feedback, stop early on delivery.
/// * `ProbFb` / `ProbNoFb` — at every decision epoch (including the first)
///   transmit with probability `p_tx`, else discard and regenerate.
///
/// Without feedback the transmitter cannot see deliveries, so it keeps
/// spending attempts on an already-delivered update until its own rule
/// releases it; that extra time is what the simulator reports as `t_ext`.
///
/// `W = f64::INFINITY` disables the gate and is valid everywhere except
/// `ThresholdNoFb`, which would never release an update. `ProbNoFb` needs
/// `p_tx < 1` for the same reason.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PolicySpec {
    ThresholdFb { w: f64 },
    WindowFb { w: f64, b: u32 },
    ProbFb { w: f64, p_tx: f64 },
    ThresholdNoFb { w: f64 },
    WindowNoFb { w: f64, b: u32 },
    ProbNoFb { w: f64, p_tx: f64 },
}

impl PolicySpec {
    pub fn scheme(&self) -> Scheme {
        match self {
            PolicySpec::ThresholdFb { .. } => Scheme::ThresholdFb,
            PolicySpec::WindowFb { .. } => Scheme::WindowFb,
            PolicySpec::ProbFb { .. } => Scheme::ProbFb,
            PolicySpec::ThresholdNoFb { .. } => Scheme::ThresholdNoFb,
            PolicySpec::WindowNoFb { .. } => Scheme::WindowNoFb,
            PolicySpec::ProbNoFb { .. } => Scheme::ProbNoFb,
        }
    }

    pub fn feedback(&self) -> bool {
        self.scheme().feedback()
    }

    pub fn w(&self) -> f64 {
        match *self {
            PolicySpec::ThresholdFb { w }
            | PolicySpec::WindowFb { w, .. }
            | PolicySpec::ProbFb { w, .. }
            | PolicySpec::ThresholdNoFb { w }
            | PolicySpec::WindowNoFb { w, .. }
            | PolicySpec::ProbNoFb { w, .. } => w,
        }
    }

    pub fn b(&self) -> Option<u32> {
        match *self {
            PolicySpec::WindowFb { b, .. } | PolicySpec::WindowNoFb { b, .. } => Some(b),
            _ => None,
        }
    }

    pub fn p_tx(&self) -> Option<f64> {
        match *self {
            PolicySpec::ProbFb { p_tx, .. } | PolicySpec::ProbNoFb { p_tx, .. } => Some(p_tx),
            _ => None,
        }
    }

    fn check(&self) -> Result<()> {
        let w = self.w();
        if w.is_nan() || w < 0.0 {
            return Err(Error::InvalidParam(format!(
                "W must be >= 0 (or +inf where allowed), got {w}"
            )));
        }
        match *self {
            PolicySpec::ThresholdNoFb { w } if !w.is_finite() => Err(Error::InvalidParam(
                "threshold-nofb requires a finite W: without feedback the age gate is the only \
                 thing that ever releases an update"
                    .into(),
            )),
            PolicySpec::WindowFb { b, .. } | PolicySpec::WindowNoFb { b, .. } if b == 0 => Err(
                Error::InvalidParam("B must be >= 1, got 0".into()),
            ),
            PolicySpec::ProbFb { p_tx, .. } if !(p_tx > 0.0 && p_tx <= 1.0) => {
                Err(Error::InvalidParam(format!(
                    "prob-fb requires 0 < pTx <= 1, got {p_tx}"
                )))
            }
            PolicySpec::ProbNoFb { p_tx, .. } if !(p_tx > 0.0 && p_tx < 1.0) => {
                Err(Error::InvalidParam(format!(
                    "prob-nofb requires 0 < pTx < 1 (pTx = 1 would never release an update), got {p_tx}"
                )))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} W={}", self.scheme(), self.w())?;
        if let Some(b) = self.b() {
            write!(f, " B={b}")?;
        }
        if let Some(p) = self.p_tx() {
            write!(f, " pTx={p}")?;
        }
        Ok(())
    }
}

/// Checks a full (params, service law, policy) triple.
///
/// Pure: the verdict depends only on the arguments. Beyond the per-type
/// domain checks this rejects dead policies, i.e. gates that no update can
/// ever pass (`W <= min C`, so `Pr(C + I <= W) = 0` and no cycle completes).
pub fn validate(params: &SystemParams, sc: &ScLaw, policy: &PolicySpec) -> Result<()> {
    params.check()?;
    if let ScLaw::Empirical(e) = sc {
        // Re-check here so a hand-built law cannot dodge the constructor.
        EmpiricalSc::from_values(e.values().to_vec())?;
    }
    policy.check()?;
    let min_c = sc.min_support();
    if policy.w() <= min_c {
        return Err(Error::DeadPolicy(format!(
            "W = {} does not exceed the smallest possible service time {min_c}; \
             no update can ever pass the age gate",
            policy.w()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_theta_pins_mean_and_variance() {
        for theta in [0.0, 1.0, 10.0, 45.0] {
            let d = ScDistribution::from_theta(theta).unwrap();
            assert!((d.mean() - 5.0).abs() < 1e-12, "theta={theta}");
            assert!(
                (d.variance() - (20.0 + 4.0 * theta)).abs() < 1e-9,
                "theta={theta} var={}",
                d.variance()
            );
            assert_eq!(d.m1, 1.0);
            assert_eq!(d.m2, 10.0 + theta);
        }
    }

    #[test]
    fn constructors_reject_bad_domains() {
        assert!(SystemParams::new(0.0, 0.2, 1.0).is_err());
        assert!(SystemParams::new(1.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(1.0, -0.1, 1.0).is_err());
        assert!(SystemParams::new(1.0, 0.2, 0.0).is_err());
        assert!(SystemParams::new(f64::NAN, 0.2, 1.0).is_err());
        assert!(ScDistribution::new(-1.0, 2.0, 0.5).is_err());
        assert!(ScDistribution::new(3.0, 2.0, 0.5).is_err());
        assert!(ScDistribution::new(1.0, 2.0, 1.5).is_err());
        assert!(ScDistribution::from_theta(-1.0).is_err());
        assert!(EmpiricalSc::from_values(vec![]).is_err());
        assert!(EmpiricalSc::from_values(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn validate_flags_dead_and_degenerate_policies() {
        let p = SystemParams::new(1.0, 0.2, 1.0).unwrap();
        let sc: ScLaw = ScDistribution::from_theta(10.0).unwrap().into();
        // Gate at or below the smallest service time: dead.
        for w in [0.0, 0.5, 1.0] {
            let e = validate(&p, &sc, &PolicySpec::ThresholdFb { w }).unwrap_err();
            assert!(matches!(e, Error::DeadPolicy(_)), "W={w}: {e}");
        }
        assert!(validate(&p, &sc, &PolicySpec::ThresholdFb { w: 1.01 }).is_ok());
        assert!(validate(&p, &sc, &PolicySpec::ThresholdFb { w: f64::INFINITY }).is_ok());
        // No-feedback threshold must have a finite gate.
        assert!(validate(&p, &sc, &PolicySpec::ThresholdNoFb { w: f64::INFINITY }).is_err());
        assert!(validate(&p, &sc, &PolicySpec::ThresholdNoFb { w: 8.0 }).is_ok());
        // Coin-flip corner cases.
        assert!(validate(&p, &sc, &PolicySpec::ProbFb { w: 8.0, p_tx: 1.0 }).is_ok());
        assert!(validate(&p, &sc, &PolicySpec::ProbFb { w: 8.0, p_tx: 0.0 }).is_err());
        assert!(validate(&p, &sc, &PolicySpec::ProbNoFb { w: 8.0, p_tx: 1.0 }).is_err());
        assert!(validate(&p, &sc, &PolicySpec::WindowFb { w: 8.0, b: 0 }).is_err());
        // All-m2 law moves the dead-gate boundary up to m2.
        let heavy: ScLaw = ScDistribution::new(1.0, 20.0, 1.0).unwrap().into();
        assert!(validate(&p, &heavy, &PolicySpec::ThresholdFb { w: 8.0 }).is_err());
        assert!(validate(&p, &heavy, &PolicySpec::ThresholdFb { w: 20.5 }).is_ok());
    }

    #[test]
    fn two_point_sampler_hits_both_atoms() {
        use rand_chacha::rand_core::SeedableRng;
        let d = ScDistribution::from_theta(10.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let hits2 = (0..n).filter(|_| d.sample(&mut rng) == d.m2).count();
        let frac = hits2 as f64 / n as f64;
        // p2 = 4/19 ~ 0.2105, sd ~ 0.0013
        assert!((frac - d.p2).abs() < 0.006, "frac {frac}");
    }

    #[test]
    fn empirical_sampler_uniform_over_values() {
        use rand_chacha::rand_core::SeedableRng;
        let e = EmpiricalSc::from_values(vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(e.min(), 1.0);
        assert!((e.mean() - 7.0 / 3.0).abs() < 1e-15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0u32; 3];
        for _ in 0..90_000 {
            match e.sample(&mut rng) {
                v if v == 1.0 => counts[0] += 1,
                v if v == 2.0 => counts[1] += 1,
                _ => counts[2] += 1,
            }
        }
        for c in counts {
            assert!((c as f64 / 90_000.0 - 1.0 / 3.0).abs() < 0.01, "{counts:?}");
        }
    }
}
