//! TOML configuration for the CLI and sweep harness.
//!
//! ```toml
//! [params]                 # channel and energy constants
//! lambda = 1.0
//! pe = 0.2
//! D = 1.0
//!
//! [dist]                   # exactly one of the three forms
//! theta = 10.0             # two-point family m1=1, m2=10+theta, p2=4/(9+theta)
//! # m1 = 1.0, m2 = 20.0, p2 = 0.21   # explicit two-point law
//! # sample_file = "sc.txt"           # empirical law, one duration per line
//!
//! [policy]                 # required by `eval`, optional otherwise
//! scheme = "window-fb"     # threshold-|window-|prob- x -fb|-nofb
//! W = 8.0                  # age gate; `inf` allowed where the scheme permits
//! B = 3                    # window schemes
//! ptx = 0.6                # coin-flip schemes
//!
//! [sim]
//! cycles = 1000000
//! seed = 1
//! workers = 1              # default: PEAK_AOI_WORKERS env var, then 1
//! event_budget = 1000000
//!
//! [optimize]
//! b_max = 12
//! ptx_resolution = 24
//! w_lo = 0.0
//! # w_hi defaults to max service time + 20/lambda + 10 D
//! w_tol = 1e-6             # analytic searches
//! sim_w_tol = 0.05         # simulated threshold searches
//!
//! [sweep]
//! lambdas = [0.1, 0.2, 0.5, 1, 2, 5, 10]
//! pes = [0.05, 0.1]        # default: 0.05 .. 0.8 in steps of 0.05
//! thetas = [0, 5, 10, 20, 45]
//! ```
//!
//! Unknown keys are rejected, and every resolution error names the key.
//! `sample_file` paths are taken relative to the config file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{EmpiricalSc, PolicySpec, ScDistribution, ScLaw, Scheme, SystemParams};
use crate::simulator::DEFAULT_EVENT_BUDGET;

/// Scheme plus raw knobs; unset knobs take neutral defaults (`W = inf`,
/// `B = 1`, `ptx = 0.5`) so overrides can fill them in any order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicyChoice {
    pub scheme: Scheme,
    pub w: f64,
    pub b: u32,
    pub ptx: f64,
}

impl PolicyChoice {
    pub fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            w: f64::INFINITY,
            b: 1,
            ptx: 0.5,
        }
    }

    pub fn to_spec(self) -> PolicySpec {
        match self.scheme {
            Scheme::ThresholdFb => PolicySpec::ThresholdFb { w: self.w },
            Scheme::WindowFb => PolicySpec::WindowFb {
                w: self.w,
                b: self.b,
            },
            Scheme::ProbFb => PolicySpec::ProbFb {
                w: self.w,
                p_tx: self.ptx,
            },
            Scheme::ThresholdNoFb => PolicySpec::ThresholdNoFb { w: self.w },
            Scheme::WindowNoFb => PolicySpec::WindowNoFb {
                w: self.w,
                b: self.b,
            },
            Scheme::ProbNoFb => PolicySpec::ProbNoFb {
                w: self.w,
                p_tx: self.ptx,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimSettings {
    pub cycles: u64,
    pub seed: u64,
    pub workers: usize,
    pub event_budget: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizeSettings {
    pub b_max: u32,
    pub ptx_resolution: u32,
    pub w_lo: f64,
    /// `None` means "derive from the service law", see
    /// [`crate::optimizer::default_w_hi`].
    pub w_hi: Option<f64>,
    pub w_tol: f64,
    pub sim_w_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrids {
    pub lambdas: Vec<f64>,
    pub pes: Vec<f64>,
    pub thetas: Vec<f64>,
}

/// Fully resolved configuration with every default applied.
#[derive(Clone, Debug)]
pub struct Config {
    pub params: SystemParams,
    pub sc: ScLaw,
    pub policy: Option<PolicyChoice>,
    pub sim: SimSettings,
    pub optimize: OptimizeSettings,
    pub sweep: SweepGrids,
}

/// Command-line overrides applied on top of a parsed [`Config`].
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub lambda: Option<f64>,
    pub pe: Option<f64>,
    pub d: Option<f64>,
    pub theta: Option<f64>,
    pub scheme: Option<Scheme>,
    pub w: Option<f64>,
    pub b: Option<u32>,
    pub ptx: Option<f64>,
    pub cycles: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl Config {
    pub fn apply(&mut self, ov: &Overrides) -> Result<()> {
        if let Some(l) = ov.lambda {
            self.params.lambda = l;
        }
        if let Some(pe) = ov.pe {
            self.params.pe = pe;
        }
        if let Some(d) = ov.d {
            self.params.d = d;
        }
        self.params.check()?;
        if let Some(theta) = ov.theta {
            self.sc = ScDistribution::from_theta(theta)?.into();
        }
        if let Some(scheme) = ov.scheme {
            match &mut self.policy {
                Some(p) => p.scheme = scheme,
                None => self.policy = Some(PolicyChoice::new(scheme)),
            }
        }
        for (knob, set) in [
            ("--W", ov.w.is_some()),
            ("--B", ov.b.is_some()),
            ("--ptx", ov.ptx.is_some()),
        ] {
            if set && self.policy.is_none() {
                return Err(Error::Config(format!(
                    "{knob} needs a scheme: set [policy].scheme or --scheme first"
                )));
            }
        }
        if let Some(p) = &mut self.policy {
            if let Some(w) = ov.w {
                p.w = w;
            }
            if let Some(b) = ov.b {
                p.b = b;
            }
            if let Some(ptx) = ov.ptx {
                p.ptx = ptx;
            }
        }
        if let Some(c) = ov.cycles {
            self.sim.cycles = c;
        }
        if let Some(s) = ov.seed {
            self.sim.seed = s;
        }
        if let Some(w) = ov.workers {
            self.sim.workers = w;
        }
        Ok(())
    }
}

impl Default for Config {
    fn default() -> Self {
        resolve(RawConfig::default(), Path::new(".")).expect("built-in defaults resolve")
    }
}

/// Worker count from `PEAK_AOI_WORKERS`, else 1.
pub fn default_workers() -> usize {
    std::env::var("PEAK_AOI_WORKERS")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&w| w >= 1)
        .unwrap_or(1)
}

pub fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    from_str(&text, path.parent().unwrap_or_else(|| Path::new(".")))
}

/// Parses config text; `base` anchors relative `sample_file` paths.
pub fn from_str(text: &str, base: &Path) -> Result<Config> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    resolve(raw, base)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    params: Option<RawParams>,
    dist: Option<RawDist>,
    policy: Option<RawPolicy>,
    sim: Option<RawSim>,
    optimize: Option<RawOptimize>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    lambda: Option<f64>,
    pe: Option<f64>,
    #[serde(rename = "D")]
    d: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDist {
    theta: Option<f64>,
    m1: Option<f64>,
    m2: Option<f64>,
    p2: Option<f64>,
    sample_file: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    scheme: String,
    #[serde(rename = "W")]
    w: Option<f64>,
    #[serde(rename = "B")]
    b: Option<u32>,
    ptx: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    cycles: Option<u64>,
    seed: Option<u64>,
    workers: Option<usize>,
    event_budget: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimize {
    b_max: Option<u32>,
    ptx_resolution: Option<u32>,
    w_lo: Option<f64>,
    w_hi: Option<f64>,
    w_tol: Option<f64>,
    sim_w_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    lambdas: Option<Vec<f64>>,
    pes: Option<Vec<f64>>,
    thetas: Option<Vec<f64>>,
}

fn resolve(raw: RawConfig, base: &Path) -> Result<Config> {
    let p = raw.params.unwrap_or_default();
    let params = SystemParams {
        lambda: p.lambda.unwrap_or(1.0),
        pe: p.pe.unwrap_or(0.2),
        d: p.d.unwrap_or(1.0),
    };

    let sc = resolve_dist(raw.dist.unwrap_or_default(), base)?;

    let policy = match raw.policy {
        None => None,
        Some(rp) => {
            let scheme = Scheme::parse(&rp.scheme).ok_or_else(|| {
                Error::Config(format!(
                    "policy.scheme: unknown scheme {:?} (expected one of {})",
                    rp.scheme,
                    Scheme::ALL.map(|s| s.name()).join(", ")
                ))
            })?;
            let mut c = PolicyChoice::new(scheme);
            if let Some(w) = rp.w {
                c.w = w;
            }
            if let Some(b) = rp.b {
                c.b = b;
            }
            if let Some(ptx) = rp.ptx {
                c.ptx = ptx;
            }
            Some(c)
        }
    };

    let s = raw.sim.unwrap_or_default();
    let sim = SimSettings {
        cycles: s.cycles.unwrap_or(1_000_000),
        seed: s.seed.unwrap_or(1),
        workers: s.workers.unwrap_or_else(default_workers),
        event_budget: s.event_budget.unwrap_or(DEFAULT_EVENT_BUDGET),
    };
    if sim.workers == 0 {
        return Err(Error::Config("sim.workers must be >= 1".into()));
    }

    let o = raw.optimize.unwrap_or_default();
    let optimize = OptimizeSettings {
        b_max: o.b_max.unwrap_or(12),
        ptx_resolution: o.ptx_resolution.unwrap_or(24),
        w_lo: o.w_lo.unwrap_or(0.0),
        w_hi: o.w_hi,
        w_tol: o.w_tol.unwrap_or(crate::optimizer::DEFAULT_W_TOL),
        sim_w_tol: o.sim_w_tol.unwrap_or(0.05),
    };

    let g = raw.sweep.unwrap_or_default();
    let sweep = SweepGrids {
        lambdas: g
            .lambdas
            .unwrap_or_else(|| vec![0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0]),
        pes: g
            .pes
            .unwrap_or_else(|| (1..=16).map(|i| i as f64 / 20.0).collect()),
        thetas: g.thetas.unwrap_or_else(|| vec![0.0, 5.0, 10.0, 20.0, 45.0]),
    };
    for (key, grid) in [
        ("lambdas", &sweep.lambdas),
        ("pes", &sweep.pes),
        ("thetas", &sweep.thetas),
    ] {
        if grid.is_empty() {
            return Err(Error::Config(format!("sweep.{key} must be nonempty")));
        }
    }

    Ok(Config {
        params,
        sc,
        policy,
        sim,
        optimize,
        sweep,
    })
}

fn resolve_dist(d: RawDist, base: &Path) -> Result<ScLaw> {
    let two_point_partial = d.m1.is_some() || d.m2.is_some() || d.p2.is_some();
    let forms = [
        d.theta.is_some(),
        two_point_partial,
        d.sample_file.is_some(),
    ]
    .iter()
    .filter(|x| **x)
    .count();
    if forms > 1 {
        return Err(Error::Config(
            "dist: set exactly one of `theta`, `m1`/`m2`/`p2`, or `sample_file`".into(),
        ));
    }
    if let Some(theta) = d.theta {
        return Ok(ScDistribution::from_theta(theta)
            .map_err(|e| Error::Config(format!("dist.theta: {e}")))?
            .into());
    }
    if two_point_partial {
        let (m1, m2, p2) = match (d.m1, d.m2, d.p2) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(Error::Config(
                    "dist: `m1`, `m2` and `p2` must be set together".into(),
                ))
            }
        };
        return Ok(ScDistribution::new(m1, m2, p2)
            .map_err(|e| Error::Config(format!("dist: {e}")))?
            .into());
    }
    if let Some(file) = d.sample_file {
        let path = if file.is_absolute() {
            file
        } else {
            base.join(file)
        };
        return Ok(ScLaw::Empirical(
            EmpiricalSc::from_file(&path)
                .map_err(|e| Error::Config(format!("dist.sample_file: {e}")))?,
        ));
    }
    Ok(ScDistribution::from_theta(10.0)
        .expect("default theta")
        .into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Config> {
        from_str(s, Path::new("."))
    }

    #[test]
    fn empty_config_gets_all_defaults() {
        let c = parse("").unwrap();
        assert_eq!(
            c.params,
            SystemParams {
                lambda: 1.0,
                pe: 0.2,
                d: 1.0
            }
        );
        let d = c.sc.two_point().unwrap();
        assert_eq!((d.m1, d.m2), (1.0, 20.0));
        assert!(c.policy.is_none());
        assert_eq!(c.sim.cycles, 1_000_000);
        assert_eq!(c.sim.seed, 1);
        assert_eq!(c.optimize.b_max, 12);
        assert_eq!(c.sweep.lambdas.len(), 7);
        assert_eq!(c.sweep.pes.len(), 16);
        assert_eq!(c.sweep.pes[0], 0.05);
        assert_eq!(c.sweep.pes[15], 0.8);
    }

    #[test]
    fn full_config_round_trips() {
        let c = parse(
            r#"
            [params]
            lambda = 2.0
            pe = 0.5
            D = 0.5

            [dist]
            m1 = 1.0
            m2 = 30.0
            p2 = 0.1

            [policy]
            scheme = "prob-nofb"
            W = 9.0
            ptx = 0.4

            [sim]
            cycles = 5000
            seed = 99
            workers = 2

            [optimize]
            b_max = 4
            w_hi = 40.0
            "#,
        )
        .unwrap();
        assert_eq!(c.params.lambda, 2.0);
        assert_eq!(c.sc.two_point().unwrap().m2, 30.0);
        let p = c.policy.unwrap();
        assert_eq!(p.scheme, Scheme::ProbNoFb);
        assert_eq!((p.w, p.ptx, p.b), (9.0, 0.4, 1));
        assert_eq!(c.sim.workers, 2);
        assert_eq!(c.optimize.w_hi, Some(40.0));
    }

    #[test]
    fn infinity_parses_for_the_gate() {
        let c = parse("[policy]\nscheme = \"window-fb\"\nW = inf\n").unwrap();
        assert!(c.policy.unwrap().w.is_infinite());
    }

    #[test]
    fn errors_name_the_offending_key() {
        let e = parse("[params]\nlamda = 1.0\n").unwrap_err();
        assert!(e.to_string().contains("lamda"), "{e}");
        let e = parse("[dist]\ntheta = 10.0\nm1 = 1.0\nm2 = 2.0\np2 = 0.5\n").unwrap_err();
        assert!(e.to_string().contains("theta"), "{e}");
        let e = parse("[dist]\nm1 = 1.0\n").unwrap_err();
        assert!(e.to_string().contains("p2"), "{e}");
        let e = parse("[policy]\nscheme = \"windowed\"\n").unwrap_err();
        assert!(e.to_string().contains("windowed"), "{e}");
        let e = parse("[dist]\nsample_file = \"does-not-exist.txt\"\n").unwrap_err();
        assert!(e.to_string().contains("sample_file"), "{e}");
        let e = parse("[dist]\ntheta = -3.0\n").unwrap_err();
        assert!(e.to_string().contains("theta"), "{e}");
    }

    #[test]
    fn sample_file_resolves_relative_to_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("sc.txt"), "1.0\n# comment\n\n2.5\n").unwrap();
        let c = from_str("[dist]\nsample_file = \"sc.txt\"\n", dir.path()).unwrap();
        match c.sc {
            ScLaw::Empirical(e) => assert_eq!(e.values(), &[1.0, 2.5]),
            _ => panic!("expected empirical law"),
        }
    }

    #[test]
    fn overrides_apply_and_validate() {
        let mut c = parse("").unwrap();
        let ov = Overrides {
            lambda: Some(2.0),
            theta: Some(0.0),
            scheme: Some(Scheme::WindowFb),
            w: Some(7.0),
            b: Some(2),
            cycles: Some(123),
            ..Default::default()
        };
        c.apply(&ov).unwrap();
        assert_eq!(c.params.lambda, 2.0);
        assert_eq!(c.sc.two_point().unwrap().m2, 10.0);
        let p = c.policy.unwrap();
        assert_eq!(p.to_spec(), PolicySpec::WindowFb { w: 7.0, b: 2 });
        assert_eq!(c.sim.cycles, 123);

        let mut c = parse("").unwrap();
        let e = c
            .apply(&Overrides {
                pe: Some(1.5),
                ..Default::default()
            })
            .unwrap_err();
        assert!(e.to_string().contains("pe"), "{e}");
        let mut c = parse("").unwrap();
        let e = c
            .apply(&Overrides {
                w: Some(8.0),
                ..Default::default()
            })
            .unwrap_err();
        assert!(e.to_string().contains("scheme"), "{e}");
    }
}
