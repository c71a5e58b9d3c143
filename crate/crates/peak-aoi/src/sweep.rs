//! Figure-style sweeps: per swept value, tune all six schemes and verify
//! each closed form against the simulator; rows come out in a fixed order
//! and serialize to CSV byte-identically for a given config and seed.

use std::io::Write;

use rayon::prelude::*;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::model::{PolicySpec, ScDistribution, ScLaw, Scheme, SystemParams};
use crate::optimizer::{self, OptResult};
use crate::simulator::simulate_parallel_budget;

/// Which knob a sweep varies. `VarC` sweeps `theta`, the service-time
/// variance knob of the two-point family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepVar {
    Lambda,
    Pe,
    VarC,
}

impl SweepVar {
    pub fn parse(s: &str) -> Option<SweepVar> {
        match s {
            "lambda" => Some(SweepVar::Lambda),
            "pe" => Some(SweepVar::Pe),
            "varc" => Some(SweepVar::VarC),
            _ => None,
        }
    }

    /// Name used in the `sweep_var` CSV column.
    pub fn column(self) -> &'static str {
        match self {
            SweepVar::Lambda => "lambda",
            SweepVar::Pe => "pe",
            SweepVar::VarC => "theta",
        }
    }

    fn grid(self, cfg: &Config) -> Vec<f64> {
        match self {
            SweepVar::Lambda => cfg.sweep.lambdas.clone(),
            SweepVar::Pe => cfg.sweep.pes.clone(),
            SweepVar::VarC => cfg.sweep.thetas.clone(),
        }
    }
}

/// Agreement verdict for one row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Simulation matched the closed form within tolerance.
    Ok,
    /// Simulation and closed form disagree beyond tolerance.
    Mismatch,
    /// No closed form exists for this scheme (or the law is empirical).
    SimOnly,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Ok => "ok",
            Verdict::Mismatch => "mismatch",
            Verdict::SimOnly => "sim-only",
        }
    }
}

/// Whether a simulated estimate agrees with a closed-form value:
/// `|sim - analytic| <= max(3 stderr, 0.5% analytic)`.
pub fn agree(analytic: f64, sim: f64, stderr: f64) -> bool {
    (sim - analytic).abs() <= (3.0 * stderr).max(0.005 * analytic.abs())
}

/// One CSV row: a tuned policy at one swept value, with its closed-form
/// value (when one exists) and its simulated estimate.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub sweep_var: &'static str,
    /// Empty in the CSV when the row does not belong to a sweep.
    pub sweep_value: Option<f64>,
    pub policy: PolicySpec,
    pub analytic: Option<f64>,
    pub sim: f64,
    pub stderr: f64,
    pub n_cycles: u64,
    pub seed: u64,
    pub verdict: Verdict,
}

/// One step of the splitmix64 sequence; used to derive independent per-row
/// seeds from (base seed, point index, scheme index).
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn row_seed(base: u64, point: usize, scheme: usize) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(point as u64)) ^ scheme as u64)
}

/// Runs a full sweep: for every value of the swept variable, tunes each of
/// the six schemes and simulates the winner. Points run as independent jobs
/// on a pool of `sim.workers` threads; the row order is fixed by the grid
/// and scheme order, never by scheduling.
pub fn run_sweep(var: SweepVar, cfg: &Config) -> Result<Vec<SweepRow>> {
    let dist = *cfg.sc.two_point().ok_or_else(|| {
        Error::Config(
            "sweeps tune closed forms, which need a two-point dist (`theta` or `m1`/`m2`/`p2`)"
                .into(),
        )
    })?;
    cfg.params.check()?;
    let grid = var.grid(cfg);

    let jobs: Vec<(usize, f64)> = grid.iter().copied().enumerate().collect();
    let point = |&(i, v): &(usize, f64)| point_rows(var, i, v, cfg, &dist);
    let per_point: Result<Vec<Vec<SweepRow>>> = if cfg.sim.workers == 1 {
        jobs.iter().map(point).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.sim.workers)
            .build()
            .map_err(|e| Error::InvalidParam(format!("worker pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(point).collect())
    };
    Ok(per_point?.into_iter().flatten().collect())
}

fn point_rows(
    var: SweepVar,
    index: usize,
    value: f64,
    cfg: &Config,
    dist: &ScDistribution,
) -> Result<Vec<SweepRow>> {
    let mut params = cfg.params;
    let mut dist = *dist;
    match var {
        SweepVar::Lambda => params.lambda = value,
        SweepVar::Pe => params.pe = value,
        SweepVar::VarC => dist = ScDistribution::from_theta(value)?,
    }
    params.check()?;
    let sc: ScLaw = dist.into();
    let w_range = (
        cfg.optimize.w_lo,
        cfg.optimize
            .w_hi
            .unwrap_or_else(|| optimizer::default_w_hi(&params, &sc)),
    );

    let mut rows = Vec::with_capacity(Scheme::ALL.len());
    for (k, scheme) in Scheme::ALL.into_iter().enumerate() {
        let seed = row_seed(cfg.sim.seed, index, k);
        let row = match scheme {
            Scheme::ThresholdFb | Scheme::ThresholdNoFb => {
                let opt = optimizer::best_threshold_sim(
                    &params,
                    &sc,
                    scheme.feedback(),
                    w_range,
                    cfg.sim.cycles,
                    seed,
                    1,
                    cfg.optimize.sim_w_tol,
                )?;
                SweepRow {
                    sweep_var: var.column(),
                    sweep_value: Some(value),
                    policy: opt.best,
                    analytic: None,
                    sim: opt.value,
                    stderr: opt.stderr,
                    n_cycles: cfg.sim.cycles,
                    seed,
                    verdict: Verdict::SimOnly,
                }
            }
            _ => {
                let opt = tune_closed_form(scheme, &params, &dist, w_range, cfg)?;
                let est = simulate_parallel_budget(
                    &opt.best,
                    &params,
                    &sc,
                    cfg.sim.cycles,
                    seed,
                    1,
                    cfg.sim.event_budget,
                )?;
                let verdict = if agree(opt.value, est.mean, est.stderr) {
                    Verdict::Ok
                } else {
                    Verdict::Mismatch
                };
                SweepRow {
                    sweep_var: var.column(),
                    sweep_value: Some(value),
                    policy: opt.best,
                    analytic: Some(opt.value),
                    sim: est.mean,
                    stderr: est.stderr,
                    n_cycles: est.n_cycles,
                    seed,
                    verdict,
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

fn tune_closed_form(
    scheme: Scheme,
    params: &SystemParams,
    dist: &ScDistribution,
    w_range: (f64, f64),
    cfg: &Config,
) -> Result<OptResult> {
    match scheme {
        Scheme::WindowFb | Scheme::WindowNoFb => optimizer::best_window(
            params,
            dist,
            scheme.feedback(),
            w_range,
            cfg.optimize.b_max,
            cfg.optimize.w_tol,
        ),
        Scheme::ProbFb | Scheme::ProbNoFb => optimizer::best_prob(
            params,
            dist,
            scheme.feedback(),
            w_range,
            cfg.optimize.ptx_resolution,
            cfg.optimize.w_tol,
        ),
        _ => unreachable!("threshold schemes are simulated"),
    }
}

/// Writes rows as CSV with the fixed column set
/// `sweep_var,sweep_value,scheme,W,B,pTx,analytic,sim,stderr,n_cycles,seed,verdict`.
/// Numbers use shortest round-trip formatting; inapplicable cells are empty.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sweep_var",
        "sweep_value",
        "scheme",
        "W",
        "B",
        "pTx",
        "analytic",
        "sim",
        "stderr",
        "n_cycles",
        "seed",
        "verdict",
    ])?;
    let num = |x: f64| x.to_string();
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.sweep_var.to_string(),
            opt(r.sweep_value),
            r.policy.scheme().name().to_string(),
            num(r.policy.w()),
            r.policy.b().map(|b| b.to_string()).unwrap_or_default(),
            opt(r.policy.p_tx()),
            opt(r.analytic),
            num(r.sim),
            num(r.stderr),
            r.n_cycles.to_string(),
            r.seed.to_string(),
            r.verdict.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
