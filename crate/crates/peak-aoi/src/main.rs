//! Thin command-line front end over the library: evaluate one policy,
//! tune a scheme, or emit a CSV sweep.
//!
//! Exit codes: 0 success/agreement, 1 usage or validation error, 2 when a
//! requested check disagreed (closed form vs simulation, or a failed
//! fixed-point check).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use peak_aoi::analytic::{
    peak_aoi_prob_fb, peak_aoi_prob_nofb, peak_aoi_window_fb, peak_aoi_window_nofb,
    threshold_fixed_point_value,
};
use peak_aoi::config::{self, Config, Overrides};
use peak_aoi::model::{PolicySpec, ScLaw, Scheme, SystemParams};
use peak_aoi::optimizer::{self, OptResult};
use peak_aoi::simulator::{
    simulate_chunked_with, simulate_parallel_budget, CycleRecord, SimObserver,
};
use peak_aoi::sweep::{self, SweepRow, SweepVar, Verdict};
use peak_aoi::{validate, Error, Result};

#[derive(Parser)]
#[command(
    name = "peak-aoi",
    version,
    about = "Average peak age of information for an energy-harvesting status updater",
    long_about = "Evaluates, simulates and tunes retransmission policies for a sensing node \
                  that harvests one operation's worth of energy at a time and reports over an \
                  erasure channel. Configuration comes from a TOML file (--config) with every \
                  value overridable from the flags below; see the README for the schema."
)]
struct Cli {
    /// TOML config file; defaults apply when omitted
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base RNG seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Renewal cycles per simulation
    #[arg(long, global = true)]
    cycles: Option<u64>,
    /// Worker threads (also: PEAK_AOI_WORKERS env var)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write the result CSV here (atomically)
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Energy arrival rate
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Erasure probability, 0 <= pe < 1
    #[arg(long, global = true)]
    pe: Option<f64>,
    /// Transmission airtime
    #[arg(long = "D", global = true)]
    d: Option<f64>,
    /// Service-time variance knob of the two-point family
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Scheme name: threshold-|window-|prob- followed by fb|nofb
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// Age gate ("inf" allowed where the scheme permits)
    #[arg(long = "W", global = true)]
    w: Option<f64>,
    /// Attempt budget of the window schemes
    #[arg(long = "B", global = true)]
    b: Option<u32>,
    /// Transmit probability of the coin-flip schemes
    #[arg(long, global = true)]
    ptx: Option<f64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate one policy: closed form (when available) vs simulation
    Eval {
        /// Write per-cycle records (cycle_index,Y,S,...) to this CSV
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
    },
    /// Tune a scheme's parameters for the smallest average peak AoI
    Optimize {
        /// Scheme to tune (may also come from --scheme or the config)
        #[arg(id = "SCHEME")]
        scheme_arg: Option<String>,
        /// Print every probed candidate
        #[arg(short, long)]
        verbose: bool,
    },
    /// Sweep lambda, pe, or varc (service-time variance) and write CSV rows
    Sweep {
        /// One of: lambda, pe, varc
        figure: String,
    },
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn parse_scheme(s: &str) -> Result<Scheme> {
    Scheme::parse(s).ok_or_else(|| {
        Error::InvalidParam(format!(
            "unknown scheme {s:?} (expected one of {})",
            Scheme::ALL.map(|k| k.name()).join(", ")
        ))
    })
}

fn dispatch(cli: Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => Config::default(),
    };
    let ov = Overrides {
        lambda: cli.lambda,
        pe: cli.pe,
        d: cli.d,
        theta: cli.theta,
        scheme: cli.scheme.as_deref().map(parse_scheme).transpose()?,
        w: cli.w,
        b: cli.b,
        ptx: cli.ptx,
        cycles: cli.cycles,
        seed: cli.seed,
        workers: cli.workers,
    };
    cfg.apply(&ov)?;

    match cli.cmd {
        Cmd::Eval { trace } => cmd_eval(&cfg, cli.out.as_deref(), trace.as_deref()),
        Cmd::Optimize {
            scheme_arg,
            verbose,
        } => {
            let scheme = match scheme_arg {
                Some(s) => parse_scheme(&s)?,
                None => cfg
                    .policy
                    .map(|p| p.scheme)
                    .ok_or_else(|| Error::Config("optimize needs a scheme: pass one as an argument, via --scheme, or in [policy]".into()))?,
            };
            cmd_optimize(&cfg, scheme, verbose, cli.out.as_deref())
        }
        Cmd::Sweep { figure } => {
            let var = SweepVar::parse(&figure).ok_or_else(|| {
                Error::InvalidParam(format!(
                    "unknown sweep figure {figure:?} (expected lambda, pe, or varc)"
                ))
            })?;
            cmd_sweep(&cfg, var, cli.out.as_deref())
        }
    }
}

fn describe_service(sc: &ScLaw) -> String {
    match sc {
        ScLaw::TwoPoint(d) => format!("two-point m1={} m2={} p2={}", d.m1, d.m2, d.p2),
        ScLaw::Empirical(e) => format!(
            "empirical n={} mean={} min={} max={}",
            e.values().len(),
            e.mean(),
            e.min(),
            e.max()
        ),
    }
}

fn closed_form(policy: &PolicySpec, params: &SystemParams, sc: &ScLaw) -> Result<Option<f64>> {
    let Some(dist) = sc.two_point() else {
        return Ok(None);
    };
    let v = match *policy {
        PolicySpec::WindowFb { w, b } => Some(peak_aoi_window_fb(params, dist, w, b)?),
        PolicySpec::WindowNoFb { w, b } => Some(peak_aoi_window_nofb(params, dist, w, b)?),
        PolicySpec::ProbFb { w, p_tx } => Some(peak_aoi_prob_fb(params, dist, w, p_tx)?),
        PolicySpec::ProbNoFb { w, p_tx } => Some(peak_aoi_prob_nofb(params, dist, w, p_tx)?),
        PolicySpec::ThresholdFb { .. } | PolicySpec::ThresholdNoFb { .. } => None,
    };
    Ok(v)
}

struct TraceObs<W: Write> {
    out: W,
    err: Option<io::Error>,
}

impl<W: Write> SimObserver for TraceObs<W> {
    fn on_cycle(&mut self, r: &CycleRecord) {
        if self.err.is_some() {
            return;
        }
        if let Err(e) = writeln!(
            self.out,
            "{},{},{},{},{},{}",
            r.cycle_index, r.y, r.s, r.n_generations, r.n_transmissions, r.t_ext
        ) {
            self.err = Some(e);
        }
    }
}

fn cmd_eval(cfg: &Config, out: Option<&Path>, trace: Option<&Path>) -> Result<i32> {
    let choice = cfg.policy.ok_or_else(|| {
        Error::Config("eval needs a policy: set [policy] in the config or pass --scheme".into())
    })?;
    let policy = choice.to_spec();
    validate(&cfg.params, &cfg.sc, &policy)?;

    println!("policy    {policy}");
    println!(
        "params    lambda={} pe={} D={}",
        cfg.params.lambda, cfg.params.pe, cfg.params.d
    );
    println!("service   {}", describe_service(&cfg.sc));

    let analytic = closed_form(&policy, &cfg.params, &cfg.sc)?;
    match analytic {
        Some(v) => println!("analytic  {v}"),
        None => println!("analytic  n/a (simulation-only)"),
    }

    let est = match trace {
        None => simulate_parallel_budget(
            &policy,
            &cfg.params,
            &cfg.sc,
            cfg.sim.cycles,
            cfg.sim.seed,
            cfg.sim.workers,
            cfg.sim.event_budget,
        )?,
        Some(path) => write_atomic(path, |file| {
            writeln!(file, "cycle_index,Y,S,n_generations,n_transmissions,t_ext")?;
            let mut obs = TraceObs {
                out: file,
                err: None,
            };
            let est = simulate_chunked_with(
                &policy,
                &cfg.params,
                &cfg.sc,
                cfg.sim.cycles,
                cfg.sim.seed,
                cfg.sim.event_budget,
                &mut obs,
            )?;
            if let Some(e) = obs.err {
                return Err(e.into());
            }
            Ok(est)
        })?,
    };
    println!(
        "sim       {} +/- {}  ({} cycles, seed {})",
        est.mean, est.stderr, est.n_cycles, est.seed
    );

    let verdict = match analytic {
        Some(v) if sweep::agree(v, est.mean, est.stderr) => Verdict::Ok,
        Some(_) => Verdict::Mismatch,
        None => Verdict::SimOnly,
    };
    println!("verdict   {}", verdict.as_str());

    if let Some(path) = out {
        let row = SweepRow {
            sweep_var: "eval",
            sweep_value: None,
            policy,
            analytic,
            sim: est.mean,
            stderr: est.stderr,
            n_cycles: est.n_cycles,
            seed: est.seed,
            verdict,
        };
        write_atomic(path, |file| {
            sweep::write_csv(std::slice::from_ref(&row), file)
        })?;
    }
    Ok(if verdict == Verdict::Mismatch { 2 } else { 0 })
}

fn cmd_optimize(cfg: &Config, scheme: Scheme, verbose: bool, out: Option<&Path>) -> Result<i32> {
    println!(
        "optimize  {scheme}  lambda={} pe={} D={}",
        cfg.params.lambda, cfg.params.pe, cfg.params.d
    );
    let w_range = (
        cfg.optimize.w_lo,
        cfg.optimize
            .w_hi
            .unwrap_or_else(|| optimizer::default_w_hi(&cfg.params, &cfg.sc)),
    );

    let needs_two_point = || {
        cfg.sc.two_point().copied().ok_or_else(|| {
            Error::Config(
                "closed-form tuning needs a two-point dist (`theta` or `m1`/`m2`/`p2`)".into(),
            )
        })
    };

    let opt: OptResult = match scheme {
        Scheme::ThresholdFb | Scheme::ThresholdNoFb => optimizer::best_threshold_sim(
            &cfg.params,
            &cfg.sc,
            scheme.feedback(),
            w_range,
            cfg.sim.cycles,
            cfg.sim.seed,
            cfg.sim.workers,
            cfg.optimize.sim_w_tol,
        )?,
        Scheme::WindowFb | Scheme::WindowNoFb => optimizer::best_window(
            &cfg.params,
            &needs_two_point()?,
            scheme.feedback(),
            w_range,
            cfg.optimize.b_max,
            cfg.optimize.w_tol,
        )?,
        Scheme::ProbFb | Scheme::ProbNoFb => optimizer::best_prob(
            &cfg.params,
            &needs_two_point()?,
            scheme.feedback(),
            w_range,
            cfg.optimize.ptx_resolution,
            cfg.optimize.w_tol,
        )?,
    };

    if verbose {
        for (p, v) in &opt.trace {
            println!("  probe  {p}  ->  {v}");
        }
    }
    println!("best      {}", opt.best);

    let mut code = 0;
    let row;
    if scheme.has_closed_form() {
        println!("analytic  {}", opt.value);
        let est = simulate_parallel_budget(
            &opt.best,
            &cfg.params,
            &cfg.sc,
            cfg.sim.cycles,
            cfg.sim.seed,
            cfg.sim.workers,
            cfg.sim.event_budget,
        )?;
        println!(
            "sim       {} +/- {}  ({} cycles, seed {})",
            est.mean, est.stderr, est.n_cycles, est.seed
        );
        let verdict = if sweep::agree(opt.value, est.mean, est.stderr) {
            Verdict::Ok
        } else {
            code = 2;
            Verdict::Mismatch
        };
        println!("verdict   {}", verdict.as_str());
        row = SweepRow {
            sweep_var: "optimize",
            sweep_value: None,
            policy: opt.best,
            analytic: Some(opt.value),
            sim: est.mean,
            stderr: est.stderr,
            n_cycles: est.n_cycles,
            seed: est.seed,
            verdict,
        };
    } else {
        println!(
            "sim       {} +/- {}  ({} cycles, seed {})",
            opt.value, opt.stderr, cfg.sim.cycles, cfg.sim.seed
        );
        if scheme == Scheme::ThresholdFb {
            let line = threshold_fixed_point_value(&cfg.params, opt.best.w());
            let residual = optimizer::fixed_point_residual(&cfg.params, &opt)?;
            let bound = 3.0 * opt.stderr + cfg.optimize.sim_w_tol;
            let pass = residual <= bound;
            println!(
                "fixed-point line {line}  residual {residual}  bound {bound}  {}",
                if pass { "PASS" } else { "FAIL" }
            );
            if !pass {
                code = 2;
            }
        }
        row = SweepRow {
            sweep_var: "optimize",
            sweep_value: None,
            policy: opt.best,
            analytic: None,
            sim: opt.value,
            stderr: opt.stderr,
            n_cycles: cfg.sim.cycles,
            seed: cfg.sim.seed,
            verdict: Verdict::SimOnly,
        };
    }
    println!("evaluations {}", opt.evaluations);

    if let Some(path) = out {
        write_atomic(path, |file| {
            sweep::write_csv(std::slice::from_ref(&row), file)
        })?;
    }
    Ok(code)
}

fn cmd_sweep(cfg: &Config, var: SweepVar, out: Option<&Path>) -> Result<i32> {
    let rows = sweep::run_sweep(var, cfg)?;
    match out {
        Some(path) => write_atomic(path, |file| sweep::write_csv(&rows, file))?,
        None => sweep::write_csv(&rows, io::stdout().lock())?,
    }
    let mismatches = rows
        .iter()
        .filter(|r| r.verdict == Verdict::Mismatch)
        .count();
    if mismatches > 0 {
        eprintln!("{mismatches} row(s) disagree beyond tolerance");
        return Ok(2);
    }
    Ok(0)
}

/// Writes through a `.tmp` sibling and renames into place, so a failed run
/// never leaves a partial file behind.
fn write_atomic<T>(
    path: &Path,
    body: impl FnOnce(&mut io::BufWriter<fs::File>) -> Result<T>,
) -> Result<T> {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    let result = (|| {
        let mut file = io::BufWriter::new(fs::File::create(&tmp)?);
        let value = body(&mut file)?;
        file.flush()?;
        Ok(value)
    })();
    match result {
        Ok(value) => {
            fs::rename(&tmp, path)?;
            Ok(value)
        }
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

// Keep clap's derive honest: `debug_assert` catches malformed flag wiring.
#[test]
fn cli_definition_is_consistent() {
    use clap::CommandFactory;
    Cli::command().debug_assert();
}
