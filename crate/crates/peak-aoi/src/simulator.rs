//! Event-driven renewal-cycle Monte-Carlo engine.
//!
//! The engine walks the node's life as a sequence of update handlings. Each
//! update is: optionally wait for a recharge (if no energy is banked), sense
//! for `C`, then rounds of "wait for a recharge, decide, maybe transmit"
//! until the policy releases the update. Releasing always happens at a
//! decision epoch, so the energy in hand immediately funds the next sensing
//! operation; an abandoned update therefore costs `C + I`, not `C + 2I`.
//!
//! Deliveries are successful transmissions that carry a fresher timestamp
//! than the receiver already holds. Peaks are measured from timestamps:
//! the peak before delivery `i+1` is `S_i + Y_{i+1}`, with `S_i` the age of
//! update `i` when it arrived and `Y_{i+1}` the gap between deliveries. The
//! first delivery only primes `S_0` and is never measured, so every recorded
//! peak is a clean stationary sample even without feedback, where the
//! transmitter keeps spending attempts on an already-delivered update
//! (reported as `t_ext`) before its own rule releases it.
//!
//! # Reproducibility
//!
//! All randomness comes from ChaCha8 keyed by the caller's seed. Every
//! simulated update draws from its own ChaCha8 stream,
//! `stream = chunk_index << 40 | update_index`, so results never depend on
//! scheduling, and two runs that differ only in a policy knob share draws
//! update-for-update (useful for common-random-number searches).
//! [`simulate_parallel`] splits the requested cycles into fixed chunks of
//! [`CHUNK_CYCLES`] regardless of worker count and folds per-chunk sums in
//! chunk order, so any worker count produces bit-identical estimates.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{validate, PolicySpec, ScLaw, SystemParams};
use crate::rng::{exponential, unit53};

/// Cycles simulated per chunk by the chunked runners. Fixed so that the
/// chunk layout, and therefore every estimate, is independent of the worker
/// count.
pub const CHUNK_CYCLES: u64 = 16_384;

/// Default cap on events (recharges, sensings, transmissions) within one
/// cycle before the engine gives up with [`Error::CycleOverflow`].
pub const DEFAULT_EVENT_BUDGET: u64 = 1_000_000;

const UPDATE_STREAM_BITS: u32 = 40;

/// One measured renewal cycle, keyed by the delivery that closes it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleRecord {
    /// 1-based index of the measured cycle.
    pub cycle_index: u64,
    /// Time between this delivery and the previous one.
    pub y: f64,
    /// Delivery time minus the delivered update's generation timestamp.
    pub s: f64,
    /// Updates generated during the cycle (the delivered one included).
    pub n_generations: u32,
    /// Transmission attempts spent on this cycle's updates, including
    /// attempts made after the (unobserved) delivery in no-feedback modes.
    pub n_transmissions: u32,
    /// Time the transmitter kept the delivered update after its delivery,
    /// net of the one recharge that carries over to the next update.
    /// Always 0 with feedback.
    pub t_ext: f64,
}

/// Sample-mean estimate of the average peak AoI.
///
/// `mean` averages the measured peaks `S_i + Y_{i+1}`; `mean_s` and `mean_y`
/// average the two components over the same pairs, so `mean = mean_s +
/// mean_y` up to float rounding. `stderr` is the sample standard deviation
/// of the peaks divided by `sqrt(n_cycles)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakAoiEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_cycles: u64,
    pub seed: u64,
    pub mean_y: f64,
    pub mean_s: f64,
}

/// Per-update observation handed to [`SimObserver::on_update`].
#[derive(Clone, Copy, Debug)]
pub struct UpdateRecord {
    /// Age `C + I` at the update's first decision epoch.
    pub initial_age: f64,
    /// Whether the initial age passed the gate (`C + I <= W`).
    pub committed: bool,
    /// Transmission attempts spent on the update in total.
    pub attempts: u32,
    /// Attempt number of the first success, if any.
    pub attempts_to_success: Option<u32>,
    /// Whether the update reached the receiver.
    pub delivered: bool,
    /// Generation-to-release span, except for delivered updates where it is
    /// the generation-to-first-success span (the renewal `A` term).
    pub handling: f64,
}

/// Hooks for tests and traces. All methods default to no-ops.
///
/// Order per update: zero or more earlier `on_delivery` calls, then
/// `on_update` at its release; `on_cycle` follows the `on_update` of the
/// delivered update that closes the measured cycle.
pub trait SimObserver {
    fn on_update(&mut self, _u: &UpdateRecord) {}
    fn on_cycle(&mut self, _rec: &CycleRecord) {}
    fn on_delivery(&mut self, _t: f64, _gen: f64) {}
}

/// Observer that ignores everything.
pub struct NoObserver;
impl SimObserver for NoObserver {}

#[derive(Clone, Copy, Default)]
struct ChunkSums {
    n: u64,
    sum_peak: f64,
    sum_sq: f64,
    sum_s: f64,
    sum_y: f64,
}

impl ChunkSums {
    fn merge(mut self, other: &ChunkSums) -> ChunkSums {
        self.n += other.n;
        self.sum_peak += other.sum_peak;
        self.sum_sq += other.sum_sq;
        self.sum_s += other.sum_s;
        self.sum_y += other.sum_y;
        self
    }

    fn estimate(&self, seed: u64) -> PeakAoiEstimate {
        let n = self.n as f64;
        let mean = self.sum_peak / n;
        let var = if self.n >= 2 {
            ((self.sum_sq - self.sum_peak * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        PeakAoiEstimate {
            mean,
            stderr: (var / n).sqrt(),
            n_cycles: self.n,
            seed,
            mean_y: self.sum_y / n,
            mean_s: self.sum_s / n,
        }
    }
}

#[inline]
fn bump(events: &mut u64, budget: u64) -> Result<()> {
    *events += 1;
    if *events > budget {
        Err(Error::CycleOverflow { budget })
    } else {
        Ok(())
    }
}

/// Runs one chunk: `n_peaks` measured cycles drawn from the streams of
/// `chunk_index`. Record indices are offset by `index_offset`.
#[allow(clippy::too_many_arguments)]
fn run_chunk<O: SimObserver>(
    policy: &PolicySpec,
    params: &SystemParams,
    sc: &ScLaw,
    n_peaks: u64,
    seed: u64,
    chunk_index: u64,
    index_offset: u64,
    budget: u64,
    obs: &mut O,
) -> Result<ChunkSums> {
    let lambda = params.lambda;
    let pe = params.pe;
    let d = params.d;
    let gate_w = policy.w();
    let fb = policy.feedback();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sums = ChunkSums::default();

    let mut now = 0.0_f64;
    let mut have_energy = false;
    let mut update_idx: u64 = 0;
    let mut deliveries: u64 = 0;
    let mut last_t = 0.0_f64;
    let mut last_gen = 0.0_f64;
    let mut pending_s = 0.0_f64;
    let mut pending_rec: Option<CycleRecord> = None;
    let mut events: u64 = 0;
    let mut cycle_gens: u32 = 0;
    let mut cycle_txs: u32 = 0;

    'updates: loop {
        update_idx += 1;
        if update_idx >= 1 << UPDATE_STREAM_BITS {
            return Err(Error::InvalidParam(
                "update stream space exhausted; request fewer cycles per run".into(),
            ));
        }
        rng.set_stream((chunk_index << UPDATE_STREAM_BITS) | update_idx);
        rng.set_word_pos(0);

        if !have_energy {
            now += exponential(&mut rng, lambda);
            bump(&mut events, budget)?;
        }
        let g = now;
        now += sc.sample(&mut rng);
        // Sensing consumes the banked unit; the decision loop below re-banks
        // `have_energy` at every recharge before anyone reads it again.
        bump(&mut events, budget)?;
        cycle_gens = cycle_gens.saturating_add(1);

        let mut attempts: u32 = 0;
        let mut initial_age = 0.0_f64;
        let mut committed = false;
        let mut success_t: Option<f64> = None;
        let mut attempts_to_success: Option<u32> = None;
        let mut ext_deduct = 0.0_f64;
        let mut waiting_ext_deduct = false;

        let release_t = loop {
            // Wait for the next energy arrival, then decide at that epoch.
            let recharge = exponential(&mut rng, lambda);
            now += recharge;
            have_energy = true;
            bump(&mut events, budget)?;
            if waiting_ext_deduct {
                // First recharge after the delivery: it carries over to the
                // next update, so it is not part of t_ext.
                ext_deduct = recharge;
                waiting_ext_deduct = false;
            }
            let age = now - g;
            if attempts == 0 {
                initial_age = age;
                committed = age <= gate_w;
            }
            let transmit = match *policy {
                PolicySpec::ThresholdFb { w } | PolicySpec::ThresholdNoFb { w } => age <= w,
                PolicySpec::WindowFb { w, b } | PolicySpec::WindowNoFb { w, b } => {
                    if attempts == 0 {
                        age <= w
                    } else {
                        attempts < b
                    }
                }
                PolicySpec::ProbFb { w, p_tx } | PolicySpec::ProbNoFb { w, p_tx } => {
                    if attempts == 0 && age > w {
                        false
                    } else {
                        unit53(&mut rng) < p_tx
                    }
                }
            };
            if !transmit {
                // Release at this decision epoch; the banked energy funds
                // the next sensing directly.
                break now;
            }

            now += d;
            have_energy = false;
            attempts += 1;
            cycle_txs = cycle_txs.saturating_add(1);
            bump(&mut events, budget)?;
            let erased = unit53(&mut rng) < pe;
            if !erased && success_t.is_none() {
                // First success of this update: its timestamp is fresher
                // than anything delivered before, so the receiver resets.
                success_t = Some(now);
                attempts_to_success = Some(attempts);
                deliveries += 1;
                debug_assert!(deliveries == 1 || g > last_gen);
                let s = now - g;
                if deliveries >= 2 {
                    let y = now - last_t;
                    let peak = pending_s + y;
                    sums.n += 1;
                    sums.sum_peak += peak;
                    sums.sum_sq += peak * peak;
                    sums.sum_s += pending_s;
                    sums.sum_y += y;
                    pending_rec = Some(CycleRecord {
                        cycle_index: index_offset + deliveries - 1,
                        y,
                        s,
                        n_generations: 0,
                        n_transmissions: 0,
                        t_ext: 0.0,
                    });
                }
                obs.on_delivery(now, g);
                pending_s = s;
                last_t = now;
                last_gen = g;
                events = 0;
                if fb {
                    break now;
                }
                waiting_ext_deduct = true;
            }
        };

        let delivered = success_t.is_some();
        obs.on_update(&UpdateRecord {
            initial_age,
            committed,
            attempts,
            attempts_to_success,
            delivered,
            handling: match success_t {
                Some(ts) => ts - g,
                None => release_t - g,
            },
        });
        if delivered {
            if let Some(mut rec) = pending_rec.take() {
                rec.n_generations = cycle_gens;
                rec.n_transmissions = cycle_txs;
                rec.t_ext = if fb {
                    0.0
                } else {
                    (release_t - success_t.unwrap() - ext_deduct).max(0.0)
                };
                obs.on_cycle(&rec);
            }
            cycle_gens = 0;
            cycle_txs = 0;
            if deliveries == n_peaks + 1 {
                break 'updates;
            }
        }
    }

    Ok(sums)
}

fn check_run(n_cycles: u64, n_workers: usize) -> Result<()> {
    if n_cycles == 0 {
        return Err(Error::InvalidParam("n_cycles must be >= 1".into()));
    }
    if n_workers == 0 {
        return Err(Error::InvalidParam("n_workers must be >= 1".into()));
    }
    Ok(())
}

/// Single-stream run with the default event budget.
pub fn simulate(
    policy: &PolicySpec,
    params: &SystemParams,
    sc: &ScLaw,
    n_cycles: u64,
    seed: u64,
) -> Result<PeakAoiEstimate> {
    simulate_with(
        policy,
        params,
        sc,
        n_cycles,
        seed,
        DEFAULT_EVENT_BUDGET,
        &mut NoObserver,
    )
}

/// Single-stream run with an explicit event budget and observer.
pub fn simulate_with<O: SimObserver>(
    policy: &PolicySpec,
    params: &SystemParams,
    sc: &ScLaw,
    n_cycles: u64,
    seed: u64,
    budget: u64,
    obs: &mut O,
) -> Result<PeakAoiEstimate> {
    validate(params, sc, policy)?;
    check_run(n_cycles, 1)?;
    let sums = run_chunk(policy, params, sc, n_cycles, seed, 0, 0, budget, obs)?;
    Ok(sums.estimate(seed))
}

/// Single-stream run that also returns every measured [`CycleRecord`].
pub fn simulate_trace(
    policy: &PolicySpec,
    params: &SystemParams,
    sc: &ScLaw,
    n_cycles: u64,
    seed: u64,
) -> Result<(PeakAoiEstimate, Vec<CycleRecord>)> {
    struct Collect(Vec<CycleRecord>);
    impl SimObserver for Collect {
        fn on_cycle(&mut self, rec: &CycleRecord) {
            self.0.push(*rec);
        }
    }
    let mut c = Collect(Vec::with_capacity(n_cycles as usize));
    let est = simulate_with(
        policy,
        params,
        sc,
        n_cycles,
        seed,
        DEFAULT_EVENT_BUDGET,
        &mut c,
    )?;
    Ok((est, c.0))
}

fn chunk_layout(n_cycles: u64) -> Result<Vec<(u64, u64)>> {
    let n_chunks = n_cycles.div_ceil(CHUNK_CYCLES);
    if n_chunks >= 1 << (64 - UPDATE_STREAM_BITS) {
        return Err(Error::InvalidParam(
            "n_cycles too large for the stream layout".into(),
        ));
    }
    Ok((0..n_chunks)
        .map(|k| (k, CHUNK_CYCLES.min(n_cycles - k * CHUNK_CYCLES)))
        .collect())
}

/// Chunked run spread over `n_workers` threads.
///
/// The chunk layout and the merge order are fixed by `n_cycles` alone, so
/// the estimate is bit-identical for every `n_workers >= 1`.
pub fn simulate_parallel(
    policy: &PolicySpec,
    params: &SystemParams,
    sc: &ScLaw,
    n_cycles: u64,
    seed: u64,
    n_workers: usize,
) -> Result<PeakAoiEstimate> {
    simulate_parallel_budget(
        policy,
        params,
        sc,
        n_cycles,
        seed,
        n_workers,
        DEFAULT_EVENT_BUDGET,
    )
}

/// [`simulate_parallel`] with an explicit event budget.
pub fn simulate_parallel_budget(
    policy: &PolicySpec,
    params: &SystemParams,
    sc: &ScLaw,
    n_cycles: u64,
    seed: u64,
    n_workers: usize,
    budget: u64,
) -> Result<PeakAoiEstimate> {
    validate(params, sc, policy)?;
    check_run(n_cycles, n_workers)?;
    let chunks = chunk_layout(n_cycles)?;
    let job = |&(k, cnt): &(u64, u64)| {
        run_chunk(
            policy,
            params,
            sc,
            cnt,
            seed,
            k,
            k * CHUNK_CYCLES,
            budget,
            &mut NoObserver,
        )
    };
    let per_chunk: Result<Vec<ChunkSums>> = if n_workers == 1 {
        chunks.iter().map(job).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n_workers)
            .build()
            .map_err(|e| Error::InvalidParam(format!("worker pool: {e}")))?;
        pool.install(|| chunks.par_iter().map(job).collect())
    };
    let merged = per_chunk?
        .iter()
        .fold(ChunkSums::default(), |acc, s| acc.merge(s));
    Ok(merged.estimate(seed))
}

/// Sequential chunked run with an observer. Uses the same chunk layout as
/// [`simulate_parallel`], so the estimate matches it bit-for-bit; records
/// arrive in cycle order with globally consistent indices.
pub fn simulate_chunked_with<O: SimObserver>(
    policy: &PolicySpec,
    params: &SystemParams,
    sc: &ScLaw,
    n_cycles: u64,
    seed: u64,
    budget: u64,
    obs: &mut O,
) -> Result<PeakAoiEstimate> {
    validate(params, sc, policy)?;
    check_run(n_cycles, 1)?;
    let mut merged = ChunkSums::default();
    for (k, cnt) in chunk_layout(n_cycles)? {
        let sums = run_chunk(
            policy,
            params,
            sc,
            cnt,
            seed,
            k,
            k * CHUNK_CYCLES,
            budget,
            obs,
        )?;
        merged = merged.merge(&sums);
    }
    Ok(merged.estimate(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScDistribution;

    fn setup() -> (SystemParams, ScLaw) {
        (
            SystemParams::new(1.0, 0.2, 1.0).unwrap(),
            ScDistribution::from_theta(10.0).unwrap().into(),
        )
    }

    fn bits(e: &PeakAoiEstimate) -> [u64; 4] {
        [
            e.mean.to_bits(),
            e.stderr.to_bits(),
            e.mean_y.to_bits(),
            e.mean_s.to_bits(),
        ]
    }

    #[test]
    fn same_seed_same_bits() {
        let (p, sc) = setup();
        let pol = PolicySpec::WindowFb { w: 8.0, b: 3 };
        let a = simulate(&pol, &p, &sc, 20_000, 42).unwrap();
        let b = simulate(&pol, &p, &sc, 20_000, 42).unwrap();
        assert_eq!(bits(&a), bits(&b));
        let c = simulate(&pol, &p, &sc, 20_000, 43).unwrap();
        assert_ne!(a.mean.to_bits(), c.mean.to_bits());
    }

    #[test]
    fn worker_count_does_not_change_bits() {
        let (p, sc) = setup();
        let pol = PolicySpec::ProbNoFb { w: 8.0, p_tx: 0.6 };
        let w1 = simulate_parallel(&pol, &p, &sc, 50_000, 9, 1).unwrap();
        for workers in [2, 3, 8] {
            let wk = simulate_parallel(&pol, &p, &sc, 50_000, 9, workers).unwrap();
            assert_eq!(bits(&w1), bits(&wk), "workers={workers}");
        }
        let mut chunked = simulate_chunked_with(
            &pol,
            &p,
            &sc,
            50_000,
            9,
            DEFAULT_EVENT_BUDGET,
            &mut NoObserver,
        )
        .unwrap();
        chunked.seed = w1.seed;
        assert_eq!(bits(&w1), bits(&chunked));
    }

    #[test]
    fn estimate_components_sum_exactly() {
        let (p, sc) = setup();
        for pol in [
            PolicySpec::ThresholdFb { w: 9.0 },
            PolicySpec::WindowNoFb { w: 8.0, b: 3 },
        ] {
            let e = simulate(&pol, &p, &sc, 30_000, 5).unwrap();
            let rel = ((e.mean_s + e.mean_y) - e.mean).abs() / e.mean;
            assert!(rel < 1e-9, "{pol}: rel {rel}");
        }
    }

    #[test]
    fn records_satisfy_structural_invariants() {
        let (p, sc) = setup();
        for pol in [
            PolicySpec::ThresholdFb { w: 9.0 },
            PolicySpec::WindowFb { w: 8.0, b: 3 },
            PolicySpec::ProbFb { w: 8.0, p_tx: 0.6 },
            PolicySpec::ThresholdNoFb { w: 9.0 },
            PolicySpec::WindowNoFb { w: 8.0, b: 3 },
            PolicySpec::ProbNoFb { w: 8.0, p_tx: 0.6 },
        ] {
            let (_, recs) = simulate_trace(&pol, &p, &sc, 5_000, 17).unwrap();
            assert_eq!(recs.len(), 5_000);
            let fb = pol.feedback();
            for (i, r) in recs.iter().enumerate() {
                assert_eq!(r.cycle_index, i as u64 + 1);
                assert!(r.y > r.s, "{pol}: y {} s {}", r.y, r.s);
                assert!(r.s >= 1.0 + 1.0 - 1e-12, "{pol}: s {}", r.s); // m1 + D
                assert!(r.n_generations >= 1 && r.n_transmissions >= 1);
                if fb {
                    assert_eq!(r.t_ext, 0.0, "{pol}");
                } else {
                    assert!(r.t_ext >= 0.0, "{pol}");
                }
            }
        }
    }

    #[test]
    fn dead_policy_and_zero_cycles_rejected() {
        let (p, sc) = setup();
        assert!(matches!(
            simulate(&PolicySpec::ThresholdFb { w: 0.5 }, &p, &sc, 100, 1),
            Err(Error::DeadPolicy(_))
        ));
        assert!(simulate(&PolicySpec::ThresholdFb { w: 9.0 }, &p, &sc, 0, 1).is_err());
        assert!(
            simulate_parallel(&PolicySpec::ThresholdFb { w: 9.0 }, &p, &sc, 100, 1, 0).is_err()
        );
    }

    #[test]
    fn tight_budget_overflows() {
        let (p, sc) = setup();
        let pol = PolicySpec::WindowFb { w: 8.0, b: 3 };
        let r = simulate_with(&pol, &p, &sc, 1_000, 3, 4, &mut NoObserver);
        assert!(matches!(r, Err(Error::CycleOverflow { budget: 4 })));
    }
}
