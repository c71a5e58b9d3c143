//! Average peak age of information (AoI) for a status-updating node that
//! harvests energy one transmission's worth at a time and reports over an
//! erasure channel.
//!
//! The node senses or computes a fresh update (a random service time `C`),
//! waits for a recharge (`I`, exponential with rate `lambda`), and then either
//! transmits (fixed airtime `D`, erased with probability `pe`) or discards the
//! update and starts a new one. Six retransmission policies are covered, with
//! and without delivery feedback: age-threshold, bounded-attempt window, and
//! coin-flip (probabilistic) schemes. The crate computes the stationary
//! average peak AoI three ways:
//!
//! * closed forms for the window and probabilistic schemes ([`analytic`]),
//! * an exact-semantics renewal-cycle Monte-Carlo engine ([`simulator`]),
//! * deterministic searches over the policy parameters ([`optimizer`]).
//!
//! The library is the product; start from the runnable examples:
//!
//! ```text
//! cargo run --release --example closed_forms      # evaluate the four closed forms
//! cargo run --release --example simulate_policy   # Monte-Carlo estimate + per-cycle trace
//! cargo run --release --example verify_formulas   # analytic vs simulated on a small grid
//! cargo run --release --example optimize_point    # tune W / B / pTx for every scheme
//! cargo run --release --example fixed_point       # threshold optimum vs its fixed-point line
//! cargo run --release --example sweep_csv         # one sweep point per lambda, CSV out
//! cargo run --release --example empirical_sc      # service times from a sample file
//! ```
//!
//! A thin `peak-aoi` binary wraps the same entry points as `eval`, `optimize`
//! and `sweep` subcommands for scripted use; see the README for the config
//! file schema.
//!
//! Everything that consumes randomness is seeded and chunked so that repeated
//! runs, and runs split over any number of workers, are bit-identical.

pub mod analytic;
pub mod config;
mod error;
pub mod model;
pub mod optimizer;
pub mod rng;
pub mod simulator;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{validate, PolicySpec, ScDistribution, ScLaw, Scheme, SystemParams};
pub use simulator::{simulate, simulate_parallel, CycleRecord, PeakAoiEstimate};
