//! Benchmark engine for expert-guided reinforcement learning.
//!
//! The crate is split along the pipeline:
//!
//! - [`envs`]: deterministic simulators (FourTank, Plane3DCircle, GlassFurnace)
//!   plus a one-dimensional integrator used for smoke tests.
//! - [`experts`]: PID / CPG controllers with exposed internal state, relay
//!   autotuning, differential evolution, and expert perturbations.
//! - [`rl`]: the SAC backbone (networks with hand-written backprop, critic
//!   ensemble, replay, running normalization).
//! - [`integration`]: the expert-integration mechanisms (pessimism-gated
//!   mixing, argmax selection, JSRL handoffs, residual) and ablation variants.
//! - [`stats`]: ENA, IQM, bootstrap CIs, Mann-Whitney U, Holm-Bonferroni and
//!   permutation tests.
//! - [`harness`]: run configuration, training loop, sweeps and reports.

pub mod envs;
pub mod error;
pub mod experts;
pub mod harness;
pub mod integration;
pub mod rl;
pub mod seeding;
pub mod stats;

pub use error::{Error, Result};
