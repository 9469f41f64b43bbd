//! Exact event-driven simulation of a finite network of spiking neurons
//! whose membrane potentials follow a piecewise-deterministic Markov process:
//! chemical synapses act as jumps, electrical synapses pull every potential
//! toward the network mean, and a leak current pulls it toward zero.
//!
//! Layers, bottom up:
//!
//! * [`rate`], [`model`], [`cascade`]: model definition, closed-form flow,
//!   jump map and derived constants.
//! * [`sampler`]: exact next-spike sampling by thinning, plus the survival
//!   function, inversion sampler and residual spike probability.
//! * [`engine`]: whole trajectories, extinction detection, pathwise bound
//!   checks and a time-stepping oracle.
//! * [`experiments`]: Monte Carlo ensembles and the long-run checks.
//! * [`io`]: JSON run configs, JSON-Lines event logs and CSV summaries.

pub mod cascade;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod io;
pub mod model;
pub mod quadrature;
pub mod rate;
pub mod rng;
pub mod sampler;
pub mod scenarios;
pub mod stats;

pub use cascade::{cascade_configs, CascadeConfig};
pub use engine::{
    check_pathwise_invariants, euler_simulate, simulate, InvariantReport, SimOptions, SpikeEvent, Termination,
    Trajectory,
};
pub use error::{Error, Result};
pub use model::{derived_constants, flow, jump, DerivedConstants, NetworkParams, PotentialState};
pub use rate::{RateFunction, RateKind};
pub use rng::RngStream;
pub use sampler::{
    dominating_rate, next_spike_thinning, residual_spike_probability, sample_t1_inversion, survival_probability,
    InversionDraw, NextSpike, SpikeDraw,
};
