//! Monte Carlo harness: ensembles of independent trajectories and the
//! long-run checks built on them (mean decay, extinction, ergodicity,
//! first-spike bounds, regeneration diagnostics) and the sampler
//! cross-validation.

mod checks;
mod ensemble;
mod regeneration;
mod sampler_check;

pub use checks::{
    check_ergodicity, check_extinction, check_mean_bound, check_spike_time_bounds, BoundParams, BoundRow,
    BoundsReport, ErgodicityOptions, ErgodicityReport, ErgodicityRow, ExtinctionReport, ExtinctionRow,
    MeanBoundReport, MeanBoundRow, SoundnessCheck,
};
pub use ensemble::{
    map_replicas, run_ensemble, CheckpointStats, EnsembleSpec, EnsembleSummary, InitialCondition, ReplicaOutcome,
};
pub use regeneration::{regeneration_diagnostics, RegenerationReport, RegenerationSpec, RegenerationTarget};
pub use sampler_check::{validate_sampler, SamplerReport};
