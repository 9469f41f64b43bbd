//! The default scenario suite: one small, fixed-seed config per subcommand,
//! used for reproducibility checks and as worked examples.

use crate::error::Result;
use crate::io::{parse_config, Command, RunConfig};

/// Three neurons, all-to-all weight 0.25, linear rate with slope 1.
const TRIANGLE: &str = r#""n_neurons": 3, "lambda": 1.0,
  "weights": [[0, 0.25, 0.25], [0.25, 0, 0.25], [0.25, 0.25, 0]],
  "phi": {"kind": "linear", "c": 1.0}"#;

const SUITE: [(&str, Command, &str); 8] = [
    (
        "simulate",
        Command::Simulate,
        r#"{"alpha": 0.5, "initial": [1.0, 0.5, 2.0], "horizon": 30.0, "seed": 11, "record_states": true}"#,
    ),
    (
        "ensemble",
        Command::Ensemble,
        r#"{"alpha": 0.5, "initial": "uniform:1", "horizon": 8.0, "seed": 12, "replicas": 400,
            "checkpoints": [0, 1, 2, 4, 8], "extinction_eps": 1e-9}"#,
    ),
    (
        "theorem2",
        Command::CheckTheorem2,
        r#"{"alpha": 1.0, "initial": "uniform:1", "horizon": 4.0, "seed": 13, "replicas": 1000,
            "checkpoints": [0, 1, 2, 4], "experiment": {"kind": "theorem2"}}"#,
    ),
    (
        "extinction",
        Command::CheckExtinction,
        r#"{"alpha": 1.0, "initial": "uniform:1", "horizon": 20.0, "seed": 14, "replicas": 300,
            "extinction_eps": 1e-9, "experiment": {"kind": "extinction", "horizons": [5, 10, 20], "soundness_replicas": 50}}"#,
    ),
    (
        "ergodicity",
        Command::CheckErgodicity,
        r#"{"alpha": 0.0, "initial": "cascade_v0+0.1", "horizon": 1.0, "seed": 15, "replicas": 20,
            "experiment": {"kind": "ergodicity", "initial_b": "uniform:10", "burnin": 20, "samples": 40}}"#,
    ),
    (
        "bounds",
        Command::CheckBounds,
        r#"{"alpha": 1.0, "initial": "uniform:1", "horizon": 1.0, "seed": 16, "replicas": 2000,
            "experiment": {"kind": "bounds", "r": 0.5, "theta": 0.25}}"#,
    ),
    (
        "regeneration",
        Command::RegenDiagnostics,
        r#"{"alpha": 0.0, "initial": "cascade_v0", "horizon": 60.0, "seed": 17, "replicas": 8,
            "experiment": {"kind": "regeneration", "delta": 0.2, "epsilon": 0.5}}"#,
    ),
    (
        "sampler",
        Command::ValidateSampler,
        r#"{"alpha": 0.5, "initial": [1.0, 0.5, 2.0], "horizon": 10.0, "seed": 18,
            "experiment": {"kind": "sampler", "samples": 5000}}"#,
    ),
];

/// Splice the shared network block into a run block.
fn with_network(run: &str) -> String {
    let body = run.trim().strip_prefix('{').expect("run block is an object");
    format!("{{{TRIANGLE},\n  {body}")
}

/// `(name, subcommand, config)` for every scenario in the suite.
pub fn default_suite() -> Result<Vec<(&'static str, Command, RunConfig)>> {
    SUITE
        .iter()
        .map(|(name, cmd, run)| Ok((*name, *cmd, parse_config(&with_network(run))?)))
        .collect()
}
