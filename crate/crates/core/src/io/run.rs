use std::fmt::Write as _;
use std::str::FromStr;

use crate::engine::{simulate, DEFAULT_EXTINCTION_EPS};
use crate::error::{invalid, Error, Result};
use crate::experiments::{
    check_ergodicity, check_extinction, check_mean_bound, check_spike_time_bounds, regeneration_diagnostics,
    run_ensemble, validate_sampler, BoundParams, EnsembleSpec, ErgodicityOptions, RegenerationSpec,
};
use crate::rng::RngStream;

use super::config::{emit_config, ExperimentConfig, RunConfig};
use super::events::{write_events_csv, write_events_jsonl, EventHeader};
use super::summary::{
    bounds_csv, ensemble_csv, ergodicity_csv, extinction_csv, histogram_csv, regeneration_csv, sampler_csv,
    simulate_csv, theorem2_csv, CsvTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Ensemble,
    CheckTheorem2,
    CheckExtinction,
    CheckErgodicity,
    CheckBounds,
    RegenDiagnostics,
    ValidateSampler,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Simulate,
        Command::Ensemble,
        Command::CheckTheorem2,
        Command::CheckExtinction,
        Command::CheckErgodicity,
        Command::CheckBounds,
        Command::RegenDiagnostics,
        Command::ValidateSampler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Ensemble => "ensemble",
            Command::CheckTheorem2 => "check-theorem2",
            Command::CheckExtinction => "check-extinction",
            Command::CheckErgodicity => "check-ergodicity",
            Command::CheckBounds => "check-bounds",
            Command::RegenDiagnostics => "regen-diagnostics",
            Command::ValidateSampler => "validate-sampler",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| invalid(format!("unknown subcommand {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EventFormat {
    #[default]
    Jsonl,
    Csv,
}

/// Files produced by a run, plus a short human-readable report.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub report: String,
    /// A checked inequality was flagged as violated.
    pub violated: bool,
}

impl RunOutput {
    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }
}

struct Out {
    files: Vec<(String, Vec<u8>)>,
    report: String,
    violated: bool,
}

impl Out {
    fn new(cfg: &RunConfig) -> Self {
        Self {
            files: vec![("normalized-config.json".into(), emit_config(cfg).into_bytes())],
            report: String::new(),
            violated: false,
        }
    }

    fn csv(&mut self, name: &str, table: CsvTable) {
        self.files.push((name.into(), table.render().into_bytes()));
    }
}

/// Run `cmd` on a normalized config. `threads` (0 = default pool) never
/// changes the results.
pub fn execute(cmd: Command, cfg: &RunConfig, format: EventFormat, threads: usize) -> Result<RunOutput> {
    let mut spec = cfg.ensemble_spec()?.with_threads(threads);
    let mut out = Out::new(cfg);
    let seed = cfg.seed;
    match cmd {
        Command::Simulate => {
            let params = cfg.params()?;
            let initial = spec.initial.resolve(&params)?;
            let mut opts = spec.sim_options();
            opts.record_states = cfg.record_states.unwrap_or(false);
            let traj = simulate(&params, &initial, &opts, &mut RngStream::new(seed, 0))?;
            let header = EventHeader::new(&traj, seed, 0, cfg.horizon);
            let mut buf = Vec::new();
            let name = match format {
                EventFormat::Jsonl => {
                    write_events_jsonl(&mut buf, &header, &traj.events)?;
                    "events.jsonl"
                }
                EventFormat::Csv => {
                    write_events_csv(&mut buf, &header, &traj.events)?;
                    "events.csv"
                }
            };
            out.files.push((name.into(), buf));
            out.csv("summary.csv", simulate_csv(&traj, seed, 0));
            let _ = writeln!(
                out.report,
                "{} spikes, stopped at t = {} ({})",
                traj.events.len(),
                traj.final_state.t,
                traj.termination.as_str()
            );
        }
        Command::Ensemble => {
            let sum = run_ensemble(&spec)?;
            let hist: Vec<_> = sum.spike_histogram.iter().map(|(k, v)| (*k, *v)).collect();
            out.csv("summary.csv", ensemble_csv(&sum));
            out.csv("histogram.csv", histogram_csv(seed, &hist));
            let _ = writeln!(
                out.report,
                "{} replicas, extinct fraction {}, p99 spike count {}",
                sum.replicas.len(),
                sum.extinct_fraction,
                sum.p99_spike_count
            );
        }
        Command::CheckTheorem2 => {
            expect_kind(cfg, &[Some("theorem2"), None])?;
            if spec.checkpoints.is_empty() {
                let h = cfg.horizon;
                spec.checkpoints = vec![0.0, h / 4.0, h / 2.0, h];
            }
            let rep = check_mean_bound(&spec)?;
            out.csv("summary.csv", theorem2_csv(&rep));
            out.violated = rep.violated();
            for r in &rep.rows {
                let _ = writeln!(
                    out.report,
                    "t={:<8} mean={:.6} ci=[{:.6}, {:.6}] bound={:.6}{}",
                    r.t,
                    r.mean_ubar,
                    r.ci_lo,
                    r.ci_hi,
                    r.bound,
                    if r.violated { "  VIOLATED" } else { "" }
                );
            }
        }
        Command::CheckExtinction => {
            let (horizons, soundness) = match &cfg.experiment {
                Some(ExperimentConfig::Extinction { horizons, soundness_replicas }) => {
                    (horizons.clone().unwrap_or_default(), soundness_replicas.unwrap_or(100))
                }
                _ => {
                    expect_kind(cfg, &[None])?;
                    let h = cfg.horizon;
                    (vec![h / 8.0, h / 4.0, h / 2.0, h], 100)
                }
            };
            spec.extinction_eps.get_or_insert(DEFAULT_EXTINCTION_EPS);
            let rep = check_extinction(&spec, &horizons, soundness)?;
            out.csv("summary.csv", extinction_csv(&rep, seed, spec.replicas));
            out.csv("histogram.csv", histogram_csv(seed, &rep.spike_histogram));
            out.violated = !rep.monotone() || !rep.soundness.passed();
            for r in &rep.rows {
                let _ = writeln!(
                    out.report,
                    "horizon={:<6} extinct={:.4} max_final={:.3e} p99_spikes={}",
                    r.horizon, r.extinct_fraction, r.max_final_potential, r.p99_spike_count
                );
            }
            let _ = writeln!(
                out.report,
                "soundness: {}/{} re-spiked; radius hypothesis {}",
                rep.soundness.respiked,
                rep.soundness.checked,
                if rep.radius_hypothesis_holds { "holds" } else { "fails" }
            );
        }
        Command::CheckErgodicity => {
            let Some(ExperimentConfig::Ergodicity { initial_b, seed_b, burnin, gap, samples }) = &cfg.experiment else {
                return Err(invalid("check-ergodicity needs an experiment block of kind \"ergodicity\""));
            };
            let b_cfg = RunConfig { initial: initial_b.clone(), seed: seed_b.unwrap_or(seed.wrapping_add(1)), ..cfg.clone() };
            let spec_b = b_cfg.ensemble_spec()?.with_threads(threads);
            let opts = ErgodicityOptions {
                burnin: burnin.unwrap_or(50.0),
                gap: gap.unwrap_or(1.0),
                samples: samples.unwrap_or(100),
            };
            let rep = check_ergodicity(&spec, &spec_b, opts)?;
            out.csv("summary.csv", ergodicity_csv(&rep, seed));
            out.violated = !rep.converged() || rep.zero_state_spikes > 0;
            for r in &rep.rows {
                let _ = writeln!(out.report, "{:<5} w1_cross={:.5} w1_self={:.5}", r.label(), r.w1_cross, r.w1_self);
            }
            let _ = writeln!(out.report, "zero-state spikes: {}", rep.zero_state_spikes);
        }
        Command::CheckBounds => {
            let (r, theta) = match &cfg.experiment {
                Some(ExperimentConfig::Bounds { r, theta }) => (r.unwrap_or(cfg.params()?.phi().radius()), *theta),
                _ => {
                    expect_kind(cfg, &[None])?;
                    (cfg.params()?.phi().radius(), None)
                }
            };
            let bp = theta.map(|th| BoundParams::new(r, th, cfg.alpha, cfg.lambda)).transpose()?;
            let mut spec = EnsembleSpec { params: spec.params.with_phi(spec.params.phi().with_radius(r)?), ..spec };
            if cfg.alpha > 0.0 {
                spec.extinction_eps.get_or_insert(DEFAULT_EXTINCTION_EPS);
            }
            let rep = check_spike_time_bounds(&spec, bp)?;
            out.csv("summary.csv", bounds_csv(&rep, seed, spec.replicas));
            out.violated = rep.violated();
            for r in &rep.rows {
                let _ = writeln!(
                    out.report,
                    "{} estimate={:.5} ± {:.5} bound={:.5}{}",
                    r.name,
                    r.estimate,
                    3.0 * r.std_error,
                    r.bound_corrected,
                    if r.violated { "  VIOLATED" } else { "" }
                );
            }
        }
        Command::RegenDiagnostics => {
            let Some(ExperimentConfig::Regeneration { delta, epsilon }) = &cfg.experiment else {
                return Err(invalid("regen-diagnostics needs an experiment block of kind \"regeneration\""));
            };
            let rep = regeneration_diagnostics(&spec, RegenerationSpec { delta: *delta, epsilon: *epsilon })?;
            out.csv("summary.csv", regeneration_csv(&rep, seed));
            let _ = writeln!(
                out.report,
                "pattern frequency {:.5} over {} windows; mean return time {:?}",
                rep.pattern_frequency(),
                rep.windows,
                rep.mean_return_time
            );
        }
        Command::ValidateSampler => {
            let samples = match &cfg.experiment {
                Some(ExperimentConfig::Sampler { samples }) => samples.unwrap_or(100_000),
                _ => {
                    expect_kind(cfg, &[None])?;
                    100_000
                }
            };
            let params = cfg.params()?;
            let initial = spec.initial.resolve(&params)?;
            let rep = validate_sampler(&params, &initial, samples, cfg.horizon, seed)?;
            out.csv("summary.csv", sampler_csv(&rep, seed));
            out.violated = !rep.passed(0.01);
            let _ = writeln!(
                out.report,
                "KS vs exact: D={:.5} p={:.4}; KS vs inversion: D={:.5} p={:.4}",
                rep.ks_exact.statistic, rep.ks_exact.p_value, rep.ks_inversion.statistic, rep.ks_inversion.p_value
            );
        }
    }
    Ok(RunOutput { files: out.files, report: out.report, violated: out.violated })
}

fn experiment_kind(e: &ExperimentConfig) -> &'static str {
    match e {
        ExperimentConfig::Theorem2 {} => "theorem2",
        ExperimentConfig::Extinction { .. } => "extinction",
        ExperimentConfig::Ergodicity { .. } => "ergodicity",
        ExperimentConfig::Bounds { .. } => "bounds",
        ExperimentConfig::Regeneration { .. } => "regeneration",
        ExperimentConfig::Sampler { .. } => "sampler",
    }
}

fn expect_kind(cfg: &RunConfig, allowed: &[Option<&str>]) -> Result<()> {
    let kind = cfg.experiment.as_ref().map(experiment_kind);
    if allowed.contains(&kind) {
        Ok(())
    } else {
        Err(invalid(format!("experiment block of kind {:?} does not match this subcommand", kind.unwrap_or(""))))
    }
}
