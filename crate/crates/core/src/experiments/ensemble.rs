use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cascade::cascade_configs;
use crate::engine::{simulate, SimOptions, Termination, Trajectory, DEFAULT_MAX_EVENTS};
use crate::error::{invalid, Error, Result};
use crate::model::{NetworkParams, PotentialState};
use crate::rng::RngStream;
use crate::stats::{mean_ci, quantile, MeanCi};

/// Starting configuration of every replica.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Explicit(Vec<f64>),
    /// The cascade configuration `v(0)` shifted by a constant (`cascade_v0`, `cascade_v0+x`).
    CascadeV0 { offset: f64 },
    /// Every neuron at `x` (`uniform:x`).
    Uniform(f64),
    Zero,
}

impl InitialCondition {
    pub fn resolve(&self, params: &NetworkParams) -> Result<PotentialState> {
        let n = params.n();
        let u = match self {
            InitialCondition::Explicit(u) => {
                if u.len() != n {
                    return Err(invalid(format!("initial vector has {} entries, network has {n}", u.len())));
                }
                u.clone()
            }
            InitialCondition::CascadeV0 { offset } => {
                cascade_configs(params).v[0].iter().map(|v| v + offset).collect()
            }
            InitialCondition::Uniform(x) => vec![*x; n],
            InitialCondition::Zero => vec![0.0; n],
        };
        PotentialState::at_origin(u)
    }
}

impl FromStr for InitialCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || invalid(format!("unknown initial preset {s:?}; expected zero, uniform:x, cascade_v0 or cascade_v0+x"));
        let num = |t: &str| t.trim().parse::<f64>().ok().filter(|x| x.is_finite() && *x >= 0.0);
        if s == "zero" {
            Ok(InitialCondition::Zero)
        } else if s == "cascade_v0" {
            Ok(InitialCondition::CascadeV0 { offset: 0.0 })
        } else if let Some(rest) = s.strip_prefix("cascade_v0+") {
            num(rest).map(|offset| InitialCondition::CascadeV0 { offset }).ok_or_else(bad)
        } else if let Some(rest) = s.strip_prefix("uniform:") {
            num(rest).map(InitialCondition::Uniform).ok_or_else(bad)
        } else {
            Err(bad())
        }
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::Explicit(u) => write!(f, "{u:?}"),
            InitialCondition::CascadeV0 { offset } if *offset == 0.0 => f.write_str("cascade_v0"),
            InitialCondition::CascadeV0 { offset } => write!(f, "cascade_v0+{offset:?}"),
            InitialCondition::Uniform(x) => write!(f, "uniform:{x:?}"),
            InitialCondition::Zero => f.write_str("zero"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub params: NetworkParams,
    pub initial: InitialCondition,
    pub replicas: usize,
    pub horizon: f64,
    pub seed: u64,
    /// Increasing times in `[0, horizon]` at which every replica's state is recorded.
    pub checkpoints: Vec<f64>,
    pub max_events: u64,
    pub extinction_eps: Option<f64>,
    pub check_interval: f64,
    /// Worker threads; 0 uses the global pool. Results do not depend on it.
    pub threads: usize,
}

impl EnsembleSpec {
    pub fn new(params: NetworkParams, initial: InitialCondition, replicas: usize, horizon: f64, seed: u64) -> Self {
        Self {
            params,
            initial,
            replicas,
            horizon,
            seed,
            checkpoints: Vec::new(),
            max_events: DEFAULT_MAX_EVENTS,
            extinction_eps: None,
            check_interval: 1.0,
            threads: 0,
        }
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<f64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn with_extinction(mut self, eps: f64) -> Self {
        self.extinction_eps = Some(eps);
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub(crate) fn sim_options(&self) -> SimOptions {
        SimOptions {
            horizon: self.horizon,
            max_events: self.max_events,
            record_states: false,
            extinction_eps: self.extinction_eps,
            check_interval: self.check_interval,
            checkpoints: self.checkpoints.clone(),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(invalid("an ensemble needs at least one replica"));
        }
        if self.checkpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("checkpoints must be strictly increasing"));
        }
        if self.checkpoints.iter().any(|&c| !(0.0..=self.horizon).contains(&c)) {
            return Err(invalid("checkpoints must lie within [0, horizon]"));
        }
        Ok(())
    }
}

/// Run `f` on every replica's trajectory, in parallel, returning results in
/// replica order. Replica `k` draws from stream `k` of the spec's seed.
pub fn map_replicas<T, F>(spec: &EnsembleSpec, opts: &SimOptions, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, Trajectory) -> Result<T> + Sync,
{
    spec.validate()?;
    let initial = spec.initial.resolve(&spec.params)?;
    let run = |k: usize| -> Result<T> {
        let mut rng = RngStream::new(spec.seed, k as u64);
        let traj = simulate(&spec.params, &initial, opts, &mut rng)?;
        f(k, traj)
    };
    let results: Vec<Result<T>> = if spec.threads == 0 {
        (0..spec.replicas).into_par_iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.threads)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?;
        pool.install(|| (0..spec.replicas).into_par_iter().map(run).collect())
    };
    results
        .into_iter()
        .enumerate()
        .map(|(replica, r)| r.map_err(|e| Error::Replica { replica, source: Box::new(e) }))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaOutcome {
    pub spike_count: usize,
    pub termination: Termination,
    pub final_state: PotentialState,
    pub residual: Option<f64>,
    /// Potentials at each checkpoint.
    pub checkpoint_states: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointStats {
    pub t: f64,
    pub mean_ubar: MeanCi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub seed: u64,
    pub checkpoints: Vec<CheckpointStats>,
    pub extinct_fraction: f64,
    /// Total spike count → number of replicas.
    pub spike_histogram: BTreeMap<usize, usize>,
    pub p99_spike_count: usize,
    pub max_final_potential: f64,
    pub replicas: Vec<ReplicaOutcome>,
}

pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleSummary> {
    let n_checkpoints = spec.checkpoints.len();
    let outcomes = map_replicas(spec, &spec.sim_options(), |_, traj| {
        if traj.checkpoints.len() < n_checkpoints {
            return Err(invalid(format!(
                "stopped ({}) before the last checkpoint",
                traj.termination.as_str()
            )));
        }
        Ok(ReplicaOutcome {
            spike_count: traj.events.len(),
            termination: traj.termination,
            residual: traj.residual,
            checkpoint_states: traj.checkpoints.into_iter().map(|s| s.u).collect(),
            final_state: traj.final_state,
        })
    })?;

    let n = outcomes.len();
    let checkpoints = spec
        .checkpoints
        .iter()
        .enumerate()
        .map(|(c, &t)| {
            let means: Vec<f64> = outcomes
                .iter()
                .map(|o| {
                    let u = &o.checkpoint_states[c];
                    u.iter().sum::<f64>() / u.len() as f64
                })
                .collect();
            CheckpointStats { t, mean_ubar: mean_ci(&means) }
        })
        .collect();
    let extinct = outcomes.iter().filter(|o| o.termination == Termination::Extinct).count();
    let mut spike_histogram = BTreeMap::new();
    for o in &outcomes {
        *spike_histogram.entry(o.spike_count).or_insert(0) += 1;
    }
    let counts: Vec<f64> = outcomes.iter().map(|o| o.spike_count as f64).collect();
    let max_final_potential = outcomes.iter().map(|o| o.final_state.max()).fold(0.0, f64::max);
    Ok(EnsembleSummary {
        seed: spec.seed,
        checkpoints,
        extinct_fraction: extinct as f64 / n as f64,
        spike_histogram,
        p99_spike_count: quantile(&counts, 0.99) as usize,
        max_final_potential,
        replicas: outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::RateFunction;

    fn params(alpha: f64) -> NetworkParams {
        NetworkParams::from_row_major(
            3,
            vec![0.0, 0.25, 0.25, 0.25, 0.0, 0.25, 0.25, 0.25, 0.0],
            1.0,
            alpha,
            RateFunction::linear(1.0, 0.505).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn presets_parse_and_resolve() {
        let p = params(1.0);
        assert_eq!("zero".parse::<InitialCondition>().unwrap(), InitialCondition::Zero);
        assert_eq!("uniform:2.5".parse::<InitialCondition>().unwrap(), InitialCondition::Uniform(2.5));
        let c = "cascade_v0+0.1".parse::<InitialCondition>().unwrap();
        assert_eq!(c.resolve(&p).unwrap().u, vec![0.6, 0.35, 0.1]);
        assert_eq!(c.to_string().parse::<InitialCondition>().unwrap(), c);
        assert!("uniform:-1".parse::<InitialCondition>().is_err());
        assert!("bogus".parse::<InitialCondition>().is_err());
        assert!(InitialCondition::Explicit(vec![1.0]).resolve(&p).is_err());
    }

    #[test]
    fn single_replica_matches_simulate() {
        let p = params(1.0);
        let spec = EnsembleSpec::new(p.clone(), InitialCondition::Uniform(1.0), 1, 10.0, 5)
            .with_checkpoints(vec![0.0, 2.0, 10.0])
            .with_extinction(1e-9);
        let sum = run_ensemble(&spec).unwrap();
        let traj = simulate(
            &p,
            &PotentialState::at_origin(vec![1.0; 3]).unwrap(),
            &spec.sim_options(),
            &mut RngStream::new(5, 0),
        )
        .unwrap();
        assert_eq!(sum.replicas[0].spike_count, traj.events.len());
        assert_eq!(sum.replicas[0].final_state, traj.final_state);
        assert_eq!(sum.checkpoints[1].mean_ubar.mean, traj.checkpoints[1].mean());
    }

    #[test]
    fn zero_start_is_all_extinct() {
        let spec = EnsembleSpec::new(params(1.0), InitialCondition::Zero, 20, 5.0, 1)
            .with_checkpoints(vec![0.0, 5.0]);
        let sum = run_ensemble(&spec).unwrap();
        assert_eq!(sum.extinct_fraction, 1.0);
        assert_eq!(sum.spike_histogram.get(&0), Some(&20));
    }

    #[test]
    fn deterministic_across_runs_and_thread_counts() {
        let spec = EnsembleSpec::new(params(0.5), InitialCondition::Uniform(1.0), 64, 4.0, 9)
            .with_checkpoints(vec![0.0, 1.0, 4.0]);
        let a = run_ensemble(&spec).unwrap();
        let b = run_ensemble(&spec).unwrap();
        let c = run_ensemble(&spec.clone().with_threads(1)).unwrap();
        let d = run_ensemble(&spec.clone().with_threads(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a, d);
    }

    #[test]
    fn failing_replica_is_named() {
        let mut spec = EnsembleSpec::new(params(0.0), InitialCondition::Uniform(1.0), 4, 50.0, 9)
            .with_checkpoints(vec![49.0]);
        spec.max_events = 2;
        match run_ensemble(&spec) {
            Err(Error::Replica { replica: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
