use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::engine::{simulate, SimOptions, Termination, DEFAULT_EXTINCTION_EPS};
use crate::error::{invalid, Error, Result};
use crate::model::derived_constants;
use crate::rng::RngStream;
use crate::stats::{proportion, wasserstein1, wilson_interval};

use super::ensemble::{map_replicas, run_ensemble, EnsembleSpec, EnsembleSummary};

/// Width, in standard errors, of the interval a Monte Carlo estimate must
/// clear before it counts as violating a bound.
const SIGMAS: f64 = 3.0;

// ---------------------------------------------------------------------------
// Mean decay for Lipschitz rates

#[derive(Debug, Clone, PartialEq)]
pub struct MeanBoundRow {
    pub t: f64,
    pub mean_ubar: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `ū(0)·e^{t(α*c − α)}`
    pub bound: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanBoundReport {
    pub rows: Vec<MeanBoundRow>,
    pub exponent: f64,
    pub summary: EnsembleSummary,
}

impl MeanBoundReport {
    pub fn violated(&self) -> bool {
        self.rows.iter().any(|r| r.violated)
    }
}

/// Compare the ensemble mean of `ū(t)` at each checkpoint with
/// `ū(0)·e^{t(α*c − α)}`; a row is violated when its 95% CI lies wholly above.
pub fn check_mean_bound(spec: &EnsembleSpec) -> Result<MeanBoundReport> {
    let c = spec.params.phi().lipschitz_constant().ok_or_else(|| {
        Error::UnsupportedRegime("mean bound needs a globally Lipschitz rate (linear, saturating or power p = 1)".into())
    })?;
    if spec.checkpoints.is_empty() {
        return Err(invalid("mean bound check needs at least one checkpoint"));
    }
    let ubar0 = spec.initial.resolve(&spec.params)?.mean();
    let exponent = derived_constants(&spec.params).alpha_star * c - spec.params.alpha();
    let summary = run_ensemble(spec)?;
    let rows = summary
        .checkpoints
        .iter()
        .map(|cp| {
            let bound = ubar0 * (cp.t * exponent).exp();
            MeanBoundRow {
                t: cp.t,
                mean_ubar: cp.mean_ubar.mean,
                ci_lo: cp.mean_ubar.lo,
                ci_hi: cp.mean_ubar.hi,
                bound,
                violated: cp.mean_ubar.lo > bound,
            }
        })
        .collect();
    Ok(MeanBoundReport { rows, exponent, summary })
}

// ---------------------------------------------------------------------------
// Extinction under leak

#[derive(Debug, Clone, PartialEq)]
pub struct ExtinctionRow {
    pub horizon: f64,
    pub extinct_fraction: f64,
    pub max_final_potential: f64,
    pub p99_spike_count: usize,
    pub max_spike_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoundnessCheck {
    pub checked: usize,
    pub respiked: usize,
    pub frequency: f64,
    pub limit: f64,
}

impl SoundnessCheck {
    pub fn passed(&self) -> bool {
        self.frequency <= self.limit
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtinctionReport {
    pub rows: Vec<ExtinctionRow>,
    /// Whether the rate's radius exceeds the largest total input weight.
    pub radius_hypothesis_holds: bool,
    pub soundness: SoundnessCheck,
    /// Spike-count histogram at the largest horizon.
    pub spike_histogram: Vec<(usize, usize)>,
}

impl ExtinctionReport {
    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].extinct_fraction <= w[1].extinct_fraction)
    }
}

/// Stream offset for soundness continuations, disjoint from replica streams.
const CONTINUATION_STREAM: u64 = 1 << 40;

/// Run the ensemble at each horizon (same seeds, so paths are coupled) and
/// report the extinct fraction. Up to `soundness_replicas` replicas declared
/// extinct at the largest horizon are then continued to ten times that horizon
/// without detection, counting any that spike again.
pub fn check_extinction(spec: &EnsembleSpec, horizons: &[f64], soundness_replicas: usize) -> Result<ExtinctionReport> {
    if spec.params.alpha() <= 0.0 {
        return Err(Error::UnsupportedRegime("extinction check needs leak (alpha > 0)".into()));
    }
    if horizons.is_empty() || horizons.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("horizons must be non-empty and strictly increasing"));
    }
    let eps = spec.extinction_eps.unwrap_or(DEFAULT_EXTINCTION_EPS);
    let mut rows = Vec::with_capacity(horizons.len());
    let mut last = None;
    for &h in horizons {
        let mut s = spec.clone();
        s.horizon = h;
        s.checkpoints.clear();
        s.extinction_eps = Some(eps);
        let sum = run_ensemble(&s)?;
        rows.push(ExtinctionRow {
            horizon: h,
            extinct_fraction: sum.extinct_fraction,
            max_final_potential: sum.max_final_potential,
            p99_spike_count: sum.p99_spike_count,
            max_spike_count: sum.spike_histogram.keys().next_back().copied().unwrap_or(0),
        });
        last = Some(sum);
    }
    let last = last.expect("at least one horizon");
    let h_max = *horizons.last().unwrap();

    let extinct: Vec<_> = last
        .replicas
        .iter()
        .enumerate()
        .filter(|(_, o)| o.termination == Termination::Extinct)
        .take(soundness_replicas)
        .collect();
    let respiked: Vec<bool> = extinct
        .par_iter()
        .map(|(k, o)| -> Result<bool> {
            let until = 10.0 * h_max;
            if o.final_state.t >= until {
                return Ok(false);
            }
            let mut rng = RngStream::new(spec.seed, CONTINUATION_STREAM + *k as u64);
            let opts = SimOptions { check_interval: spec.check_interval, ..SimOptions::new(until) };
            let traj = simulate(&spec.params, &o.final_state, &opts, &mut rng)?;
            Ok(!traj.events.is_empty())
        })
        .collect::<Result<_>>()?;
    let respiked = respiked.into_iter().filter(|&b| b).count();
    let checked = extinct.len();
    let soundness = SoundnessCheck {
        checked,
        respiked,
        frequency: if checked == 0 { 0.0 } else { respiked as f64 / checked as f64 },
        limit: 2.0 * eps,
    };

    Ok(ExtinctionReport {
        rows,
        radius_hypothesis_holds: spec.params.phi().radius() > derived_constants(&spec.params).alpha_star,
        soundness,
        spike_histogram: last.spike_histogram.into_iter().collect(),
    })
}

// ---------------------------------------------------------------------------
// Ergodicity without leak

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicityOptions {
    pub burnin: f64,
    pub gap: f64,
    /// Samples per replica, at `burnin + k·gap` for `k = 1..=samples`.
    pub samples: usize,
}

impl Default for ErgodicityOptions {
    fn default() -> Self {
        Self { burnin: 50.0, gap: 1.0, samples: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicityRow {
    /// Neuron index, or `None` for the mean potential.
    pub neuron: Option<usize>,
    pub w1_cross: f64,
    pub w1_self: f64,
}

impl ErgodicityRow {
    pub fn converged(&self) -> bool {
        self.w1_cross <= 2.0 * self.w1_self
    }

    pub fn label(&self) -> String {
        self.neuron.map_or_else(|| "ubar".to_string(), |i| i.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicityReport {
    pub rows: Vec<ErgodicityRow>,
    pub samples_a: usize,
    pub samples_b: usize,
    /// Spikes seen when the same network starts from the zero configuration.
    pub zero_state_spikes: usize,
}

impl ErgodicityReport {
    pub fn converged(&self) -> bool {
        self.rows.iter().all(ErgodicityRow::converged)
    }
}

/// Post-burn-in samples per marginal: `N` neuron columns then `ū`.
fn marginal_samples(spec: &EnsembleSpec) -> Result<Vec<Vec<Vec<f64>>>> {
    let n = spec.params.n();
    let per_replica = map_replicas(spec, &spec.sim_options(), |_, traj| {
        if traj.checkpoints.len() < spec.checkpoints.len() {
            return Err(invalid("replica stopped before its last sample time"));
        }
        let mut cols = vec![Vec::with_capacity(traj.checkpoints.len()); n + 1];
        for s in &traj.checkpoints {
            for (i, &u) in s.u.iter().enumerate() {
                cols[i].push(u);
            }
            cols[n].push(s.mean());
        }
        Ok(cols)
    })?;
    Ok(per_replica)
}

fn flatten<'a>(replicas: impl IntoIterator<Item = &'a Vec<Vec<f64>>>, marginal: usize) -> Vec<f64> {
    replicas.into_iter().flat_map(|r| r[marginal].iter().copied()).collect()
}

/// Random replica-level half splits averaged for the self-distance baseline.
const SELF_SPLITS: usize = 16;
const SPLIT_STREAM: u64 = (1 << 40) + (1 << 39);

/// Mean W1 distance between the two halves of `SELF_SPLITS` random
/// partitions of the replicas. Splitting whole replicas keeps the halves
/// independent even when samples within a replica are correlated.
fn self_distance(replicas: &[Vec<Vec<f64>>], marginal: usize, splits: &[Vec<usize>]) -> f64 {
    let half = replicas.len() / 2;
    let total: f64 = splits
        .iter()
        .map(|order| {
            let a = flatten(order[..half].iter().map(|&k| &replicas[k]), marginal);
            let b = flatten(order[half..].iter().map(|&k| &replicas[k]), marginal);
            wasserstein1(&a, &b)
        })
        .sum();
    total / splits.len() as f64
}

/// Compare post-burn-in marginals of two ensembles that differ only in their
/// (non-zero) initial condition and seed, against the distance between
/// random halves of the first ensemble.
pub fn check_ergodicity(spec_a: &EnsembleSpec, spec_b: &EnsembleSpec, opts: ErgodicityOptions) -> Result<ErgodicityReport> {
    if spec_a.params != spec_b.params {
        return Err(invalid("both ensembles must share the network parameters"));
    }
    if spec_a.params.alpha() != 0.0 {
        return Err(invalid("ergodicity check applies without leak (alpha = 0)"));
    }
    if !(opts.burnin >= 0.0 && opts.gap > 0.0 && opts.samples >= 1) {
        return Err(invalid("need burnin >= 0, gap > 0 and at least one sample"));
    }
    if spec_a.replicas < 2 {
        return Err(invalid("ensemble A needs at least two replicas for the self-distance baseline"));
    }
    for spec in [spec_a, spec_b] {
        if spec.initial.resolve(&spec.params)?.is_zero() {
            return Err(invalid("initial conditions must be non-zero; the zero configuration is absorbing"));
        }
    }
    let times: Vec<f64> = (1..=opts.samples).map(|k| opts.burnin + k as f64 * opts.gap).collect();
    let horizon = *times.last().unwrap();
    let prepare = |s: &EnsembleSpec| {
        let mut s = s.clone();
        s.horizon = horizon;
        s.checkpoints = times.clone();
        s.extinction_eps = None;
        s
    };
    let a = marginal_samples(&prepare(spec_a))?;
    let b = marginal_samples(&prepare(spec_b))?;
    let mut split_rng = RngStream::new(spec_a.seed, SPLIT_STREAM);
    let splits: Vec<Vec<usize>> = (0..SELF_SPLITS)
        .map(|_| {
            let mut order: Vec<usize> = (0..a.len()).collect();
            order.shuffle(&mut split_rng);
            order
        })
        .collect();
    let n = spec_a.params.n();
    let rows = (0..=n)
        .into_par_iter()
        .map(|m| ErgodicityRow {
            neuron: (m < n).then_some(m),
            w1_cross: wasserstein1(&flatten(&a, m), &flatten(&b, m)),
            w1_self: self_distance(&a, m, &splits),
        })
        .collect();

    let zero = crate::model::PotentialState::at_origin(vec![0.0; n])?;
    let mut rng = RngStream::new(spec_a.seed, CONTINUATION_STREAM);
    let zero_traj = simulate(&spec_a.params, &zero, &SimOptions::new(horizon), &mut rng)?;

    Ok(ErgodicityReport {
        rows,
        samples_a: a.len() * opts.samples,
        samples_b: b.len() * opts.samples,
        zero_state_spikes: zero_traj.events.len(),
    })
}

// ---------------------------------------------------------------------------
// First-spike bounds

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub r: f64,
    pub theta: f64,
    /// `r·(1 − (α+λ)θ)`
    pub beta: f64,
}

impl BoundParams {
    pub fn new(r: f64, theta: f64, alpha: f64, lambda: f64) -> Result<Self> {
        let drift = alpha + lambda;
        if !(theta > 0.0 && (drift == 0.0 || theta < 1.0 / drift)) {
            return Err(invalid(format!("theta = {theta} must lie in (0, 1/(alpha+lambda))")));
        }
        let beta = r * (1.0 - drift * theta);
        if !(beta > 0.0) {
            return Err(invalid(format!("beta = {beta} must be > 0")));
        }
        Ok(Self { r, theta, beta })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub name: &'static str,
    pub estimate: f64,
    pub std_error: f64,
    pub bound_corrected: f64,
    /// Same bound with the `N·α` prefactor in place of `N/α`, where applicable.
    pub bound_printed: Option<f64>,
    pub violated: bool,
    /// Replicas that reached the horizon without a decision (counted as spiking).
    pub undecided: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub rows: Vec<BoundRow>,
}

impl BoundsReport {
    pub fn violated(&self) -> bool {
        self.rows.iter().any(|r| r.violated)
    }
}

/// Monte Carlo check of the first-spike bounds.
///
/// * `U_max(0) < r`, `α > 0`: `P(no spike ever) >= exp(−(N/α)∫_0^{2r} φ(u)/u du)`,
///   estimated by running each replica until its first spike or until
///   extinction is certified.
/// * `U_max(0) > r`: `P(T₁ > θ) <= e^{−θφ(β)}`; needs `bp`.
pub fn check_spike_time_bounds(spec: &EnsembleSpec, bp: Option<BoundParams>) -> Result<BoundsReport> {
    let params = &spec.params;
    let initial = spec.initial.resolve(params)?;
    let n = params.n() as f64;
    let alpha = params.alpha();
    let umax = initial.max();
    let mut rows = Vec::new();

    let r = bp.map_or(params.phi().radius(), |b| b.r);
    if umax < r {
        if alpha <= 0.0 {
            return Err(Error::UnsupportedRegime("no-spike lower bound needs alpha > 0".into()));
        }
        let integral = params.phi().integral_over_u(2.0 * r);
        let eps = spec.extinction_eps.unwrap_or(DEFAULT_EXTINCTION_EPS);
        let opts = SimOptions {
            check_interval: spec.check_interval,
            ..SimOptions::new(spec.horizon).with_max_events(1).with_extinction(eps)
        };
        let outcomes = map_replicas(spec, &opts, |_, t| Ok((t.events.is_empty(), t.termination)))?;
        let quiet = outcomes.iter().filter(|(q, term)| *q && *term == Termination::Extinct).count();
        let undecided = outcomes.iter().filter(|(q, term)| *q && *term != Termination::Extinct).count();
        let (p, se) = proportion(quiet, outcomes.len());
        let bound = (-(n / alpha) * integral).exp();
        rows.push(BoundRow {
            name: "no_spike_ever_lower",
            estimate: p,
            std_error: se,
            bound_corrected: bound,
            bound_printed: Some((-(n * alpha) * integral).exp()),
            violated: wilson_interval(quiet, outcomes.len(), SIGMAS).1 < bound,
            undecided,
        });
    } else if umax > r {
        let bp = bp.ok_or_else(|| invalid("first-spike upper bound needs theta"))?;
        let opts = SimOptions { check_interval: spec.check_interval, ..SimOptions::new(bp.theta).with_max_events(1) };
        let outcomes = map_replicas(spec, &opts, |_, t| Ok(t.events.is_empty()))?;
        let quiet = outcomes.iter().filter(|&&q| q).count();
        let (p, se) = proportion(quiet, outcomes.len());
        let bound = (-bp.theta * params.phi().eval(bp.beta)).exp();
        rows.push(BoundRow {
            name: "first_spike_after_theta_upper",
            estimate: p,
            std_error: se,
            bound_corrected: bound,
            bound_printed: None,
            violated: wilson_interval(quiet, outcomes.len(), SIGMAS).0 > bound,
            undecided: 0,
        });
    } else {
        return Err(invalid("initial maximum potential equals r; neither bound applies"));
    }
    Ok(BoundsReport { rows })
}
