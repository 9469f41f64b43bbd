//! Whole-trajectory simulation.
//!
//! [`simulate`] glues closed-form flow segments to sampled spikes. With leak
//! present it can stop early once the exact probability of any further spike
//! drops below a threshold. [`euler_simulate`] is a brute-force time-stepping
//! oracle used only to cross-check the exact engine.

use crate::error::{invalid, Error, Result};
use crate::model::{derived_constants, flow_unchecked, jump_in_place, mean, NetworkParams, PotentialState};
use crate::rng::RngStream;
use crate::sampler::{self, SpikeDraw};

pub const DEFAULT_MAX_EVENTS: u64 = 10_000_000;
pub const DEFAULT_EXTINCTION_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Horizon,
    MaxEvents,
    Extinct,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Horizon => "horizon",
            Termination::MaxEvents => "max_events",
            Termination::Extinct => "extinct",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeEvent {
    pub t: f64,
    pub i: usize,
    /// Potential of the spiking neuron was at most `2E` just before the spike.
    pub low: bool,
    pub u_pre: Option<Vec<f64>>,
    pub u_post: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: NetworkParams,
    pub initial: PotentialState,
    pub events: Vec<SpikeEvent>,
    pub final_state: PotentialState,
    pub termination: Termination,
    /// Residual spike probability at termination, when extinction detection ran.
    pub residual: Option<f64>,
    /// States at the requested checkpoint times (absent past a `max_events` stop).
    pub checkpoints: Vec<PotentialState>,
    pub states_recorded: bool,
    pub candidates_tried: u64,
}

impl Trajectory {
    pub fn spike_count(&self) -> usize {
        self.events.len()
    }

    /// Spikes strictly before or at `t`.
    pub fn spikes_until(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.t <= t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Absolute end time.
    pub horizon: f64,
    pub max_events: u64,
    pub record_states: bool,
    /// Stop once the residual spike probability falls below this (needs `α > 0`).
    pub extinction_eps: Option<f64>,
    /// Spacing of the absolute time grid at which extinction is re-checked
    /// and the thinning bound refreshed.
    pub check_interval: f64,
    /// Sorted absolute times at which to record the state.
    pub checkpoints: Vec<f64>,
}

impl SimOptions {
    pub fn new(horizon: f64) -> Self {
        Self {
            horizon,
            max_events: DEFAULT_MAX_EVENTS,
            record_states: false,
            extinction_eps: None,
            check_interval: 1.0,
            checkpoints: Vec::new(),
        }
    }

    pub fn with_extinction(mut self, eps: f64) -> Self {
        self.extinction_eps = Some(eps);
        self
    }

    pub fn with_states(mut self) -> Self {
        self.record_states = true;
        self
    }

    pub fn with_max_events(mut self, max_events: u64) -> Self {
        self.max_events = max_events;
        self
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<f64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }
}

struct CheckpointRecorder<'a> {
    times: &'a [f64],
    next: usize,
    states: Vec<PotentialState>,
}

impl CheckpointRecorder<'_> {
    /// Record every pending checkpoint before `until` (or at it, if `inclusive`)
    /// by flowing `from` forward.
    fn fill(&mut self, from: &PotentialState, params: &NetworkParams, until: f64, inclusive: bool) {
        while let Some(&c) = self.times.get(self.next) {
            if c < until || (inclusive && c <= until) {
                self.states.push(flow_unchecked(from, params, c - from.t));
                self.next += 1;
            } else {
                break;
            }
        }
    }
}

fn validate(params: &NetworkParams, initial: &PotentialState, opts: &SimOptions) -> Result<()> {
    if initial.n() != params.n() {
        return Err(invalid(format!(
            "initial state has {} potentials, network has {} neurons",
            initial.n(),
            params.n()
        )));
    }
    if !(opts.horizon > initial.t && opts.horizon.is_finite()) {
        return Err(invalid(format!(
            "horizon {} must be finite and after the start time {}",
            opts.horizon, initial.t
        )));
    }
    if !(opts.check_interval > 0.0 && opts.check_interval.is_finite()) {
        return Err(invalid("check interval must be finite and > 0"));
    }
    if let Some(eps) = opts.extinction_eps {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid(format!("extinction eps must lie in (0, 1), got {eps}")));
        }
        if params.alpha() == 0.0 {
            return Err(Error::UnsupportedRegime(
                "extinction detection needs leak (alpha > 0); without it the residual spike probability is 1".into(),
            ));
        }
    }
    let cps = &opts.checkpoints;
    if cps.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("checkpoints must be strictly increasing"));
    }
    if let (Some(&first), Some(&last)) = (cps.first(), cps.last()) {
        if first < initial.t || last > opts.horizon {
            return Err(invalid(format!(
                "checkpoints must lie in [{}, {}]",
                initial.t, opts.horizon
            )));
        }
    }
    Ok(())
}

/// Exact simulation from `initial` up to `opts.horizon`.
pub fn simulate(
    params: &NetworkParams,
    initial: &PotentialState,
    opts: &SimOptions,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    validate(params, initial, opts)?;
    let low_threshold = 2.0 * derived_constants(params).e_max;
    let mut recorder = CheckpointRecorder { times: &opts.checkpoints, next: 0, states: Vec::new() };
    let mut events: Vec<SpikeEvent> = Vec::new();
    let mut state = initial.clone();
    let mut residual = None;
    let mut candidates = 0u64;

    let interval = opts.check_interval;
    let mut grid_k = (state.t / interval).floor() as u64 + 1;
    while grid_k as f64 * interval <= state.t {
        grid_k += 1;
    }
    let mut at_check_point = true;

    let termination = loop {
        if state.max() == 0.0 {
            // Absorbing: no potential, no rate, no input.
            residual = Some(0.0);
            break Termination::Extinct;
        }
        if let (Some(eps), true) = (opts.extinction_eps, at_check_point) {
            // The cheap bracket settles most checks without quadrature.
            let (lo, hi) = sampler::residual_spike_bounds(&state, params)?;
            if hi < eps {
                residual = Some(sampler::residual_spike_probability(&state, params)?);
                break Termination::Extinct;
            }
            if lo < eps {
                let r = sampler::residual_spike_probability(&state, params)?;
                if r < eps {
                    residual = Some(r);
                    break Termination::Extinct;
                }
            }
        }
        if state.t >= opts.horizon {
            break Termination::Horizon;
        }
        if events.len() as u64 >= opts.max_events {
            break Termination::MaxEvents;
        }

        let boundary = grid_k as f64 * interval;
        let seg_end = boundary.min(opts.horizon);
        match sampler::next_spike_thinning(&state, params, rng, seg_end)? {
            SpikeDraw::Spike(sp) => {
                candidates += sp.candidates_tried;
                recorder.fill(&state, params, sp.t, false);
                let mut u = flow_unchecked(&state, params, sp.t - state.t).u;
                let low = u[sp.i] <= low_threshold;
                let u_pre = opts.record_states.then(|| u.clone());
                jump_in_place(&mut u, params, sp.i);
                let u_post = opts.record_states.then(|| u.clone());
                events.push(SpikeEvent { t: sp.t, i: sp.i, low, u_pre, u_post });
                state = PotentialState { u, t: sp.t };
                at_check_point = true;
            }
            SpikeDraw::NoSpikeBeforeHorizon { state: flowed, candidates_tried } => {
                candidates += candidates_tried;
                recorder.fill(&state, params, seg_end, true);
                state = flowed;
                at_check_point = seg_end == boundary;
                if at_check_point {
                    grid_k += 1;
                }
            }
        }
    };

    if termination == Termination::Extinct {
        recorder.fill(&state, params, f64::INFINITY, true);
    } else if termination == Termination::Horizon {
        recorder.fill(&state, params, opts.horizon, true);
        if opts.extinction_eps.is_some() {
            residual = Some(sampler::residual_spike_probability(&state, params)?);
        }
    }

    Ok(Trajectory {
        params: params.clone(),
        initial: initial.clone(),
        events,
        final_state: state,
        termination,
        residual,
        checkpoints: recorder.states,
        states_recorded: opts.record_states,
        candidates_tried: candidates,
    })
}

/// Default Euler step `1e−4·min(1, 1/(α + λ + Nφ(U_max)))`.
pub fn default_euler_step(params: &NetworkParams, initial: &PotentialState) -> f64 {
    let scale = params.alpha() + params.lambda() + sampler::dominating_rate(initial, params);
    1e-4 * if scale > 1.0 { 1.0 / scale } else { 1.0 }
}

/// Time-stepping oracle: explicit Euler for the drift, and in each step of
/// length `h` neuron `i` fires with probability `φ(u_i)·h`, at most one
/// neuron per step.
pub fn euler_simulate(
    params: &NetworkParams,
    initial: &PotentialState,
    horizon: f64,
    h: f64,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("Euler step must be > 0, got {h}")));
    }
    validate(params, initial, &SimOptions::new(horizon))?;
    let low_threshold = 2.0 * derived_constants(params).e_max;
    let (alpha, lambda) = (params.alpha(), params.lambda());
    let phi = params.phi();
    let steps = ((horizon - initial.t) / h).ceil() as u64;
    let mut u = initial.u.clone();
    let mut rates = vec![0.0; u.len()];
    let mut events = Vec::new();
    let mut termination = Termination::Horizon;
    let mut end = horizon;

    for k in 1..=steps {
        if u.iter().all(|&v| v == 0.0) {
            termination = Termination::Extinct;
            end = (initial.t + (k - 1) as f64 * h).min(horizon);
            break;
        }
        let mut total = 0.0;
        for (r, &v) in rates.iter_mut().zip(&u) {
            *r = phi.eval(v) * h;
            total += *r;
        }
        if total > 1.0 {
            return Err(invalid(format!("Euler step {h} too large: firing probability {total} > 1")));
        }
        let fire = rng.uniform();
        let ubar = mean(&u);
        for v in u.iter_mut() {
            *v = (*v + h * (-alpha * *v - lambda * (*v - ubar))).max(0.0);
        }
        if fire < total {
            let mut acc = 0.0;
            let mut chosen = 0;
            for (j, &r) in rates.iter().enumerate() {
                if r > 0.0 {
                    acc += r;
                    chosen = j;
                    if fire < acc {
                        break;
                    }
                }
            }
            let t = (initial.t + k as f64 * h).min(horizon);
            let low = u[chosen] <= low_threshold;
            jump_in_place(&mut u, params, chosen);
            events.push(SpikeEvent { t, i: chosen, low, u_pre: None, u_post: None });
        }
    }
    Ok(Trajectory {
        params: params.clone(),
        initial: initial.clone(),
        events,
        final_state: PotentialState { u, t: end },
        termination,
        residual: None,
        checkpoints: Vec::new(),
        states_recorded: false,
        candidates_tried: 0,
    })
}

/// One evaluation of the three pathwise bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantCheckpoint {
    pub t: f64,
    /// Spikes so far fired from potential at most `2E`.
    pub low_spikes: usize,
    pub spikes: usize,
    /// `ū(0) + (E/N)k(t) − ū(t)`
    pub mean_slack: f64,
    /// `Nū(0) + 2E·k(t) − E·N(t)`
    pub count_slack: f64,
    /// `(N+1)U_max(0) + 2E·k(t) − U_max(t)`
    pub max_slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    pub checkpoints: Vec<InvariantCheckpoint>,
    /// Minimum slack of the mean, spike-count and maximum bounds.
    pub min_slack: [f64; 3],
}

impl InvariantReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.min_slack.iter().all(|&s| s >= -tol)
    }
}

/// Evaluate the pathwise bounds on potentials and spike counts just before
/// and just after every spike and at termination.
pub fn check_pathwise_invariants(traj: &Trajectory) -> Result<InvariantReport> {
    if !traj.states_recorded {
        return Err(invalid("pathwise invariant check needs a trajectory recorded with state snapshots"));
    }
    let n = traj.params.n() as f64;
    let e = derived_constants(&traj.params).e_max;
    let ubar0 = traj.initial.mean();
    let umax0 = traj.initial.max();
    let eval = |t: f64, u: &[f64], k: usize, spikes: usize| {
        let kf = k as f64;
        InvariantCheckpoint {
            t,
            low_spikes: k,
            spikes,
            mean_slack: ubar0 + e / n * kf - mean(u),
            count_slack: n * ubar0 + 2.0 * e * kf - e * spikes as f64,
            max_slack: (n + 1.0) * umax0 + 2.0 * e * kf - u.iter().copied().fold(0.0, f64::max),
        }
    };

    let mut checkpoints = vec![eval(traj.initial.t, &traj.initial.u, 0, 0)];
    let mut k = 0;
    for (m, ev) in traj.events.iter().enumerate() {
        let (Some(pre), Some(post)) = (&ev.u_pre, &ev.u_post) else {
            return Err(invalid(format!("event {m} lacks state snapshots")));
        };
        checkpoints.push(eval(ev.t, pre, k, m));
        k += usize::from(ev.low);
        checkpoints.push(eval(ev.t, post, k, m + 1));
    }
    checkpoints.push(eval(traj.final_state.t, &traj.final_state.u, k, traj.events.len()));

    let min_slack = checkpoints.iter().fold([f64::INFINITY; 3], |acc, c| {
        [acc[0].min(c.mean_slack), acc[1].min(c.count_slack), acc[2].min(c.max_slack)]
    });
    Ok(InvariantReport { checkpoints, min_slack })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::RateFunction;

    fn net(n: usize, w: Vec<f64>, lambda: f64, alpha: f64) -> NetworkParams {
        NetworkParams::from_row_major(n, w, lambda, alpha, RateFunction::linear(1.0, 1.0).unwrap()).unwrap()
    }

    fn ring3() -> Vec<f64> {
        vec![0.0, 0.25, 0.25, 0.25, 0.0, 0.25, 0.25, 0.25, 0.0]
    }

    #[test]
    fn zero_initial_state_is_extinct_immediately() {
        let p = net(3, ring3(), 1.0, 0.5);
        let s = PotentialState::at_origin(vec![0.0; 3]).unwrap();
        let mut rng = RngStream::new(1, 0);
        let traj = simulate(&p, &s, &SimOptions::new(10.0).with_extinction(1e-9), &mut rng).unwrap();
        assert_eq!(traj.events.len(), 0);
        assert_eq!(traj.termination, Termination::Extinct);
        assert_eq!(traj.residual, Some(0.0));
        // Also without leak.
        let p0 = net(3, ring3(), 1.0, 0.0);
        let traj = simulate(&p0, &s, &SimOptions::new(10.0), &mut rng).unwrap();
        assert_eq!((traj.events.len(), traj.termination), (0, Termination::Extinct));
    }

    #[test]
    fn extinction_needs_leak() {
        let p = net(3, ring3(), 1.0, 0.0);
        let s = PotentialState::at_origin(vec![1.0; 3]).unwrap();
        let mut rng = RngStream::new(1, 0);
        let err = simulate(&p, &s, &SimOptions::new(10.0).with_extinction(1e-9), &mut rng).unwrap_err();
        assert!(matches!(err, Error::UnsupportedRegime(_)));
    }

    #[test]
    fn single_neuron_spikes_at_most_once() {
        let p = net(1, vec![0.0], 0.0, 0.0);
        let s = PotentialState::at_origin(vec![2.0]).unwrap();
        for seed in 0..200 {
            let mut rng = RngStream::new(seed, 0);
            let traj = simulate(&p, &s, &SimOptions::new(50.0), &mut rng).unwrap();
            assert!(traj.events.len() <= 1);
            if traj.events.len() == 1 {
                assert_eq!(traj.termination, Termination::Extinct);
                assert_eq!(traj.final_state.u, vec![0.0]);
            }
        }
    }

    #[test]
    fn determinism_and_event_consistency() {
        let p = net(3, ring3(), 0.8, 0.0);
        let s = PotentialState::at_origin(vec![1.0, 0.4, 2.0]).unwrap();
        let opts = SimOptions::new(30.0).with_states().with_checkpoints(vec![0.0, 5.5, 30.0]);
        let a = simulate(&p, &s, &opts, &mut RngStream::new(4, 2)).unwrap();
        let b = simulate(&p, &s, &opts, &mut RngStream::new(4, 2)).unwrap();
        assert_eq!(a, b);
        assert!(a.events.len() > 5);
        assert_eq!(a.checkpoints.len(), 3);
        assert_eq!(a.checkpoints[0], s);
        assert_eq!(a.checkpoints[2].u, a.final_state.u);

        let mut prev = s.clone();
        for ev in &a.events {
            assert!(ev.t > prev.t);
            let expect = flow_unchecked(&prev, &p, ev.t - prev.t);
            for (x, y) in expect.u.iter().zip(ev.u_pre.as_ref().unwrap()) {
                assert!((x - y).abs() <= 1e-9);
            }
            let mut post = ev.u_pre.clone().unwrap();
            jump_in_place(&mut post, &p, ev.i);
            assert_eq!(&post, ev.u_post.as_ref().unwrap());
            prev = PotentialState { u: post, t: ev.t };
        }
    }

    #[test]
    fn max_events_stops_and_leaves_later_checkpoints_unset() {
        let p = net(3, ring3(), 0.8, 0.0);
        let s = PotentialState::at_origin(vec![1.0, 0.4, 2.0]).unwrap();
        let opts = SimOptions::new(100.0).with_max_events(3).with_checkpoints(vec![99.0]);
        let t = simulate(&p, &s, &opts, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(t.termination, Termination::MaxEvents);
        assert_eq!(t.events.len(), 3);
        assert!(t.checkpoints.is_empty());
    }

    #[test]
    fn invariant_checker_requires_snapshots_and_handles_quiet_paths() {
        let p = net(3, vec![0.0; 9], 0.5, 1.0);
        let s = PotentialState::at_origin(vec![0.0, 0.0, 0.0]).unwrap();
        let t = simulate(&p, &s, &SimOptions::new(5.0), &mut RngStream::new(1, 0)).unwrap();
        assert!(check_pathwise_invariants(&t).is_err());

        // W ≡ 0: E = 0, the count bound reads 0 <= Nū(0).
        let s = PotentialState::at_origin(vec![0.3, 0.1, 0.2]).unwrap();
        let t = simulate(&p, &s, &SimOptions::new(5.0).with_states(), &mut RngStream::new(1, 0)).unwrap();
        let rep = check_pathwise_invariants(&t).unwrap();
        assert!(rep.holds(0.0));
        assert!((rep.checkpoints[0].count_slack - 3.0 * s.mean()).abs() < 1e-15);
    }

    #[test]
    fn invariants_hold_on_random_paths() {
        let p = net(3, vec![0.0, 0.9, 0.1, 0.5, 0.0, 0.7, 0.2, 0.3, 0.0], 0.6, 0.05);
        let s = PotentialState::at_origin(vec![3.0, 0.0, 1.0]).unwrap();
        for seed in 0..50 {
            let t = simulate(&p, &s, &SimOptions::new(20.0).with_states(), &mut RngStream::new(seed, 0)).unwrap();
            let rep = check_pathwise_invariants(&t).unwrap();
            assert!(rep.holds(1e-9), "{:?}", rep.min_slack);
        }
    }

    #[test]
    fn euler_basics() {
        let p = net(2, vec![0.0, 0.3, 0.3, 0.0], 0.5, 0.5);
        let zero = PotentialState::at_origin(vec![0.0, 0.0]).unwrap();
        let t = euler_simulate(&p, &zero, 2.0, 1e-3, &mut RngStream::new(1, 0)).unwrap();
        assert!(t.events.is_empty());
        assert!(euler_simulate(&p, &zero, 2.0, 0.0, &mut RngStream::new(1, 0)).is_err());

        // c = 0: pure drift, matches the closed form within O(h).
        let quiet = p.with_phi(RateFunction::linear(0.0, 1.0).unwrap());
        let s = PotentialState::at_origin(vec![2.0, 0.5]).unwrap();
        let h = 1e-4;
        let t = euler_simulate(&quiet, &s, 1.0, h, &mut RngStream::new(1, 0)).unwrap();
        let exact = flow_unchecked(&s, &quiet, 1.0);
        for (a, b) in t.final_state.u.iter().zip(&exact.u) {
            assert!((a - b).abs() < 10.0 * h, "{a} {b}");
        }
    }

    #[test]
    fn euler_first_spike_mean_in_constant_rate_case() {
        let p = net(2, vec![0.0; 4], 0.0, 0.0);
        let s = PotentialState::at_origin(vec![2.0, 0.0]).unwrap();
        let n = 100_000;
        let mut rng = RngStream::new(77, 0);
        let mut sum = 0.0;
        for _ in 0..n {
            // A lone spike from neuron 0 leaves everything at zero.
            let t = euler_simulate(&p, &s, 20.0, 1e-4, &mut rng).unwrap();
            sum += t.events.first().map_or(20.0, |e| e.t);
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 0.02 * 0.5, "{mean}");
    }
}
