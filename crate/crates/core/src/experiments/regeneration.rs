use crate::cascade::cascade_configs;
use crate::error::{invalid, Result};
use crate::stats::quantile;

use super::ensemble::{map_replicas, EnsembleSpec};

/// Ball radius `δ` around `v(0)` and slot width `ε`; the sampling period is `T = N·ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegenerationSpec {
    pub delta: f64,
    pub epsilon: f64,
}

impl RegenerationSpec {
    pub fn period(&self, n: usize) -> f64 {
        n as f64 * self.epsilon
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegenerationTarget {
    /// Euclidean ball `B(v(0), δ)`, used without leak.
    Ball { center: Vec<f64>, delta: f64 },
    /// `{U_max <= r}`, used with leak.
    MaxBelow { r: f64 },
}

impl RegenerationTarget {
    pub fn contains(&self, u: &[f64]) -> bool {
        match self {
            RegenerationTarget::Ball { center, delta } => {
                let d2: f64 = u.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                d2.sqrt() < *delta
            }
            RegenerationTarget::MaxBelow { r } => u.iter().all(|&x| x <= *r),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegenerationReport {
    pub target: RegenerationTarget,
    pub period: f64,
    /// Gaps between consecutive visits, over all replicas.
    pub return_times: Vec<f64>,
    pub mean_return_time: Option<f64>,
    pub median_return_time: Option<f64>,
    /// Fraction of sampling times at which the state was in the target.
    pub visit_fraction: f64,
    pub windows: usize,
    /// Windows `[kT, (k+1)T)` with exactly `N` spikes, the `j`-th by neuron `j`
    /// inside `(kT + jε, kT + (j+1)ε)`.
    pub pattern_windows: usize,
}

impl RegenerationReport {
    pub fn pattern_frequency(&self) -> f64 {
        if self.windows == 0 {
            0.0
        } else {
            self.pattern_windows as f64 / self.windows as f64
        }
    }
}

/// Sample each replica at multiples of `T` and record returns to the target
/// set, together with the cascade pattern frequency per window.
pub fn regeneration_diagnostics(spec: &EnsembleSpec, rs: RegenerationSpec) -> Result<RegenerationReport> {
    let params = &spec.params;
    let n = params.n();
    if !(rs.epsilon > 0.0 && rs.epsilon.is_finite()) {
        return Err(invalid("epsilon must be finite and > 0"));
    }
    let target = if params.alpha() == 0.0 {
        let cascade = cascade_configs(params);
        let min_pos = cascade.min_positive_v0();
        if !(rs.delta > 0.0 && min_pos.is_some_and(|m| rs.delta < m)) {
            return Err(invalid(format!(
                "delta = {} must lie in (0, min positive coordinate of v(0) = {:?})",
                rs.delta, min_pos
            )));
        }
        RegenerationTarget::Ball { center: cascade.v[0].clone(), delta: rs.delta }
    } else {
        RegenerationTarget::MaxBelow { r: params.phi().radius() }
    };
    let period = rs.period(n);
    let windows_per_replica = (spec.horizon / period).floor() as usize;
    if windows_per_replica == 0 {
        return Err(invalid("horizon shorter than one period T = N·epsilon"));
    }
    let mut s = spec.clone();
    s.checkpoints = (0..=windows_per_replica).map(|k| k as f64 * period).collect();
    s.extinction_eps = None;

    let per_replica = map_replicas(&s, &s.sim_options(), |_, traj| {
        let visits: Vec<f64> = traj
            .checkpoints
            .iter()
            .filter(|st| target.contains(&st.u))
            .map(|st| st.t)
            .collect();
        let mut pattern = 0;
        let mut e = 0;
        for k in 0..windows_per_replica {
            let start = k as f64 * period;
            let end = start + period;
            while e < traj.events.len() && traj.events[e].t < start {
                e += 1;
            }
            let mut stop = e;
            while stop < traj.events.len() && traj.events[stop].t < end {
                stop += 1;
            }
            let window = &traj.events[e..stop];
            let ok = window.len() == n
                && window.iter().enumerate().all(|(j, ev)| {
                    let lo = start + j as f64 * rs.epsilon;
                    ev.i == j && ev.t > lo && ev.t < lo + rs.epsilon
                });
            pattern += ok as usize;
            e = stop;
        }
        Ok((visits, traj.checkpoints.len(), pattern))
    })?;

    let mut return_times = Vec::new();
    let mut samples = 0;
    let mut hits = 0;
    let mut pattern_windows = 0;
    for (visits, taken, pattern) in &per_replica {
        return_times.extend(visits.windows(2).map(|w| w[1] - w[0]));
        samples += taken;
        hits += visits.len();
        pattern_windows += pattern;
    }
    let (mean_return_time, median_return_time) = if return_times.is_empty() {
        (None, None)
    } else {
        let m = return_times.iter().sum::<f64>() / return_times.len() as f64;
        (Some(m), Some(quantile(&return_times, 0.5)))
    };
    Ok(RegenerationReport {
        target,
        period,
        return_times,
        mean_return_time,
        median_return_time,
        visit_fraction: if samples == 0 { 0.0 } else { hits as f64 / samples as f64 },
        windows: windows_per_replica * spec.replicas,
        pattern_windows,
    })
}
