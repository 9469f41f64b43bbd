//! Exact sampling of the next spike.
//!
//! Between spikes the total firing intensity is `Σ_j φ(u_j(t))` along the
//! closed-form flow. No coordinate of the flow ever exceeds the starting
//! maximum, so `N·φ(U_max)` dominates the intensity for the whole
//! inter-spike interval and thinning against it is exact.
//!
//! The survival function `exp(−∫ Σ_j φ(u_j))` is evaluated independently by
//! quadrature (closed form for the linear rate) and backs both the
//! inversion sampler and the residual spike probability.

use crate::error::{invalid, Error, Result};
use crate::model::{flow_unchecked, FlowFactors, NetworkParams, PotentialState};
use crate::quadrature::integrate;
use crate::rate::RateKind;
use crate::rng::RngStream;

const QUAD_REL_TOL: f64 = 1e-10;
const QUAD_ABS_TOL: f64 = 1e-15;
/// Absolute bound on the neglected intensity tail in infinite-horizon integrals.
const TAIL_TOL: f64 = 1e-15;
const INVERSION_TIME_TOL: f64 = 1e-10;
/// Slack on the thinning acceptance ratio for round-off in the flow.
const RATIO_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NextSpike {
    /// Absolute spike time, strictly after the state's time.
    pub t: f64,
    pub i: usize,
    pub candidates_tried: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpikeDraw {
    Spike(NextSpike),
    /// No spike up to the horizon; carries the state flowed to the horizon.
    NoSpikeBeforeHorizon { state: PotentialState, candidates_tried: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InversionDraw {
    /// Absolute time of the first spike.
    Time(f64),
    NoSpikeEver,
}

/// Instantaneous total rate `Σ_j φ(u_j)`.
pub fn total_rate(s: &PotentialState, params: &NetworkParams) -> f64 {
    s.u.iter().map(|&u| params.phi().eval(u)).sum()
}

/// `N·φ(U_max)`: an upper bound on the total rate for the whole no-spike flow from `s`.
pub fn dominating_rate(s: &PotentialState, params: &NetworkParams) -> f64 {
    params.n() as f64 * params.phi().eval(s.max())
}

/// Thinning against [`dominating_rate`]. The bound is fixed for the call.
pub fn next_spike_thinning(
    s: &PotentialState,
    params: &NetworkParams,
    rng: &mut RngStream,
    horizon: f64,
) -> Result<SpikeDraw> {
    if !(horizon > s.t && horizon.is_finite()) {
        return Err(invalid(format!(
            "horizon {horizon} must be finite and after the current time {}",
            s.t
        )));
    }
    let bound = dominating_rate(s, params);
    let no_spike = |tried| SpikeDraw::NoSpikeBeforeHorizon {
        state: flow_unchecked(s, params, horizon - s.t),
        candidates_tried: tried,
    };
    if bound <= 0.0 {
        return Ok(no_spike(0));
    }

    let phi = params.phi();
    let ubar = s.mean();
    let mut rates = vec![0.0; s.n()];
    let mut t = s.t;
    let mut tried = 0u64;
    loop {
        t += rng.exp1() / bound;
        if t > horizon {
            return Ok(no_spike(tried));
        }
        tried += 1;
        let factors = FlowFactors::new(params.alpha(), params.lambda(), t - s.t);
        let mut total = 0.0;
        for (r, &u) in rates.iter_mut().zip(&s.u) {
            *r = phi.eval(factors.coord(u, ubar));
            total += *r;
        }
        if total > bound * (1.0 + RATIO_SLACK) {
            return Err(Error::DominatingRateViolated { ratio: total / bound, t });
        }
        // Conditional on acceptance, `v` is uniform on [0, total) and picks the neuron.
        let v = rng.uniform() * bound;
        if v < total {
            let mut acc = 0.0;
            let mut chosen = None;
            for (j, &r) in rates.iter().enumerate() {
                if r > 0.0 {
                    acc += r;
                    chosen = Some(j);
                    if v < acc {
                        break;
                    }
                }
            }
            let i = chosen.expect("positive total rate has a positive term");
            return Ok(SpikeDraw::Spike(NextSpike { t, i, candidates_tried: tried }));
        }
    }
}

/// The total intensity along the no-spike flow started from a fixed state.
pub(crate) struct IntensityPath<'a> {
    params: &'a NetworkParams,
    u: &'a [f64],
    ubar: f64,
}

impl<'a> IntensityPath<'a> {
    pub fn new(s: &'a PotentialState, params: &'a NetworkParams) -> Self {
        Self { params, u: &s.u, ubar: s.mean() }
    }

    /// Total rate `tau` time units after the start.
    pub fn rate_at(&self, tau: f64) -> f64 {
        let factors = FlowFactors::new(self.params.alpha(), self.params.lambda(), tau);
        let phi = self.params.phi();
        self.u.iter().map(|&u| phi.eval(factors.coord(u, self.ubar))).sum()
    }

    fn is_linear(&self) -> bool {
        matches!(self.params.phi().kind(), RateKind::Linear)
    }

    /// `∫_0^tau Σ_j u_j` for the linear rate; the deviations from the mean sum to 0.
    fn linear_primitive(&self, tau: f64) -> f64 {
        let mass = self.params.phi().slope() * self.u.len() as f64 * self.ubar;
        let alpha = self.params.alpha();
        if alpha == 0.0 {
            mass * tau
        } else {
            mass * -(-alpha * tau).exp_m1() / alpha
        }
    }

    /// `∫_a^b` of the total rate, `0 <= a <= b` relative to the start.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a || self.ubar == 0.0 {
            return 0.0;
        }
        if self.is_linear() {
            return self.linear_primitive(b) - self.linear_primitive(a);
        }
        integrate(|tau| self.rate_at(tau), a, b, QUAD_ABS_TOL, QUAD_REL_TOL).value
    }

    /// `∫_0^∞` of the total rate; requires `α > 0`.
    pub fn integral_to_infinity(&self) -> f64 {
        let alpha = self.params.alpha();
        debug_assert!(alpha > 0.0);
        if self.ubar == 0.0 {
            return 0.0;
        }
        if self.is_linear() {
            return self.params.phi().slope() * self.u.len() as f64 * self.ubar / alpha;
        }
        // Past time T every coordinate is below U_max(T)·e^{−α(τ−T)}, so the
        // tail is at most (N/α)·∫_0^{U_max(T)} φ(u)/u du.
        let n = self.u.len() as f64;
        let u_max0 = self.u.iter().copied().fold(0.0, f64::max);
        let mut cut = 1.0 / alpha;
        loop {
            let factors = FlowFactors::new(alpha, self.params.lambda(), cut);
            let m = self
                .u
                .iter()
                .map(|&u| factors.coord(u, self.ubar))
                .fold(0.0, f64::max)
                .min(u_max0);
            let tail = n / alpha * self.params.phi().integral_over_u(m);
            if tail <= TAIL_TOL || cut > 1e6 / alpha {
                break;
            }
            cut *= 2.0;
        }
        // Panels at 1/α, 2/α, 4/α, … keep the exponentially decaying integrand well resolved.
        let mut total = 0.0;
        let mut a = 0.0;
        let mut b = 1.0 / alpha;
        while a < cut {
            total += integrate(|tau| self.rate_at(tau), a, b, QUAD_ABS_TOL, QUAD_REL_TOL).value;
            a = b;
            b *= 2.0;
        }
        total
    }
}

/// Cumulative intensity `∫_{s.t}^{t} Σ_j φ(u_j)` along the no-spike flow.
pub fn cumulative_intensity(s: &PotentialState, params: &NetworkParams, t: f64) -> Result<f64> {
    if !(t >= s.t) {
        return Err(invalid(format!("time {t} precedes the state's time {}", s.t)));
    }
    Ok(IntensityPath::new(s, params).integral(0.0, t - s.t))
}

/// `P(T₁ > t | state s)`.
pub fn survival_probability(s: &PotentialState, params: &NetworkParams, t: f64) -> Result<f64> {
    if t == f64::INFINITY {
        return Ok(1.0 - residual_spike_probability(s, params)?);
    }
    Ok((-cumulative_intensity(s, params, t)?).exp())
}

/// Probability that at least one more spike ever occurs from `s`; needs leak (`α > 0`).
pub fn residual_spike_probability(s: &PotentialState, params: &NetworkParams) -> Result<f64> {
    if params.alpha() <= 0.0 {
        return Err(Error::UnsupportedRegime(
            "residual spike probability needs alpha > 0; without leak the intensity integral diverges".into(),
        ));
    }
    let total = IntensityPath::new(s, params).integral_to_infinity();
    Ok(-(-total).exp_m1())
}

/// Cheap bracket `(lo, hi)` on [`residual_spike_probability`] from the
/// envelopes `U_max e^{−(α+λ)τ} <= max_j u_j(τ) <= U_max e^{−ατ}`.
pub fn residual_spike_bounds(s: &PotentialState, params: &NetworkParams) -> Result<(f64, f64)> {
    let alpha = params.alpha();
    if alpha <= 0.0 {
        return Err(Error::UnsupportedRegime("residual bounds need alpha > 0".into()));
    }
    let j = params.phi().integral_over_u(s.max());
    let lo = -(-j / (alpha + params.lambda())).exp_m1();
    let hi = -(-(params.n() as f64) * j / alpha).exp_m1();
    Ok((lo, hi))
}

/// Draw `T₁` by inverting the cumulative intensity against an `Exp(1)` variate
/// (bracketing, then bisection).
pub fn sample_t1_inversion(s: &PotentialState, params: &NetworkParams, rng: &mut RngStream) -> Result<InversionDraw> {
    let target = rng.exp1();
    let path = IntensityPath::new(s, params);
    if s.max() == 0.0 {
        return Ok(InversionDraw::NoSpikeEver);
    }
    if params.alpha() > 0.0 && path.integral_to_infinity() <= target {
        return Ok(InversionDraw::NoSpikeEver);
    }

    let rate0 = path.rate_at(0.0);
    let mut step = if rate0 > 0.0 { target / rate0 } else { 1.0 };
    let (mut lo, mut acc_lo) = (0.0f64, 0.0f64);
    let mut hi = step;
    let mut acc_hi = path.integral(0.0, hi);
    while acc_hi < target {
        lo = hi;
        acc_lo = acc_hi;
        step *= 2.0;
        hi = lo + step;
        acc_hi = acc_lo + path.integral(lo, hi);
        if !hi.is_finite() {
            return Ok(InversionDraw::NoSpikeEver);
        }
    }
    while hi - lo > INVERSION_TIME_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let acc_mid = acc_lo + path.integral(lo, mid);
        if acc_mid < target {
            lo = mid;
            acc_lo = acc_mid;
        } else {
            hi = mid;
        }
    }
    Ok(InversionDraw::Time(s.t + 0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::RateFunction;

    fn net(n: usize, w: Vec<f64>, lambda: f64, alpha: f64, phi: RateFunction) -> NetworkParams {
        NetworkParams::from_row_major(n, w, lambda, alpha, phi).unwrap()
    }

    fn lin(c: f64) -> RateFunction {
        RateFunction::linear(c, 1.0).unwrap()
    }

    fn state(u: &[f64]) -> PotentialState {
        PotentialState::at_origin(u.to_vec()).unwrap()
    }

    #[test]
    fn dominating_rate_examples() {
        let p = net(2, vec![0.0; 4], 0.0, 0.0, lin(1.0));
        assert_eq!(dominating_rate(&state(&[0.0, 0.0]), &p), 0.0);
        assert_eq!(dominating_rate(&state(&[2.0, 0.0]), &p), 4.0);
        let s = state(&[0.4, 3.0]);
        assert!(dominating_rate(&s, &p) >= total_rate(&s, &p));
    }

    #[test]
    fn zero_state_never_spikes() {
        let p = net(3, vec![0.1; 9].iter().enumerate().map(|(k, &w)| if k % 4 == 0 { 0.0 } else { w }).collect(), 1.0, 0.5, lin(1.0));
        let s = state(&[0.0; 3]);
        let mut rng = RngStream::new(1, 0);
        match next_spike_thinning(&s, &p, &mut rng, 100.0).unwrap() {
            SpikeDraw::NoSpikeBeforeHorizon { state, candidates_tried } => {
                assert_eq!(state.t, 100.0);
                assert_eq!(candidates_tried, 0);
                assert!(state.is_zero());
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(sample_t1_inversion(&s, &p, &mut rng).unwrap(), InversionDraw::NoSpikeEver);
        assert_eq!(residual_spike_probability(&s, &p).unwrap(), 0.0);
        assert!(next_spike_thinning(&s, &p, &mut rng, 0.0).is_err());
    }

    #[test]
    fn constant_rate_case() {
        // α = λ = 0, linear c = 1, u = (2, 0): total rate 2, only neuron 0 can fire.
        let p = net(2, vec![0.0; 4], 0.0, 0.0, lin(1.0));
        let s = state(&[2.0, 0.0]);
        let mut rng = RngStream::new(9, 0);
        let n = 50_000;
        let mut sum = 0.0;
        for _ in 0..n {
            match next_spike_thinning(&s, &p, &mut rng, 1e9).unwrap() {
                SpikeDraw::Spike(sp) => {
                    assert_eq!(sp.i, 0);
                    assert!(sp.t > 0.0);
                    sum += sp.t;
                }
                other => panic!("{other:?}"),
            }
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt(), "{mean}");
        for t in [0.0, 0.3, 1.7] {
            let sv = survival_probability(&s, &p, t).unwrap();
            assert!((sv - (-2.0 * t).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_start_picks_uniformly() {
        let p = net(2, vec![0.0, 0.3, 0.3, 0.0], 0.8, 0.2, lin(1.0));
        let s = state(&[1.0, 1.0]);
        let mut rng = RngStream::new(5, 0);
        let n = 40_000;
        let mut zeros = 0;
        for _ in 0..n {
            if let SpikeDraw::Spike(sp) = next_spike_thinning(&s, &p, &mut rng, 1e6).unwrap() {
                zeros += usize::from(sp.i == 0);
            }
        }
        let frac = zeros as f64 / n as f64;
        assert!((frac - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt(), "{frac}");
    }

    #[test]
    fn linear_closed_forms_match_quadrature() {
        // The power kind with p = 1 is the linear rate routed through quadrature.
        let w = vec![0.0, 0.4, 0.1, 0.2, 0.0, 0.3, 0.5, 0.0, 0.0];
        let s = state(&[0.2, 1.5, 3.0]);
        for (lambda, alpha) in [(0.0, 0.7), (1.3, 0.0), (2.0, 0.5), (0.0, 0.0)] {
            let lp = net(3, w.clone(), lambda, alpha, RateFunction::linear(0.8, 1.0).unwrap());
            let qp = net(3, w.clone(), lambda, alpha, RateFunction::power(0.8, 1.0, 1.0).unwrap());
            for t in [0.1, 1.0, 4.0] {
                let a = survival_probability(&s, &lp, t).unwrap();
                let b = survival_probability(&s, &qp, t).unwrap();
                assert!((a - b).abs() < 1e-10 * a.max(1e-300), "{lambda} {alpha} {t}: {a} {b}");
                let delta = t;
                let closed = if alpha > 0.0 {
                    (-0.8 * 3.0 * s.mean() * (1.0 - (-alpha * delta).exp()) / alpha).exp()
                } else {
                    (-0.8 * 3.0 * s.mean() * delta).exp()
                };
                assert!((a - closed).abs() < 1e-14);
            }
            if alpha > 0.0 {
                let a = residual_spike_probability(&s, &lp).unwrap();
                let b = residual_spike_probability(&s, &qp).unwrap();
                let closed = 1.0 - (-0.8 * 3.0 * s.mean() / alpha).exp();
                assert!((a - closed).abs() < 1e-15);
                assert!((a - b).abs() < 1e-10, "{a} {b}");
            }
        }
    }

    #[test]
    fn residual_examples() {
        let w = vec![0.0, 0.2, 0.2, 0.0];
        let p = net(2, w.clone(), 1.0, 0.5, RateFunction::power(1.0, 0.5, 1.0).unwrap());
        assert!(residual_spike_probability(&state(&[1.0, 0.5]), &p.with_alpha(0.0).unwrap()).is_err());
        // Monotone decreasing in α.
        let s = state(&[1.0, 0.5]);
        let mut last = 1.0;
        for alpha in [0.1, 0.5, 1.0, 4.0, 20.0, 100.0] {
            let r = residual_spike_probability(&s, &p.with_alpha(alpha).unwrap()).unwrap();
            assert!(r < last, "{alpha}: {r} !< {last}");
            let (lo, hi) = residual_spike_bounds(&s, &p.with_alpha(alpha).unwrap()).unwrap();
            assert!(lo <= r * (1.0 + 1e-9) && r <= hi * (1.0 + 1e-9), "{lo} {r} {hi}");
            last = r;
        }
        // Non-increasing along the no-spike flow.
        let sp = net(2, w, 0.7, 0.3, RateFunction::saturating(2.0, 0.5, 1.0).unwrap());
        let mut last = 1.0;
        for k in 0..20 {
            let st = flow_unchecked(&s, &sp, k as f64 * 0.5);
            let r = residual_spike_probability(&st, &sp).unwrap();
            assert!(r <= last + 1e-12);
            last = r;
        }
        // Infinite-horizon survival agrees with the residual.
        let inf = survival_probability(&s, &sp, f64::INFINITY).unwrap();
        let far = survival_probability(&s, &sp, 200.0).unwrap();
        assert!((inf - far).abs() < 1e-9);
    }

    #[test]
    fn inversion_no_spike_ever_rate() {
        // α > 0, linear: P(NoSpikeEver) = exp(−cNū/α).
        let p = net(2, vec![0.0, 0.1, 0.1, 0.0], 1.0, 1.0, lin(0.5));
        let s = state(&[0.6, 1.0]);
        let expect = (-0.5 * 2.0 * s.mean() / 1.0f64).exp();
        let mut rng = RngStream::new(3, 0);
        let n = 40_000;
        let never = (0..n)
            .filter(|_| sample_t1_inversion(&s, &p, &mut rng).unwrap() == InversionDraw::NoSpikeEver)
            .count();
        let frac = never as f64 / n as f64;
        let sd = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((frac - expect).abs() < 4.0 * sd, "{frac} vs {expect}");
    }

    #[test]
    fn inversion_hits_the_target_quantile() {
        // With a fixed seed, the drawn time must solve Λ(t) = X to the bisection tolerance.
        let p = net(3, vec![0.0, 0.2, 0.3, 0.1, 0.0, 0.2, 0.4, 0.1, 0.0], 0.9, 0.0, RateFunction::power(1.2, 0.6, 1.0).unwrap());
        let s = PotentialState::new(vec![0.0, 0.9, 2.2], 1.5).unwrap();
        let mut a = RngStream::new(11, 4);
        let mut b = RngStream::new(11, 4);
        for _ in 0..50 {
            let x = b.exp1();
            match sample_t1_inversion(&s, &p, &mut a).unwrap() {
                InversionDraw::Time(t) => {
                    assert!(t > s.t);
                    let lam = cumulative_intensity(&s, &p, t).unwrap();
                    let rate = IntensityPath::new(&s, &p).rate_at(t - s.t);
                    assert!((lam - x).abs() <= rate * 2e-10 + 1e-9, "{lam} vs {x}");
                }
                InversionDraw::NoSpikeEver => panic!("α = 0 always spikes"),
            }
        }
    }
}
