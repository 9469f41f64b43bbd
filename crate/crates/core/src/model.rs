//! Network definition, Markov state and the two pieces of the dynamics: the
//! closed-form inter-spike flow and the spike (jump) map.

use crate::error::{invalid, Error, Result};
use crate::rate::RateFunction;

/// Full model definition. Weights are dense row-major: `weight(i, j)` is the
/// potential added to neuron `j` when neuron `i` spikes.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    n: usize,
    weights: Vec<f64>,
    lambda: f64,
    alpha: f64,
    phi: RateFunction,
}

impl NetworkParams {
    pub fn new(weights: Vec<Vec<f64>>, lambda: f64, alpha: f64, phi: RateFunction) -> Result<Self> {
        let n = weights.len();
        if let Some((i, row)) = weights.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(invalid(format!(
                "weight matrix must be {n}x{n}; row {i} has {} entries",
                row.len()
            )));
        }
        Self::from_row_major(n, weights.into_iter().flatten().collect(), lambda, alpha, phi)
    }

    pub fn from_row_major(n: usize, weights: Vec<f64>, lambda: f64, alpha: f64, phi: RateFunction) -> Result<Self> {
        if n == 0 {
            return Err(invalid("network needs at least one neuron"));
        }
        if weights.len() != n * n {
            return Err(invalid(format!("expected {} weights, got {}", n * n, weights.len())));
        }
        for (k, &w) in weights.iter().enumerate() {
            let (i, j) = (k / n, k % n);
            if !(w.is_finite() && w >= 0.0) {
                return Err(invalid(format!("weight W[{i}][{j}] = {w} must be finite and >= 0")));
            }
            if i == j && w != 0.0 {
                return Err(invalid(format!(
                    "diagonal weight W[{i}][{i}] = {w}: self-weights must be 0"
                )));
            }
        }
        for (name, v) in [("lambda", lambda), ("alpha", alpha)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self { n, weights, lambda, alpha, phi })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.weights[from * self.n + to]
    }

    pub fn weights_row(&self, from: usize) -> &[f64] {
        &self.weights[from * self.n..(from + 1) * self.n]
    }

    pub fn weight_rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn phi(&self) -> &RateFunction {
        &self.phi
    }

    pub fn with_phi(&self, phi: RateFunction) -> Self {
        Self { phi, ..self.clone() }
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::from_row_major(self.n, self.weights.clone(), self.lambda, alpha, self.phi)
    }

    pub fn derived_constants(&self) -> DerivedConstants {
        derived_constants(self)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: i, n: self.n })
        }
    }
}

/// Membrane potentials at a point in time.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialState {
    pub u: Vec<f64>,
    pub t: f64,
}

impl PotentialState {
    pub fn new(u: Vec<f64>, t: f64) -> Result<Self> {
        if u.is_empty() {
            return Err(invalid("state needs at least one potential"));
        }
        if let Some((i, v)) = u.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(invalid(format!("potential u[{i}] = {v} must be finite and >= 0")));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(invalid(format!("time must be finite and >= 0, got {t}")));
        }
        Ok(Self { u, t })
    }

    pub fn at_origin(u: Vec<f64>) -> Result<Self> {
        Self::new(u, 0.0)
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.u)
    }

    pub fn max(&self) -> f64 {
        self.u.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.u.iter().all(|&v| v == 0.0)
    }
}

#[inline]
pub(crate) fn mean(u: &[f64]) -> f64 {
    u.iter().sum::<f64>() / u.len() as f64
}

/// Constants built from the weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedConstants {
    /// Largest total input weight onto a single neuron.
    pub alpha_star: f64,
    /// Per-neuron outgoing mass `E_i`.
    pub outgoing: Vec<f64>,
    /// `max_i E_i`.
    pub e_max: f64,
}

pub fn derived_constants(params: &NetworkParams) -> DerivedConstants {
    let n = params.n();
    let alpha_star = (0..n)
        .map(|k| (0..n).map(|j| params.weight(j, k)).sum::<f64>())
        .fold(0.0, f64::max);
    let outgoing: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| params.weight(i, j)).sum())
        .collect();
    let e_max = outgoing.iter().copied().fold(0.0, f64::max);
    DerivedConstants { alpha_star, outgoing, e_max }
}

/// Decay factors of the inter-spike flow over a duration `dt`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FlowFactors {
    /// `e^{-(α+λ) dt}`, the decay of deviations from the mean.
    fast: f64,
    /// `e^{-α dt}(1 − e^{-λ dt})`, so that `u' = u·fast + ū·mix`.
    mix: f64,
}

impl FlowFactors {
    #[inline]
    pub fn new(alpha: f64, lambda: f64, dt: f64) -> Self {
        let slow = (-alpha * dt).exp();
        Self { fast: (-(alpha + lambda) * dt).exp(), mix: -slow * (-lambda * dt).exp_m1() }
    }

    #[inline]
    pub fn coord(&self, u: f64, ubar: f64) -> f64 {
        (u * self.fast + ubar * self.mix).max(0.0)
    }
}

/// Write the flowed coordinates of `u` (with mean `ubar`) into `out`.
#[inline]
pub(crate) fn flow_into(u: &[f64], ubar: f64, factors: FlowFactors, out: &mut [f64]) {
    for (o, &v) in out.iter_mut().zip(u) {
        *o = factors.coord(v, ubar);
    }
}

/// Deterministic evolution over `dt` with no spikes, in closed form:
/// `u_i' = (u_i − ū)e^{−(α+λ)dt} + ū e^{−α dt}`.
pub fn flow(s: &PotentialState, params: &NetworkParams, dt: f64) -> Result<PotentialState> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(invalid(format!("flow duration must be finite and >= 0, got {dt}")));
    }
    if s.n() != params.n() {
        return Err(invalid(format!(
            "state has {} potentials, network has {} neurons",
            s.n(),
            params.n()
        )));
    }
    Ok(flow_unchecked(s, params, dt))
}

pub(crate) fn flow_unchecked(s: &PotentialState, params: &NetworkParams, dt: f64) -> PotentialState {
    if dt == 0.0 {
        return s.clone();
    }
    let factors = FlowFactors::new(params.alpha(), params.lambda(), dt);
    let mut u = vec![0.0; s.n()];
    flow_into(&s.u, s.mean(), factors, &mut u);
    PotentialState { u, t: s.t + dt }
}

/// Neuron `i` spikes: it resets to 0 and every other neuron `j` gains `W[i][j]`.
pub fn jump(s: &PotentialState, params: &NetworkParams, i: usize) -> Result<PotentialState> {
    params.check_index(i)?;
    if s.n() != params.n() {
        return Err(invalid("state and network sizes differ"));
    }
    let mut out = s.clone();
    jump_in_place(&mut out.u, params, i);
    Ok(out)
}

#[inline]
pub(crate) fn jump_in_place(u: &mut [f64], params: &NetworkParams, i: usize) {
    for (uj, &w) in u.iter_mut().zip(params.weights_row(i)) {
        *uj += w;
    }
    u[i] = 0.0;
}
