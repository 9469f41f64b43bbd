//! Joint law of the first spike time and spiker against an independent
//! numerical oracle: `P(T₁ ∈ [a, b), S = i) = ∫_a^b φ(u_i(t)) e^{−Λ(t)} dt`.

use spikepdmp::rate::RateFunction;
use spikepdmp::{next_spike_thinning, NetworkParams, PotentialState, RngStream, SpikeDraw};

/// Cell probabilities on `edges` by the trapezoid rule on a fine grid, using a
/// direct transcription of the no-spike ODE solution.
fn oracle(params: &NetworkParams, u0: &[f64], edges: &[f64]) -> Vec<Vec<f64>> {
    let n = u0.len();
    let ubar0 = u0.iter().sum::<f64>() / n as f64;
    let (a, l) = (params.alpha(), params.lambda());
    let u_at = |t: f64, i: usize| ubar0 * (-a * t).exp() + (u0[i] - ubar0) * (-(a + l) * t).exp();
    let steps_per_unit = 20_000.0;
    let mut cells = vec![vec![0.0; n]; edges.len() - 1];
    let mut big_lambda = 0.0;
    let mut prev_rates: Vec<f64> = (0..n).map(|i| params.phi().eval(u_at(0.0, i))).collect();
    let mut prev_total: f64 = prev_rates.iter().sum();
    for (c, w) in edges.windows(2).enumerate() {
        let steps = ((w[1] - w[0]) * steps_per_unit).ceil() as usize;
        let h = (w[1] - w[0]) / steps as f64;
        for k in 1..=steps {
            let t = w[0] + k as f64 * h;
            let rates: Vec<f64> = (0..n).map(|i| params.phi().eval(u_at(t, i))).collect();
            let total: f64 = rates.iter().sum();
            let next_lambda = big_lambda + 0.5 * h * (prev_total + total);
            for i in 0..n {
                cells[c][i] += 0.5 * h * (prev_rates[i] * (-big_lambda).exp() + rates[i] * (-next_lambda).exp());
            }
            big_lambda = next_lambda;
            prev_rates = rates;
            prev_total = total;
        }
    }
    cells
}

fn check(params: NetworkParams, u0: Vec<f64>, edges: Vec<f64>, seed: u64) {
    let s = PotentialState::at_origin(u0.clone()).unwrap();
    let horizon = *edges.last().unwrap();
    let expected = oracle(&params, &u0, &edges);
    let n_draws = 200_000;
    let mut counts = vec![vec![0usize; u0.len()]; edges.len() - 1];
    let mut rng = RngStream::new(seed, 0);
    for _ in 0..n_draws {
        if let SpikeDraw::Spike(sp) = next_spike_thinning(&s, &params, &mut rng, horizon).unwrap() {
            let cell = edges.partition_point(|&e| e <= sp.t) - 1;
            counts[cell][sp.i] += 1;
        }
    }
    for (c, row) in counts.iter().enumerate() {
        for (i, &k) in row.iter().enumerate() {
            let p = expected[c][i];
            let sigma = (p * (1.0 - p) / n_draws as f64).sqrt();
            let p_hat = k as f64 / n_draws as f64;
            assert!(
                (p_hat - p).abs() <= 3.0 * sigma + 1e-6,
                "cell [{}, {}) neuron {i}: {p_hat} vs {p} (3σ = {})",
                edges[c],
                edges[c + 1],
                3.0 * sigma
            );
        }
    }
}

#[test]
fn asymmetric_linear_network() {
    let p = NetworkParams::from_row_major(
        3,
        vec![0.0, 0.3, 0.1, 0.2, 0.0, 0.4, 0.5, 0.05, 0.0],
        0.8,
        0.4,
        RateFunction::linear(0.7, 1.0).unwrap(),
    )
    .unwrap();
    check(p, vec![1.5, 0.4, 0.0], vec![0.0, 0.25, 0.5, 1.0, 4.0], 91);
}

#[test]
fn power_rate_without_leak() {
    let p = NetworkParams::from_row_major(2, vec![0.0, 0.5, 0.5, 0.0], 1.5, 0.0, RateFunction::power(1.0, 2.0, 1.0).unwrap())
        .unwrap();
    check(p, vec![1.2, 0.2], vec![0.0, 0.2, 0.6, 1.5, 5.0], 92);
}
