use spikepdmp::experiments::{check_extinction, run_ensemble, EnsembleSpec, InitialCondition};
use spikepdmp::rate::RateFunction;
use spikepdmp::NetworkParams;

fn triangle(alpha: f64) -> NetworkParams {
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
fn nested_horizons_are_coupled() {
    // Off-grid horizons too: paths agree up to the shorter horizon, so the
    // extinct set can only grow.
    let spec = EnsembleSpec::new(triangle(1.5), InitialCondition::Uniform(1.0), 400, 30.0, 5).with_extinction(1e-6);
    let horizons = [2.5, 7.0, 12.0, 18.5, 30.0];
    let rep = check_extinction(&spec, &horizons, 400).unwrap();
    assert!(rep.monotone(), "{:?}", rep.rows);
    let mut prev: Option<Vec<bool>> = None;
    for &h in &horizons {
        let s = EnsembleSpec { horizon: h, ..spec.clone() };
        let extinct: Vec<bool> = run_ensemble(&s)
            .unwrap()
            .replicas
            .iter()
            .map(|o| o.termination == spikepdmp::Termination::Extinct)
            .collect();
        if let Some(p) = &prev {
            assert!(p.iter().zip(&extinct).all(|(a, b)| !a || *b));
        }
        prev = Some(extinct);
    }
    assert!(rep.soundness.passed());
    assert_eq!(rep.spike_histogram.iter().map(|(_, v)| v).sum::<usize>(), 400);
}

#[test]
fn isolated_neurons_match_birth_death_oracle() {
    // W ≡ 0, λ = 0: neuron i decays as u_i e^{−αt} and fires at most once,
    // with probability 1 − exp(−c·u_i/α).
    let (c, alpha) = (0.8, 0.6);
    let u0 = [0.3, 1.0, 2.5];
    let p = NetworkParams::from_row_major(3, vec![0.0; 9], 0.0, alpha, RateFunction::linear(c, 1.0).unwrap()).unwrap();
    let n = 10_000;
    let spec = EnsembleSpec::new(p, InitialCondition::Explicit(u0.to_vec()), n, 200.0, 8).with_extinction(1e-12);
    let sum = run_ensemble(&spec).unwrap();
    let expected: f64 = u0.iter().map(|u| 1.0 - (-c * u / alpha).exp()).sum();
    let var: f64 = u0
        .iter()
        .map(|u| {
            let q = 1.0 - (-c * u / alpha).exp();
            q * (1.0 - q)
        })
        .sum();
    let counts: Vec<f64> = sum.replicas.iter().map(|o| o.spike_count as f64).collect();
    let mean = counts.iter().sum::<f64>() / n as f64;
    assert!((mean - expected).abs() < 3.0 * (var / n as f64).sqrt(), "{mean} vs {expected}");
    assert!(sum.replicas.iter().all(|o| o.spike_count <= 3));
    assert_eq!(sum.extinct_fraction, 1.0);
}
