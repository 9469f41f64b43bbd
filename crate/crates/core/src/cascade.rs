//! The cascade configurations `v(0), …, v(N)`.
//!
//! `v(k)` is the configuration reached from `v(0)` when neurons `0, 1, …, k−1`
//! spike in that order with no drift in between. Starting from `v(0)`, where
//! neuron `i` holds exactly the input of the neurons after it, the full
//! cascade returns to `v(0)`.

use crate::model::{mean, NetworkParams};

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeConfig {
    /// `v[k]` is the configuration after the first `k` spikes of the cascade.
    pub v: Vec<Vec<f64>>,
    /// `deviations[m][i] = v̄(m) − v_i(m)`.
    pub deviations: Vec<Vec<f64>>,
}

impl CascadeConfig {
    pub fn v0(&self) -> &[f64] {
        &self.v[0]
    }

    pub fn is_closed(&self) -> bool {
        self.v.first() == self.v.last()
    }

    /// Smallest strictly positive coordinate of `v(0)`, if any.
    pub fn min_positive_v0(&self) -> Option<f64> {
        self.v[0].iter().copied().filter(|&x| x > 0.0).reduce(f64::min)
    }
}

pub fn cascade_configs(params: &NetworkParams) -> CascadeConfig {
    let n = params.n();
    let w = |from: usize, to: usize| params.weight(from, to);

    let v0: Vec<f64> = (0..n).map(|i| (i + 1..n).map(|j| w(j, i)).sum()).collect();
    let mut v = Vec::with_capacity(n + 1);
    v.push(v0.clone());
    // `fired` is the index of the k-th spiker (0-based), k = 1..=N.
    for fired in 0..n {
        let vk: Vec<f64> = (0..n)
            .map(|i| {
                if i > fired {
                    v0[i] + (0..=fired).map(|j| w(j, i)).sum::<f64>()
                } else if i < fired {
                    (i + 1..=fired).map(|j| w(j, i)).sum()
                } else {
                    0.0
                }
            })
            .collect();
        v.push(vk);
    }
    let deviations = v
        .iter()
        .map(|vm| {
            let m = mean(vm);
            vm.iter().map(|x| m - x).collect()
        })
        .collect();
    CascadeConfig { v, deviations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::jump_in_place;
    use crate::rate::RateFunction;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn net(n: usize, w: Vec<f64>) -> NetworkParams {
        NetworkParams::from_row_major(n, w, 0.0, 0.0, RateFunction::linear(1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn two_neuron_example() {
        let (a, b) = (0.7, 0.4);
        // W_{2→1} = a, W_{1→2} = b  →  row-major [[0, b], [a, 0]]
        let c = cascade_configs(&net(2, vec![0.0, b, a, 0.0]));
        assert_eq!(c.v, vec![vec![a, 0.0], vec![0.0, b], vec![a, 0.0]]);
        assert!(c.is_closed());
        assert_eq!(c.deviations[0], vec![(a / 2.0) - a, a / 2.0]);
    }

    #[test]
    fn zero_weights_give_zero_cascade() {
        let c = cascade_configs(&net(4, vec![0.0; 16]));
        assert!(c.v.iter().flatten().all(|&x| x == 0.0));
        assert_eq!(c.min_positive_v0(), None);
    }

    #[test]
    fn closes_for_random_matrices() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let n = rng.random_range(1..=8);
            let w: Vec<f64> = (0..n * n)
                .map(|k| if k / n == k % n { 0.0 } else { rng.random_range(0.0..2.0) })
                .collect();
            let c = cascade_configs(&net(n, w));
            assert!(c.is_closed(), "{:?}", c.v);
            for k in 1..=n {
                assert_eq!(c.v[k][k - 1], 0.0);
            }
            assert_eq!(c.v[0][n - 1], 0.0);
        }
    }

    proptest! {
        // Independent route: replay the cascade through the jump map.
        #[test]
        fn matches_jump_replay(n in 1usize..7, raw in prop::collection::vec(0.0f64..3.0, 49)) {
            let w: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { raw[k] }).collect();
            let p = net(n, w);
            let c = cascade_configs(&p);
            let mut u = c.v[0].clone();
            for k in 0..n {
                jump_in_place(&mut u, &p, k);
                for (a, b) in u.iter().zip(&c.v[k + 1]) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
