//! Goodness-of-fit and summary statistics used by the verification harness.

use std::f64::consts::PI;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov survival function `P(K > x) = 2 Σ (−1)^{k−1} e^{−2k²x²}`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Jacobi-theta form converges fast for small x.
        let y = -PI * PI / (8.0 * x * x);
        let s: f64 = (1..=20).map(|k| ((2 * k - 1) as f64).powi(2) * y).map(f64::exp).sum();
        (1.0 - (2.0 * PI).sqrt() / x * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        let mut sign = 1.0;
        for k in 1..=100 {
            let term = (-2.0 * (k * k) as f64 * x * x).exp();
            s += sign * term;
            if term < 1e-17 {
                break;
            }
            sign = -sign;
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Asymptotic p-value with Stephens' small-sample correction.
fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let en = effective_n.sqrt();
    kolmogorov_sf((en + 0.12 + 0.11 / en) * d)
}

/// One-sample KS test of `samples` against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl FnMut(f64) -> f64) -> KsResult {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    ks_one_sample_censored(&sorted, samples.len(), cdf, 1.0)
}

/// One-sample KS with right censoring: `finite_sorted` are the observed values
/// below the censoring point, the remaining `n_total − len` samples were
/// censored, and `cdf_at_censor` is the true CDF at the censoring point.
pub fn ks_one_sample_censored(
    finite_sorted: &[f64],
    n_total: usize,
    mut cdf: impl FnMut(f64) -> f64,
    cdf_at_censor: f64,
) -> KsResult {
    assert!(n_total >= finite_sorted.len() && n_total > 0);
    let n = n_total as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in finite_sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
    }
    d = d.max((cdf_at_censor - finite_sorted.len() as f64 / n).abs());
    KsResult { statistic: d, p_value: ks_p_value(d, n) }
}

/// Two-sample KS test. Infinite values are allowed and compare equal.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = xs[i].min(ys[j]);
        while i < n && xs[i] == x {
            i += 1;
        }
        while j < m && ys[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let eff = (n * m) as f64 / (n + m) as f64;
    KsResult { statistic: d, p_value: ks_p_value(d, eff) }
}

/// Wasserstein-1 distance between two empirical distributions, `∫|F_a − F_b|`.
/// For equal sizes this is the mean absolute difference of the sorted samples.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = xs[0].min(ys[0]);
    let mut total = 0.0;
    while i < xs.len() || j < ys.len() {
        let next = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / n - j as f64 / m).abs() * (next - prev);
        while i < xs.len() && xs[i] == next {
            i += 1;
        }
        while j < ys.len() && ys[j] == next {
            j += 1;
        }
        prev = next;
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCi {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Sample mean with a normal-approximation 95% confidence interval.
pub fn mean_ci(values: &[f64]) -> MeanCi {
    let n = values.len();
    assert!(n > 0);
    // Shifting by the first value keeps the mean of identical values exact.
    let shift = values[0];
    let mean = shift + values.iter().map(|v| v - shift).sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let half = Z95 * sd / (n as f64).sqrt();
    MeanCi { n, mean, sd, lo: mean - half, hi: mean + half }
}

/// Binomial proportion with its standard error.
pub fn proportion(successes: usize, n: usize) -> (f64, f64) {
    let p = successes as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// Wilson score interval for a binomial proportion at `z` standard errors.
/// Unlike `p̂ ± z·σ̂` it does not collapse to a point when `p̂` is 0 or 1.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    assert!(n > 0 && successes <= n);
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Nearest-rank quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}
