use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::model::{NetworkParams, PotentialState};
use crate::rng::RngStream;
use crate::sampler::{cumulative_intensity, next_spike_thinning, sample_t1_inversion, InversionDraw, SpikeDraw};
use crate::stats::{ks_one_sample_censored, ks_two_sample, KsResult};

/// Stream offset for the inversion draws, disjoint from the thinning streams.
const INVERSION_STREAM: u64 = 1 << 41;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerReport {
    pub samples: usize,
    /// Censoring time (absolute).
    pub horizon: f64,
    /// Thinning draws against the exact first-spike CDF, censored at `horizon`.
    pub ks_exact: KsResult,
    /// Thinning draws against inversion draws, both censored at `horizon`.
    pub ks_inversion: KsResult,
    pub censored_thinning: usize,
    pub censored_inversion: usize,
}

impl SamplerReport {
    pub fn passed(&self, level: f64) -> bool {
        self.ks_exact.p_value > level && self.ks_inversion.p_value > level
    }
}

/// Draw `samples` first-spike times from `initial` by thinning and by
/// inversion, censor both at `horizon`, and test them against the exact CDF
/// and against each other.
pub fn validate_sampler(
    params: &NetworkParams,
    initial: &PotentialState,
    samples: usize,
    horizon: f64,
    seed: u64,
) -> Result<SamplerReport> {
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    if !(horizon > initial.t && horizon.is_finite()) {
        return Err(invalid("censoring horizon must be finite and after the start time"));
    }
    let chunks = samples.div_ceil(CHUNK);
    let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<_> {
            let len = CHUNK.min(samples - c * CHUNK);
            let mut thin_rng = RngStream::new(seed, c as u64);
            let mut inv_rng = RngStream::new(seed, INVERSION_STREAM + c as u64);
            let mut thin = Vec::with_capacity(len);
            let mut inv = Vec::with_capacity(len);
            for _ in 0..len {
                thin.push(match next_spike_thinning(initial, params, &mut thin_rng, horizon)? {
                    SpikeDraw::Spike(s) => s.t,
                    SpikeDraw::NoSpikeBeforeHorizon { .. } => f64::INFINITY,
                });
                inv.push(match sample_t1_inversion(initial, params, &mut inv_rng)? {
                    InversionDraw::Time(t) if t <= horizon => t,
                    _ => f64::INFINITY,
                });
            }
            Ok((thin, inv))
        })
        .collect::<Result<_>>()?;
    let (mut thin, mut inv): (Vec<f64>, Vec<f64>) = (Vec::with_capacity(samples), Vec::with_capacity(samples));
    for (a, b) in draws {
        thin.extend(a);
        inv.extend(b);
    }

    let cdf = |t: f64| -(-cumulative_intensity(initial, params, t).unwrap_or(0.0)).exp_m1();
    let mut finite: Vec<f64> = thin.iter().copied().filter(|t| t.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let censored_thinning = samples - finite.len();
    let ks_exact = ks_one_sample_censored(&finite, samples, cdf, cdf(horizon));
    let ks_inversion = ks_two_sample(&thin, &inv);
    Ok(SamplerReport {
        samples,
        horizon,
        ks_exact,
        ks_inversion,
        censored_thinning,
        censored_inversion: inv.iter().filter(|t| t.is_infinite()).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::RateFunction;

    #[test]
    fn linear_pair_passes() {
        let p = NetworkParams::from_row_major(2, vec![0.0, 0.3, 0.3, 0.0], 1.0, 0.5, RateFunction::linear(1.0, 1.0).unwrap())
            .unwrap();
        let s = PotentialState::at_origin(vec![0.7, 0.2]).unwrap();
        let rep = validate_sampler(&p, &s, 20_000, 5.0, 3).unwrap();
        assert!(rep.passed(0.01), "{rep:?}");
        assert!(rep.censored_thinning > 0);
    }

    #[test]
    fn rejects_bad_input() {
        let p = NetworkParams::from_row_major(1, vec![0.0], 0.0, 1.0, RateFunction::linear(1.0, 1.0).unwrap()).unwrap();
        let s = PotentialState::at_origin(vec![1.0]).unwrap();
        assert!(validate_sampler(&p, &s, 0, 1.0, 1).is_err());
        assert!(validate_sampler(&p, &s, 10, 0.0, 1).is_err());
    }
}
