use std::fmt::Write as _;
use std::io::Write;

use crate::engine::Trajectory;
use crate::error::Result;
use crate::experiments::{
    BoundsReport, EnsembleSummary, ErgodicityReport, ExtinctionReport, MeanBoundReport, RegenerationReport,
    SamplerReport,
};
use crate::rng::RNG_ALGORITHM;

/// A CSV table preceded by one `# key=value ...` provenance comment line.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    fn new(seed: u64, columns: &[&'static str]) -> Self {
        Self {
            meta: vec![("seed".into(), seed.to_string()), ("rng".into(), RNG_ALGORITHM.into())],
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::from("#");
        for (k, v) in &self.meta {
            let _ = write!(out, " {k}={v}");
        }
        out.push('\n');
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.render().as_bytes())?;
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip float formatting.
fn f(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, f)
}

pub fn simulate_csv(traj: &Trajectory, seed: u64, stream: u64) -> CsvTable {
    let mut t = CsvTable::new(seed, &[
        "spike_count",
        "termination",
        "final_time",
        "final_mean_potential",
        "final_max_potential",
        "residual",
        "candidates_tried",
    ])
    .meta("stream", stream);
    t.push(vec![
        traj.events.len().to_string(),
        traj.termination.as_str().to_string(),
        f(traj.final_state.t),
        f(traj.final_state.mean()),
        f(traj.final_state.max()),
        opt(traj.residual),
        traj.candidates_tried.to_string(),
    ]);
    t
}

/// Per-checkpoint mean potential.
pub fn ensemble_csv(sum: &EnsembleSummary) -> CsvTable {
    let mut t = CsvTable::new(sum.seed, &["t", "mean_ubar", "ci_lo", "ci_hi", "sd"])
        .meta("replicas", sum.replicas.len())
        .meta("extinct_frac", f(sum.extinct_fraction))
        .meta("p99_spike_count", sum.p99_spike_count)
        .meta("max_final_potential", f(sum.max_final_potential));
    for c in &sum.checkpoints {
        t.push(vec![f(c.t), f(c.mean_ubar.mean), f(c.mean_ubar.lo), f(c.mean_ubar.hi), f(c.mean_ubar.sd)]);
    }
    t
}

pub fn histogram_csv(seed: u64, histogram: &[(usize, usize)]) -> CsvTable {
    let mut t = CsvTable::new(seed, &["spike_count", "replicas"]);
    for (k, v) in histogram {
        t.push(vec![k.to_string(), v.to_string()]);
    }
    t
}

pub fn theorem2_csv(rep: &MeanBoundReport) -> CsvTable {
    let mut t = CsvTable::new(rep.summary.seed, &["t", "mean_ubar", "ci_lo", "ci_hi", "bound"])
        .meta("replicas", rep.summary.replicas.len())
        .meta("exponent", f(rep.exponent));
    for r in &rep.rows {
        t.push(vec![f(r.t), f(r.mean_ubar), f(r.ci_lo), f(r.ci_hi), f(r.bound)]);
    }
    t
}

pub fn extinction_csv(rep: &ExtinctionReport, seed: u64, replicas: usize) -> CsvTable {
    let mut t = CsvTable::new(seed, &["horizon", "extinct_frac", "max_final_potential", "p99_spike_count"])
        .meta("replicas", replicas)
        .meta("soundness_checked", rep.soundness.checked)
        .meta("soundness_respiked", rep.soundness.respiked)
        .meta("radius_hypothesis", rep.radius_hypothesis_holds);
    for r in &rep.rows {
        t.push(vec![f(r.horizon), f(r.extinct_fraction), f(r.max_final_potential), r.p99_spike_count.to_string()]);
    }
    t
}

pub fn ergodicity_csv(rep: &ErgodicityReport, seed: u64) -> CsvTable {
    let mut t = CsvTable::new(seed, &["neuron", "w1_cross", "w1_self"])
        .meta("samples_a", rep.samples_a)
        .meta("samples_b", rep.samples_b)
        .meta("zero_state_spikes", rep.zero_state_spikes);
    for r in &rep.rows {
        t.push(vec![r.label(), f(r.w1_cross), f(r.w1_self)]);
    }
    t
}

/// `ci` is the three-standard-error half-width used for flagging.
pub fn bounds_csv(rep: &BoundsReport, seed: u64, replicas: usize) -> CsvTable {
    let mut t = CsvTable::new(seed, &["name", "estimate", "ci", "bound_corrected", "bound_printed"]).meta("replicas", replicas);
    for r in &rep.rows {
        t.push(vec![r.name.to_string(), f(r.estimate), f(3.0 * r.std_error), f(r.bound_corrected), opt(r.bound_printed)]);
    }
    t
}

pub fn regeneration_csv(rep: &RegenerationReport, seed: u64) -> CsvTable {
    let mut t = CsvTable::new(seed, &[
        "period",
        "windows",
        "pattern_windows",
        "pattern_frequency",
        "visit_fraction",
        "returns",
        "mean_return_time",
        "median_return_time",
    ]);
    t.push(vec![
        f(rep.period),
        rep.windows.to_string(),
        rep.pattern_windows.to_string(),
        f(rep.pattern_frequency()),
        f(rep.visit_fraction),
        rep.return_times.len().to_string(),
        opt(rep.mean_return_time),
        opt(rep.median_return_time),
    ]);
    t
}

pub fn sampler_csv(rep: &SamplerReport, seed: u64) -> CsvTable {
    let mut t = CsvTable::new(seed, &["test", "statistic", "p_value", "samples", "censored"])
        .meta("horizon", f(rep.horizon));
    t.push(vec![
        "thinning_vs_exact".into(),
        f(rep.ks_exact.statistic),
        f(rep.ks_exact.p_value),
        rep.samples.to_string(),
        rep.censored_thinning.to_string(),
    ]);
    t.push(vec![
        "thinning_vs_inversion".into(),
        f(rep.ks_inversion.statistic),
        f(rep.ks_inversion.p_value),
        rep.samples.to_string(),
        rep.censored_inversion.to_string(),
    ]);
    t
}
