use serde::{Deserialize, Serialize};

use crate::engine::DEFAULT_MAX_EVENTS;
use crate::error::{Error, Result};
use crate::experiments::{EnsembleSpec, InitialCondition};
use crate::model::{derived_constants, NetworkParams};
use crate::rate::{RateFunction, RateKind};

const CONFIG_PATH_ROOT: &str = "$";

/// Rate function block. `r` defaults to `1.01·α*` (or 1 when `α* = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiConfig {
    pub kind: String,
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

/// Either an explicit potential vector or a preset string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialConfig {
    Vector(Vec<f64>),
    Preset(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentConfig {
    Theorem2 {},
    Extinction {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizons: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        soundness_replicas: Option<usize>,
    },
    Ergodicity {
        initial_b: InitialConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed_b: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        burnin: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gap: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
    },
    Bounds {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
    },
    Regeneration {
        delta: f64,
        epsilon: f64,
    },
    Sampler {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
    },
}

/// A run configuration. After [`parse_config`] every optional field is filled
/// in, so emitting it yields a self-describing normalized config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_neurons: usize,
    pub lambda: f64,
    pub alpha: f64,
    /// `weights[i][j]` is the weight from neuron `i` to neuron `j`.
    pub weights: Vec<Vec<f64>>,
    pub phi: PhiConfig,
    pub initial: InitialConfig,
    pub horizon: f64,
    pub seed: u64,
    #[serde(default)]
    pub max_events: Option<u64>,
    #[serde(default)]
    pub replicas: Option<usize>,
    #[serde(default)]
    pub checkpoints: Option<Vec<f64>>,
    #[serde(default)]
    pub record_states: Option<bool>,
    /// Absent or `null` disables extinction detection.
    #[serde(default)]
    pub extinction_eps: Option<f64>,
    #[serde(default)]
    pub check_interval: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentConfig>,
}

fn config_error(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

impl RunConfig {
    pub fn rate_function(&self) -> Result<RateFunction> {
        let phi = &self.phi;
        let r = phi.r.unwrap_or(1.0);
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| config_error(format!("$.phi.{key}"), "required for this kind"));
        let (kind, extra) = match phi.kind.as_str() {
            "linear" => (RateKind::Linear, [("p", phi.p), ("M", phi.m)]),
            "power" => (RateKind::Power { p: need(phi.p, "p")? }, [("M", phi.m), ("", None)]),
            "saturating" => (RateKind::Saturating { m: need(phi.m, "M")? }, [("p", phi.p), ("", None)]),
            other => {
                return Err(config_error(
                    "$.phi.kind",
                    format!("unknown rate kind {other:?}; expected linear, power or saturating"),
                ))
            }
        };
        if let Some((key, _)) = extra.iter().find(|(_, v)| v.is_some()) {
            return Err(config_error(format!("$.phi.{key}"), format!("not used by kind {:?}", phi.kind)));
        }
        RateFunction::new(kind, phi.c, r).map_err(|e| config_error("$.phi", e.to_string()))
    }

    pub fn params(&self) -> Result<NetworkParams> {
        if self.weights.len() != self.n_neurons {
            return Err(config_error(
                "$.weights",
                format!("has {} rows, n_neurons is {}", self.weights.len(), self.n_neurons),
            ));
        }
        for (i, row) in self.weights.iter().enumerate() {
            if row.len() != self.n_neurons {
                return Err(config_error(format!("$.weights[{i}]"), format!("has {} entries, expected {}", row.len(), self.n_neurons)));
            }
            if row[i] != 0.0 {
                return Err(config_error(
                    format!("$.weights[{i}][{i}]"),
                    format!("diagonal weight must be 0 (no self-synapse), got {}", row[i]),
                ));
            }
        }
        NetworkParams::new(self.weights.clone(), self.lambda, self.alpha, self.rate_function()?)
            .map_err(|e| config_error(CONFIG_PATH_ROOT, e.to_string()))
    }

    pub fn initial_condition(&self) -> Result<InitialCondition> {
        initial_condition(&self.initial, "$.initial")
    }

    /// Ensemble spec with the config's run block; `replicas` defaults to 1.
    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        let mut spec = EnsembleSpec::new(
            self.params()?,
            self.initial_condition()?,
            self.replicas.unwrap_or(1),
            self.horizon,
            self.seed,
        );
        spec.checkpoints = self.checkpoints.clone().unwrap_or_default();
        spec.max_events = self.max_events.unwrap_or(DEFAULT_MAX_EVENTS);
        spec.extinction_eps = self.extinction_eps;
        spec.check_interval = self.check_interval.unwrap_or(1.0);
        Ok(spec)
    }

    /// Fill in every default, then validate the result.
    fn normalize(mut self) -> Result<Self> {
        if self.n_neurons == 0 {
            return Err(config_error("$.n_neurons", "must be at least 1"));
        }
        if self.phi.r.is_none() {
            // Provisional radius so the weights can be validated first.
            let probe = RunConfig { phi: PhiConfig { r: Some(1.0), ..self.phi.clone() }, ..self.clone() };
            let alpha_star = derived_constants(&probe.params()?).alpha_star;
            self.phi.r = Some(if alpha_star > 0.0 { 1.01 * alpha_star } else { 1.0 });
        }
        let params = self.params()?;
        let initial = self.initial_condition()?;
        initial.resolve(&params).map_err(|e| config_error("$.initial", e.to_string()))?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(config_error("$.horizon", "must be finite and > 0"));
        }
        self.max_events.get_or_insert(DEFAULT_MAX_EVENTS);
        if self.replicas == Some(0) {
            return Err(config_error("$.replicas", "must be at least 1"));
        }
        self.replicas.get_or_insert(1);
        self.checkpoints.get_or_insert_with(Vec::new);
        self.record_states.get_or_insert(false);
        self.check_interval.get_or_insert(1.0);
        if let Some(eps) = self.extinction_eps {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(config_error("$.extinction_eps", "must lie in (0, 1)"));
            }
            if self.alpha <= 0.0 {
                return Err(config_error("$.extinction_eps", "extinction detection needs alpha > 0"));
            }
        }
        if let Some(exp) = self.experiment.take() {
            self.experiment = Some(self.normalize_experiment(exp)?);
        }
        self.ensemble_spec()?
            .validate()
            .map_err(|e| config_error("$.checkpoints", e.to_string()))?;
        Ok(self)
    }

    fn normalize_experiment(&self, exp: ExperimentConfig) -> Result<ExperimentConfig> {
        Ok(match exp {
            ExperimentConfig::Extinction { horizons, soundness_replicas } => {
                let h = self.horizon;
                let horizons = horizons.unwrap_or_else(|| vec![h / 8.0, h / 4.0, h / 2.0, h]);
                if horizons.is_empty() || horizons.windows(2).any(|w| !(w[0] < w[1])) || !(horizons[0] > 0.0) {
                    return Err(config_error("$.experiment.horizons", "must be positive and strictly increasing"));
                }
                ExperimentConfig::Extinction {
                    horizons: Some(horizons),
                    soundness_replicas: Some(soundness_replicas.unwrap_or(100)),
                }
            }
            ExperimentConfig::Ergodicity { initial_b, seed_b, burnin, gap, samples } => {
                initial_condition(&initial_b, "$.experiment.initial_b")?;
                ExperimentConfig::Ergodicity {
                    initial_b,
                    seed_b: Some(seed_b.unwrap_or(self.seed.wrapping_add(1))),
                    burnin: Some(burnin.unwrap_or(50.0)),
                    gap: Some(gap.unwrap_or(1.0)),
                    samples: Some(samples.unwrap_or(100)),
                }
            }
            ExperimentConfig::Bounds { r, theta } => ExperimentConfig::Bounds { r: Some(r.unwrap_or(self.phi.r.unwrap_or(1.0))), theta },
            ExperimentConfig::Sampler { samples } => ExperimentConfig::Sampler { samples: Some(samples.unwrap_or(100_000)) },
            other => other,
        })
    }
}

fn initial_condition(cfg: &InitialConfig, path: &str) -> Result<InitialCondition> {
    match cfg {
        InitialConfig::Vector(u) => Ok(InitialCondition::Explicit(u.clone())),
        InitialConfig::Preset(s) => s.parse().map_err(|e: Error| config_error(path, e.to_string())),
    }
}

/// Parse and validate a JSON run config, filling in defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { CONFIG_PATH_ROOT.to_string() } else { format!("$.{path}") };
        config_error(path, e.into_inner().to_string())
    })?;
    raw.normalize()
}

/// Pretty-printed JSON with a trailing newline.
pub fn emit_config(cfg: &RunConfig) -> String {
    let mut s = serde_json::to_string_pretty(cfg).expect("config serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"n_neurons":1,"lambda":0,"alpha":1,"weights":[[0]],
        "phi":{"kind":"linear","c":1,"r":1},"initial":[1],"horizon":10,"seed":1}"#;

    fn err_of(text: &str) -> (String, String) {
        match parse_config(text) {
            Err(Error::Config { path, message }) => (path, message),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn minimal_config_is_valid_and_filled() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.replicas, Some(1));
        assert_eq!(cfg.max_events, Some(DEFAULT_MAX_EVENTS));
        assert_eq!(cfg.record_states, Some(false));
        assert_eq!(cfg.extinction_eps, None);
        assert_eq!(cfg.params().unwrap().n(), 1);
    }

    #[test]
    fn normalized_round_trip() {
        let cfg = parse_config(MINIMAL).unwrap();
        let again = parse_config(&emit_config(&cfg)).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(emit_config(&cfg), emit_config(&again));
    }

    #[test]
    fn diagonal_is_named() {
        let (path, msg) = err_of(&MINIMAL.replace("[[0]]", "[[0.5]]"));
        assert_eq!(path, "$.weights[0][0]");
        assert!(msg.contains("diagonal"), "{msg}");
    }

    #[test]
    fn power_zero_cites_integrability() {
        let (path, msg) = err_of(&MINIMAL.replace(r#""kind":"linear","c":1"#, r#""kind":"power","c":1,"p":0"#));
        assert_eq!(path, "$.phi");
        assert!(msg.contains("diverge"), "{msg}");
    }

    #[test]
    fn unknown_keys_and_paths() {
        let (path, msg) = err_of(&MINIMAL.replace(r#""seed":1"#, r#""seed":1,"sed":2"#));
        assert!(msg.contains("unknown field"), "{path} {msg}");
        let (path, _) = err_of(&MINIMAL.replace(r#""c":1"#, r#""c":"one""#));
        assert_eq!(path, "$.phi.c");
        let (path, _) = err_of(&MINIMAL.replace(r#""initial":[1]"#, r#""initial":"warm""#));
        assert_eq!(path, "$.initial");
    }

    #[test]
    fn default_radius_tracks_alpha_star() {
        let text = r#"{"n_neurons":2,"lambda":1,"alpha":1,"weights":[[0,0.2],[0.4,0]],
            "phi":{"kind":"linear","c":1},"initial":"uniform:1","horizon":5,"seed":3}"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.phi.r, Some(1.01 * 0.4));
    }

    #[test]
    fn experiment_defaults_are_echoed() {
        let text = MINIMAL.replace(r#""seed":1"#, r#""seed":1,"experiment":{"kind":"extinction"}"#);
        let cfg = parse_config(&text).unwrap();
        assert_eq!(
            cfg.experiment,
            Some(ExperimentConfig::Extinction { horizons: Some(vec![1.25, 2.5, 5.0, 10.0]), soundness_replicas: Some(100) })
        );
        assert_eq!(parse_config(&emit_config(&cfg)).unwrap(), cfg);
        let bad = MINIMAL.replace(r#""seed":1"#, r#""seed":1,"experiment":{"kind":"theorem2","x":1}"#);
        assert!(parse_config(&bad).is_err());
    }

    #[test]
    fn kind_specific_keys() {
        let (path, _) = err_of(&MINIMAL.replace(r#""kind":"linear""#, r#""kind":"power""#));
        assert_eq!(path, "$.phi.p");
        let (path, _) = err_of(&MINIMAL.replace(r#""kind":"linear","c":1"#, r#""kind":"linear","c":1,"M":2"#));
        assert_eq!(path, "$.phi.M");
    }
}
