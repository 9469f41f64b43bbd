//! File formats: JSON run configs, JSON-Lines (or CSV) event logs and CSV
//! summary tables. Floats are written with Rust's shortest round-trip
//! formatting, so output is locale-independent and byte-stable.

mod config;
mod events;
mod run;
mod summary;

pub use config::{
    emit_config, parse_config, ExperimentConfig, InitialConfig, PhiConfig, RunConfig,
};
pub use events::{parse_event_line, write_events_csv, write_events_jsonl, EventHeader, EventLine, EventRecord};
pub use summary::{
    bounds_csv, ensemble_csv, ergodicity_csv, extinction_csv, histogram_csv, regeneration_csv, sampler_csv,
    simulate_csv, theorem2_csv, CsvTable,
};
pub use run::{execute, Command, EventFormat, RunOutput};
