use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{SpikeEvent, Trajectory};
use crate::error::{invalid, Result};
use crate::rng::RNG_ALGORITHM;

/// First line of an event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventHeader {
    pub seed: u64,
    pub stream: u64,
    pub rng: String,
    pub n_neurons: usize,
    pub t0: f64,
    pub horizon: f64,
    pub termination: String,
    pub spike_count: usize,
}

impl EventHeader {
    pub fn new(traj: &Trajectory, seed: u64, stream: u64, horizon: f64) -> Self {
        Self {
            seed,
            stream,
            rng: RNG_ALGORITHM.to_string(),
            n_neurons: traj.params.n(),
            t0: traj.initial.t,
            horizon,
            termination: traj.termination.as_str().to_string(),
            spike_count: traj.events.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub t: f64,
    pub i: usize,
    pub low: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_pre: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_post: Option<Vec<f64>>,
}

impl From<&SpikeEvent> for EventRecord {
    fn from(e: &SpikeEvent) -> Self {
        Self { t: e.t, i: e.i, low: e.low, u_pre: e.u_pre.clone(), u_post: e.u_post.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EventLine {
    Header { header: EventHeader },
    Event(EventRecord),
}

/// Parse one line of an `events.jsonl` file.
pub fn parse_event_line(line: &str) -> Result<EventLine> {
    let parsed: EventLine =
        serde_json::from_str(line.trim_end()).map_err(|e| invalid(format!("bad event line: {e}")))?;
    if let EventLine::Event(ev) = &parsed {
        if !ev.t.is_finite() {
            return Err(invalid("event time must be finite"));
        }
        if ev.u_pre.as_ref().zip(ev.u_post.as_ref()).is_some_and(|(a, b)| a.len() != b.len()) {
            return Err(invalid("u_pre and u_post lengths differ"));
        }
    }
    Ok(parsed)
}

/// JSON-Lines: a header line, then one object per spike in time order.
pub fn write_events_jsonl<W: Write>(mut w: W, header: &EventHeader, events: &[SpikeEvent]) -> Result<()> {
    let line = EventLine::Header { header: header.clone() };
    writeln!(w, "{}", serde_json::to_string(&line).expect("header serializes"))?;
    for e in events {
        writeln!(w, "{}", serde_json::to_string(&EventRecord::from(e)).expect("event serializes"))?;
    }
    w.flush()?;
    Ok(())
}

/// CSV with columns `t,i,low`; the header comment line records the seed.
pub fn write_events_csv<W: Write>(mut w: W, header: &EventHeader, events: &[SpikeEvent]) -> Result<()> {
    writeln!(
        w,
        "# seed={} stream={} rng={} n_neurons={} termination={}",
        header.seed, header.stream, header.rng, header.n_neurons, header.termination
    )?;
    writeln!(w, "t,i,low")?;
    for e in events {
        writeln!(w, "{:?},{},{}", e.t, e.i, e.low)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_round_trip() {
        let ev = EventRecord { t: 0.1 + 0.2, i: 3, low: true, u_pre: Some(vec![1.0, 0.5]), u_post: Some(vec![0.0, 0.75]) };
        let line = serde_json::to_string(&ev).unwrap();
        assert_eq!(parse_event_line(&line).unwrap(), EventLine::Event(ev));
        let h = r#"{"header":{"seed":1,"stream":0,"rng":"chacha8","n_neurons":2,"t0":0.0,"horizon":1.0,"termination":"horizon","spike_count":0}}"#;
        assert!(matches!(parse_event_line(h).unwrap(), EventLine::Header { .. }));
    }

    #[test]
    fn minimal_event_omits_states() {
        let ev = EventRecord { t: 2.5, i: 0, low: false, u_pre: None, u_post: None };
        assert_eq!(serde_json::to_string(&ev).unwrap(), r#"{"t":2.5,"i":0,"low":false}"#);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "{}", "[1,2]", r#"{"t":1,"i":-1,"low":true}"#, r#"{"t":1,"i":0,"low":true,"x":0}"#,
            r#"{"t":1,"i":0,"low":true,"u_pre":[1],"u_post":[1,2]}"#] {
            assert!(parse_event_line(bad).is_err(), "{bad}");
        }
    }
}
