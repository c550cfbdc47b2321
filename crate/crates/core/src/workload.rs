//! Workload ingestion and generation.
//!
//! Three sources feed the simulator: line-delimited scenario files (one JSON
//! object per line), wall-post traces (`poster wall_owner timestamp`
//! triples), and a seeded synthetic generator.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{host_service, Action, SimEvent};
use crate::model::{AgentId, CommitmentContent, Priority, Tick};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: unknown action `{action}`")]
    UnknownAction { line: usize, action: String },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioLine {
    at: Tick,
    network: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    account: String,
    action: String,
    service: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duration: Option<Tick>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    priority: Option<Priority>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    detail: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    purpose: String,
}

/// Parses a scenario file. Blank lines and `#` comments are skipped; the
/// result is sorted by `at`, stable on ties.
pub fn parse_scenario(bytes: &[u8]) -> Result<Vec<SimEvent>, WorkloadError> {
    let text = std::str::from_utf8(bytes).map_err(|e| WorkloadError::Parse {
        line: 0,
        reason: format!("not UTF-8: {e}"),
    })?;
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rec: ScenarioLine = serde_json::from_str(trimmed).map_err(|e| WorkloadError::Parse {
            line,
            reason: e.to_string(),
        })?;
        let action = Action::from_name(&rec.action).ok_or_else(|| WorkloadError::UnknownAction {
            line,
            action: rec.action.clone(),
        })?;
        if rec.duration == Some(0) {
            return Err(WorkloadError::Parse {
                line,
                reason: "duration must be at least 1".into(),
            });
        }
        if action != Action::Register && rec.account.is_empty() {
            return Err(WorkloadError::Parse {
                line,
                reason: "missing account".into(),
            });
        }
        events.push(SimEvent {
            at: rec.at,
            account: rec.account,
            action,
            service: AgentId::service(rec.service),
            duration: rec.duration,
            priority: rec.priority.unwrap_or(0),
            content: CommitmentContent::new(rec.detail, host_service(&rec.network), rec.purpose),
            network: rec.network,
        });
    }
    events.sort_by_key(|e| e.at);
    Ok(events)
}

/// Writes events in the scenario-file format.
///
/// Only fields the format carries survive: content owner, conditions and
/// audiences are rebuilt by the parser.
pub fn write_scenario(events: &[SimEvent]) -> String {
    let mut out = String::new();
    for ev in events {
        let rec = ScenarioLine {
            at: ev.at,
            network: ev.network.clone(),
            account: ev.account.clone(),
            action: ev.action.name().to_string(),
            service: ev.service.name.clone(),
            duration: ev.duration,
            priority: (ev.priority != 0).then_some(ev.priority),
            detail: ev.content.detail.clone(),
            purpose: ev.content.purpose.clone(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("scenario line serializes"));
        out.push('\n');
    }
    out
}

/// How wall-post lines become workload events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallMapping {
    pub network: String,
    /// Share of lines remapped from `Post` to `Collect`.
    pub reader_fraction: f64,
    /// Rotate the remaining writer lines through Post, Share and PostActivity.
    pub rotate_writers: bool,
    pub duration: Option<Tick>,
}

impl Default for WallMapping {
    fn default() -> Self {
        Self {
            network: "facebook".into(),
            reader_fraction: 0.3,
            rotate_writers: false,
            duration: None,
        }
    }
}

/// Whether data line `index` is remapped to a reader, spreading a
/// `fraction` of lines evenly over the file.
pub fn is_reader_line(index: usize, fraction: f64) -> bool {
    let f = clamp_fraction(fraction);
    let before = (index as f64 * f).floor();
    let after = ((index + 1) as f64 * f).floor();
    after > before
}

fn clamp_fraction(f: f64) -> f64 {
    if f.is_nan() {
        0.0
    } else {
        f.clamp(0.0, 1.0)
    }
}

const WRITER_ROTATION: [Action; 3] = [Action::Post, Action::Share, Action::PostActivity];

/// Parses a wall-post trace.
///
/// Each data line is `poster wall_owner timestamp`; the four-column variant
/// with a weight before the timestamp is also accepted. Lines starting with
/// `%` are comments. Timestamps are shifted so the earliest line is tick 0,
/// and every poster is registered just before its first event.
pub fn parse_wall_trace(bytes: &[u8], mapping: &WallMapping) -> Result<Vec<SimEvent>, WorkloadError> {
    let text = std::str::from_utf8(bytes).map_err(|e| WorkloadError::Parse {
        line: 0,
        reason: format!("not UTF-8: {e}"),
    })?;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields = trimmed
            .split_whitespace()
            .map(|f| f.parse::<u64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| WorkloadError::Parse {
                line,
                reason: format!("non-integer field: {e}"),
            })?;
        let (poster, owner, ts) = match fields.as_slice() {
            [p, o, t] | [p, o, _, t] => (*p, *o, *t),
            other => {
                return Err(WorkloadError::Parse {
                    line,
                    reason: format!("expected 3 integer fields, found {}", other.len()),
                })
            }
        };
        rows.push((poster, owner, ts, line));
    }

    let origin = rows.iter().map(|r| r.2).min().unwrap_or(0);
    let mut events: Vec<SimEvent> = rows
        .iter()
        .enumerate()
        .map(|(index, &(poster, owner, ts, line))| {
            let action = if is_reader_line(index, mapping.reader_fraction) {
                Action::Collect
            } else if mapping.rotate_writers {
                WRITER_ROTATION[index % WRITER_ROTATION.len()]
            } else {
                Action::Post
            };
            let mut ev = SimEvent::new(
                ts - origin,
                &mapping.network,
                &owner.to_string(),
                action,
                &format!("sws_{poster}"),
            )
            .with_detail(&format!("wall_line_{line}"), "wall_post");
            ev.duration = mapping.duration;
            ev
        })
        .collect();
    events.sort_by_key(|e| e.at);

    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(events.len() * 2);
    for ev in events {
        if seen.insert(ev.service.name.clone()) {
            out.push(SimEvent::register(ev.at, &mapping.network, &ev.service.name));
        }
        out.push(ev);
    }
    Ok(out)
}

const READER_ACTIONS: [Action; 4] = [Action::Collect, Action::NotTamper, Action::SignOff, Action::NotReveal];
const WRITER_ACTIONS: [Action; 3] = [Action::Post, Action::Share, Action::PostActivity];

/// Parameters of a synthetic workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_events: usize,
    pub n_accounts: usize,
    pub reader_fraction: f64,
    /// Priorities are drawn uniformly from `0..priority_levels`.
    pub priority_levels: Priority,
    pub n_services: usize,
    pub network: String,
    /// Inter-arrival gaps are drawn from `0..=max_gap`.
    pub max_gap: Tick,
    /// Durations are drawn from `1..=max_duration`.
    pub max_duration: Tick,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_events: 1000,
            n_accounts: 10,
            reader_fraction: 0.3,
            priority_levels: 4,
            n_services: 8,
            network: "facebook".into(),
            max_gap: 4,
            max_duration: 8,
        }
    }
}

impl SyntheticSpec {
    /// `n_events` workload events, preceded by one `Register` per service
    /// at tick 0.
    pub fn generate(&self) -> Vec<SimEvent> {
        if self.n_events == 0 {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let services: Vec<String> = (0..self.n_services.max(1)).map(|i| format!("sws_{i}")).collect();
        let mut events: Vec<SimEvent> = services
            .iter()
            .map(|s| SimEvent::register(0, &self.network, s))
            .collect();
        let reader_fraction = clamp_fraction(self.reader_fraction);
        let mut now = 0;
        for i in 0..self.n_events {
            now += rng.gen_range(0..=self.max_gap);
            let account = format!("acct{}", rng.gen_range(0..self.n_accounts.max(1)));
            let action = if rng.gen_bool(reader_fraction) {
                READER_ACTIONS[rng.gen_range(0..READER_ACTIONS.len())]
            } else {
                WRITER_ACTIONS[rng.gen_range(0..WRITER_ACTIONS.len())]
            };
            let service = &services[rng.gen_range(0..services.len())];
            let duration = rng.gen_range(1..=self.max_duration.max(1));
            let priority = rng.gen_range(0..self.priority_levels.max(1));
            events.push(
                SimEvent::new(now, &self.network, &account, action, service)
                    .with_duration(duration)
                    .with_priority(priority)
                    .with_detail(&format!("item{i}"), "synthetic"),
            );
        }
        events
    }
}

pub fn generate_synthetic(
    seed: u64,
    n_events: usize,
    n_accounts: usize,
    reader_fraction: f64,
    priority_levels: Priority,
) -> Vec<SimEvent> {
    SyntheticSpec {
        seed,
        n_events,
        n_accounts,
        reader_fraction,
        priority_levels,
        ..SyntheticSpec::default()
    }
    .generate()
}
