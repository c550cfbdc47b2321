//! Browser bindings: run scenarios and hand the page a JSON timeline to draw.

use std::collections::BTreeMap;

use commitguard::report::{action_label, Metrics};
use commitguard::workload::{parse_scenario, write_scenario, SyntheticSpec};
use commitguard::{
    check_log, classify_relation, golden, may_run_concurrently, render_narrative, run, AccessClass, ExecutionLog,
    LifecycleState, Policy, ResponsibilityId, SimConfig, SimEvent, Tick,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// One commitment as a bar on its account's lane.
#[derive(Debug, Serialize, PartialEq, Eq)]
pub struct Bar {
    pub account: String,
    pub cid: u64,
    pub responsibility: String,
    pub label: &'static str,
    pub access: AccessClass,
    pub created: Tick,
    pub start: Option<Tick>,
    pub end: Option<Tick>,
    pub waited: bool,
    pub failed: bool,
}

#[derive(Debug, Serialize)]
pub struct Timeline {
    pub bars: Vec<Bar>,
    pub narrative: String,
    pub metrics: Metrics,
    pub consistent: bool,
    pub horizon: Tick,
}

pub fn bars(log: &ExecutionLog) -> Vec<Bar> {
    let mut by_cid: BTreeMap<u64, Bar> = BTreeMap::new();
    for r in log {
        let bar = by_cid.entry(r.cid.0).or_insert_with(|| Bar {
            account: r.account.to_string(),
            cid: r.cid.0,
            responsibility: r.responsibility.to_string(),
            label: action_label(r.responsibility),
            access: r.access,
            created: r.tick,
            start: None,
            end: None,
            waited: false,
            failed: false,
        });
        match r.new_state {
            LifecycleState::Active => bar.start = Some(r.tick),
            LifecycleState::Waiting => bar.waited = true,
            LifecycleState::Deactivated => {
                bar.end = Some(r.tick);
                bar.failed = r.failed;
            }
            _ => {}
        }
    }
    by_cid.into_values().collect()
}

fn parse_overrides(spec: &str) -> Result<BTreeMap<ResponsibilityId, AccessClass>, String> {
    spec.split([',', ' '])
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (r, c) = item.split_once('=').ok_or_else(|| format!("bad override `{item}`"))?;
            Ok((r.parse().map_err(|e| format!("{e}"))?, c.parse().map_err(|e| format!("{e}"))?))
        })
        .collect()
}

fn timeline(events: &[SimEvent], policy: &str, overrides: &str) -> Result<Timeline, String> {
    let policy: Policy = policy.parse()?;
    let cfg = SimConfig {
        classification_overrides: parse_overrides(overrides)?,
        ..SimConfig::default().with_policy(policy)
    };
    let out = run(events, &cfg).map_err(|e| e.to_string())?;
    let consistent = check_log(&out.log).map_err(|e| e.to_string())?.is_consistent();
    Ok(Timeline {
        horizon: out.log.iter().map(|r| r.tick).max().unwrap_or(0),
        bars: bars(&out.log),
        narrative: render_narrative(&out.log),
        metrics: out.metrics,
        consistent,
    })
}

/// Runs a JSON Lines scenario; `overrides` is a list like `Resp1=writer,Resp6=reader`.
pub fn simulate_json(scenario: &str, policy: &str, overrides: &str) -> Result<String, String> {
    let events = parse_scenario(scenario.as_bytes()).map_err(|e| e.to_string())?;
    let t = timeline(&events, policy, overrides)?;
    serde_json::to_string(&t).map_err(|e| e.to_string())
}

pub fn synthetic_json(seed: u64, n_events: usize, n_accounts: usize, reader_fraction: f64, policy: &str) -> Result<String, String> {
    if !(0.0..=1.0).contains(&reader_fraction) || n_accounts == 0 {
        return Err("reader fraction must lie in [0, 1] and accounts must be positive".into());
    }
    let events = SyntheticSpec { seed, n_events, n_accounts, reader_fraction, ..SyntheticSpec::default() }.generate();
    let t = timeline(&events, policy, "")?;
    serde_json::to_string(&t).map_err(|e| e.to_string())
}

/// Relation between two responsibilities under the default table, e.g. `Friend (concurrent)`.
pub fn relation_text(a: &str, b: &str) -> Result<String, String> {
    let table = commitguard::ClassificationTable::default();
    let ca = table.access_class(a.parse().map_err(|e| format!("{e}"))?);
    let cb = table.access_class(b.parse().map_err(|e| format!("{e}"))?);
    let rel = classify_relation(ca, cb);
    let mode = if may_run_concurrently(rel) { "concurrent" } else { "exclusive" };
    Ok(format!("{ca} / {cb}: {rel} ({mode})"))
}

/// Built-in scenarios as `{name: jsonl}` for the page's picker.
pub fn builtin_json() -> String {
    let map: BTreeMap<&str, String> = golden::all().into_iter().map(|g| (g.name, write_scenario(&g.events))).collect();
    serde_json::to_string(&map).expect("string map serializes")
}

#[wasm_bindgen]
pub fn simulate(scenario: &str, policy: &str, overrides: &str) -> Result<String, JsError> {
    simulate_json(scenario, policy, overrides).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate_synthetic(seed: u32, n_events: u32, n_accounts: u32, reader_fraction: f64, policy: &str) -> Result<String, JsError> {
    synthetic_json(seed.into(), n_events as usize, n_accounts as usize, reader_fraction, policy).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn relation(a: &str, b: &str) -> Result<String, JsError> {
    relation_text(a, b).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn builtin_scenarios() -> String {
    builtin_json()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sharing_walkthrough_bars() {
        let g = golden::sharing_walkthrough();
        let t = timeline(&g.events, "fcfs", "").unwrap();
        assert!(t.consistent);
        assert_eq!(t.narrative, g.narrative);
        let spans: Vec<_> = t.bars.iter().map(|b| (b.responsibility.as_str(), b.created, b.start, b.end, b.waited)).collect();
        assert_eq!(
            spans,
            [
                ("Resp6", 0, Some(0), Some(5), false),
                ("Resp2", 0, Some(5), Some(10), true),
                ("Resp7", 1, Some(10), Some(15), true),
                ("Resp1", 2, Some(15), Some(20), true),
            ]
        );
        assert_eq!(t.horizon, 20);
    }

    #[test]
    fn builtins_round_trip_through_simulate() {
        let map: BTreeMap<String, String> = serde_json::from_str(&builtin_json()).unwrap();
        assert_eq!(map.len(), golden::all().len());
        let json = simulate_json(&map["trace-row1"], "priority", "").unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["metrics"]["waited_total"], 2);
        assert_eq!(v["bars"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn overrides_change_the_schedule() {
        let events = golden::friendly_readers().events;
        let base = timeline(&events, "fcfs", "").unwrap();
        let changed = timeline(&events, "fcfs", "Resp1=writer").unwrap();
        assert!(base.bars.iter().all(|b| !b.waited));
        assert!(changed.bars.iter().any(|b| b.waited));
        assert!(timeline(&events, "fcfs", "Resp1").is_err());
        assert!(timeline(&events, "lifo", "").is_err());
    }

    #[test]
    fn synthetic_and_relation() {
        let v: serde_json::Value = serde_json::from_str(&synthetic_json(3, 200, 2, 0.5, "fcfs").unwrap()).unwrap();
        assert_eq!(v["consistent"], true);
        assert!(synthetic_json(3, 10, 0, 0.5, "fcfs").is_err());
        assert_eq!(relation_text("Resp1", "Resp3").unwrap(), "Reader / Reader: Friend (concurrent)");
        assert_eq!(relation_text("2", "C_Resp6").unwrap(), "Writer / Writer: Family (exclusive)");
        assert_eq!(relation_text("Resp1", "Resp2").unwrap(), "Reader / Writer: Strange (exclusive)");
        assert!(relation_text("Resp8", "Resp1").is_err());
    }
}
