//! Independent checks on schedules.
//!
//! [`check_log`] rebuilds execution intervals from a log and scans every
//! pair on each account for a forbidden overlap. [`reference_schedule`] is a
//! second, deliberately naive scheduler: it keeps plain vectors, re-sorts the
//! waiting list whenever it must choose, and applies the admission and
//! selection rules literally. Neither shares code with the coordinator.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    drafts_for, map_action, validate_events, Action, AlwaysHolds, AuthorityHook, ConditionHook, DefaultAuthority,
    EngineError, SimConfig, SimEvent,
};
use crate::log::ExecutionLog;
use crate::model::{
    AccessClass, AccountRef, AgentId, AgentKind, Commitment, CommitmentId, LifecycleState, Tick,
};
use crate::coordinator::Policy;
use crate::relation::Relation;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub cid: CommitmentId,
    pub account: AccountRef,
    pub access: AccessClass,
    pub start: Tick,
    /// Exclusive; `None` while still running at the end of the log.
    pub end: Option<Tick>,
}

impl Interval {
    fn overlaps(&self, other: &Interval) -> bool {
        let before = |a: &Interval, b: &Interval| a.end.is_some_and(|e| e <= b.start);
        !before(self, other) && !before(other, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub first: CommitmentId,
    pub second: CommitmentId,
    pub account: AccountRef,
    pub from: Tick,
    pub until: Option<Tick>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub violations: Vec<Violation>,
}

impl Verdict {
    fn from_violations(violations: Vec<Violation>) -> Self {
        let status = if violations.is_empty() {
            Status::Consistent
        } else {
            Status::Inconsistent
        };
        Self { status, violations }
    }

    pub fn is_consistent(&self) -> bool {
        self.status == Status::Consistent
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("malformed log at record {index}: {reason}")]
    MalformedLog { index: usize, reason: String },
}

fn legal(from: LifecycleState, to: LifecycleState) -> bool {
    use LifecycleState::*;
    matches!(
        (from, to),
        (Created, Waiting) | (Created, Active) | (Waiting, Signaled) | (Signaled, Active) | (Active, Deactivated)
    )
}

/// Reconstructs one interval per activated commitment.
pub fn intervals(log: &ExecutionLog) -> Result<Vec<Interval>, OracleError> {
    struct Track {
        state: LifecycleState,
        account: AccountRef,
        access: AccessClass,
        slot: Option<usize>,
    }
    let mut tracks: BTreeMap<CommitmentId, Track> = BTreeMap::new();
    let mut out: Vec<Interval> = Vec::new();
    let mut last_tick = 0;
    for (index, r) in log.iter().enumerate() {
        let bad = |reason: String| OracleError::MalformedLog { index, reason };
        if r.tick < last_tick {
            return Err(bad(format!("tick {} after tick {last_tick}", r.tick)));
        }
        last_tick = r.tick;
        let t = tracks.entry(r.cid).or_insert_with(|| Track {
            state: LifecycleState::Created,
            account: r.account.clone(),
            access: r.access,
            slot: None,
        });
        if t.account != r.account || t.access != r.access {
            return Err(bad(format!("commitment {} changed account or access class", r.cid)));
        }
        if r.old_state != t.state || !legal(r.old_state, r.new_state) {
            return Err(bad(format!(
                "commitment {} moved {} -> {} while {}",
                r.cid, r.old_state, r.new_state, t.state
            )));
        }
        t.state = r.new_state;
        match r.new_state {
            LifecycleState::Active => {
                t.slot = Some(out.len());
                out.push(Interval {
                    cid: r.cid,
                    account: r.account.clone(),
                    access: r.access,
                    start: r.tick,
                    end: None,
                });
            }
            LifecycleState::Deactivated => {
                let slot = t.slot.expect("Active precedes Deactivated");
                out[slot].end = Some(r.tick);
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Every same-account pair that overlaps with at least one writer.
pub fn scan(intervals: &[Interval]) -> Vec<Violation> {
    let mut by_account: BTreeMap<&AccountRef, Vec<&Interval>> = BTreeMap::new();
    for iv in intervals {
        by_account.entry(&iv.account).or_default().push(iv);
    }
    let mut violations = Vec::new();
    for (account, ivs) in by_account {
        for (i, a) in ivs.iter().enumerate() {
            for b in &ivs[i + 1..] {
                let writer = a.access == AccessClass::Writer || b.access == AccessClass::Writer;
                if writer && a.overlaps(b) {
                    let until = match (a.end, b.end) {
                        (Some(x), Some(y)) => Some(x.min(y)),
                        (x, None) | (None, x) => x,
                    };
                    violations.push(Violation {
                        first: a.cid,
                        second: b.cid,
                        account: account.clone(),
                        from: a.start.max(b.start),
                        until,
                    });
                }
            }
        }
    }
    violations
}

pub fn check_log(log: &ExecutionLog) -> Result<Verdict, OracleError> {
    Ok(Verdict::from_violations(scan(&intervals(log)?)))
}

/// Whether the workload would break the overlap rules if every commitment
/// ran the moment it arrived. A `Share` still runs its goal check before its
/// post.
pub fn conflict_pressure(events: &[SimEvent], cfg: &SimConfig) -> Verdict {
    let table = cfg.classification();
    let mut ivs = Vec::new();
    for ev in events {
        let duration = ev.duration.unwrap_or(cfg.default_duration);
        let mut start = ev.at;
        for r in map_action(ev.action) {
            ivs.push(Interval {
                cid: CommitmentId(ivs.len() as u64),
                account: ev.account_ref(),
                access: table.access_class(*r),
                start,
                end: Some(start + duration),
            });
            start += duration;
        }
    }
    Verdict::from_violations(scan(&ivs))
}

pub fn reference_schedule(events: &[SimEvent], cfg: &SimConfig) -> Result<ExecutionLog, EngineError> {
    reference_schedule_with(events, cfg, &DefaultAuthority, &AlwaysHolds)
}

struct Item {
    c: Commitment,
    class: AccessClass,
    duration: Tick,
    parent: Option<usize>,
    failed: bool,
    end: Option<Tick>,
}

#[derive(Default)]
struct Slot {
    active: Vec<usize>,
    waiting: Vec<usize>,
}

pub fn reference_schedule_with(
    events: &[SimEvent],
    cfg: &SimConfig,
    authority: &dyn AuthorityHook,
    conditions: &dyn ConditionHook,
) -> Result<ExecutionLog, EngineError> {
    cfg.validate()?;
    validate_events(events)?;
    let table = cfg.classification();
    let mut registered: BTreeMap<String, BTreeSet<AgentId>> = BTreeMap::new();
    let mut items: Vec<Item> = Vec::new();
    let mut slots: BTreeMap<AccountRef, Slot> = BTreeMap::new();
    let mut log = ExecutionLog::default();

    let start = |items: &mut Vec<Item>, idx: usize, now: Tick| {
        let parent_failed = items[idx].parent.is_some_and(|p| items[p].failed);
        let holds = match &items[idx].c.content.condition {
            Some(cond) => conditions.holds(cond, &items[idx].c),
            None => true,
        };
        let item = &mut items[idx];
        item.failed = parent_failed || !holds;
        item.end = Some(if item.failed { now } else { now + item.duration });
    };

    let mut next = 0;
    loop {
        let arrival = events.get(next).map(|e| e.at);
        let due = items
            .iter()
            .filter(|i| i.c.state() == LifecycleState::Active)
            .filter_map(|i| i.end)
            .min();
        let now = match (arrival, due) {
            (None, None) => break,
            (Some(a), Some(d)) => a.min(d),
            (Some(t), None) | (None, Some(t)) => t,
        };

        while next < events.len() && events[next].at == now {
            let index = next;
            let ev = &events[next];
            next += 1;
            let net = registered.entry(ev.network.clone()).or_default();
            if ev.action == Action::Register {
                if ev.service.kind == AgentKind::SocialWebService
                    && !net.contains(&ev.service)
                    && authority.authenticate(&ev.network, &ev.service, ev.content.detail.as_bytes())
                {
                    net.insert(ev.service.clone());
                }
                continue;
            }
            let mut parent = None;
            for draft in drafts_for(ev) {
                let idx = items.len();
                let r = draft.responsibility;
                let c = draft
                    .instantiate(CommitmentId(idx as u64), now, net)
                    .map_err(|source| EngineError::Model { index, source })?;
                let class = table.access_class(r);
                items.push(Item {
                    c,
                    class,
                    duration: ev.duration.unwrap_or(cfg.default_duration),
                    parent,
                    failed: false,
                    end: None,
                });
                parent = Some(idx);

                let slot = slots.entry(ev.account_ref()).or_default();
                let mut active = slot.active.clone();
                active.sort_by_key(|a| items[*a].c.cid);
                let relations: Vec<Relation> = active
                    .iter()
                    .map(|a| match (class, items[*a].class) {
                        (AccessClass::Reader, AccessClass::Reader) => Relation::Friend,
                        (AccessClass::Writer, AccessClass::Writer) => Relation::Family,
                        _ => Relation::Strange,
                    })
                    .collect();
                let blocking = relations.iter().copied().find(|r| *r != Relation::Friend);
                let seen = blocking.or(relations.first().copied());
                let target = if blocking.is_none() {
                    LifecycleState::Active
                } else {
                    LifecycleState::Waiting
                };
                items[idx].c.transition(target, now, class, &mut log)?.relation = seen;
                if target == LifecycleState::Active {
                    slot.active.push(idx);
                    start(&mut items, idx, now);
                } else {
                    slot.waiting.push(idx);
                }
            }
        }

        loop {
            // Smallest id among everything due now, across all accounts.
            let done = slots
                .iter()
                .flat_map(|(acct, s)| s.active.iter().map(move |i| (acct, *i)))
                .filter(|(_, i)| items[*i].end == Some(now))
                .min_by_key(|(_, i)| items[*i].c.cid)
                .map(|(a, i)| (a.clone(), i));
            let Some((account, idx)) = done else { break };
            let failed = items[idx].failed;
            let class = items[idx].class;
            items[idx]
                .c
                .transition(LifecycleState::Deactivated, now, class, &mut log)?
                .failed = failed;
            let slot = slots.get_mut(&account).expect("account slot");
            slot.active.retain(|i| *i != idx);
            if !slot.active.is_empty() || slot.waiting.is_empty() {
                continue;
            }

            let batch = pick_batch(cfg.policy, &slot.waiting, &items);
            slot.waiting.retain(|i| !batch.contains(i));
            for &b in &batch {
                let class = items[b].class;
                items[b].c.transition(LifecycleState::Signaled, now, class, &mut log)?;
                items[b].c.transition(LifecycleState::Active, now, class, &mut log)?;
                slot.active.push(b);
            }
            for &b in &batch {
                let waited = now - items[b].c.created_at();
                if waited > cfg.max_wait {
                    return Err(EngineError::WatchdogExpired {
                        cid: items[b].c.cid,
                        waited,
                        max_wait: cfg.max_wait,
                    });
                }
                start(&mut items, b, now);
            }
        }
    }
    Ok(log)
}

fn pick_batch(policy: Policy, waiting: &[usize], items: &[Item]) -> Vec<usize> {
    let mut order = waiting.to_vec();
    let by_time = |i: &usize| (items[*i].c.created_at(), items[*i].c.cid);
    order.sort_by_key(by_time);
    match policy {
        Policy::Fcfs => {
            let head = order[0];
            if items[head].class == AccessClass::Writer {
                return vec![head];
            }
            order
                .into_iter()
                .take_while(|i| items[*i].class == AccessClass::Reader)
                .collect()
        }
        Policy::Priority => {
            let top = order.iter().map(|i| items[*i].c.priority).max().expect("non-empty queue");
            // Earliest among the top priority.
            let head = *order.iter().find(|i| items[**i].c.priority == top).expect("top exists");
            if items[head].class == AccessClass::Writer {
                return vec![head];
            }
            order
                .into_iter()
                .filter(|i| items[*i].c.priority == top && items[*i].class == AccessClass::Reader)
                .collect()
        }
    }
}
