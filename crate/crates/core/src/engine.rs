//! Deterministic discrete-event simulator.
//!
//! A single virtual clock jumps from one interesting tick to the next. At
//! each tick, workload arrivals are handled first (in input order), then
//! every completion due at that tick (in commitment id order). Completions
//! can cascade: a commitment whose condition fails is deactivated in the
//! same tick it was activated.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coordinator::{AccountCoordinator, CoordinatorError, Decision, Outcome, Policy, RelationCounts};
use crate::log::ExecutionLog;
use crate::model::{
    AccessClass, AccountRef, AgentId, AgentKind, ClassificationTable, Commitment, CommitmentContent, CommitmentDraft,
    CommitmentId, Condition, ModelError, Priority, ResponsibilityId, Tick,
};
use crate::report::{Metrics, QueueSample};

/// Workload actions a social web service can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    Collect,
    Post,
    NotTamper,
    SignOff,
    NotReveal,
    Share,
    PostActivity,
    Register,
}

impl Action {
    pub const ALL: [Action; 8] = [
        Action::Collect,
        Action::Post,
        Action::NotTamper,
        Action::SignOff,
        Action::NotReveal,
        Action::Share,
        Action::PostActivity,
        Action::Register,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::Collect => "Collect",
            Action::Post => "Post",
            Action::NotTamper => "NotTamper",
            Action::SignOff => "SignOff",
            Action::NotReveal => "NotReveal",
            Action::Share => "Share",
            Action::PostActivity => "PostActivity",
            Action::Register => "Register",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Responsibilities an action creates commitments for, in admission order.
///
/// `Share` checks the sharing goal first and then posts. `Register` creates
/// no commitment.
pub fn map_action(a: Action) -> &'static [ResponsibilityId] {
    use ResponsibilityId::*;
    match a {
        Action::Collect => &[Resp1],
        Action::Post => &[Resp2],
        Action::NotTamper => &[Resp3],
        Action::SignOff => &[Resp4],
        Action::NotReveal => &[Resp5],
        Action::Share => &[Resp6, Resp2],
        Action::PostActivity => &[Resp7],
        Action::Register => &[],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    pub at: Tick,
    pub network: String,
    pub account: String,
    pub action: Action,
    pub service: AgentId,
    /// Falls back to [`SimConfig::default_duration`].
    pub duration: Option<Tick>,
    pub priority: Priority,
    /// For `Register` events, `detail` carries the credentials.
    pub content: CommitmentContent,
}

impl SimEvent {
    pub fn new(at: Tick, network: &str, account: &str, action: Action, service: &str) -> Self {
        Self {
            at,
            network: network.to_string(),
            account: account.to_string(),
            action,
            service: AgentId::service(service),
            duration: None,
            priority: 0,
            content: CommitmentContent::new("", host_service(network), ""),
        }
    }

    pub fn register(at: Tick, network: &str, service: &str) -> Self {
        let mut ev = Self::new(at, network, "", Action::Register, service);
        ev.content.detail = service.to_string();
        ev
    }

    pub fn with_duration(mut self, duration: Tick) -> Self {
        self.duration = Some(duration);
        self
    }

    pub fn with_priority(mut self, priority: Priority) -> Self {
        self.priority = priority;
        self
    }

    pub fn with_detail(mut self, detail: &str, purpose: &str) -> Self {
        self.content.detail = detail.to_string();
        self.content.purpose = purpose.to_string();
        self
    }

    pub fn account_ref(&self) -> AccountRef {
        AccountRef::new(&self.network, &self.account)
    }
}

/// The service that owns data hosted on `network`.
pub fn host_service(network: &str) -> AgentId {
    AgentId::service(format!("sws_{network}"))
}

pub fn authority_of(network: &str) -> AgentId {
    AgentId::authority(format!("sn_auth_{network}"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub policy: Policy,
    pub default_duration: Tick,
    /// Longest a commitment may sit in the waiting queue.
    pub max_wait: Tick,
    pub classification_overrides: BTreeMap<ResponsibilityId, AccessClass>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            policy: Policy::Fcfs,
            default_duration: 5,
            max_wait: 1_000_000,
            classification_overrides: BTreeMap::new(),
        }
    }
}

impl SimConfig {
    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    pub fn classification(&self) -> ClassificationTable {
        ClassificationTable::default().with_overrides(&self.classification_overrides)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.default_duration == 0 {
            return Err(EngineError::InvalidConfig("default duration must be at least one tick".into()));
        }
        if self.max_wait == 0 {
            return Err(EngineError::InvalidConfig("max wait must be at least one tick".into()));
        }
        Ok(())
    }
}

/// Decides whether a service may sign up on a network.
pub trait AuthorityHook {
    fn authenticate(&self, network: &str, service: &AgentId, credentials: &[u8]) -> bool;
}

/// Accepts any non-empty credentials.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultAuthority;

impl AuthorityHook for DefaultAuthority {
    fn authenticate(&self, _network: &str, _service: &AgentId, credentials: &[u8]) -> bool {
        !credentials.is_empty()
    }
}

impl<F: Fn(&str, &AgentId, &[u8]) -> bool> AuthorityHook for F {
    fn authenticate(&self, network: &str, service: &AgentId, credentials: &[u8]) -> bool {
        self(network, service, credentials)
    }
}

/// Evaluates a commitment's condition when it is activated.
pub trait ConditionHook {
    fn holds(&self, condition: &Condition, commitment: &Commitment) -> bool;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysHolds;

impl ConditionHook for AlwaysHolds {
    fn holds(&self, _condition: &Condition, _commitment: &Commitment) -> bool {
        true
    }
}

impl<F: Fn(&Condition, &Commitment) -> bool> ConditionHook for F {
    fn holds(&self, condition: &Condition, commitment: &Commitment) -> bool {
        self(condition, commitment)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SocialNetwork {
    pub name: String,
    pub authority: AgentId,
    pub accounts: BTreeSet<String>,
    pub registered_services: BTreeSet<AgentId>,
    pub policy: Policy,
    pub classification: ClassificationTable,
}

impl SocialNetwork {
    pub fn new(name: &str, policy: Policy, classification: ClassificationTable) -> Self {
        Self {
            name: name.to_string(),
            authority: authority_of(name),
            accounts: BTreeSet::new(),
            registered_services: BTreeSet::new(),
            policy,
            classification,
        }
    }

    /// Signs `svc` up if the authority accepts its credentials. Idempotent.
    pub fn register_service(&mut self, svc: &AgentId, credentials: &[u8], authority: &dyn AuthorityHook) -> bool {
        if svc.kind != AgentKind::SocialWebService {
            return false;
        }
        if self.registered_services.contains(svc) {
            return true;
        }
        if authority.authenticate(&self.name, svc, credentials) {
            self.registered_services.insert(svc.clone());
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("event {index} at tick {at} precedes the previous event")]
    UnsortedEvents { index: usize, at: Tick },
    #[error("event {index}: {reason}")]
    InvalidEvent { index: usize, reason: String },
    #[error("commitment {cid} waited {waited} ticks, over the limit of {max_wait}")]
    WatchdogExpired { cid: CommitmentId, waited: Tick, max_wait: Tick },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("event {index}: {source}")]
    Model { index: usize, source: ModelError },
    #[error(transparent)]
    Coordinator(#[from] CoordinatorError),
    #[error(transparent)]
    Lifecycle(#[from] ModelError),
}

/// Builds the drafts for one workload event, in admission order.
pub fn drafts_for(event: &SimEvent) -> Vec<CommitmentDraft> {
    map_action(event.action)
        .iter()
        .map(|r| {
            let t = r.template();
            let creditor = match t.creditor_kind {
                AgentKind::NetworkAuthority => authority_of(&event.network),
                _ => event.content.owner.clone(),
            };
            let mut content = event.content.clone();
            content.condition = t.condition.map(|p| match &event.content.condition {
                Some(c) if c.predicate == p => c.clone(),
                _ => derived_condition(p, &event.content),
            });
            CommitmentDraft {
                responsibility: *r,
                debtor: event.service.clone(),
                creditor,
                content,
                account: event.account_ref(),
                priority: event.priority,
            }
        })
        .collect()
}

fn derived_condition(predicate: &str, content: &CommitmentContent) -> Condition {
    let arg = match predicate {
        "valid" => format!("p_{}", content.purpose),
        _ => content.detail.clone(),
    };
    Condition::new(predicate, [arg])
}

/// Checks the sorted-by-tick and positive-duration preconditions.
pub fn validate_events(events: &[SimEvent]) -> Result<(), EngineError> {
    let mut last = 0;
    for (index, ev) in events.iter().enumerate() {
        if ev.at < last {
            return Err(EngineError::UnsortedEvents { index, at: ev.at });
        }
        last = ev.at;
        if ev.duration == Some(0) {
            return Err(EngineError::InvalidEvent {
                index,
                reason: "duration must be at least one tick".into(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutput {
    pub log: ExecutionLog,
    pub metrics: Metrics,
}

/// Runs `events` with the default authority and condition hooks.
pub fn run(events: &[SimEvent], cfg: &SimConfig) -> Result<RunOutput, EngineError> {
    Simulator::new(cfg.clone()).run(events)
}

pub struct Simulator<'h> {
    cfg: SimConfig,
    authority: &'h dyn AuthorityHook,
    conditions: &'h dyn ConditionHook,
}

impl<'h> Simulator<'h> {
    pub fn new(cfg: SimConfig) -> Self {
        Self {
            cfg,
            authority: &DefaultAuthority,
            conditions: &AlwaysHolds,
        }
    }

    pub fn with_authority(mut self, authority: &'h dyn AuthorityHook) -> Self {
        self.authority = authority;
        self
    }

    pub fn with_conditions(mut self, conditions: &'h dyn ConditionHook) -> Self {
        self.conditions = conditions;
        self
    }

    pub fn run(&self, events: &[SimEvent]) -> Result<RunOutput, EngineError> {
        self.cfg.validate()?;
        validate_events(events)?;
        let mut state = RunState::new(self);
        let mut next = 0;
        loop {
            let arrival = events.get(next).map(|e| e.at);
            let completion = state.completions.peek().map(|Reverse((t, _))| *t);
            let now = match (arrival, completion) {
                (None, None) => break,
                (Some(a), Some(c)) => a.min(c),
                (Some(t), None) | (None, Some(t)) => t,
            };
            while let Some(ev) = events.get(next).filter(|e| e.at == now) {
                state.arrive(next, ev)?;
                next += 1;
            }
            while let Some(&Reverse((t, cid))) = state.completions.peek() {
                if t != now {
                    break;
                }
                state.completions.pop();
                state.finish(cid, now)?;
            }
        }
        Ok(state.into_output())
    }
}

#[derive(Debug, Clone)]
struct Meta {
    duration: Tick,
    parent: Option<CommitmentId>,
    failed: bool,
}

struct RunState<'a, 'h> {
    sim: &'a Simulator<'h>,
    table: ClassificationTable,
    networks: BTreeMap<String, SocialNetwork>,
    coordinators: BTreeMap<AccountRef, AccountCoordinator>,
    store: Vec<Commitment>,
    meta: Vec<Meta>,
    completions: BinaryHeap<Reverse<(Tick, CommitmentId)>>,
    log: ExecutionLog,
    metrics: Metrics,
    queue_lengths: BTreeMap<AccountRef, usize>,
}

impl<'a, 'h> RunState<'a, 'h> {
    fn new(sim: &'a Simulator<'h>) -> Self {
        Self {
            sim,
            table: sim.cfg.classification(),
            networks: BTreeMap::new(),
            coordinators: BTreeMap::new(),
            store: Vec::new(),
            meta: Vec::new(),
            completions: BinaryHeap::new(),
            log: ExecutionLog::default(),
            metrics: Metrics::default(),
            queue_lengths: BTreeMap::new(),
        }
    }

    fn network(&mut self, name: &str) -> &mut SocialNetwork {
        let (policy, table) = (self.sim.cfg.policy, self.table);
        self.networks
            .entry(name.to_string())
            .or_insert_with(|| SocialNetwork::new(name, policy, table))
    }

    fn arrive(&mut self, index: usize, ev: &SimEvent) -> Result<(), EngineError> {
        let authority = self.sim.authority;
        if ev.action == Action::Register {
            let accepted = self
                .network(&ev.network)
                .register_service(&ev.service, ev.content.detail.as_bytes(), authority);
            if !accepted {
                log::warn!("{} rejected by the authority of {}", ev.service, ev.network);
            }
            return Ok(());
        }

        let net = self.network(&ev.network);
        net.accounts.insert(ev.account.clone());
        let registered = net.registered_services.clone();
        let account = ev.account_ref();
        let duration = ev.duration.unwrap_or(self.sim.cfg.default_duration);

        let mut parent = None;
        for draft in drafts_for(ev) {
            let cid = CommitmentId(self.store.len() as u64);
            let responsibility = draft.responsibility;
            let c = draft
                .instantiate(cid, ev.at, &registered)
                .map_err(|source| EngineError::Model { index, source })?;
            let class = self.table.access_class(responsibility);
            *self.metrics.per_responsibility_counts.entry(responsibility).or_default() += 1;
            self.store.push(c);
            self.meta.push(Meta {
                duration,
                parent,
                failed: false,
            });

            let coord = self
                .coordinators
                .entry(account.clone())
                .or_insert_with(|| AccountCoordinator::new(account.clone(), self.sim.cfg.policy));
            let decision = coord.admit(&mut self.store[cid.0 as usize], class, ev.at, &mut self.log)?;
            match decision.decision {
                Decision::RunNow => self.start(cid, ev.at),
                Decision::Enqueued => self.metrics.waited_total += 1,
            }
            self.sample_queue(&account, ev.at);
            parent = Some(cid);
        }
        Ok(())
    }

    /// Evaluates the activation-time condition and schedules completion.
    fn start(&mut self, cid: CommitmentId, now: Tick) {
        let c = &self.store[cid.0 as usize];
        let parent_failed = self.meta[cid.0 as usize]
            .parent
            .is_some_and(|p| self.meta[p.0 as usize].failed);
        let condition_holds = c
            .content
            .condition
            .as_ref()
            .is_none_or(|cond| self.sim.conditions.holds(cond, c));
        let meta = &mut self.meta[cid.0 as usize];
        meta.failed = parent_failed || !condition_holds;
        let end = if meta.failed { now } else { now + meta.duration };
        self.completions.push(Reverse((end, cid)));
    }

    fn finish(&mut self, cid: CommitmentId, now: Tick) -> Result<(), EngineError> {
        let account = self.store[cid.0 as usize].account.clone();
        let outcome = if self.meta[cid.0 as usize].failed {
            self.metrics.failed += 1;
            Outcome::Failed
        } else {
            Outcome::Fulfilled
        };
        let coord = self
            .coordinators
            .get_mut(&account)
            .expect("active commitment has a coordinator");
        let activated = coord.complete(cid, now, outcome, &mut self.store, &mut self.log)?;
        for next in activated {
            let waited = now - self.store[next.0 as usize].created_at();
            if waited > self.sim.cfg.max_wait {
                return Err(EngineError::WatchdogExpired {
                    cid: next,
                    waited,
                    max_wait: self.sim.cfg.max_wait,
                });
            }
            self.start(next, now);
        }
        self.sample_queue(&account, now);
        Ok(())
    }

    fn sample_queue(&mut self, account: &AccountRef, now: Tick) {
        let len = self.coordinators[account].waiting_len();
        let last = self.queue_lengths.entry(account.clone()).or_insert(0);
        if *last != len {
            *last = len;
            self.metrics.queue_length_series.push(QueueSample {
                tick: now,
                account: account.clone(),
                length: len,
            });
        }
    }

    fn into_output(mut self) -> RunOutput {
        let mut counts = RelationCounts::default();
        for coord in self.coordinators.values() {
            counts.merge(&coord.counts());
        }
        self.metrics.friend_count = counts.friend;
        self.metrics.family_count = counts.family;
        self.metrics.strange_count = counts.strange;
        self.metrics.commitments = self.store.len() as u64;
        RunOutput {
            log: self.log,
            metrics: self.metrics,
        }
    }
}
