//! Per-account consistency guarantor.
//!
//! One [`AccountCoordinator`] owns the active set and the waiting queue of a
//! single `(network, account)`. Readers share the account; a writer runs
//! alone. When the active set drains, the next commitment is signaled from
//! the queue, together with its reader batch when it is a reader.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::log::ExecutionLog;
use crate::model::{AccessClass, AccountRef, Commitment, CommitmentId, LifecycleState, ModelError, Priority, Tick};
use crate::relation::{classify_relation, may_run_concurrently, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Serve by creation time.
    #[default]
    Fcfs,
    /// Serve by network-assigned priority, larger first.
    Priority,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Fcfs => f.write_str("fcfs"),
            Policy::Priority => f.write_str("priority"),
        }
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fcfs" => Ok(Policy::Fcfs),
            "priority" => Ok(Policy::Priority),
            other => Err(format!("unknown policy `{other}` (expected fcfs or priority)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoordinatorError {
    #[error("commitment {cid} belongs to {got}, not {expected}")]
    WrongAccount {
        cid: CommitmentId,
        expected: AccountRef,
        got: AccountRef,
    },
    #[error("commitment {0} was already admitted")]
    AlreadyAdmitted(CommitmentId),
    #[error("commitment {0} is not active")]
    NotActive(CommitmentId),
    #[error("waiting queue is empty")]
    EmptyQueue,
    #[error("commitment {0} is unknown to the store")]
    Unknown(CommitmentId),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Lookup of live commitments by id.
pub trait CommitmentStore {
    fn get_mut(&mut self, cid: CommitmentId) -> Option<&mut Commitment>;
}

impl CommitmentStore for BTreeMap<CommitmentId, Commitment> {
    fn get_mut(&mut self, cid: CommitmentId) -> Option<&mut Commitment> {
        BTreeMap::get_mut(self, &cid)
    }
}

/// Dense store where a commitment's id equals its index.
impl CommitmentStore for Vec<Commitment> {
    fn get_mut(&mut self, cid: CommitmentId) -> Option<&mut Commitment> {
        let c = self.as_mut_slice().get_mut(usize::try_from(cid.0).ok()?)?;
        (c.cid == cid).then_some(c)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationCounts {
    pub friend: u64,
    pub family: u64,
    pub strange: u64,
}

impl RelationCounts {
    pub fn record(&mut self, rel: Relation) {
        match rel {
            Relation::Friend => self.friend += 1,
            Relation::Family => self.family += 1,
            Relation::Strange => self.strange += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.friend + self.family + self.strange
    }

    pub fn merge(&mut self, other: &RelationCounts) {
        self.friend += other.friend;
        self.family += other.family;
        self.strange += other.strange;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    RunNow,
    Enqueued,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissionDecision {
    pub decision: Decision,
    pub relation_seen: Option<Relation>,
}

/// How an active commitment ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Fulfilled,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct QueueKey {
    rank: Reverse<Priority>,
    created_at: Tick,
    cid: CommitmentId,
}

#[derive(Debug, Clone)]
pub struct AccountCoordinator {
    account: AccountRef,
    policy: Policy,
    active: BTreeMap<CommitmentId, AccessClass>,
    waiting: BTreeMap<QueueKey, AccessClass>,
    admitted: BTreeSet<CommitmentId>,
    counts: RelationCounts,
}

impl AccountCoordinator {
    pub fn new(account: AccountRef, policy: Policy) -> Self {
        Self {
            account,
            policy,
            active: BTreeMap::new(),
            waiting: BTreeMap::new(),
            admitted: BTreeSet::new(),
            counts: RelationCounts::default(),
        }
    }

    pub fn account(&self) -> &AccountRef {
        &self.account
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn counts(&self) -> RelationCounts {
        self.counts
    }

    pub fn active(&self) -> impl Iterator<Item = (CommitmentId, AccessClass)> + '_ {
        self.active.iter().map(|(c, a)| (*c, *a))
    }

    pub fn waiting(&self) -> impl Iterator<Item = CommitmentId> + '_ {
        self.waiting.keys().map(|k| k.cid)
    }

    pub fn active_len(&self) -> usize {
        self.active.len()
    }

    pub fn waiting_len(&self) -> usize {
        self.waiting.len()
    }

    pub fn admitted_len(&self) -> usize {
        self.admitted.len()
    }

    fn key_for(&self, c: &Commitment) -> QueueKey {
        let rank = match self.policy {
            Policy::Fcfs => 0,
            Policy::Priority => c.priority,
        };
        QueueKey {
            rank: Reverse(rank),
            created_at: c.created_at(),
            cid: c.cid,
        }
    }

    /// Activates `c` immediately if it is a friend of every active
    /// commitment, and queues it otherwise.
    pub fn admit(
        &mut self,
        c: &mut Commitment,
        class: AccessClass,
        now: Tick,
        log: &mut ExecutionLog,
    ) -> Result<AdmissionDecision, CoordinatorError> {
        if c.account != self.account {
            return Err(CoordinatorError::WrongAccount {
                cid: c.cid,
                expected: self.account.clone(),
                got: c.account.clone(),
            });
        }
        if c.state() != LifecycleState::Created || self.admitted.contains(&c.cid) {
            return Err(CoordinatorError::AlreadyAdmitted(c.cid));
        }

        let mut relation_seen = None;
        for other in self.active.values() {
            let rel = classify_relation(class, *other);
            self.counts.record(rel);
            relation_seen = match relation_seen {
                Some(seen) if !may_run_concurrently(seen) => Some(seen),
                _ => Some(rel),
            };
        }
        let run_now = relation_seen.is_none_or(may_run_concurrently);

        let (target, decision) = if run_now {
            (LifecycleState::Active, Decision::RunNow)
        } else {
            (LifecycleState::Waiting, Decision::Enqueued)
        };
        c.transition(target, now, class, log)?.relation = relation_seen;
        self.admitted.insert(c.cid);
        if run_now {
            self.active.insert(c.cid, class);
        } else {
            self.waiting.insert(self.key_for(c), class);
        }
        Ok(AdmissionDecision {
            decision,
            relation_seen,
        })
    }

    /// Picks the commitments to signal next, without dequeuing them.
    pub fn select_next(&self) -> Result<Vec<CommitmentId>, CoordinatorError> {
        let (head, head_class) = self.waiting.iter().next().ok_or(CoordinatorError::EmptyQueue)?;
        if *head_class == AccessClass::Writer {
            return Ok(vec![head.cid]);
        }
        let batch = match self.policy {
            Policy::Fcfs => self
                .waiting
                .iter()
                .take_while(|(_, class)| **class == AccessClass::Reader)
                .map(|(k, _)| k.cid)
                .collect(),
            // Equal ranks are contiguous in key order.
            Policy::Priority => self
                .waiting
                .iter()
                .take_while(|(k, _)| k.rank == head.rank)
                .filter(|(_, class)| **class == AccessClass::Reader)
                .map(|(k, _)| k.cid)
                .collect(),
        };
        Ok(batch)
    }

    /// Deactivates `cid`; if the account drains, signals and activates the
    /// next batch and returns it.
    pub fn complete<S: CommitmentStore + ?Sized>(
        &mut self,
        cid: CommitmentId,
        now: Tick,
        outcome: Outcome,
        store: &mut S,
        log: &mut ExecutionLog,
    ) -> Result<Vec<CommitmentId>, CoordinatorError> {
        let class = *self.active.get(&cid).ok_or(CoordinatorError::NotActive(cid))?;
        let c = store.get_mut(cid).ok_or(CoordinatorError::Unknown(cid))?;
        if c.state() != LifecycleState::Active {
            return Err(CoordinatorError::NotActive(cid));
        }
        c.transition(LifecycleState::Deactivated, now, class, log)?.failed = outcome == Outcome::Failed;
        self.active.remove(&cid);

        if !self.active.is_empty() || self.waiting.is_empty() {
            return Ok(Vec::new());
        }
        let batch = self.select_next()?;
        let keys: Vec<QueueKey> = self
            .waiting
            .keys()
            .filter(|k| batch.contains(&k.cid))
            .copied()
            .collect();
        for key in keys {
            let class = self.waiting.remove(&key).expect("selected from queue");
            let c = store.get_mut(key.cid).ok_or(CoordinatorError::Unknown(key.cid))?;
            c.transition(LifecycleState::Signaled, now, class, log)?;
            c.transition(LifecycleState::Active, now, class, log)?;
            self.active.insert(key.cid, class);
        }
        Ok(batch)
    }

    /// Writer exclusivity over the active set.
    pub fn is_exclusive(&self) -> bool {
        let writers = self.active.values().filter(|c| **c == AccessClass::Writer).count();
        writers == 0 || self.active.len() == 1
    }
}
