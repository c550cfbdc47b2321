//! Responsibilities, commitment instances and their lifecycle.
//!
//! A commitment is a pledge `C_Resp(debtor, creditor, content[condition])`
//! made by a social web service under one of seven responsibilities. Every
//! responsibility is either a reader (it never mutates account state) or a
//! writer; that split is what the coordinator schedules on.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::log::{ExecutionLog, LogRecord};

/// Simulation time in integer ticks.
pub type Tick = u64;

/// Larger value wins.
pub type Priority = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("illegal lifecycle transition {from} -> {to} for commitment {cid}")]
    IllegalTransition {
        cid: CommitmentId,
        from: LifecycleState,
        to: LifecycleState,
    },
    #[error("{responsibility} template mismatch: {reason}")]
    TemplateMismatch {
        responsibility: ResponsibilityId,
        reason: String,
    },
    #[error("debtor {0} is not registered on the network")]
    UnregisteredDebtor(String),
    #[error("unknown responsibility `{0}`")]
    UnknownResponsibility(String),
    #[error("unknown access class `{0}`")]
    UnknownAccessClass(String),
    #[error("malformed account reference `{0}` (expected network/account)")]
    MalformedAccount(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ResponsibilityId {
    Resp1,
    Resp2,
    Resp3,
    Resp4,
    Resp5,
    Resp6,
    Resp7,
}

impl ResponsibilityId {
    pub const ALL: [ResponsibilityId; 7] = [
        ResponsibilityId::Resp1,
        ResponsibilityId::Resp2,
        ResponsibilityId::Resp3,
        ResponsibilityId::Resp4,
        ResponsibilityId::Resp5,
        ResponsibilityId::Resp6,
        ResponsibilityId::Resp7,
    ];

    /// The 1-based responsibility number.
    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.get(usize::from(n).checked_sub(1)?).copied()
    }
}

impl fmt::Display for ResponsibilityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Resp{}", self.number())
    }
}

impl FromStr for ResponsibilityId {
    type Err = ModelError;

    /// Accepts `Resp3`, `resp3`, `C_Resp3` or a bare `3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let digits = lower
            .strip_prefix("c_")
            .unwrap_or(&lower)
            .trim_start_matches("resp");
        digits
            .parse::<u8>()
            .ok()
            .and_then(Self::from_number)
            .ok_or_else(|| ModelError::UnknownResponsibility(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AccessClass {
    /// Leaves network and database state untouched.
    Reader,
    /// Changes network or database state.
    Writer,
}

impl fmt::Display for AccessClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AccessClass::Reader => f.write_str("Reader"),
            AccessClass::Writer => f.write_str("Writer"),
        }
    }
}

impl FromStr for AccessClass {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "reader" | "r" => Ok(AccessClass::Reader),
            "writer" | "w" => Ok(AccessClass::Writer),
            _ => Err(ModelError::UnknownAccessClass(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    Permission,
    Obligation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    SocialWebService,
    NetworkAuthority,
    NonMember,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId {
    pub name: String,
    pub kind: AgentKind,
}

impl AgentId {
    pub fn service(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AgentKind::SocialWebService,
        }
    }

    pub fn authority(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AgentKind::NetworkAuthority,
        }
    }

    pub fn non_member(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AgentKind::NonMember,
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// A named condition predicate such as `valid(p_video)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Condition {
    pub fn new(predicate: impl Into<String>, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            predicate: predicate.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.predicate, self.args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentContent {
    /// The detail, information or activity the commitment is about.
    pub detail: String,
    pub owner: AgentId,
    pub purpose: String,
    pub condition: Option<Condition>,
    /// Non-members a detail may be revealed to.
    pub audience: Option<BTreeSet<AgentId>>,
}

impl CommitmentContent {
    pub fn new(detail: impl Into<String>, owner: AgentId, purpose: impl Into<String>) -> Self {
        Self {
            detail: detail.into(),
            owner,
            purpose: purpose.into(),
            condition: None,
            audience: None,
        }
    }

    pub fn with_condition(mut self, condition: Condition) -> Self {
        self.condition = Some(condition);
        self
    }
}

/// A `(network, account)` pair; the unit of conflict.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct AccountRef {
    pub network: String,
    pub account: String,
}

impl AccountRef {
    pub fn new(network: impl Into<String>, account: impl Into<String>) -> Self {
        Self {
            network: network.into(),
            account: account.into(),
        }
    }
}

impl fmt::Display for AccountRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.network, self.account)
    }
}

impl FromStr for AccountRef {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('/') {
            Some((net, acct)) if !net.is_empty() && !acct.is_empty() => Ok(Self::new(net, acct)),
            _ => Err(ModelError::MalformedAccount(s.to_string())),
        }
    }
}

impl From<AccountRef> for String {
    fn from(a: AccountRef) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for AccountRef {
    type Error = ModelError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommitmentId(pub u64);

impl fmt::Display for CommitmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LifecycleState {
    Created,
    Waiting,
    Active,
    Signaled,
    Deactivated,
}

impl LifecycleState {
    pub const ALL: [LifecycleState; 5] = [
        LifecycleState::Created,
        LifecycleState::Waiting,
        LifecycleState::Active,
        LifecycleState::Signaled,
        LifecycleState::Deactivated,
    ];

    pub fn can_transition_to(self, target: LifecycleState) -> bool {
        use LifecycleState::*;
        matches!(
            (self, target),
            (Created, Active)
                | (Created, Waiting)
                | (Waiting, Signaled)
                | (Signaled, Active)
                | (Active, Deactivated)
        )
    }
}

impl fmt::Display for LifecycleState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LifecycleState::Created => "Created",
            LifecycleState::Waiting => "Waiting",
            LifecycleState::Active => "Active",
            LifecycleState::Signaled => "Signaled",
            LifecycleState::Deactivated => "Deactivated",
        };
        f.write_str(s)
    }
}

/// Maps every responsibility to its access class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationTable([AccessClass; 7]);

impl Default for ClassificationTable {
    fn default() -> Self {
        use AccessClass::*;
        // Resp1..Resp7
        Self([Reader, Writer, Reader, Reader, Reader, Writer, Writer])
    }
}

impl ClassificationTable {
    pub fn access_class(&self, r: ResponsibilityId) -> AccessClass {
        self.0[r.index()]
    }

    pub fn set(&mut self, r: ResponsibilityId, class: AccessClass) {
        self.0[r.index()] = class;
    }

    pub fn with_overrides<'a>(
        mut self,
        overrides: impl IntoIterator<Item = (&'a ResponsibilityId, &'a AccessClass)>,
    ) -> Self {
        for (r, c) in overrides {
            self.set(*r, *c);
        }
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (ResponsibilityId, AccessClass)> + '_ {
        ResponsibilityId::ALL.iter().map(move |r| (*r, self.access_class(*r)))
    }
}

/// Free-function form of [`ClassificationTable::access_class`].
pub fn access_class(table: &ClassificationTable, r: ResponsibilityId) -> AccessClass {
    table.access_class(r)
}

/// Static shape of a responsibility's commitment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Template {
    pub action_name: &'static str,
    pub modality: Modality,
    pub creditor_kind: AgentKind,
    /// Expected predicate name when the commitment is conditional.
    pub condition: Option<&'static str>,
}

impl ResponsibilityId {
    pub fn template(self) -> Template {
        use AgentKind::*;
        use Modality::*;
        let (action_name, modality, creditor_kind, condition) = match self {
            ResponsibilityId::Resp1 => ("Collect", Permission, SocialWebService, Some("valid")),
            ResponsibilityId::Resp2 => ("Post", Obligation, NetworkAuthority, None),
            ResponsibilityId::Resp3 => ("not-Tamper", Obligation, SocialWebService, None),
            ResponsibilityId::Resp4 => ("Sign-off", Permission, NetworkAuthority, Some("status")),
            ResponsibilityId::Resp5 => ("not-Reveal", Obligation, NetworkAuthority, Some("collection")),
            ResponsibilityId::Resp6 => ("Share", Permission, SocialWebService, Some("valid")),
            // No creditor is written for PostActivity; the network authority stands in.
            ResponsibilityId::Resp7 => ("PostActivity", Obligation, NetworkAuthority, Some("valid")),
        };
        Template {
            action_name,
            modality,
            creditor_kind,
            condition,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Responsibility {
    pub id: ResponsibilityId,
    pub action_name: String,
    pub modality: Modality,
    pub has_condition: bool,
    pub access: AccessClass,
}

impl Responsibility {
    pub fn resolve(id: ResponsibilityId, table: &ClassificationTable) -> Self {
        let t = id.template();
        Self {
            id,
            action_name: t.action_name.to_string(),
            modality: t.modality,
            has_condition: t.condition.is_some(),
            access: table.access_class(id),
        }
    }
}

/// Everything needed to create a commitment except its identity and clock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitmentDraft {
    pub responsibility: ResponsibilityId,
    pub debtor: AgentId,
    pub creditor: AgentId,
    pub content: CommitmentContent,
    pub account: AccountRef,
    pub priority: Priority,
}

impl CommitmentDraft {
    /// Checks the draft against its responsibility template.
    pub fn validate(&self) -> Result<(), ModelError> {
        let r = self.responsibility;
        let t = r.template();
        let mismatch = |reason: String| ModelError::TemplateMismatch {
            responsibility: r,
            reason,
        };
        if self.debtor.kind != AgentKind::SocialWebService {
            return Err(mismatch(format!("debtor {} is not a social web service", self.debtor)));
        }
        if self.creditor.kind != t.creditor_kind {
            return Err(mismatch(format!(
                "creditor {} is {:?}, expected {:?}",
                self.creditor, self.creditor.kind, t.creditor_kind
            )));
        }
        match (t.condition, &self.content.condition) {
            (None, None) => {}
            (None, Some(c)) => return Err(mismatch(format!("unexpected condition {c}"))),
            (Some(p), None) => return Err(mismatch(format!("missing {p}(..) condition"))),
            (Some(p), Some(c)) => {
                if c.predicate != p || c.args.len() != 1 {
                    return Err(mismatch(format!("condition {c} does not match {p}(_)")));
                }
            }
        }
        if let Some(audience) = &self.content.audience {
            if let Some(a) = audience.iter().find(|a| a.kind != AgentKind::NonMember) {
                return Err(mismatch(format!("audience member {a} is not a non-member")));
            }
        }
        Ok(())
    }

    /// Creates a commitment in the `Created` state.
    pub fn instantiate(
        self,
        cid: CommitmentId,
        now: Tick,
        registered: &BTreeSet<AgentId>,
    ) -> Result<Commitment, ModelError> {
        if !registered.contains(&self.debtor) {
            return Err(ModelError::UnregisteredDebtor(self.debtor.name.clone()));
        }
        self.validate()?;
        Ok(Commitment {
            cid,
            responsibility: self.responsibility,
            debtor: self.debtor,
            creditor: self.creditor,
            content: self.content,
            account: self.account,
            created_at: now,
            priority: self.priority,
            state: LifecycleState::Created,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commitment {
    pub cid: CommitmentId,
    pub responsibility: ResponsibilityId,
    pub debtor: AgentId,
    pub creditor: AgentId,
    pub content: CommitmentContent,
    pub account: AccountRef,
    created_at: Tick,
    pub priority: Priority,
    state: LifecycleState,
}

impl Commitment {
    pub fn created_at(&self) -> Tick {
        self.created_at
    }

    pub fn state(&self) -> LifecycleState {
        self.state
    }

    /// Moves to `target`, appending exactly one record to `log`.
    ///
    /// The returned record can be annotated (relation, failure) by the caller.
    pub fn transition<'a>(
        &mut self,
        target: LifecycleState,
        now: Tick,
        access: AccessClass,
        log: &'a mut ExecutionLog,
    ) -> Result<&'a mut LogRecord, ModelError> {
        if !self.state.can_transition_to(target) {
            return Err(ModelError::IllegalTransition {
                cid: self.cid,
                from: self.state,
                to: target,
            });
        }
        let old = self.state;
        self.state = target;
        Ok(log.push(LogRecord {
            tick: now,
            cid: self.cid,
            responsibility: self.responsibility,
            action: self.responsibility.template().action_name.to_string(),
            access,
            old_state: old,
            new_state: target,
            account: self.account.clone(),
            relation: None,
            failed: false,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn registered(names: &[&str]) -> BTreeSet<AgentId> {
        names.iter().map(|n| AgentId::service(*n)).collect()
    }

    fn fb_alice() -> AccountRef {
        AccountRef::new("facebook", "alice")
    }

    #[test]
    fn default_table_classes() {
        let t = ClassificationTable::default();
        assert_eq!(access_class(&t, ResponsibilityId::Resp1), AccessClass::Reader);
        assert_eq!(access_class(&t, ResponsibilityId::Resp2), AccessClass::Writer);
        assert_eq!(access_class(&t, ResponsibilityId::Resp7), AccessClass::Writer);
        let readers: Vec<_> = t
            .iter()
            .filter(|(_, c)| *c == AccessClass::Reader)
            .map(|(r, _)| r.number())
            .collect();
        assert_eq!(readers, vec![1, 3, 4, 5]);
    }

    #[test]
    fn override_flows_through() {
        let t = ClassificationTable::default()
            .with_overrides([(&ResponsibilityId::Resp1, &AccessClass::Writer)]);
        assert_eq!(t.access_class(ResponsibilityId::Resp1), AccessClass::Writer);
        assert_eq!(Responsibility::resolve(ResponsibilityId::Resp1, &t).access, AccessClass::Writer);
    }

    #[test]
    fn responsibility_templates_match_formulas() {
        let t = ClassificationTable::default();
        let r1 = Responsibility::resolve(ResponsibilityId::Resp1, &t);
        assert_eq!((r1.action_name.as_str(), r1.modality), ("Collect", Modality::Permission));
        assert!(r1.has_condition);
        let r2 = Responsibility::resolve(ResponsibilityId::Resp2, &t);
        assert_eq!((r2.action_name.as_str(), r2.modality), ("Post", Modality::Obligation));
        assert!(!r2.has_condition);
        let r7 = Responsibility::resolve(ResponsibilityId::Resp7, &t);
        assert_eq!((r7.action_name.as_str(), r7.modality), ("PostActivity", Modality::Obligation));
    }

    #[test]
    fn parse_responsibility_ids() {
        assert_eq!("Resp3".parse::<ResponsibilityId>().unwrap(), ResponsibilityId::Resp3);
        assert_eq!("C_Resp6".parse::<ResponsibilityId>().unwrap(), ResponsibilityId::Resp6);
        assert_eq!("7".parse::<ResponsibilityId>().unwrap(), ResponsibilityId::Resp7);
        assert!("Resp0".parse::<ResponsibilityId>().is_err());
        assert!("Resp8".parse::<ResponsibilityId>().is_err());
    }

    fn post_draft(creditor: AgentId) -> CommitmentDraft {
        CommitmentDraft {
            responsibility: ResponsibilityId::Resp2,
            debtor: AgentId::service("sws_youtube"),
            creditor,
            content: CommitmentContent::new("d_self", AgentId::service("sws_youtube"), "share"),
            account: fb_alice(),
            priority: 0,
        }
    }

    #[test]
    fn instantiate_post_to_authority() {
        let c = post_draft(AgentId::authority("sn_auth_facebook"))
            .instantiate(CommitmentId(0), 7, &registered(&["sws_youtube"]))
            .unwrap();
        assert_eq!(c.state(), LifecycleState::Created);
        assert_eq!(c.created_at(), 7);
    }

    #[test]
    fn post_to_service_is_template_mismatch() {
        let err = post_draft(AgentId::service("sws_other"))
            .instantiate(CommitmentId(0), 7, &registered(&["sws_youtube"]))
            .unwrap_err();
        assert!(matches!(err, ModelError::TemplateMismatch { responsibility: ResponsibilityId::Resp2, .. }));
    }

    #[test]
    fn unregistered_debtor_rejected() {
        let err = post_draft(AgentId::authority("sn_auth_facebook"))
            .instantiate(CommitmentId(0), 7, &BTreeSet::new())
            .unwrap_err();
        assert_eq!(err, ModelError::UnregisteredDebtor("sws_youtube".into()));
    }

    #[test]
    fn collect_carries_valid_condition() {
        let draft = CommitmentDraft {
            responsibility: ResponsibilityId::Resp1,
            debtor: AgentId::service("sws_linkedin"),
            creditor: AgentId::service("sws_facebook"),
            content: CommitmentContent::new("d", AgentId::service("sws_facebook"), "p_d")
                .with_condition(Condition::new("valid", ["p_d"])),
            account: fb_alice(),
            priority: 0,
        };
        let c = draft
            .clone()
            .instantiate(CommitmentId(1), 5, &registered(&["sws_linkedin"]))
            .unwrap();
        assert_eq!(c.content.condition.as_ref().unwrap().to_string(), "valid(p_d)");

        let mut bare = draft.clone();
        bare.content.condition = None;
        assert!(bare.validate().is_err());
        let mut arity = draft;
        arity.content.condition = Some(Condition::new("valid", ["a", "b"]));
        assert!(arity.validate().is_err());
    }

    #[test]
    fn audience_must_be_non_members() {
        let mut draft = CommitmentDraft {
            responsibility: ResponsibilityId::Resp5,
            debtor: AgentId::service("sws_a"),
            creditor: AgentId::authority("sn_auth"),
            content: CommitmentContent::new("d_public", AgentId::service("sws_b"), "p")
                .with_condition(Condition::new("collection", ["d_public"])),
            account: fb_alice(),
            priority: 0,
        };
        draft.content.audience = Some([AgentId::non_member("nm")].into_iter().collect());
        assert!(draft.validate().is_ok());
        draft.content.audience = Some([AgentId::service("sws_c")].into_iter().collect());
        assert!(draft.validate().is_err());
    }

    fn created(cid: u64) -> Commitment {
        post_draft(AgentId::authority("sn_auth_facebook"))
            .instantiate(CommitmentId(cid), 0, &registered(&["sws_youtube"]))
            .unwrap()
    }

    #[test]
    fn transition_examples() {
        let mut log = ExecutionLog::default();
        let mut c = created(0);
        c.transition(LifecycleState::Active, 1, AccessClass::Writer, &mut log).unwrap();
        c.transition(LifecycleState::Deactivated, 3, AccessClass::Writer, &mut log).unwrap();
        assert_eq!(log.len(), 2);

        let mut w = created(1);
        w.transition(LifecycleState::Waiting, 1, AccessClass::Writer, &mut log).unwrap();
        let err = w
            .transition(LifecycleState::Active, 2, AccessClass::Writer, &mut log)
            .unwrap_err();
        assert_eq!(
            err,
            ModelError::IllegalTransition {
                cid: CommitmentId(1),
                from: LifecycleState::Waiting,
                to: LifecycleState::Active
            }
        );
        assert_eq!(log.len(), 3, "rejected transitions append nothing");
    }

    fn path_is_legal(path: &[LifecycleState]) -> bool {
        let mut cur = LifecycleState::Created;
        for s in path {
            if !cur.can_transition_to(*s) {
                return false;
            }
            cur = *s;
        }
        true
    }

    proptest! {
        #[test]
        fn transition_sequences_follow_automaton(path in prop::collection::vec(0usize..5, 0..8)) {
            let path: Vec<_> = path.into_iter().map(|i| LifecycleState::ALL[i]).collect();
            let mut log = ExecutionLog::default();
            let mut c = created(9);
            let accepted = path
                .iter()
                .enumerate()
                .all(|(i, s)| c.transition(*s, i as Tick, AccessClass::Writer, &mut log).is_ok());
            prop_assert_eq!(accepted, path_is_legal(&path));
        }

        #[test]
        fn instantiation_is_pure_modulo_cid(a in 0u64..1000, b in 0u64..1000, now in 0u64..1000) {
            let reg = registered(&["sws_youtube"]);
            let draft = post_draft(AgentId::authority("sn_auth_facebook"));
            let mut x = draft.clone().instantiate(CommitmentId(a), now, &reg).unwrap();
            let y = draft.instantiate(CommitmentId(b), now, &reg).unwrap();
            x.cid = y.cid;
            prop_assert_eq!(x, y);
        }
    }
}
