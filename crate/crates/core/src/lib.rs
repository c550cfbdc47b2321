//! Consistency coordination for commitments that social web services execute
//! on shared social-network accounts.
//!
//! Commitments are classified as readers or writers. Two commitments on the
//! same account are *friends* (both readers), *family* (both writers) or
//! *strangers* (mixed); only friends may run side by side. The
//! [`coordinator`] enforces this per account, the [`engine`] drives it from a
//! deterministic virtual clock, and the [`oracle`] checks the result
//! independently.

pub mod coordinator;
pub mod engine;
pub mod golden;
pub mod log;
pub mod model;
pub mod oracle;
pub mod relation;
pub mod report;
pub mod workload;

pub use coordinator::{AccountCoordinator, AdmissionDecision, Decision, Policy};
pub use engine::{run, Action, RunOutput, SimConfig, SimEvent, Simulator};
pub use log::{ExecutionLog, LogRecord};
pub use model::{AccessClass, AccountRef, AgentId, ClassificationTable, Commitment, CommitmentId, LifecycleState, ResponsibilityId, Tick};
pub use oracle::{check_log, conflict_pressure, reference_schedule, Verdict};
pub use relation::{classify_relation, may_run_concurrently, Relation};
pub use report::{render_narrative, Metrics};
