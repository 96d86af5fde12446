//! Trace-driven simulator and policy laboratory for page migration in
//! memory-disaggregation systems: a contention-aware link model, hint-fault
//! page telemetry with burst-duration coalescing, pluggable promotion
//! policies (static, EWMA, network-adaptive, bandit-set thresholds), a
//! contextual bandit trained against cached episode rewards, and a
//! clairvoyant matching planner as the performance bound.

pub mod bandit;
pub mod cost;
pub mod engine;
pub mod error;
pub mod link;
pub mod mem;
pub mod oracle;
pub mod policy;
pub mod telemetry;
pub mod workload;

pub use engine::{run, run_multi, sweep, SimConfig, SimPolicy, SimResult, TenantConfig};
pub use error::{Error, Result};
pub use mem::{InitialPlacement, Location, MemoryState, PageId, PageRecord};
pub use policy::{Decision, PolicyKind};
pub use telemetry::{FaultReport, TelemetryConfig};
pub use workload::Trace;
