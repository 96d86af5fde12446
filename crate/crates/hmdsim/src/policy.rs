//! Promotion-decision layer: no-migration, static-threshold, EWMA-threshold,
//! the network-adaptive heuristic, and the bandit-set threshold pair.

use crate::cost::CostParams;
use crate::link::LinkModel;
use crate::mem::{Location, MemoryState, PageRecord};
use crate::telemetry::FaultReport;

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    NoMigration,
    /// Promote when the point rate exceeds a fixed cutoff (TPP/Nimble-style).
    StaticThreshold {
        rate_cutoff: f64,
    },
    /// Promote when the EWMA rate exceeds a fixed cutoff (HeMem at α=0.5,
    /// MEMTIS approximated at α=0.9).
    EwmaThreshold {
        alpha: f64,
        rate_cutoff: f64,
    },
    /// Promote when the rate advantage over the demotion candidate clears
    /// the network cost at the current effective bandwidth.
    NetworkAdaptive {
        threshold: f64,
    },
    /// Promote when both burst duration and rate clear the agent-set cutoffs.
    Bandit {
        theta_burst: u32,
        theta_rate: f64,
    },
}

impl PolicyKind {
    /// Default network-adaptive threshold: the page size in bytes, which
    /// reduces the inequality to the transfer-threshold form with counts
    /// taken over one second.
    pub fn network_adaptive_default(page_size: u64) -> Self {
        PolicyKind::NetworkAdaptive {
            threshold: page_size as f64,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::NoMigration => "none",
            PolicyKind::StaticThreshold { .. } => "static",
            PolicyKind::EwmaThreshold { .. } => "ewma",
            PolicyKind::NetworkAdaptive { .. } => "adaptive",
            PolicyKind::Bandit { .. } => "bandit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Promote,
    Stay,
}

/// EWMA rate of the page next in line for demotion. The estimate is
/// deliberately stale: demotion is not on the promotion critical path.
pub fn est_demote_rate(mem: &MemoryState) -> f64 {
    mem.top_demotion_rate()
}

/// Decides whether the faulting page should move to local memory. Faults on
/// local pages never promote. A Promote is only emitted when the local node
/// can accommodate it, either under the watermark or by demoting a victim.
pub fn decide(
    policy: &PolicyKind,
    fault: &FaultReport,
    page: &PageRecord,
    link: &LinkModel,
    mem: &MemoryState,
    cost: &CostParams,
) -> Decision {
    if page.location != Location::Remote {
        return Decision::Stay;
    }

    let wants_promotion = match policy {
        PolicyKind::NoMigration => false,
        PolicyKind::StaticThreshold { rate_cutoff } => fault.rate > *rate_cutoff,
        PolicyKind::EwmaThreshold { rate_cutoff, .. } => fault.ewma_rate > *rate_cutoff,
        PolicyKind::NetworkAdaptive { threshold } => {
            let gain = fault.rate - est_demote_rate(mem);
            gain * link.effective_bandwidth() * (cost.delta_latency_ns * 1e-9) > *threshold
        }
        PolicyKind::Bandit {
            theta_burst,
            theta_rate,
        } => fault.burst_duration >= *theta_burst && fault.rate >= *theta_rate,
    };

    if wants_promotion && (mem.can_fit_promotion() || mem.local_page_count() > 0) {
        Decision::Promote
    } else {
        Decision::Stay
    }
}
