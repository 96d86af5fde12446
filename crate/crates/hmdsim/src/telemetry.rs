//! Page telemetry: page-table poisoning, hint-fault interception, the point
//! access-rate estimator, burst-duration coalescing, and the EWMA baseline
//! estimator.

use crate::error::{Error, Result};
use crate::mem::{MemoryState, PageId};

/// How two consecutive rate measurements are judged "close" when coalescing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delta1Mode {
    /// |F_i − F_{i−1}| < delta1 × F_{i−1}. Scale-free across workloads.
    Relative,
    /// |F_i − F_{i−1}| < delta1.
    Absolute,
}

#[derive(Debug, Clone)]
pub struct TelemetryConfig {
    /// Page marking interval, simulated seconds.
    pub marking_interval_s: f64,
    /// Rate-closeness threshold for coalescing.
    pub delta1: f64,
    pub delta1_mode: Delta1Mode,
    /// Maximum mark-time gap for coalescing, simulated seconds. One missed
    /// epoch tolerated by default.
    pub delta2_s: f64,
    /// Smoothing factor of the baseline EWMA estimator, in (0, 1].
    pub ewma_alpha: f64,
}

impl Default for TelemetryConfig {
    fn default() -> Self {
        Self {
            marking_interval_s: 1.0,
            delta1: 0.2,
            delta1_mode: Delta1Mode::Relative,
            delta2_s: 2.0,
            ewma_alpha: 0.5,
        }
    }
}

impl TelemetryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.marking_interval_s.is_nan() || self.marking_interval_s <= 0.0 {
            return Err(Error::OutOfRange {
                name: "marking_interval_s",
                value: self.marking_interval_s,
                range: "(0, inf)",
            });
        }
        if self.delta2_s < self.marking_interval_s {
            return Err(Error::OutOfRange {
                name: "delta2_s",
                value: self.delta2_s,
                range: "[marking_interval, inf)",
            });
        }
        if !(self.ewma_alpha > 0.0 && self.ewma_alpha <= 1.0) {
            return Err(Error::OutOfRange {
                name: "ewma_alpha",
                value: self.ewma_alpha,
                range: "(0, 1]",
            });
        }
        Ok(())
    }
}

/// Per-page coalescing state: the size of the current measurement cluster
/// (the burst duration in marking epochs) and the previous measurement.
#[derive(Debug, Clone, Default)]
pub struct ClusterState {
    pub size: u32,
    pub prev_rate: Option<f64>,
    pub prev_mark_ns: Option<f64>,
}

/// What one hint fault tells the policy layer.
#[derive(Debug, Clone, Copy)]
pub struct FaultReport {
    pub page: PageId,
    /// Point access-rate estimate F_i, accesses/second.
    pub rate: f64,
    /// Cluster size after this measurement, in marking epochs.
    pub burst_duration: u32,
    /// EWMA estimate after this measurement, accesses/second.
    pub ewma_rate: f64,
}

/// Marks every currently unmarked page and records its mark time. A page
/// that is still marked from an earlier interval (not yet accessed) keeps
/// its old mark time; going a whole epoch without a fault is an observation
/// of rate ~0, folded into the EWMA so idle pages cool instead of holding
/// their last hot estimate forever. Returns the number of newly marked
/// pages.
pub fn mark_pages(mem: &mut MemoryState, now_ns: f64, config: &TelemetryConfig) -> usize {
    let mut marked = 0;
    for page in mem.pages_mut() {
        if !page.marked {
            page.marked = true;
            page.mark_time_ns = Some(now_ns);
            marked += 1;
        } else if let Some(ewma) = page.ewma_rate {
            page.ewma_rate = Some(ewma_update(Some(ewma), 0.0, config.ewma_alpha));
        }
    }
    marked
}

/// Point access-rate estimate from one (mark, access) pair:
/// F_i = 1 / (A_i − M_i), in accesses/second for nanosecond inputs.
pub fn point_rate(mark_ns: f64, access_ns: f64) -> Result<f64> {
    if mark_ns.is_nan() || access_ns.is_nan() || access_ns <= mark_ns {
        return Err(Error::AccessBeforeMark { mark_ns, access_ns });
    }
    Ok(1e9 / (access_ns - mark_ns))
}

/// One step of the burst-coalescing segmentation: extends the current
/// cluster when the new measurement is close in rate and near in time,
/// otherwise starts a new cluster of size 1.
pub fn coalesce_step(
    cluster: &ClusterState,
    rate: f64,
    mark_ns: f64,
    config: &TelemetryConfig,
) -> ClusterState {
    let size = match (cluster.prev_rate, cluster.prev_mark_ns) {
        (Some(prev_rate), Some(prev_mark)) => {
            let close = match config.delta1_mode {
                Delta1Mode::Relative => (rate - prev_rate).abs() < config.delta1 * prev_rate,
                Delta1Mode::Absolute => (rate - prev_rate).abs() < config.delta1,
            };
            let near = mark_ns - prev_mark <= config.delta2_s * 1e9;
            if close && near {
                cluster.size + 1
            } else {
                1
            }
        }
        _ => 1,
    };
    ClusterState {
        size,
        prev_rate: Some(rate),
        prev_mark_ns: Some(mark_ns),
    }
}

/// EWMA update: alpha × F_i + (1 − alpha) × prev. An uninitialized estimate
/// starts at F_i itself.
pub fn ewma_update(prev: Option<f64>, rate: f64, alpha: f64) -> f64 {
    match prev {
        Some(prev) => alpha * rate + (1.0 - alpha) * prev,
        None => rate,
    }
}

/// Handles a NUMA hinting fault on a marked page: records the access time,
/// unmarks the page so it faults at most once per interval, and updates the
/// point-rate, burst, and EWMA estimates.
pub fn on_hint_fault(
    mem: &mut MemoryState,
    page_id: PageId,
    now_ns: f64,
    config: &TelemetryConfig,
) -> Result<FaultReport> {
    let page = mem.page_mut(page_id)?;
    if !page.marked {
        return Err(Error::FaultOnUnmarked(page_id));
    }
    let mark_ns = page.mark_time_ns.ok_or(Error::FaultOnUnmarked(page_id))?;
    let rate = point_rate(mark_ns, now_ns)?;

    page.marked = false;
    page.access_time_ns = Some(now_ns);
    page.burst = coalesce_step(&page.burst, rate, mark_ns, config);
    page.rate = Some(rate);
    page.ewma_rate = Some(ewma_update(page.ewma_rate, rate, config.ewma_alpha));

    Ok(FaultReport {
        page: page_id,
        rate,
        burst_duration: page.burst.size,
        ewma_rate: page.ewma_rate.unwrap(),
    })
}
