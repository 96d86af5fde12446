//! Shared memory-interconnect model: base latencies, serialization delay,
//! background contention, and cumulative traffic counters.

use crate::error::{Error, Result};

/// The link between the local node and the remote memory pool.
///
/// Contention is modeled as a stationary fraction of capacity consumed by
/// background traffic; the engine may reschedule it mid-run.
#[derive(Debug, Clone)]
pub struct LinkModel {
    /// Link capacity in bytes/second. Default 12.5e9 (100 Gb/s).
    pub capacity_bps: f64,
    /// Fraction of capacity consumed by background traffic, in [0, 1).
    background_fraction: f64,
    /// Local DRAM access latency, ns.
    pub local_latency_ns: f64,
    /// Remote pool base access latency, ns.
    pub remote_base_latency_ns: f64,
    /// Cache line size in bytes, serialized per remote access.
    pub cacheline_bytes: u64,
    /// Cumulative bytes moved by page migration (promotions + demotions).
    pub migration_bytes: u64,
    /// Cumulative bytes moved by demand remote accesses.
    pub remote_access_bytes: u64,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self {
            capacity_bps: 12.5e9,
            background_fraction: 0.0,
            local_latency_ns: 100.0,
            remote_base_latency_ns: 900.0,
            cacheline_bytes: 64,
            migration_bytes: 0,
            remote_access_bytes: 0,
        }
    }
}

impl LinkModel {
    pub fn new(capacity_bps: f64, background_fraction: f64) -> Result<Self> {
        let mut link = Self {
            capacity_bps,
            ..Self::default()
        };
        link.set_background_fraction(background_fraction)?;
        Ok(link)
    }

    /// Bandwidth left over for this node: capacity × (1 − φ).
    pub fn effective_bandwidth(&self) -> f64 {
        self.capacity_bps * (1.0 - self.background_fraction)
    }

    pub fn background_fraction(&self) -> f64 {
        self.background_fraction
    }

    /// Updates the contention fraction; subsequent delays use the new value.
    pub fn set_background_fraction(&mut self, phi: f64) -> Result<()> {
        if !phi.is_finite() || !(0.0..1.0).contains(&phi) {
            return Err(Error::OutOfRange {
                name: "background_fraction",
                value: phi,
                range: "[0, 1)",
            });
        }
        self.background_fraction = phi;
        Ok(())
    }

    /// Latency of one demand access to the remote pool, in ns:
    /// base latency plus one cache line of serialization at the effective
    /// bandwidth. Charges the cache line to the remote-access counter.
    pub fn remote_access_delay(&mut self) -> f64 {
        self.remote_access_bytes += self.cacheline_bytes;
        self.remote_access_delay_value()
    }

    /// Same as [`remote_access_delay`](Self::remote_access_delay) without
    /// touching the counters.
    pub fn remote_access_delay_value(&self) -> f64 {
        self.remote_base_latency_ns + self.cacheline_bytes as f64 / self.effective_bandwidth() * 1e9
    }

    /// Transmission delay of one page over the link, in ns.
    pub fn page_transfer_delay(&self, page_size: u64) -> Result<f64> {
        if page_size == 0 {
            return Err(Error::ZeroPageSize);
        }
        Ok(page_size as f64 / self.effective_bandwidth() * 1e9)
    }

    /// Charges a swap (promotion + demotion share the link serially):
    /// two page transfers of delay, 2 × page_size of migration traffic.
    pub fn charge_swap(&mut self, page_size: u64) -> Result<f64> {
        let one = self.page_transfer_delay(page_size)?;
        self.migration_bytes += 2 * page_size;
        Ok(2.0 * one)
    }

    /// Charges a one-way page move (promotion into free space, or a daemon
    /// demotion): one page transfer of delay and traffic.
    pub fn charge_one_way(&mut self, page_size: u64) -> Result<f64> {
        let one = self.page_transfer_delay(page_size)?;
        self.migration_bytes += page_size;
        Ok(one)
    }
}
