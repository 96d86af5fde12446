//! Report emission: a human table plus machine-readable comma-separated
//! rows with a fixed, versioned column order. A written report file is
//! itself a valid config whose replay reproduces the metrics.

use hmdsim::engine::SimResult;

pub const REPORT_VERSION: u32 = 1;

pub const REPORT_COLUMNS: &[&str] = &[
    "report_version",
    "label",
    "policy",
    "seed",
    "local_alloc_frac",
    "phi",
    "completion_s",
    "promotions",
    "demotions",
    "migration_bytes",
    "remote_access_bytes",
    "local_access_count",
    "remote_access_count",
    "peak_local_bytes",
    "peak_remote_bytes",
    "fault_count",
    "runtime_degradation",
    "promotion_rate_per_s",
    "normalized_traffic",
];

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub label: String,
    pub policy: String,
    pub seed: u64,
    pub local_alloc_frac: f64,
    pub phi: f64,
    pub completion_s: f64,
    pub promotions: u64,
    pub demotions: u64,
    pub migration_bytes: u64,
    pub remote_access_bytes: u64,
    pub local_access_count: u64,
    pub remote_access_count: u64,
    pub peak_local_bytes: u64,
    pub peak_remote_bytes: u64,
    pub fault_count: u64,
    pub runtime_degradation: f64,
    pub promotion_rate_per_s: f64,
    pub normalized_traffic: f64,
}

impl ReportRow {
    /// Derives the report row from a simulation result plus its two
    /// reference runs: the 100%-local completion (degradation denominator)
    /// and the all-remote traffic (normalization denominator).
    pub fn new(
        label: &str,
        result: &SimResult,
        seed: u64,
        local_alloc_frac: f64,
        phi: f64,
        baseline_completion_s: f64,
        all_remote_traffic_bytes: u64,
    ) -> Self {
        let completion_s = result.completion_s();
        Self {
            label: label.to_string(),
            policy: result.policy.clone(),
            seed,
            local_alloc_frac,
            phi,
            completion_s,
            promotions: result.promotions,
            demotions: result.demotions,
            migration_bytes: result.migration_bytes,
            remote_access_bytes: result.remote_access_bytes,
            local_access_count: result.local_access_count,
            remote_access_count: result.remote_access_count,
            peak_local_bytes: result.peak_local_used,
            peak_remote_bytes: result.peak_remote_used,
            fault_count: result.fault_count,
            runtime_degradation: if baseline_completion_s > 0.0 {
                completion_s / baseline_completion_s
            } else {
                0.0
            },
            promotion_rate_per_s: if completion_s > 0.0 {
                result.promotions as f64 / completion_s
            } else {
                0.0
            },
            normalized_traffic: if all_remote_traffic_bytes > 0 {
                result.network_traffic_bytes() as f64 / all_remote_traffic_bytes as f64
            } else {
                0.0
            },
        }
    }

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            REPORT_VERSION,
            self.label,
            self.policy,
            self.seed,
            self.local_alloc_frac,
            self.phi,
            self.completion_s,
            self.promotions,
            self.demotions,
            self.migration_bytes,
            self.remote_access_bytes,
            self.local_access_count,
            self.remote_access_count,
            self.peak_local_bytes,
            self.peak_remote_bytes,
            self.fault_count,
            self.runtime_degradation,
            self.promotion_rate_per_s,
            self.normalized_traffic,
        )
    }
}

pub fn csv_header() -> String {
    REPORT_COLUMNS.join(",")
}

/// Fixed-width table for terminals; the CSV rows stay the machine surface.
pub fn human_table(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14} {:<9} {:>12} {:>11} {:>11} {:>10} {:>12} {:>11} {:>10}\n",
        "label",
        "policy",
        "completion_s",
        "degradation",
        "promotions",
        "demotions",
        "migration_B",
        "faults",
        "traffic"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<14} {:<9} {:>12.6} {:>11.4} {:>11} {:>10} {:>12} {:>11} {:>10.4}\n",
            r.label,
            r.policy,
            r.completion_s,
            r.runtime_degradation,
            r.promotions,
            r.demotions,
            r.migration_bytes,
            r.fault_count,
            r.normalized_traffic
        ));
    }
    out
}

/// A replayable report: the full config echo as plain key=value lines, the
/// results appended as comments.
pub fn report_file(echo_block: &str, rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# hmdsim report v{REPORT_VERSION}\n"));
    out.push_str(echo_block);
    out.push_str(&format!("# columns: {}\n", csv_header()));
    for row in rows {
        out.push_str(&format!("# result: {}\n", row.csv()));
    }
    out
}
