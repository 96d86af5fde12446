//! Deterministic event loop: replays traces, advances simulated time,
//! drives marking/faults/promotion/demotion, charges link costs, and
//! produces per-tenant results. Multi-tenant runs share one link and one
//! clock, interleaved round-robin per access.
//!
//! Simulated time is kept in integer picoseconds so that repeated runs are
//! byte-identical and the completion-time accounting balances exactly.

use rayon::prelude::*;

use crate::cost::CostParams;
use crate::error::{Error, Result};
use crate::link::LinkModel;
use crate::mem::{InitialPlacement, Location, MemoryState, PageId, DEFAULT_SLACK_BYTES};
use crate::oracle;
use crate::policy::{decide, Decision, PolicyKind};
use crate::telemetry::{mark_pages, on_hint_fault, TelemetryConfig};
use crate::workload::Trace;

/// How many lookahead windows the clairvoyant planner scans when pricing
/// demotion victims.
const ORACLE_HORIZON_WINDOWS: usize = 4;

pub fn ns_to_ps(ns: f64) -> u64 {
    (ns * 1e3).round() as u64
}

pub fn s_to_ps(s: f64) -> u64 {
    (s * 1e12).round() as u64
}

pub fn ps_to_s(ps: u64) -> f64 {
    ps as f64 * 1e-12
}

#[derive(Debug, Clone)]
pub struct LinkConfig {
    pub capacity_bps: f64,
    pub background_fraction: f64,
    pub local_latency_ns: f64,
    pub remote_base_latency_ns: f64,
    pub cacheline_bytes: u64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        let link = LinkModel::default();
        Self {
            capacity_bps: link.capacity_bps,
            background_fraction: 0.0,
            local_latency_ns: link.local_latency_ns,
            remote_base_latency_ns: link.remote_base_latency_ns,
            cacheline_bytes: link.cacheline_bytes,
        }
    }
}

impl LinkConfig {
    pub fn build(&self) -> Result<LinkModel> {
        let mut link = LinkModel::new(self.capacity_bps, self.background_fraction)?;
        link.local_latency_ns = self.local_latency_ns;
        link.remote_base_latency_ns = self.remote_base_latency_ns;
        link.cacheline_bytes = self.cacheline_bytes;
        Ok(link)
    }

    pub fn delta_latency_ns(&self) -> f64 {
        self.remote_base_latency_ns - self.local_latency_ns
    }
}

/// What drives promotion decisions for one tenant: a reactive policy rule,
/// or the clairvoyant matching planner.
#[derive(Debug, Clone, PartialEq)]
pub enum SimPolicy {
    Rule(PolicyKind),
    Oracle,
}

impl SimPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SimPolicy::Rule(kind) => kind.name(),
            SimPolicy::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TenantConfig {
    pub trace: Trace,
    pub policy: SimPolicy,
    pub local_alloc: u64,
    pub placement: InitialPlacement,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub telemetry: TelemetryConfig,
    pub link: LinkConfig,
    pub page_size: u64,
    pub slack_bytes: u64,
    /// Bookkeeping overhead charged per promotion, ns.
    pub bookkeeping_ns: f64,
    /// Clairvoyant planning window, seconds.
    pub oracle_lookahead_s: f64,
    /// Piecewise-constant contention: (time s, φ), sorted by time.
    pub contention_schedule: Vec<(f64, f64)>,
    pub tenants: Vec<TenantConfig>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            telemetry: TelemetryConfig::default(),
            link: LinkConfig::default(),
            page_size: 4096,
            slack_bytes: DEFAULT_SLACK_BYTES,
            bookkeeping_ns: 1000.0,
            oracle_lookahead_s: 1.0,
            contention_schedule: Vec::new(),
            tenants: Vec::new(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn cost_params(&self) -> CostParams {
        CostParams {
            page_size: self.page_size,
            delta_latency_ns: self.link.delta_latency_ns(),
            bookkeeping_ns: self.bookkeeping_ns,
            lookahead_s: self.oracle_lookahead_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.page_size == 0 {
            return Err(Error::ZeroPageSize);
        }
        if self.tenants.is_empty() {
            return Err(Error::Config("at least one tenant required".into()));
        }
        self.telemetry.validate()?;
        // An interval that rounds to zero picoseconds would pin the marking
        // loop to one instant.
        if s_to_ps(self.telemetry.marking_interval_s) == 0 {
            return Err(Error::Config(
                "marking interval is below clock resolution".into(),
            ));
        }
        if self.link.capacity_bps.is_nan() || self.link.capacity_bps <= 0.0 {
            return Err(Error::Config("link capacity must be positive".into()));
        }
        if self.link.delta_latency_ns() <= 0.0 {
            return Err(Error::Config(
                "remote latency must exceed local latency".into(),
            ));
        }
        let mut prev = f64::NEG_INFINITY;
        for &(t, phi) in &self.contention_schedule {
            if t < prev {
                return Err(Error::Config("contention schedule must be sorted".into()));
            }
            if !(0.0..1.0).contains(&phi) {
                return Err(Error::Config(format!("schedule phi {phi} outside [0,1)")));
            }
            prev = t;
        }
        for tenant in &self.tenants {
            for &id in tenant.trace.accesses() {
                if id >= tenant.trace.meta.n_pages {
                    return Err(Error::Config(format!("trace id {id} out of range")));
                }
            }
            if let SimPolicy::Rule(kind) = &tenant.policy {
                let bad_cutoff = match kind {
                    PolicyKind::StaticThreshold { rate_cutoff } => *rate_cutoff < 0.0,
                    PolicyKind::EwmaThreshold { alpha, rate_cutoff } => {
                        *rate_cutoff < 0.0 || !(*alpha > 0.0 && *alpha <= 1.0)
                    }
                    PolicyKind::NetworkAdaptive { threshold } => *threshold < 0.0,
                    PolicyKind::Bandit { theta_rate, .. } => *theta_rate < 0.0,
                    PolicyKind::NoMigration => false,
                };
                if bad_cutoff {
                    return Err(Error::Config(format!(
                        "policy {} has a negative or out-of-range parameter",
                        kind.name()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-tenant outcome of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub policy: String,
    pub completion_ps: u64,
    pub promotions: u64,
    pub demotions: u64,
    pub migration_bytes: u64,
    pub remote_access_bytes: u64,
    pub local_access_count: u64,
    pub remote_access_count: u64,
    pub peak_local_used: u64,
    pub peak_remote_used: u64,
    pub fault_count: u64,
    pub local_alloc: u64,
    pub working_set_bytes: u64,
    pub trace_len: u64,
    // Completion-time components, for the accounting identity.
    pub compute_ps: u64,
    pub access_ps: u64,
    pub transfer_ps: u64,
    pub bookkeeping_ps: u64,
}

impl SimResult {
    pub fn completion_s(&self) -> f64 {
        ps_to_s(self.completion_ps)
    }

    /// Migration plus demand traffic attributed to this tenant.
    pub fn network_traffic_bytes(&self) -> u64 {
        self.migration_bytes + self.remote_access_bytes
    }
}

struct TenantState {
    mem: MemoryState,
    policy: SimPolicy,
    telemetry: TelemetryConfig,
    trace_idx: usize,
    compute_per_access_ps: u64,
    done: bool,
    completion_ps: u64,
    compute_ps: u64,
    access_ps: u64,
    transfer_ps: u64,
    bookkeeping_ps: u64,
    promotions: u64,
    demotions: u64,
    migration_bytes: u64,
    remote_access_bytes: u64,
    local_accesses: u64,
    remote_accesses: u64,
    faults: u64,
}

struct Engine<'a> {
    config: &'a SimConfig,
    cost: CostParams,
    link: LinkModel,
    tenants: Vec<TenantState>,
    clock_ps: u64,
    next_mark_ps: u64,
    marking_interval_ps: u64,
    schedule: Vec<(u64, f64)>,
    schedule_idx: usize,
    bookkeeping_per_promotion_ps: u64,
}

impl<'a> Engine<'a> {
    fn new(config: &'a SimConfig) -> Result<Self> {
        config.validate()?;
        let link = config.link.build()?;
        let cost = config.cost_params();

        let tenants = config
            .tenants
            .iter()
            .map(|tc| {
                let mem = MemoryState::with_slack(
                    tc.trace.meta.n_pages,
                    config.page_size,
                    tc.local_alloc,
                    tc.placement,
                    config.slack_bytes,
                )?;
                // The EWMA baseline carries its own smoothing factor.
                let mut telemetry = config.telemetry.clone();
                if let SimPolicy::Rule(PolicyKind::EwmaThreshold { alpha, .. }) = &tc.policy {
                    telemetry.ewma_alpha = *alpha;
                    telemetry.validate()?;
                }
                Ok(TenantState {
                    mem,
                    policy: tc.policy.clone(),
                    telemetry,
                    trace_idx: 0,
                    compute_per_access_ps: ns_to_ps(tc.trace.meta.compute_ns_per_access),
                    done: tc.trace.is_empty(),
                    completion_ps: 0,
                    compute_ps: 0,
                    access_ps: 0,
                    transfer_ps: 0,
                    bookkeeping_ps: 0,
                    promotions: 0,
                    demotions: 0,
                    migration_bytes: 0,
                    remote_access_bytes: 0,
                    local_accesses: 0,
                    remote_accesses: 0,
                    faults: 0,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let schedule = config
            .contention_schedule
            .iter()
            .map(|&(t, phi)| (s_to_ps(t), phi))
            .collect();

        Ok(Self {
            config,
            cost,
            link,
            tenants,
            clock_ps: 0,
            next_mark_ps: 0,
            marking_interval_ps: s_to_ps(config.telemetry.marking_interval_s),
            schedule,
            schedule_idx: 0,
            bookkeeping_per_promotion_ps: ns_to_ps(config.bookkeeping_ns),
        })
    }

    fn run(mut self) -> Result<Vec<SimResult>> {
        let n = self.tenants.len();
        let mut rr = 0usize;
        while self.tenants.iter().any(|t| !t.done) {
            self.apply_due_schedule()?;
            self.apply_due_marking()?;
            // Round-robin: next live tenant processes one access.
            let mut probed = 0;
            while probed < n {
                let idx = rr % n;
                rr += 1;
                probed += 1;
                if !self.tenants[idx].done {
                    self.step_tenant(idx)?;
                    break;
                }
            }
        }

        Ok(self
            .tenants
            .iter()
            .zip(&self.config.tenants)
            .map(|(t, tc)| SimResult {
                policy: t.policy.name().to_string(),
                completion_ps: t.completion_ps,
                promotions: t.promotions,
                demotions: t.demotions,
                migration_bytes: t.migration_bytes,
                remote_access_bytes: t.remote_access_bytes,
                local_access_count: t.local_accesses,
                remote_access_count: t.remote_accesses,
                peak_local_used: t.mem.peak_local_used,
                peak_remote_used: t.mem.peak_remote_used,
                fault_count: t.faults,
                local_alloc: tc.local_alloc,
                working_set_bytes: t.mem.working_set_bytes(),
                trace_len: tc.trace.len() as u64,
                compute_ps: t.compute_ps,
                access_ps: t.access_ps,
                transfer_ps: t.transfer_ps,
                bookkeeping_ps: t.bookkeeping_ps,
            })
            .collect())
    }

    fn apply_due_schedule(&mut self) -> Result<()> {
        while self.schedule_idx < self.schedule.len()
            && self.schedule[self.schedule_idx].0 <= self.clock_ps
        {
            let phi = self.schedule[self.schedule_idx].1;
            self.link.set_background_fraction(phi)?;
            self.schedule_idx += 1;
        }
        Ok(())
    }

    fn apply_due_marking(&mut self) -> Result<()> {
        while self.clock_ps >= self.next_mark_ps {
            let now_ns = self.next_mark_ps as f64 * 1e-3;
            for tenant in self.tenants.iter_mut().filter(|t| !t.done) {
                mark_pages(&mut tenant.mem, now_ns, &tenant.telemetry);
            }
            for idx in 0..self.tenants.len() {
                if !self.tenants[idx].done && self.tenants[idx].policy == SimPolicy::Oracle {
                    self.oracle_step(idx)?;
                }
            }
            self.next_mark_ps += self.marking_interval_ps;
        }
        Ok(())
    }

    fn step_tenant(&mut self, idx: usize) -> Result<()> {
        let trace = &self.config.tenants[idx].trace;
        let page_id = trace.accesses()[self.tenants[idx].trace_idx];

        let compute = self.tenants[idx].compute_per_access_ps;
        self.clock_ps += compute;
        self.tenants[idx].compute_ps += compute;

        let location = self.tenants[idx].mem.page(page_id)?.location;
        match location {
            Location::Local => {
                let ps = ns_to_ps(self.link.local_latency_ns);
                self.clock_ps += ps;
                self.tenants[idx].access_ps += ps;
                self.tenants[idx].local_accesses += 1;
            }
            Location::Remote => {
                let ps = ns_to_ps(self.link.remote_access_delay());
                self.clock_ps += ps;
                self.tenants[idx].access_ps += ps;
                self.tenants[idx].remote_accesses += 1;
                self.tenants[idx].remote_access_bytes += self.link.cacheline_bytes;
            }
        }

        let now_ns = self.clock_ps as f64 * 1e-3;
        let mut promote_now = false;
        {
            let tenant = &mut self.tenants[idx];
            tenant.mem.record_access(page_id, now_ns)?;

            if tenant.mem.page(page_id)?.marked {
                let report = on_hint_fault(&mut tenant.mem, page_id, now_ns, &tenant.telemetry)?;
                tenant.faults += 1;

                if location == Location::Remote {
                    if let SimPolicy::Rule(kind) = &tenant.policy {
                        promote_now = decide(
                            kind,
                            &report,
                            tenant.mem.page(page_id)?,
                            &self.link,
                            &tenant.mem,
                            &self.cost,
                        ) == Decision::Promote;
                    }
                }
            }
        }
        if promote_now {
            self.promote(idx, page_id)?;
        }

        self.run_demotion_daemon(idx)?;

        let tenant = &mut self.tenants[idx];
        tenant.trace_idx += 1;
        if tenant.trace_idx == trace.len() {
            tenant.done = true;
            tenant.completion_ps = self.clock_ps;
        }
        Ok(())
    }

    /// Fault-path promotion: one-way while the watermark allows, otherwise a
    /// swap against the top demotion candidate. Transfers block the faulting
    /// tenant and advance the shared clock.
    fn promote(&mut self, idx: usize, page_id: PageId) -> Result<()> {
        let page_size = self.config.page_size;

        if self.tenants[idx].mem.can_fit_promotion() {
            let ps = ns_to_ps(self.link.charge_one_way(page_size)?);
            self.clock_ps += ps;
            let tenant = &mut self.tenants[idx];
            tenant.transfer_ps += ps;
            tenant.migration_bytes += page_size;
            tenant.mem.apply_swap(page_id, None)?;
            tenant.promotions += 1;
        } else {
            let victim = self.tenants[idx]
                .mem
                .demotion_candidates(page_size)
                .first()
                .copied();
            let Some(victim) = victim else {
                return Ok(());
            };
            let ps = ns_to_ps(self.link.charge_swap(page_size)?);
            self.clock_ps += ps;
            let tenant = &mut self.tenants[idx];
            tenant.transfer_ps += ps;
            tenant.migration_bytes += 2 * page_size;
            tenant.mem.apply_swap(page_id, Some(victim))?;
            tenant.demotions += 1;
            tenant.promotions += 1;
        }

        self.clock_ps += self.bookkeeping_per_promotion_ps;
        self.tenants[idx].bookkeeping_ps += self.bookkeeping_per_promotion_ps;
        Ok(())
    }

    /// kswapd-style demotion: when usage passes the HIGH watermark, demote
    /// LRU-tail pages until it drops below LOW.
    fn run_demotion_daemon(&mut self, idx: usize) -> Result<()> {
        let page_size = self.config.page_size;
        if self.tenants[idx].mem.local_used <= self.tenants[idx].mem.high_watermark {
            return Ok(());
        }
        while self.tenants[idx].mem.local_used >= self.tenants[idx].mem.low_watermark {
            let victim = self.tenants[idx]
                .mem
                .demotion_candidates(page_size)
                .first()
                .copied();
            let Some(victim) = victim else {
                return Ok(());
            };
            let ps = ns_to_ps(self.link.charge_one_way(page_size)?);
            self.clock_ps += ps;
            let tenant = &mut self.tenants[idx];
            tenant.transfer_ps += ps;
            tenant.migration_bytes += page_size;
            tenant.mem.demote_page(victim)?;
            tenant.demotions += 1;
        }
        Ok(())
    }

    /// One clairvoyant planning step: read true access counts over the
    /// lookahead window ahead of the trace cursor, solve the matching, and
    /// apply every planned swap.
    fn oracle_step(&mut self, idx: usize) -> Result<()> {
        let trace = &self.config.tenants[idx].trace;
        let tenant = &self.tenants[idx];
        if tenant.trace_idx >= trace.len() {
            return Ok(());
        }

        // Window length in accesses: the lookahead at the optimistic
        // all-local event pace.
        let event_ns = trace.meta.compute_ns_per_access + self.config.link.local_latency_ns;
        let window = ((self.config.oracle_lookahead_s * 1e9 / event_ns).round() as usize).max(1);
        let end = (tenant.trace_idx + window).min(trace.len());

        let mut window_counts: std::collections::BTreeMap<PageId, f64> =
            std::collections::BTreeMap::new();
        for &id in &trace.accesses()[tenant.trace_idx..end] {
            *window_counts.entry(id).or_insert(0.0) += 1.0;
        }

        // A demotion outlives the window, so victims are priced at the max
        // of their window count and their average rate over a longer
        // horizon; otherwise a page idle for one epoch but warm after it
        // gets demoted at an understated cost.
        let horizon_end = (tenant.trace_idx + ORACLE_HORIZON_WINDOWS * window).min(trace.len());
        let mut horizon_counts: std::collections::BTreeMap<PageId, f64> =
            std::collections::BTreeMap::new();
        for &id in &trace.accesses()[tenant.trace_idx..horizon_end] {
            *horizon_counts.entry(id).or_insert(0.0) += 1.0;
        }

        let local_counts: Vec<(PageId, f64)> = tenant
            .mem
            .local_pages()
            .map(|p| {
                let near = window_counts.get(&p.id).copied().unwrap_or(0.0);
                let far = horizon_counts.get(&p.id).copied().unwrap_or(0.0)
                    / ORACLE_HORIZON_WINDOWS as f64;
                (p.id, near.max(far))
            })
            .collect();
        let remote_counts: Vec<(PageId, f64)> = window_counts
            .iter()
            .filter(|&(&id, _)| {
                tenant
                    .mem
                    .page(id)
                    .map(|p| p.location == Location::Remote)
                    .unwrap_or(false)
            })
            .map(|(&id, &c)| (id, c))
            .collect();

        // Plan against the cost the engine will actually charge: a swap
        // moves two pages over the link, so the planning page size doubles.
        let mut planning_cost = self.cost.clone();
        planning_cost.page_size *= 2;
        let plan = oracle::plan_swaps(
            &local_counts,
            &remote_counts,
            &planning_cost,
            self.link.effective_bandwidth(),
        )?;

        let page_size = self.config.page_size;
        for pair in plan {
            let ps = ns_to_ps(self.link.charge_swap(page_size)?);
            self.clock_ps += ps;
            let tenant = &mut self.tenants[idx];
            tenant.transfer_ps += ps;
            tenant.migration_bytes += 2 * page_size;
            tenant.mem.apply_swap(pair.promote, Some(pair.demote))?;
            tenant.promotions += 1;
            tenant.demotions += 1;
            self.clock_ps += self.bookkeeping_per_promotion_ps;
            tenant.bookkeeping_ps += self.bookkeeping_per_promotion_ps;
        }
        Ok(())
    }
}

/// Runs a single-tenant simulation.
pub fn run(config: &SimConfig) -> Result<SimResult> {
    if config.tenants.len() != 1 {
        return Err(Error::Config(format!(
            "run() expects exactly one tenant, got {}",
            config.tenants.len()
        )));
    }
    Ok(run_multi(config)?.remove(0))
}

/// Runs a shared-link simulation with any number of tenants.
pub fn run_multi(config: &SimConfig) -> Result<Vec<SimResult>> {
    Engine::new(config)?.run()
}

/// One cell of an allocation × contention sweep.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub allocation_frac: f64,
    pub phi: f64,
    pub seed: u64,
    pub result: SimResult,
    /// Completion relative to the 100%-local run of the same workload.
    pub runtime_degradation: f64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Cartesian product of allocation fractions and contention levels over the
/// base config's single tenant. Cells run in parallel; output order is by
/// grid index (allocation-major), independent of completion order.
pub fn sweep(base: &SimConfig, allocations: &[f64], contentions: &[f64]) -> Result<Vec<SweepCell>> {
    if base.tenants.len() != 1 {
        return Err(Error::Config("sweep expects a single-tenant base".into()));
    }
    if allocations.is_empty() || contentions.is_empty() {
        return Err(Error::Config("sweep needs non-empty grids".into()));
    }

    let wss = base.tenants[0].trace.meta.n_pages * base.page_size;
    let baseline = full_local_baseline(base)?;
    let baseline_ps = baseline.completion_ps.max(1);

    let mut cells: Vec<(usize, f64, f64, u64)> = Vec::new();
    let mut seed_state = base.seed;
    for (ai, &alloc) in allocations.iter().enumerate() {
        for (ci, &phi) in contentions.iter().enumerate() {
            let seed = splitmix64(&mut seed_state);
            cells.push((ai * contentions.len() + ci, alloc, phi, seed));
        }
    }

    let mut results: Vec<(usize, SweepCell)> = cells
        .par_iter()
        .map(|&(index, alloc_frac, phi, seed)| {
            let mut config = base.clone();
            config.seed = seed;
            config.link.background_fraction = phi;
            config.tenants[0].local_alloc = (wss as f64 * alloc_frac).round() as u64;
            let result = run(&config)?;
            let degradation = result.completion_ps as f64 / baseline_ps as f64;
            Ok((
                index,
                SweepCell {
                    allocation_frac: alloc_frac,
                    phi,
                    seed,
                    result,
                    runtime_degradation: degradation,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    results.sort_by_key(|(index, _)| *index);
    Ok(results.into_iter().map(|(_, cell)| cell).collect())
}

/// The 100%-local reference run used for runtime-degradation ratios and
/// bandit reward normalization.
pub fn full_local_baseline(base: &SimConfig) -> Result<SimResult> {
    let mut config = base.clone();
    let wss = config.tenants[0].trace.meta.n_pages * config.page_size;
    config.tenants[0].local_alloc = wss;
    config.tenants[0].placement = InitialPlacement::FillLocalThenRemote;
    config.link.background_fraction = 0.0;
    config.contention_schedule.clear();
    run(&config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{gen_stationary, Trace, TraceMeta};

    fn literal_trace(n_pages: u64, accesses: Vec<PageId>, compute_ns: f64) -> Trace {
        Trace::new(
            TraceMeta {
                n_pages,
                seed: 0,
                generator: "literal".into(),
                params: String::new(),
                compute_ns_per_access: compute_ns,
            },
            accesses,
        )
        .unwrap()
    }

    fn single(config_policy: SimPolicy, trace: Trace, alloc: u64) -> SimConfig {
        SimConfig {
            tenants: vec![TenantConfig {
                trace,
                policy: config_policy,
                local_alloc: alloc,
                placement: InitialPlacement::FillLocalThenRemote,
            }],
            ..SimConfig::default()
        }
    }

    #[test]
    fn all_local_closed_form() {
        let trace = literal_trace(4, vec![0, 1, 2, 3, 0, 1, 2, 3, 0, 1], 100.0);
        let config = single(SimPolicy::Rule(PolicyKind::NoMigration), trace, 4 * 4096);
        let result = run(&config).unwrap();
        // 10 accesses × (100 ns compute + 100 ns local latency).
        assert_eq!(result.completion_ps, 10 * 200_000);
        assert_eq!(result.local_access_count, 10);
        assert_eq!(result.remote_access_count, 0);
        assert_eq!(result.migration_bytes, 0);
    }

    #[test]
    fn all_remote_closed_form() {
        let trace = literal_trace(4, vec![0, 1, 2, 3, 0, 1, 2, 3, 0, 1], 100.0);
        let mut config = single(SimPolicy::Rule(PolicyKind::NoMigration), trace, 0);
        config.tenants[0].placement = InitialPlacement::AllRemote;
        let result = run(&config).unwrap();
        // 10 × (100 + 905.12) ns = 10051.2 ns.
        assert_eq!(result.completion_ps, 10_051_200);
        assert_eq!(result.remote_access_count, 10);
        assert_eq!(
            result.fault_count, 4,
            "one hint fault per page at t=0 epoch"
        );
    }

    #[test]
    fn accounting_identity_holds_exactly() {
        let trace = gen_stationary(64, 0.2, 0.9, 5000, 5).unwrap();
        let config = single(
            SimPolicy::Rule(PolicyKind::StaticThreshold { rate_cutoff: 0.5 }),
            trace,
            16 * 4096,
        );
        let r = run(&config).unwrap();
        assert_eq!(
            r.completion_ps,
            r.compute_ps + r.access_ps + r.transfer_ps + r.bookkeeping_ps
        );
        assert_eq!(
            r.bookkeeping_ps,
            r.promotions * ns_to_ps(config.bookkeeping_ns)
        );
        assert_eq!(r.local_access_count + r.remote_access_count, 5000);
        assert!(r.peak_local_used <= r.local_alloc);
        assert!(r.promotions > 0, "hot pages should promote");
    }

    #[test]
    fn migration_beats_no_migration_on_hot_remote_pages() {
        // Hot pages start remote; marking is scaled down so the run spans
        // many epochs and promoted pages keep paying off.
        let trace = gen_stationary(64, 0.1, 0.95, 20_000, 9).unwrap();
        let mut config = single(
            SimPolicy::Rule(PolicyKind::NoMigration),
            trace.clone(),
            16 * 4096,
        );
        config.tenants[0].placement = InitialPlacement::AllRemote;
        config.telemetry.marking_interval_s = 1e-4;
        config.telemetry.delta2_s = 2e-4;
        let none = run(&config).unwrap();

        config.tenants[0].policy =
            SimPolicy::Rule(PolicyKind::StaticThreshold { rate_cutoff: 0.0 });
        let promote_all = run(&config).unwrap();
        assert!(promote_all.completion_ps < none.completion_ps);
        assert_eq!(none.migration_bytes, 0);
        assert!(promote_all.promotions > 0);
    }

    #[test]
    fn deterministic_repeat_is_byte_identical() {
        let trace = gen_stationary(64, 0.2, 0.8, 3000, 21).unwrap();
        let config = single(
            SimPolicy::Rule(PolicyKind::network_adaptive_default(4096)),
            trace,
            8 * 4096,
        );
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn symmetric_tenants_get_equal_results() {
        let trace = gen_stationary(32, 0.25, 0.9, 2000, 3).unwrap();
        let tenant = TenantConfig {
            trace,
            policy: SimPolicy::Rule(PolicyKind::StaticThreshold { rate_cutoff: 1.0 }),
            local_alloc: 8 * 4096,
            placement: InitialPlacement::FillLocalThenRemote,
        };
        let config = SimConfig {
            tenants: vec![tenant.clone(), tenant],
            ..SimConfig::default()
        };
        let results = run_multi(&config).unwrap();
        assert_eq!(results.len(), 2);
        let mut a = results[0].clone();
        let mut b = results[1].clone();
        // Completion differs by exactly one interleaving slot; mask it.
        a.completion_ps = 0;
        b.completion_ps = 0;
        assert_eq!(a, b);
    }

    #[test]
    fn single_tenant_multi_equals_run() {
        let trace = gen_stationary(32, 0.25, 0.9, 1000, 3).unwrap();
        let config = single(SimPolicy::Rule(PolicyKind::NoMigration), trace, 8 * 4096);
        let a = run(&config).unwrap();
        let b = run_multi(&config).unwrap().remove(0);
        assert_eq!(a, b);
    }

    #[test]
    fn tenant_traffic_decomposes_into_migrations_and_misses() {
        let trace_a = gen_stationary(64, 0.2, 0.9, 3000, 31).unwrap();
        let trace_b = gen_stationary(64, 0.5, 0.7, 5000, 32).unwrap();
        let mut config = SimConfig {
            tenants: vec![
                TenantConfig {
                    trace: trace_a,
                    policy: SimPolicy::Rule(PolicyKind::StaticThreshold { rate_cutoff: 1e4 }),
                    local_alloc: 16 * 4096,
                    placement: InitialPlacement::AllRemote,
                },
                TenantConfig {
                    trace: trace_b,
                    policy: SimPolicy::Rule(PolicyKind::StaticThreshold { rate_cutoff: 5e4 }),
                    local_alloc: 8 * 4096,
                    placement: InitialPlacement::FillLocalThenRemote,
                },
            ],
            ..SimConfig::default()
        };
        config.telemetry.marking_interval_s = 1e-4;
        config.telemetry.delta2_s = 2e-4;

        for r in run_multi(&config).unwrap() {
            assert_eq!(r.migration_bytes, (r.promotions + r.demotions) * 4096);
            assert_eq!(r.remote_access_bytes, r.remote_access_count * 64);
        }
    }

    #[test]
    fn bandwidth_hog_slows_the_neighbor() {
        let victim_trace = gen_stationary(32, 0.25, 0.9, 2000, 3).unwrap();
        let hog_trace = gen_stationary(256, 0.9, 0.5, 6000, 4).unwrap();
        let victim = TenantConfig {
            trace: victim_trace,
            policy: SimPolicy::Rule(PolicyKind::StaticThreshold { rate_cutoff: 1.0 }),
            local_alloc: 8 * 4096,
            placement: InitialPlacement::FillLocalThenRemote,
        };
        let hog = TenantConfig {
            trace: hog_trace,
            policy: SimPolicy::Rule(PolicyKind::StaticThreshold { rate_cutoff: 0.0 }),
            local_alloc: 8 * 4096,
            placement: InitialPlacement::AllRemote,
        };

        let alone = run(&SimConfig {
            tenants: vec![victim.clone()],
            ..SimConfig::default()
        })
        .unwrap();
        let together = run_multi(&SimConfig {
            tenants: vec![victim, hog],
            ..SimConfig::default()
        })
        .unwrap();
        assert!(together[0].completion_ps > alone.completion_ps);
    }

    #[test]
    fn contention_schedule_switches_mid_run() {
        let trace = literal_trace(2, vec![0; 1000], 100.0);
        let mut config = single(SimPolicy::Rule(PolicyKind::NoMigration), trace, 0);
        config.tenants[0].placement = InitialPlacement::AllRemote;
        let flat = run(&config).unwrap();

        config.contention_schedule = vec![(2e-7, 0.5)];
        let stepped = run(&config).unwrap();
        assert!(stepped.completion_ps > flat.completion_ps);
    }

    #[test]
    fn config_validation_rejects_bad_shapes() {
        let trace = literal_trace(2, vec![0, 1], 100.0);
        let good = single(SimPolicy::Rule(PolicyKind::NoMigration), trace, 0);
        assert!(good.validate().is_ok());

        let mut bad = good.clone();
        bad.tenants.clear();
        assert!(bad.validate().is_err());

        let mut bad = good.clone();
        bad.contention_schedule = vec![(2.0, 0.1), (1.0, 0.1)];
        assert!(bad.validate().is_err());

        let mut bad = good.clone();
        bad.contention_schedule = vec![(1.0, 1.0)];
        assert!(bad.validate().is_err());

        // Sub-picosecond marking intervals would freeze the marking clock.
        let mut bad = good.clone();
        bad.telemetry.marking_interval_s = 1e-13;
        bad.telemetry.delta2_s = 1e-13;
        assert!(bad.validate().is_err());

        let mut bad = good.clone();
        bad.link.remote_base_latency_ns = bad.link.local_latency_ns;
        assert!(bad.validate().is_err());

        let mut bad = good.clone();
        bad.tenants[0].policy =
            SimPolicy::Rule(PolicyKind::StaticThreshold { rate_cutoff: -1.0 });
        assert!(bad.validate().is_err());

        let mut bad = good;
        bad.tenants[0].policy = SimPolicy::Rule(PolicyKind::EwmaThreshold {
            alpha: 1.5,
            rate_cutoff: 1.0,
        });
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sweep_covers_the_grid_in_order() {
        let trace = gen_stationary(40, 0.25, 0.9, 800, 8).unwrap();
        let base = single(SimPolicy::Rule(PolicyKind::NoMigration), trace, 0);
        let cells = sweep(&base, &[0.1, 0.5, 0.9], &[0.0, 0.5]).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0].allocation_frac, 0.1);
        assert_eq!(cells[0].phi, 0.0);
        assert_eq!(cells[1].phi, 0.5);
        assert_eq!(cells[5].allocation_frac, 0.9);
        for cell in &cells {
            assert!(cell.runtime_degradation >= 1.0);
        }
    }

    #[test]
    fn daemon_demotes_above_high_watermark() {
        // Hand-build a state over the HIGH watermark to exercise the daemon
        // path: fill local beyond low+slack by lowering the watermarks.
        let trace = literal_trace(8, vec![0], 100.0);
        let mut config = single(SimPolicy::Rule(PolicyKind::NoMigration), trace, 8 * 4096);
        config.slack_bytes = 4096;
        let mut engine = Engine::new(&config).unwrap();
        engine.tenants[0].mem.low_watermark = 2 * 4096;
        engine.tenants[0].mem.high_watermark = 3 * 4096;
        assert_eq!(engine.tenants[0].mem.local_used, 8 * 4096);
        engine.run_demotion_daemon(0).unwrap();
        assert!(engine.tenants[0].mem.local_used < 2 * 4096);
        assert!(engine.tenants[0].demotions >= 6);
        assert!(engine.tenants[0].transfer_ps > 0);
    }
}
