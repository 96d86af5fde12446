//! Subcommand implementations. Everything returns through `anyhow` so the
//! binary can exit nonzero with a one-line diagnostic.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};

use hmdsim::bandit::{
    episode_outcome, probe_context, train_curriculum, AblationFlags, BanditAgent, Context,
    RewardCache, TrainingLog,
};
use hmdsim::engine::{full_local_baseline, run, sweep, SimConfig, SimPolicy, SimResult};
use hmdsim::mem::{InitialPlacement, Location};
use hmdsim::oracle::plan_swaps;
use hmdsim::policy::PolicyKind;
use hmdsim::workload::{gen_shifting, gen_stationary, gen_zipf, save_trace};

use crate::config::{
    bandit_curriculum, bandit_grid, bandit_hyper, resolve_run, Overrides, ResolvedRun, Settings,
    ENV_CONFIG, KEY_REFERENCE,
};
use crate::report::{csv_header, human_table, report_file, ReportRow};

pub struct Common {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub agent: Option<PathBuf>,
    pub overrides: Overrides,
}

impl Common {
    pub fn settings(&self) -> Result<Settings> {
        let mut settings = match &self.config {
            Some(path) => Settings::load(path)?,
            None => match std::env::var(ENV_CONFIG) {
                Ok(path) if !path.is_empty() => Settings::load(Path::new(&path))?,
                _ => Settings::default(),
            },
        };
        self.overrides.apply(&mut settings)?;
        Ok(settings)
    }

    fn agent_path(&self) -> Result<&Path> {
        self.agent
            .as_deref()
            .ok_or_else(|| anyhow!("this command needs --agent PATH"))
    }
}

pub struct GenerateArgs {
    pub kind: String,
    pub n_pages: u64,
    pub length: usize,
    pub seed: u64,
    pub hot_fraction: f64,
    pub hot_prob: f64,
    pub window_pages: Option<u64>,
    pub shift_every: Option<usize>,
    pub exponent: f64,
    pub compute_ns: Option<f64>,
}

pub fn cmd_generate(common: &Common, args: &GenerateArgs) -> Result<()> {
    let out = common
        .out
        .as_deref()
        .ok_or_else(|| anyhow!("generate needs --out PATH for the trace file"))?;
    let mut trace = match args.kind.as_str() {
        "stationary" => gen_stationary(
            args.n_pages,
            args.hot_fraction,
            args.hot_prob,
            args.length,
            args.seed,
        )?,
        "shifting" => gen_shifting(
            args.n_pages,
            args.window_pages.unwrap_or((args.n_pages / 8).max(1)),
            args.shift_every.unwrap_or((args.length / 10).max(1)),
            args.length,
            args.seed,
        )?,
        "zipf" => gen_zipf(args.n_pages, args.exponent, args.length, args.seed)?,
        other => bail!("unknown generator `{other}` (stationary, shifting, zipf)"),
    };
    if let Some(compute) = args.compute_ns {
        trace = trace.with_compute_ns(compute);
    }
    save_trace(&trace, out)?;
    println!(
        "wrote {} accesses over {} pages ({}, seed {}) to {}",
        trace.len(),
        trace.meta.n_pages,
        trace.meta.generator,
        trace.meta.seed,
        out.display()
    );
    Ok(())
}

/// The all-remote reference run whose traffic normalizes report traffic.
fn all_remote_reference(sim: &SimConfig) -> Result<SimResult> {
    let mut config = sim.clone();
    config.tenants[0].local_alloc = 0;
    config.tenants[0].placement = InitialPlacement::AllRemote;
    config.tenants[0].policy = SimPolicy::Rule(PolicyKind::NoMigration);
    Ok(run(&config)?)
}

struct References {
    baseline_completion_s: f64,
    all_remote_traffic: u64,
}

fn references(sim: &SimConfig) -> Result<References> {
    Ok(References {
        baseline_completion_s: full_local_baseline(sim)?.completion_s(),
        all_remote_traffic: all_remote_reference(sim)?.network_traffic_bytes(),
    })
}

fn emit(common: &Common, resolved: &ResolvedRun, rows: &[ReportRow]) -> Result<()> {
    print!("{}", human_table(rows));
    println!("{}", csv_header());
    for row in rows {
        println!("{}", row.csv());
    }
    if let Some(out) = &common.out {
        fs::write(out, report_file(&resolved.echo.to_block(), rows))
            .with_context(|| format!("cannot write {}", out.display()))?;
        println!("report written to {}", out.display());
    }
    Ok(())
}

pub fn cmd_run(common: &Common) -> Result<()> {
    let settings = common.settings()?;
    let resolved = resolve_run(&settings)?;
    let result = run(&resolved.sim)?;
    let refs = references(&resolved.sim)?;
    let row = ReportRow::new(
        "run",
        &result,
        resolved.sim.seed,
        resolved.local_alloc_frac,
        resolved.sim.link.background_fraction,
        refs.baseline_completion_s,
        refs.all_remote_traffic,
    );
    emit(common, &resolved, &[row])
}

pub fn cmd_sweep(common: &Common) -> Result<()> {
    let settings = common.settings()?;
    let resolved = resolve_run(&settings)?;
    let default_allocs: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let allocations = settings.get_f64_list("sweep.allocations", &default_allocs)?;
    let contentions = settings.get_f64_list("sweep.contentions", &[0.0])?;

    let cells = sweep(&resolved.sim, &allocations, &contentions)?;
    let all_remote_traffic = all_remote_reference(&resolved.sim)?.network_traffic_bytes();

    let rows: Vec<ReportRow> = cells
        .iter()
        .map(|cell| {
            let mut row = ReportRow::new(
                &format!("a{:.2}_phi{:.2}", cell.allocation_frac, cell.phi),
                &cell.result,
                cell.seed,
                cell.allocation_frac,
                cell.phi,
                0.0,
                all_remote_traffic,
            );
            row.runtime_degradation = cell.runtime_degradation;
            row
        })
        .collect();

    let mut resolved = resolved;
    resolved.echo.set(
        "sweep.allocations",
        allocations
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(","),
    );
    resolved.echo.set(
        "sweep.contentions",
        contentions
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(","),
    );
    emit(common, &resolved, &rows)
}

fn training_log_lines(log: &TrainingLog, full: bool) -> String {
    let mut out = String::new();
    out.push_str("# hmdsim training log v1\n");
    out.push_str(&format!(
        "baseline_completion_s={}\n",
        log.baseline_completion_s
    ));
    if full {
        for e in &log.episodes {
            out.push_str(&format!(
                "episode alloc={} ep={} arm={} theta_burst={} theta_rate={} reward={} cached={} eps={} loss={} ctx={},{},{},{}\n",
                e.allocation_frac,
                e.episode,
                e.arm,
                e.theta_burst,
                e.theta_rate,
                e.reward,
                e.cached as u8,
                e.epsilon,
                e.loss,
                e.context[0],
                e.context[1],
                e.context[2],
                e.context[3],
            ));
        }
    }
    for a in &log.allocations {
        out.push_str(&format!(
            "alloc-summary alloc={} episodes={} sims={} hit_rate={:.4} final_arm={} theta_burst={} theta_rate={} final_reward={} best_arm={} best_reward={}\n",
            a.allocation_frac,
            a.episodes,
            a.simulations,
            a.cache_hit_rate,
            a.final_arm,
            a.final_theta_burst,
            a.final_theta_rate,
            a.final_arm_reward,
            a.best_cached_arm,
            a.best_cached_reward,
        ));
    }
    out.push_str(&format!(
        "total episodes={} sims={} probe_runs={} hit_rate={:.4}\n",
        log.total_episodes,
        log.total_simulations,
        log.probe_runs,
        log.cache_hit_rate(),
    ));
    out
}

pub fn cmd_train(common: &Common) -> Result<()> {
    let settings = common.settings()?;
    let resolved = resolve_run(&settings)?;
    let agent_path = common.agent_path()?;

    let grid = bandit_grid(&settings)?;
    let hyper = bandit_hyper(&settings)?;
    let curriculum = bandit_curriculum(&settings)?;
    let seed = settings.get_u64("bandit.seed", resolved.sim.seed)?;

    let mut agent = BanditAgent::new(grid, hyper, seed);
    let mut cache = RewardCache::new();
    let log = train_curriculum(&mut agent, &resolved.sim, &curriculum, &mut cache)?;

    agent.save(agent_path)?;
    print!("{}", training_log_lines(&log, false));
    println!("agent written to {}", agent_path.display());
    if let Some(out) = &common.out {
        fs::write(out, training_log_lines(&log, true))
            .with_context(|| format!("cannot write {}", out.display()))?;
        println!("training log written to {}", out.display());
    }
    Ok(())
}

/// Greedy arm for the current context, optionally with ablation masking.
fn pick_arm(
    agent: &mut BanditAgent,
    context: &Context,
    flags: &AblationFlags,
) -> Result<(usize, PolicyKind)> {
    let masked = context.masked(flags);
    let arm = agent.select_action(&masked, 0.0)?;
    let policy = agent.grid.policy_for(arm, flags);
    Ok((arm, policy))
}

pub fn cmd_eval(common: &Common) -> Result<()> {
    let settings = common.settings()?;
    let mut resolved = resolve_run(&settings)?;
    let mut agent = BanditAgent::load(common.agent_path()?)?;

    let alloc_bytes = resolved.sim.tenants[0].local_alloc;
    let (context, _) = probe_context(&resolved.sim, alloc_bytes)?;
    let (arm, policy) = pick_arm(&mut agent, &context, &AblationFlags::none())?;
    let (theta_burst, theta_rate) = agent.grid.thresholds(arm);
    println!(
        "context=({:.2},{:.2},{:.2},{:.2}) arm={} theta_burst={} theta_rate={}",
        context.local_alloc,
        context.local_usage_peak,
        context.remote_usage_peak,
        context.network_traffic,
        arm,
        theta_burst,
        theta_rate
    );

    let refs = references(&resolved.sim)?;
    let baseline_s = refs.baseline_completion_s;
    let (_, result) = episode_outcome(&resolved.sim, alloc_bytes, policy, baseline_s)?;
    let row = ReportRow::new(
        "eval",
        &result,
        resolved.sim.seed,
        resolved.local_alloc_frac,
        resolved.sim.link.background_fraction,
        baseline_s,
        refs.all_remote_traffic,
    );
    resolved.echo.set("policy.kind", "bandit");
    resolved.echo.set("policy.theta_burst", theta_burst);
    resolved.echo.set("policy.theta_rate", theta_rate);
    emit(common, &resolved, &[row])
}

pub fn cmd_oracle(common: &Common) -> Result<()> {
    let settings = common.settings()?;
    let mut resolved = resolve_run(&settings)?;
    resolved.sim.tenants[0].policy = SimPolicy::Oracle;
    resolved.echo.set("policy.kind", "oracle");

    // Standalone planning pass: window-by-window over the saved trace with
    // a virtual placement, no clock.
    let sim = &resolved.sim;
    let trace = &sim.tenants[0].trace;
    // A swap moves two pages over the link; plan against that cost.
    let mut cost = sim.cost_params();
    cost.page_size *= 2;
    let link = sim.link.build()?;
    let bandwidth = link.effective_bandwidth();
    let event_ns = trace.meta.compute_ns_per_access + sim.link.local_latency_ns;
    let window = ((sim.oracle_lookahead_s * 1e9 / event_ns).round() as usize).max(1);

    let mut location: Vec<Location> = {
        let local_count = match sim.tenants[0].placement {
            InitialPlacement::AllRemote => 0,
            InitialPlacement::FillLocalThenRemote => {
                (sim.tenants[0].local_alloc / sim.page_size).min(trace.meta.n_pages)
            }
        };
        (0..trace.meta.n_pages)
            .map(|id| {
                if id < local_count {
                    Location::Local
                } else {
                    Location::Remote
                }
            })
            .collect()
    };

    let mut planned = 0usize;
    for (step, chunk) in trace.accesses().chunks(window).enumerate() {
        let mut counts: std::collections::BTreeMap<u64, f64> = std::collections::BTreeMap::new();
        for &id in chunk {
            *counts.entry(id).or_insert(0.0) += 1.0;
        }
        let locals: Vec<(u64, f64)> = location
            .iter()
            .enumerate()
            .filter(|(_, &loc)| loc == Location::Local)
            .map(|(id, _)| (id as u64, counts.get(&(id as u64)).copied().unwrap_or(0.0)))
            .collect();
        let remotes: Vec<(u64, f64)> = counts
            .iter()
            .filter(|&(&id, _)| location[id as usize] == Location::Remote)
            .map(|(&id, &c)| (id, c))
            .collect();
        for pair in plan_swaps(&locals, &remotes, &cost, bandwidth)? {
            println!(
                "swap step={} promote={} demote={} benefit={:.4}",
                step, pair.promote, pair.demote, pair.benefit
            );
            location[pair.promote as usize] = Location::Local;
            location[pair.demote as usize] = Location::Remote;
            planned += 1;
        }
    }
    println!(
        "planned {planned} swaps over {} windows",
        trace.len().div_ceil(window)
    );

    let result = run(&resolved.sim)?;
    let refs = references(&resolved.sim)?;
    let row = ReportRow::new(
        "oracle",
        &result,
        resolved.sim.seed,
        resolved.local_alloc_frac,
        resolved.sim.link.background_fraction,
        refs.baseline_completion_s,
        refs.all_remote_traffic,
    );
    emit(common, &resolved, &[row])
}

pub fn cmd_ablate(common: &Common) -> Result<()> {
    let settings = common.settings()?;
    let mut resolved = resolve_run(&settings)?;
    let mut agent = BanditAgent::load(common.agent_path()?)?;

    let alloc_bytes = resolved.sim.tenants[0].local_alloc;
    let (context, _) = probe_context(&resolved.sim, alloc_bytes)?;
    let refs = references(&resolved.sim)?;

    let variants: [(&str, AblationFlags); 4] = [
        ("full", AblationFlags::none()),
        (
            "no-burst",
            AblationFlags {
                disable_burst: true,
                ..AblationFlags::none()
            },
        ),
        (
            "no-network",
            AblationFlags {
                disable_network_ctx: true,
                ..AblationFlags::none()
            },
        ),
        (
            "no-alloc",
            AblationFlags {
                disable_alloc_ctx: true,
                ..AblationFlags::none()
            },
        ),
    ];

    let mut rows = Vec::new();
    for (label, flags) in &variants {
        let (arm, policy) = pick_arm(&mut agent, &context, flags)?;
        let (_, result) = episode_outcome(
            &resolved.sim,
            alloc_bytes,
            policy,
            refs.baseline_completion_s,
        )?;
        let mut row = ReportRow::new(
            label,
            &result,
            resolved.sim.seed,
            resolved.local_alloc_frac,
            resolved.sim.link.background_fraction,
            refs.baseline_completion_s,
            refs.all_remote_traffic,
        );
        row.label = format!("{label}(arm {arm})");
        rows.push(row);
    }

    // The echoed config replays the unablated configuration.
    let (_, full_policy) = pick_arm(&mut agent, &context, &AblationFlags::none())?;
    if let PolicyKind::Bandit {
        theta_burst,
        theta_rate,
    } = full_policy
    {
        resolved.echo.set("policy.kind", "bandit");
        resolved.echo.set("policy.theta_burst", theta_burst);
        resolved.echo.set("policy.theta_rate", theta_rate);
    }
    emit(common, &resolved, &rows)
}

pub fn cmd_config_reference() -> Result<()> {
    println!("hmdsim configuration keys (flat key=value file, `#` comments):");
    println!();
    for doc in KEY_REFERENCE {
        println!("{:<34} default: {:<28} {}", doc.key, doc.default, doc.doc);
    }
    println!();
    println!("CLI flags override file values; ${ENV_CONFIG} names the default config file.");
    Ok(())
}
