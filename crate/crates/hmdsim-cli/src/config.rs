//! Flat key-value run configuration: dotted section prefixes, `#` comments,
//! CLI flags layered on top. Every resolved run echoes the complete key set
//! so a report can be replayed byte-for-byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context as _, Result};

use hmdsim::bandit::{ActionGrid, BanditHyper, Curriculum};
use hmdsim::engine::{LinkConfig, SimConfig, SimPolicy, TenantConfig};
use hmdsim::mem::InitialPlacement;
use hmdsim::policy::PolicyKind;
use hmdsim::telemetry::{Delta1Mode, TelemetryConfig};
use hmdsim::workload::load_trace;

pub const ENV_CONFIG: &str = "HMDSIM_CONFIG";

/// One documented configuration key.
pub struct KeyDoc {
    pub key: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

/// The generated key reference, one entry per supported key.
pub const KEY_REFERENCE: &[KeyDoc] = &[
    KeyDoc {
        key: "engine.seed",
        default: "0",
        doc: "base seed echoed into reports and sweeps",
    },
    KeyDoc {
        key: "engine.page_size",
        default: "4096",
        doc: "page size in bytes",
    },
    KeyDoc {
        key: "engine.slack_bytes",
        default: "10485760",
        doc: "gap between the LOW and HIGH watermarks",
    },
    KeyDoc {
        key: "engine.bookkeeping_ns",
        default: "1000",
        doc: "per-promotion bookkeeping overhead, ns",
    },
    KeyDoc {
        key: "engine.placement",
        default: "fill_local",
        doc: "initial placement: fill_local or all_remote",
    },
    KeyDoc {
        key: "engine.contention_schedule",
        default: "",
        doc: "piecewise contention, e.g. 0.005:0.5;0.01:0.25",
    },
    KeyDoc {
        key: "engine.oracle_lookahead_s",
        default: "telemetry.marking_interval_s",
        doc: "clairvoyant planning window, seconds",
    },
    KeyDoc {
        key: "telemetry.marking_interval_s",
        default: "1",
        doc: "page marking interval, simulated seconds",
    },
    KeyDoc {
        key: "telemetry.delta1",
        default: "0.2",
        doc: "rate closeness for burst coalescing",
    },
    KeyDoc {
        key: "telemetry.delta1_mode",
        default: "relative",
        doc: "delta1 interpretation: relative or absolute",
    },
    KeyDoc {
        key: "telemetry.delta2_s",
        default: "2 * marking interval",
        doc: "mark-gap tolerance for burst coalescing, seconds",
    },
    KeyDoc {
        key: "telemetry.ewma_alpha",
        default: "0.5",
        doc: "EWMA smoothing factor in (0,1]",
    },
    KeyDoc {
        key: "link.capacity_bps",
        default: "12500000000",
        doc: "link capacity, bytes/second",
    },
    KeyDoc {
        key: "link.background_fraction",
        default: "0",
        doc: "background contention fraction in [0,1)",
    },
    KeyDoc {
        key: "link.local_latency_ns",
        default: "100",
        doc: "local access latency, ns",
    },
    KeyDoc {
        key: "link.remote_base_latency_ns",
        default: "900",
        doc: "remote base access latency, ns",
    },
    KeyDoc {
        key: "link.cacheline_bytes",
        default: "64",
        doc: "bytes serialized per remote access",
    },
    KeyDoc {
        key: "policy.kind",
        default: "none",
        doc: "none | static | ewma | adaptive | bandit | oracle",
    },
    KeyDoc {
        key: "policy.rate_cutoff",
        default: "1",
        doc: "rate cutoff for static/ewma, accesses/s",
    },
    KeyDoc {
        key: "policy.alpha",
        default: "0.5",
        doc: "EWMA policy smoothing factor",
    },
    KeyDoc {
        key: "policy.threshold",
        default: "engine.page_size",
        doc: "network-adaptive threshold (bytes)",
    },
    KeyDoc {
        key: "policy.theta_burst",
        default: "1",
        doc: "bandit burst-duration threshold, epochs",
    },
    KeyDoc {
        key: "policy.theta_rate",
        default: "1",
        doc: "bandit access-rate threshold, accesses/s",
    },
    KeyDoc {
        key: "workload.trace",
        default: "",
        doc: "path of the trace file to replay",
    },
    KeyDoc {
        key: "workload.local_alloc_frac",
        default: "0.1",
        doc: "local allocation as a fraction of the working set",
    },
    KeyDoc {
        key: "workload.compute_ns",
        default: "from trace",
        doc: "override of the trace's compute time per access, ns",
    },
    KeyDoc {
        key: "bandit.seed",
        default: "engine.seed",
        doc: "agent init/exploration seed",
    },
    KeyDoc {
        key: "bandit.max_train",
        default: "2000",
        doc: "episodes per curriculum allocation",
    },
    KeyDoc {
        key: "bandit.learning_rate",
        default: "0.0005",
        doc: "SGD learning rate",
    },
    KeyDoc {
        key: "bandit.batch_size",
        default: "32",
        doc: "replay minibatch size",
    },
    KeyDoc {
        key: "bandit.exploration_fraction",
        default: "0.1",
        doc: "epsilon used while training",
    },
    KeyDoc {
        key: "bandit.buffer_capacity",
        default: "10000",
        doc: "replay buffer size",
    },
    KeyDoc {
        key: "bandit.hidden",
        default: "64,64",
        doc: "hidden layer widths",
    },
    KeyDoc {
        key: "bandit.burst_grid",
        default: "0,1,2,4,8,16",
        doc: "burst-threshold action grid, epochs",
    },
    KeyDoc {
        key: "bandit.rate_grid",
        default: "0.125,0.25,0.5,1,2,4,8",
        doc: "rate-threshold action grid, accesses/s",
    },
    KeyDoc {
        key: "bandit.allocations",
        default: "0.9,0.8,...,0.1",
        doc: "curriculum allocation fractions",
    },
    KeyDoc {
        key: "sweep.allocations",
        default: "0.1,...,0.9",
        doc: "sweep allocation fractions",
    },
    KeyDoc {
        key: "sweep.contentions",
        default: "0",
        doc: "sweep contention fractions",
    },
];

#[derive(Debug, Clone, Default)]
pub struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                anyhow!("config line {}: expected key=value, got `{line}`", i + 1)
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { map })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_text(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().with_context(|| format!("bad {key}={v}")),
        }
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().with_context(|| format!("bad {key}={v}")),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().with_context(|| format!("bad {key}={v}")),
        }
    }

    pub fn get_f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse().with_context(|| format!("bad {key}={v}")))
                .collect(),
        }
    }

    /// Sorted `key=value` block for report echoes.
    pub fn to_block(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.map {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }
}

/// Applies the shared CLI override flags on top of file settings.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub policy: Option<String>,
    pub local_alloc: Option<f64>,
    pub contention: Option<f64>,
    pub trace: Option<String>,
    pub max_train: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, settings: &mut Settings) -> Result<()> {
        if let Some(seed) = self.seed {
            settings.set("engine.seed", seed);
        }
        if let Some(policy) = &self.policy {
            apply_policy_flag(settings, policy)?;
        }
        if let Some(frac) = self.local_alloc {
            settings.set("workload.local_alloc_frac", frac);
        }
        if let Some(phi) = self.contention {
            settings.set("link.background_fraction", phi);
        }
        if let Some(trace) = &self.trace {
            settings.set("workload.trace", trace);
        }
        if let Some(n) = self.max_train {
            settings.set("bandit.max_train", n);
        }
        Ok(())
    }
}

/// `--policy KIND[:arg[:arg]]`, e.g. `static:2`, `ewma:0.9:2`, `bandit:2:0.5`.
fn apply_policy_flag(settings: &mut Settings, flag: &str) -> Result<()> {
    let mut parts = flag.split(':');
    let kind = parts.next().unwrap_or_default();
    let args: Vec<&str> = parts.collect();
    settings.set("policy.kind", kind);
    match (kind, args.as_slice()) {
        ("none" | "oracle", []) => {}
        ("static", [cutoff]) => settings.set("policy.rate_cutoff", *cutoff),
        ("static", []) => {}
        ("ewma", [alpha, cutoff]) => {
            settings.set("policy.alpha", *alpha);
            settings.set("policy.rate_cutoff", *cutoff);
        }
        ("ewma", []) => {}
        ("adaptive", [threshold]) => settings.set("policy.threshold", *threshold),
        ("adaptive", []) => {}
        ("bandit", [burst, rate]) => {
            settings.set("policy.theta_burst", *burst);
            settings.set("policy.theta_rate", *rate);
        }
        ("bandit", []) => {}
        _ => bail!(
            "bad --policy `{flag}` (try none, static:R, ewma:A:R, adaptive:T, bandit:B:R, oracle)"
        ),
    }
    Ok(())
}

/// A fully-resolved single run: the simulator config plus the complete
/// settings echo that reproduces it.
pub struct ResolvedRun {
    pub sim: SimConfig,
    pub local_alloc_frac: f64,
    pub echo: Settings,
}

pub fn parse_policy(settings: &Settings, page_size: u64) -> Result<SimPolicy> {
    let kind = settings.get("policy.kind").unwrap_or("none");
    Ok(match kind {
        "none" => SimPolicy::Rule(PolicyKind::NoMigration),
        "static" => SimPolicy::Rule(PolicyKind::StaticThreshold {
            rate_cutoff: settings.get_f64("policy.rate_cutoff", 1.0)?,
        }),
        "ewma" => SimPolicy::Rule(PolicyKind::EwmaThreshold {
            alpha: settings.get_f64("policy.alpha", 0.5)?,
            rate_cutoff: settings.get_f64("policy.rate_cutoff", 1.0)?,
        }),
        "adaptive" => SimPolicy::Rule(PolicyKind::NetworkAdaptive {
            threshold: settings.get_f64("policy.threshold", page_size as f64)?,
        }),
        "bandit" => SimPolicy::Rule(PolicyKind::Bandit {
            theta_burst: settings.get_u64("policy.theta_burst", 1)? as u32,
            theta_rate: settings.get_f64("policy.theta_rate", 1.0)?,
        }),
        "oracle" => SimPolicy::Oracle,
        other => bail!("unknown policy.kind `{other}`"),
    })
}

fn parse_schedule(text: &str) -> Result<Vec<(f64, f64)>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(';')
        .map(|entry| {
            let (t, phi) = entry
                .split_once(':')
                .ok_or_else(|| anyhow!("bad schedule entry `{entry}`, want time:phi"))?;
            Ok((t.trim().parse()?, phi.trim().parse()?))
        })
        .collect()
}

/// Builds the simulator config from settings and writes every effective key
/// back into the echo.
pub fn resolve_run(settings: &Settings) -> Result<ResolvedRun> {
    let trace_path = settings
        .get("workload.trace")
        .ok_or_else(|| anyhow!("no trace given: set workload.trace or pass --trace"))?
        .to_string();
    let mut trace = load_trace(Path::new(&trace_path))
        .map_err(|e| anyhow!("cannot load trace {trace_path}: {e}"))?;
    if let Some(compute) = settings.get("workload.compute_ns") {
        trace = trace.with_compute_ns(compute.parse().context("bad workload.compute_ns")?);
    }

    let page_size = settings.get_u64("engine.page_size", 4096)?;
    let marking = settings.get_f64("telemetry.marking_interval_s", 1.0)?;
    let telemetry = TelemetryConfig {
        marking_interval_s: marking,
        delta1: settings.get_f64("telemetry.delta1", 0.2)?,
        delta1_mode: match settings.get("telemetry.delta1_mode").unwrap_or("relative") {
            "relative" => Delta1Mode::Relative,
            "absolute" => Delta1Mode::Absolute,
            other => bail!("bad telemetry.delta1_mode `{other}`"),
        },
        delta2_s: settings.get_f64("telemetry.delta2_s", 2.0 * marking)?,
        ewma_alpha: settings.get_f64("telemetry.ewma_alpha", 0.5)?,
    };
    let link = LinkConfig {
        capacity_bps: settings.get_f64("link.capacity_bps", 12.5e9)?,
        background_fraction: settings.get_f64("link.background_fraction", 0.0)?,
        local_latency_ns: settings.get_f64("link.local_latency_ns", 100.0)?,
        remote_base_latency_ns: settings.get_f64("link.remote_base_latency_ns", 900.0)?,
        cacheline_bytes: settings.get_u64("link.cacheline_bytes", 64)?,
    };
    let placement = match settings.get("engine.placement").unwrap_or("fill_local") {
        "fill_local" => InitialPlacement::FillLocalThenRemote,
        "all_remote" => InitialPlacement::AllRemote,
        other => bail!("bad engine.placement `{other}`"),
    };
    let policy = parse_policy(settings, page_size)?;
    let frac = settings.get_f64("workload.local_alloc_frac", 0.1)?;
    if !(0.0..=1.0).contains(&frac) {
        bail!("workload.local_alloc_frac={frac} outside [0,1]");
    }
    let wss = trace.meta.n_pages * page_size;
    let local_alloc = (wss as f64 * frac).round() as u64;
    let schedule = parse_schedule(settings.get("engine.contention_schedule").unwrap_or(""))?;

    let sim = SimConfig {
        telemetry: telemetry.clone(),
        link: link.clone(),
        page_size,
        slack_bytes: settings.get_u64("engine.slack_bytes", 10 * 1024 * 1024)?,
        bookkeeping_ns: settings.get_f64("engine.bookkeeping_ns", 1000.0)?,
        oracle_lookahead_s: settings.get_f64("engine.oracle_lookahead_s", marking)?,
        contention_schedule: schedule,
        tenants: vec![TenantConfig {
            trace: trace.clone(),
            policy,
            local_alloc,
            placement,
        }],
        seed: settings.get_u64("engine.seed", 0)?,
    };

    // Full echo: every effective value explicit, so replays are exact.
    let mut echo = settings.clone();
    echo.set("workload.trace", &trace_path);
    echo.set("workload.local_alloc_frac", frac);
    echo.set("workload.compute_ns", trace.meta.compute_ns_per_access);
    echo.set("engine.seed", sim.seed);
    echo.set("engine.page_size", page_size);
    echo.set("engine.slack_bytes", sim.slack_bytes);
    echo.set("engine.bookkeeping_ns", sim.bookkeeping_ns);
    echo.set(
        "engine.placement",
        match placement {
            InitialPlacement::FillLocalThenRemote => "fill_local",
            InitialPlacement::AllRemote => "all_remote",
        },
    );
    echo.set("engine.oracle_lookahead_s", sim.oracle_lookahead_s);
    echo.set("telemetry.marking_interval_s", telemetry.marking_interval_s);
    echo.set("telemetry.delta1", telemetry.delta1);
    echo.set(
        "telemetry.delta1_mode",
        match telemetry.delta1_mode {
            Delta1Mode::Relative => "relative",
            Delta1Mode::Absolute => "absolute",
        },
    );
    echo.set("telemetry.delta2_s", telemetry.delta2_s);
    echo.set("telemetry.ewma_alpha", telemetry.ewma_alpha);
    echo.set("link.capacity_bps", link.capacity_bps);
    echo.set("link.background_fraction", link.background_fraction);
    echo.set("link.local_latency_ns", link.local_latency_ns);
    echo.set("link.remote_base_latency_ns", link.remote_base_latency_ns);
    echo.set("link.cacheline_bytes", link.cacheline_bytes);
    echo.set("policy.kind", sim.tenants[0].policy.name());

    Ok(ResolvedRun {
        sim,
        local_alloc_frac: frac,
        echo,
    })
}

pub fn bandit_hyper(settings: &Settings) -> Result<BanditHyper> {
    let hidden = settings
        .get("bandit.hidden")
        .unwrap_or("64,64")
        .split(',')
        .map(|s| s.trim().parse::<usize>().context("bad bandit.hidden"))
        .collect::<Result<Vec<_>>>()?;
    Ok(BanditHyper {
        hidden,
        learning_rate: settings.get_f64("bandit.learning_rate", 0.0005)?,
        batch_size: settings.get_usize("bandit.batch_size", 32)?,
        exploration_fraction: settings.get_f64("bandit.exploration_fraction", 0.1)?,
        buffer_capacity: settings.get_usize("bandit.buffer_capacity", 10_000)?,
    })
}

pub fn bandit_grid(settings: &Settings) -> Result<ActionGrid> {
    let default = ActionGrid::default();
    let burst = match settings.get("bandit.burst_grid") {
        None => default.burst,
        Some(v) => v
            .split(',')
            .map(|s| s.trim().parse::<u32>().context("bad bandit.burst_grid"))
            .collect::<Result<Vec<_>>>()?,
    };
    let rate = settings.get_f64_list("bandit.rate_grid", &default.rate)?;
    Ok(ActionGrid { burst, rate })
}

pub fn bandit_curriculum(settings: &Settings) -> Result<Curriculum> {
    let default = Curriculum::default();
    Ok(Curriculum {
        allocations: settings.get_f64_list("bandit.allocations", &default.allocations)?,
        max_train: settings.get_usize("bandit.max_train", default.max_train)?,
    })
}
