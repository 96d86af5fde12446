use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hmdsim_cli::commands::{self, Common, GenerateArgs};
use hmdsim_cli::config::Overrides;

/// Trace-driven page migration simulator for disaggregated memory.
#[derive(Parser)]
#[command(name = "hmdsim", version, about)]
struct Cli {
    /// Run configuration file (falls back to $HMDSIM_CONFIG)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed override
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Policy override: none | static:R | ewma:A:R | adaptive:T | bandit:B:R | oracle
    #[arg(long, global = true)]
    policy: Option<String>,
    /// Local allocation as a fraction of the working set
    #[arg(long = "local-alloc", global = true)]
    local_alloc: Option<f64>,
    /// Background contention fraction φ in [0,1)
    #[arg(long, global = true)]
    contention: Option<f64>,
    /// Trace file to replay
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
    /// Output path (trace for generate, replayable report otherwise)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Agent weight file
    #[arg(long, global = true)]
    agent: Option<PathBuf>,
    /// Episodes per curriculum allocation
    #[arg(long = "max-train", global = true)]
    max_train: Option<usize>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic trace file
    Generate(GenerateCliArgs),
    /// Replay one run and report its metrics
    Run,
    /// Run the allocation × contention grid
    Sweep,
    /// Train the bandit agent over the allocation curriculum
    Train,
    /// Evaluate a saved agent on a workload without retraining
    Eval,
    /// Plan optimal swaps over a saved trace and report the bound
    Oracle,
    /// Compare the bandit run against single-component ablations
    Ablate,
    /// Print the configuration key reference
    ConfigReference,
}

#[derive(Args)]
struct GenerateCliArgs {
    /// Generator: stationary | shifting | zipf
    #[arg(long)]
    kind: String,
    #[arg(long = "n-pages")]
    n_pages: u64,
    /// Number of accesses
    #[arg(long)]
    length: usize,
    /// Hot-set size as a fraction of pages (stationary)
    #[arg(long, default_value_t = 0.1)]
    hot_fraction: f64,
    /// Probability an access hits the hot set (stationary)
    #[arg(long, default_value_t = 0.9)]
    hot_prob: f64,
    /// Window size in pages (shifting; default n_pages/8)
    #[arg(long)]
    window_pages: Option<u64>,
    /// Accesses between window shifts (shifting; default length/10)
    #[arg(long)]
    shift_every: Option<usize>,
    /// Zipf exponent
    #[arg(long, default_value_t = 1.1)]
    exponent: f64,
    /// Compute time per access, ns (defaults to the generator's 100)
    #[arg(long)]
    compute_ns: Option<f64>,
}

fn main() -> ExitCode {
    // Die quietly when stdout is a pipe that closes early (e.g. `| head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = Cli::parse();
    let common = Common {
        config: cli.config,
        out: cli.out,
        agent: cli.agent,
        overrides: Overrides {
            seed: cli.seed,
            policy: cli.policy,
            local_alloc: cli.local_alloc,
            contention: cli.contention,
            trace: cli.trace.map(|p| p.display().to_string()),
            max_train: cli.max_train,
        },
    };

    let result = match cli.command {
        Cmd::Generate(args) => commands::cmd_generate(
            &common,
            &GenerateArgs {
                kind: args.kind,
                n_pages: args.n_pages,
                length: args.length,
                seed: common.overrides.seed.unwrap_or(0),
                hot_fraction: args.hot_fraction,
                hot_prob: args.hot_prob,
                window_pages: args.window_pages,
                shift_every: args.shift_every,
                exponent: args.exponent,
                compute_ns: args.compute_ns,
            },
        ),
        Cmd::Run => commands::cmd_run(&common),
        Cmd::Sweep => commands::cmd_sweep(&common),
        Cmd::Train => commands::cmd_train(&common),
        Cmd::Eval => commands::cmd_eval(&common),
        Cmd::Oracle => commands::cmd_oracle(&common),
        Cmd::Ablate => commands::cmd_ablate(&common),
        Cmd::ConfigReference => commands::cmd_config_reference(),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("hmdsim: {err:#}");
            ExitCode::FAILURE
        }
    }
}
