use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use fleetmatch_cli::config::{
    parse_companies, parse_cost_kind, parse_metric, parse_solver, parse_switch, NetworkSpec,
    RunConfig,
};
use fleetmatch_cli::demand::{generate_demand, parse_hotspots, rows_to_csv, DemandSpec};
use fleetmatch_cli::runner;

#[derive(Parser)]
#[command(name = "fleetmatch", about = "Deterministic fleet-dispatch replay simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a dispatch simulation over a request stream.
    Run(RunArgs),
    /// Generate a synthetic request stream CSV.
    GenDemand(GenDemandArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Request stream CSV (id,request_time_s,origin_node,dest_node[,earliest_pickup_s,latest_pickup_s]).
    #[arg(long)]
    requests: PathBuf,
    /// grid:WxH:EDGE_M:SPEED | matrix:PATH | euclid:SPEED[:WxH:EDGE_M]
    #[arg(long)]
    network: String,
    #[arg(long)]
    fleet: u32,
    #[arg(long, default_value_t = 4)]
    capacity: u32,
    /// Candidate vehicles per request, per availability class.
    #[arg(long, default_value_t = 8)]
    maxn: usize,
    /// Batch sampling period in seconds.
    #[arg(long, default_value_t = 10.0)]
    batch_period: f64,
    /// td | wt | dt
    #[arg(long, default_value = "td")]
    cost: String,
    /// auto | insertion | lns
    #[arg(long, default_value = "auto")]
    darp: String,
    /// euclidean | manhattan | shortest-path
    #[arg(long, default_value = "euclidean")]
    metric: String,
    /// on | off
    #[arg(long, default_value = "on")]
    rebalance: String,
    /// y | n
    #[arg(long, default_value = "y")]
    accept_rebalance: String,
    #[arg(long, default_value_t = 2)]
    pipeline_factor: u32,
    /// share:fleet[,share:fleet], e.g. 0.75:30,0.25:10
    #[arg(long)]
    companies: Option<String>,
    /// Scenario event CSV (time_s,event,value).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Congestion profile CSV (hour_start,ratio).
    #[arg(long)]
    congestion: Option<PathBuf>,
    /// y | n: whether the planner sees congestion-adjusted times.
    #[arg(long, default_value = "y")]
    congestion_aware: String,
    /// Maximum waiting time before pickup, seconds.
    #[arg(long, default_value_t = 420.0)]
    max_wait: f64,
    /// Maximum extra trip time, seconds.
    #[arg(long, default_value_t = 420.0)]
    max_detour: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Warm-up period excluded from the summary, seconds.
    #[arg(long, default_value_t = 0.0)]
    warmup: f64,
    /// Simulated end time in seconds (default: last request + 1800).
    #[arg(long)]
    duration: Option<f64>,
    /// Dump each batch's solved cost table and prices into this directory.
    #[arg(long)]
    dump_lap: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenDemandArgs {
    /// Network the node ids refer to.
    #[arg(long)]
    network: String,
    #[arg(long)]
    rate_per_hour: f64,
    #[arg(long)]
    duration: f64,
    #[arg(long, default_value_t = 0.0)]
    start: f64,
    /// node:weight:radius_m[,...]; uniform over all nodes when omitted.
    #[arg(long)]
    origin_hotspots: Option<String>,
    #[arg(long)]
    dest_hotspots: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn thread_count() -> usize {
    std::env::var("FLEETMATCH_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1)
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = RunConfig {
        requests: args.requests,
        network: args.network.parse::<NetworkSpec>()?,
        fleet: args.fleet,
        capacity: args.capacity,
        maxn: args.maxn,
        batch_period: args.batch_period,
        cost_kind: parse_cost_kind(&args.cost)?,
        solver: parse_solver(&args.darp)?,
        metric: parse_metric(&args.metric)?,
        rebalance: parse_switch(&args.rebalance)?,
        accept_rebalance: parse_switch(&args.accept_rebalance)?,
        pipeline_factor: args.pipeline_factor,
        companies: match args.companies {
            Some(s) => parse_companies(&s)?,
            None => Vec::new(),
        },
        scenario: args.scenario,
        congestion_profile: args.congestion,
        congestion_aware: parse_switch(&args.congestion_aware)?,
        max_wait: args.max_wait,
        max_detour: args.max_detour,
        seed: args.seed,
        warmup: args.warmup,
        duration: args.duration,
        threads: thread_count(),
        out_dir: args.out,
        lap_dump_dir: args.dump_lap,
    };
    let out = runner::execute(&cfg)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let s = &out.summary;
    println!(
        "batches {}  requests {}  served {} ({:.2}%)  refused {}  rescued {}",
        s.batches, s.requests_total, s.served, s.service_rate_pct, s.refused, s.rebalance_served
    );
    println!(
        "mean batch {:.4}s (cost {:.4}s, assignment {:.4}s)  window violations {}",
        s.mean_batch_s, s.mean_cost_phase_s, s.mean_lap_phase_s, s.window_violations
    );
    println!("artifacts in {}", out.artifacts.metrics.parent().unwrap().display());
    Ok(())
}

fn gen_demand(args: GenDemandArgs) -> Result<()> {
    let net = args.network.parse::<NetworkSpec>()?.build()?;
    let spec = DemandSpec {
        rate_per_hour: args.rate_per_hour,
        duration_s: args.duration,
        start_s: args.start,
        origin_hotspots: match args.origin_hotspots {
            Some(s) => parse_hotspots(&s)?,
            None => Vec::new(),
        },
        dest_hotspots: match args.dest_hotspots {
            Some(s) => parse_hotspots(&s)?,
            None => Vec::new(),
        },
    };
    let rows = generate_demand(&spec, &net, args.seed)?;
    std::fs::write(&args.out, rows_to_csv(&rows))?;
    println!("{} requests written to {}", rows.len(), args.out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::GenDemand(args) => gen_demand(args),
    }
}
