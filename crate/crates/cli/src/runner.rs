//! End-to-end run execution: load inputs, drive the dispatcher batch by
//! batch, aggregate, and write the artifacts.

use std::path::PathBuf;

use anyhow::{Context, Result};

use fleetmatch::metrics::{summarize_run, BatchMetrics, RequestRecord, RunSummary};
use fleetmatch::model::{FleetState, TimeLimits};
use fleetmatch::scenario::Scenario;
use fleetmatch::scheduler::Dispatcher;
use fleetmatch::Secs;

use crate::config::RunConfig;
use crate::ingest::ingest_requests;
use crate::output;

/// Post-drain period appended after the last request when no explicit
/// duration is configured, so in-flight trips can complete.
const DEFAULT_DRAIN: Secs = 1800.0;

pub struct RunOutput {
    pub summary: RunSummary,
    pub batches: Vec<BatchMetrics>,
    pub records: Vec<RequestRecord>,
    pub artifacts: output::ArtifactPaths,
    pub warnings: Vec<String>,
}

pub fn execute(cfg: &RunConfig) -> Result<RunOutput> {
    let mut net = cfg.network.build()?;
    if let Some(profile) = cfg.load_congestion()? {
        net = net.with_congestion(profile);
    }

    let requests_text = std::fs::read_to_string(&cfg.requests)
        .with_context(|| format!("reading requests {}", cfg.requests.display()))?;
    let limits = TimeLimits::new(cfg.max_wait, cfg.max_detour);
    let ingest = ingest_requests(&requests_text, &cfg.requests.display().to_string(), &net, limits)?;

    let scenario_text = match &cfg.scenario {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading scenario {}", path.display()))?,
        None => String::new(),
    };
    let scenario = if scenario_text.is_empty() {
        Scenario::empty()
    } else {
        Scenario::parse_csv(&scenario_text)?
    };

    let fleet = FleetState::init_random(&cfg.company_fleets()?, cfg.capacity, &net, cfg.seed);
    let mut dispatcher = Dispatcher::new(net, fleet, cfg.scheduler_config(), scenario, cfg.seed)?;

    let last_request = ingest.requests.last().map(|r| r.request_time).unwrap_or(0.0);
    let mut until = cfg.duration.unwrap_or(last_request + DEFAULT_DRAIN);
    until = until.max(cfg.warmup + cfg.batch_period);
    let request_count = ingest.requests.len();
    dispatcher.run(ingest.requests, until)?;

    let records = dispatcher.records_sorted();
    let summary = summarize_run(dispatcher.batches(), &records, cfg.warmup)?;

    // the hash covers the semantic run inputs; output paths and thread
    // counts do not influence results
    let semantic = format!(
        "{:?}|{}|{}|{}|{}|{:?}|{:?}|{:?}|{}|{}|{}|{:?}|{}|{}|{}|{}|{}|{:?}",
        cfg.network,
        cfg.fleet,
        cfg.capacity,
        cfg.maxn,
        cfg.batch_period,
        cfg.cost_kind,
        cfg.solver,
        cfg.metric,
        cfg.rebalance,
        cfg.accept_rebalance,
        cfg.pipeline_factor,
        cfg.companies,
        cfg.congestion_aware,
        cfg.max_wait,
        cfg.max_detour,
        cfg.seed,
        cfg.warmup,
        cfg.duration,
    );
    let hash = output::content_hash(&[
        requests_text.as_bytes(),
        scenario_text.as_bytes(),
        semantic.as_bytes(),
    ]);
    let metrics = output::metrics_csv(dispatcher.batches(), !cfg.companies.is_empty());
    let summary_doc = output::summary_json(cfg, &summary, hash, request_count)?;
    let occupancy = output::occupancy_csv(&summary);
    let heat = output::heat_csv(dispatcher.heat_samples());
    let timings = output::timings_csv(dispatcher.batches());
    let artifacts =
        output::write_artifacts(&cfg.out_dir, &metrics, &summary_doc, &occupancy, &heat, &timings)?;

    Ok(RunOutput {
        summary,
        batches: dispatcher.batches().to_vec(),
        records,
        artifacts,
        warnings: ingest.warnings,
    })
}

/// Default output directory for a seed when none is given.
pub fn default_out_dir(seed: u64) -> PathBuf {
    PathBuf::from(format!("fleetmatch-out-{seed}"))
}
