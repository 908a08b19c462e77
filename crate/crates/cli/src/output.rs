//! Run artifact writers.
//!
//! Four deterministic artifacts (metrics.csv, summary.json, occupancy.csv,
//! heatgrid.csv) are byte-identical across replays with the same config and
//! seed. timings.csv carries wall-clock measurements and is excluded from
//! that contract.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use fleetmatch::metrics::{BatchMetrics, RunSummary, SumCount};
use fleetmatch::scheduler::HeatSample;

use crate::config::RunConfig;

/// FNV-1a 64 content hash, for run provenance.
pub fn content_hash(parts: &[&[u8]]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("fnv64:{h:016x}")
}

fn cell(stat: &SumCount) -> String {
    match stat.mean() {
        Some(m) => format!("{}", m.round() as i64),
        None => String::new(),
    }
}

/// Per-batch metrics table. All time values are whole seconds; mean cells are
/// empty when no event of that kind happened in the batch.
pub fn metrics_csv(batches: &[BatchMetrics], multi_company: bool) -> String {
    let occ_cols = batches.iter().map(|b| b.occupancy.len()).max().unwrap_or(0);
    let mut out = String::from(
        "batch,window_end_s,requests,assigned,rebalance_assigned,refused,picked_up,delivered,\
         waiting_all_s,waiting_normal_s,waiting_rescued_s,\
         detour_all_s,detour_normal_s,detour_rescued_s",
    );
    for k in 0..occ_cols {
        let _ = write!(out, ",occ_{k}");
    }
    out.push_str(",window_violations");
    if multi_company {
        out.push_str(",s1,s2,violation");
    }
    out.push('\n');
    for b in batches {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            b.batch,
            b.window_end.round() as i64,
            b.requests_in,
            b.assigned,
            b.rebalance_assigned,
            b.refused,
            b.picked_up,
            b.delivered,
            cell(&b.waiting.all()),
            cell(&b.waiting.normal),
            cell(&b.waiting.rescued),
            cell(&b.detour.all()),
            cell(&b.detour.normal),
            cell(&b.detour.rescued),
        );
        for k in 0..occ_cols {
            let _ = write!(out, ",{}", b.occupancy.get(k).copied().unwrap_or(0));
        }
        let _ = write!(out, ",{}", b.window_violations);
        if multi_company {
            match &b.shares {
                Some(s) => {
                    let _ = write!(out, ",{},{},{:.3}", s.served[0], s.served[1], s.violation);
                }
                None => out.push_str(",,,"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn occupancy_csv(summary: &RunSummary) -> String {
    let mut out = String::from("occupancy,mean_fraction\n");
    for (k, f) in summary.occupancy_mean_fraction.iter().enumerate() {
        let _ = write!(out, "{k},{f:.6}\n");
    }
    out
}

pub fn heat_csv(samples: &[HeatSample]) -> String {
    let mut out = String::from("hour,node,vehicles,onboard\n");
    for s in samples {
        let _ = write!(out, "{},{},{},{}\n", s.hour, s.node, s.vehicles, s.onboard);
    }
    out
}

pub fn timings_csv(batches: &[BatchMetrics]) -> String {
    let mut out = String::from("batch,cost_phase_s,lap_phase_s,total_s\n");
    for b in batches {
        let _ = write!(out, "{},{:.6},{:.6},{:.6}\n", b.batch, b.cost_phase_s, b.lap_phase_s, b.total_s);
    }
    out
}

fn minutes(v: Option<f64>) -> Option<f64> {
    v.map(|secs| (secs / 60.0 * 100.0).round() / 100.0)
}

/// Rounds an already-scaled percentage to two decimals.
fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

#[derive(Serialize)]
struct CompanyEcho {
    id: u32,
    share: f64,
    fleet: u32,
}

#[derive(Serialize)]
struct ConfigEcho {
    network: String,
    fleet: u32,
    capacity: u32,
    maxn: usize,
    batch_period_s: f64,
    cost: String,
    darp: String,
    metric: String,
    rebalance: bool,
    accept_rebalance: bool,
    pipeline_factor: u32,
    companies: Vec<CompanyEcho>,
    congestion_aware: bool,
    max_wait_s: f64,
    max_detour_s: f64,
    seed: u64,
    warmup_s: f64,
}

#[derive(Serialize)]
struct Provenance {
    content_hash: String,
    requests: String,
    request_count: usize,
}

#[derive(Serialize)]
struct TimeBlock {
    all: Option<f64>,
    normal: Option<f64>,
    rescued: Option<f64>,
}

#[derive(Serialize)]
struct Results {
    batches: usize,
    requests: usize,
    served: usize,
    refused: usize,
    rebalance_served: usize,
    service_rate_pct: f64,
    waiting_min: TimeBlock,
    detour_min: TimeBlock,
    occupancy_mean_fraction: Vec<f64>,
    window_violations: u64,
}

#[derive(Serialize)]
struct CompanyResults {
    served: Vec<u64>,
    violation_final: f64,
    violation_abs_max: f64,
}

#[derive(Serialize)]
struct SummaryDoc {
    config: ConfigEcho,
    provenance: Provenance,
    results: Results,
    company: Option<CompanyResults>,
}

pub fn summary_json(
    cfg: &RunConfig,
    summary: &RunSummary,
    hash: String,
    request_count: usize,
) -> Result<String> {
    let doc = SummaryDoc {
        config: ConfigEcho {
            network: format!("{:?}", cfg.network),
            fleet: cfg.fleet,
            capacity: cfg.capacity,
            maxn: cfg.maxn,
            batch_period_s: cfg.batch_period,
            cost: format!("{:?}", cfg.cost_kind),
            darp: format!("{:?}", cfg.solver),
            metric: format!("{:?}", cfg.metric),
            rebalance: cfg.rebalance,
            accept_rebalance: cfg.accept_rebalance,
            pipeline_factor: cfg.pipeline_factor,
            companies: cfg
                .companies
                .iter()
                .map(|c| CompanyEcho { id: c.id, share: c.share, fleet: c.fleet })
                .collect(),
            congestion_aware: cfg.congestion_aware,
            max_wait_s: cfg.max_wait,
            max_detour_s: cfg.max_detour,
            seed: cfg.seed,
            warmup_s: cfg.warmup,
        },
        provenance: Provenance {
            content_hash: hash,
            requests: cfg.requests.display().to_string(),
            request_count,
        },
        results: Results {
            batches: summary.batches,
            requests: summary.requests_total,
            served: summary.served,
            refused: summary.refused,
            rebalance_served: summary.rebalance_served,
            service_rate_pct: round2(summary.service_rate_pct),
            waiting_min: TimeBlock {
                all: minutes(summary.waiting_all_s),
                normal: minutes(summary.waiting_normal_s),
                rescued: minutes(summary.waiting_rescued_s),
            },
            detour_min: TimeBlock {
                all: minutes(summary.detour_all_s),
                normal: minutes(summary.detour_normal_s),
                rescued: minutes(summary.detour_rescued_s),
            },
            occupancy_mean_fraction: summary
                .occupancy_mean_fraction
                .iter()
                .map(|f| (f * 1e6).round() / 1e6)
                .collect(),
            window_violations: summary.window_violations,
        },
        company: summary.share_served.as_ref().map(|served| CompanyResults {
            served: served.clone(),
            violation_final: summary.share_violation_final.unwrap_or(0.0),
            violation_abs_max: summary.share_violation_abs_max.unwrap_or(0.0),
        }),
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

pub struct ArtifactPaths {
    pub metrics: PathBuf,
    pub summary: PathBuf,
    pub occupancy: PathBuf,
    pub heatgrid: PathBuf,
    pub timings: PathBuf,
}

pub fn write_artifacts(
    dir: &Path,
    metrics: &str,
    summary: &str,
    occupancy: &str,
    heatgrid: &str,
    timings: &str,
) -> Result<ArtifactPaths> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let paths = ArtifactPaths {
        metrics: dir.join("metrics.csv"),
        summary: dir.join("summary.json"),
        occupancy: dir.join("occupancy.csv"),
        heatgrid: dir.join("heatgrid.csv"),
        timings: dir.join("timings.csv"),
    };
    std::fs::write(&paths.metrics, metrics)?;
    std::fs::write(&paths.summary, summary)?;
    std::fs::write(&paths.occupancy, occupancy)?;
    std::fs::write(&paths.heatgrid, heatgrid)?;
    std::fs::write(&paths.timings, timings)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_input_sensitive() {
        let a = content_hash(&[b"abc", b"def"]);
        assert_eq!(a, content_hash(&[b"abc", b"def"]));
        assert_ne!(a, content_hash(&[b"abd", b"def"]));
        assert!(a.starts_with("fnv64:"));
    }
}
