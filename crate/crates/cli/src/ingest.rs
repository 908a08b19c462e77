//! Request-stream ingestion.
//!
//! Schema: `id,request_time_s,origin_node,dest_node` with optional trailing
//! `earliest_pickup_s,latest_pickup_s` columns. Six columns switch the whole
//! file to scheduled mode, where the customer supplies the pickup window.

use std::collections::HashSet;

use anyhow::{bail, Context, Result};

use fleetmatch::model::{RequestId, TimeLimits, TripRequest};
use fleetmatch::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestMode {
    Instantaneous,
    Scheduled,
}

#[derive(Debug)]
pub struct IngestOutcome {
    /// Time-sorted stream.
    pub requests: Vec<TripRequest>,
    pub mode: RequestMode,
    pub warnings: Vec<String>,
}

pub fn ingest_requests(
    text: &str,
    source: &str,
    net: &Network,
    limits: TimeLimits,
) -> Result<IngestOutcome> {
    let mut requests = Vec::new();
    let mut warnings = Vec::new();
    let mut mode: Option<RequestMode> = None;
    let mut seen = HashSet::new();
    let mut last_time = f64::NEG_INFINITY;
    let mut sorted = true;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("id,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let line_mode = match fields.len() {
            4 => RequestMode::Instantaneous,
            6 => RequestMode::Scheduled,
            n => bail!("{source}:{lineno}: expected 4 or 6 columns, got {n}"),
        };
        match mode {
            None => mode = Some(line_mode),
            Some(m) if m != line_mode => {
                bail!("{source}:{lineno}: mixed instantaneous and scheduled rows")
            }
            _ => {}
        }
        let id: u64 = fields[0]
            .parse()
            .with_context(|| format!("{source}:{lineno}: bad id '{}'", fields[0]))?;
        if !seen.insert(id) {
            bail!("{source}:{lineno}: duplicate request id {id}");
        }
        let time: f64 = fields[1]
            .parse()
            .with_context(|| format!("{source}:{lineno}: bad request time"))?;
        let origin_node: u32 = fields[2]
            .parse()
            .with_context(|| format!("{source}:{lineno}: bad origin node"))?;
        let dest_node: u32 = fields[3]
            .parse()
            .with_context(|| format!("{source}:{lineno}: bad destination node"))?;
        if origin_node == dest_node {
            bail!("{source}:{lineno}: degenerate trip (origin == destination node {origin_node})");
        }
        let origin = net
            .location(origin_node)
            .with_context(|| format!("{source}:{lineno}: origin"))?;
        let destination = net
            .location(dest_node)
            .with_context(|| format!("{source}:{lineno}: destination"))?;

        let request = match line_mode {
            RequestMode::Instantaneous => TripRequest::instantaneous(
                RequestId(id),
                origin,
                destination,
                time,
                limits,
                net,
            )
            .with_context(|| format!("{source}:{lineno}"))?,
            RequestMode::Scheduled => {
                let earliest: f64 = fields[4]
                    .parse()
                    .with_context(|| format!("{source}:{lineno}: bad earliest pickup"))?;
                let latest: f64 = fields[5]
                    .parse()
                    .with_context(|| format!("{source}:{lineno}: bad latest pickup"))?;
                if earliest > latest {
                    bail!("{source}:{lineno}: pickup window inverted");
                }
                TripRequest::scheduled(
                    RequestId(id),
                    origin,
                    destination,
                    time,
                    (earliest, latest),
                    limits,
                    net,
                )
                .with_context(|| format!("{source}:{lineno}"))?
            }
        };
        if time < last_time {
            sorted = false;
        }
        last_time = time;
        requests.push(request);
    }

    if !sorted {
        warnings.push(format!("{source}: request times out of order; stream sorted internally"));
        requests.sort_by(|a, b| a.request_time.total_cmp(&b.request_time).then(a.id.cmp(&b.id)));
    }
    Ok(IngestOutcome {
        requests,
        mode: mode.unwrap_or(RequestMode::Instantaneous),
        warnings,
    })
}
