//! Run configuration and the small spec grammars used on the command line.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

use fleetmatch::contextmap::ContextConfig;
use fleetmatch::darp::{CostKind, CostModel, SolverChoice};
use fleetmatch::network::{CongestionProfile, DistanceMetric, Network};
use fleetmatch::scheduler::{CompanySpec, SchedulerConfig};
use fleetmatch::Secs;

/// Network selection: `grid:WxH:EDGE_M:SPEED`, `matrix:PATH`, or
/// `euclid:SPEED[:WxH:EDGE_M]` (straight-line travel over a grid layout,
/// 100x100 nodes of 100 m by default).
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkSpec {
    Grid { width: u32, height: u32, edge_m: f64, speed: f64 },
    Matrix { path: PathBuf },
    Euclid { speed: f64, width: u32, height: u32, edge_m: f64 },
}

fn parse_dims(s: &str) -> Result<(u32, u32)> {
    let (w, h) = s
        .split_once('x')
        .ok_or_else(|| anyhow!("expected WxH, got '{s}'"))?;
    Ok((w.parse().context("bad width")?, h.parse().context("bad height")?))
}

impl FromStr for NetworkSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<NetworkSpec> {
        let mut parts = s.split(':');
        match parts.next() {
            Some("grid") => {
                let dims = parts.next().ok_or_else(|| anyhow!("grid needs WxH"))?;
                let (width, height) = parse_dims(dims)?;
                let edge_m: f64 = parts
                    .next()
                    .ok_or_else(|| anyhow!("grid needs an edge length"))?
                    .parse()
                    .context("bad edge length")?;
                let speed: f64 = parts
                    .next()
                    .ok_or_else(|| anyhow!("grid needs a speed"))?
                    .parse()
                    .context("bad speed")?;
                Ok(NetworkSpec::Grid { width, height, edge_m, speed })
            }
            Some("matrix") => {
                let path = parts.next().ok_or_else(|| anyhow!("matrix needs a path"))?;
                Ok(NetworkSpec::Matrix { path: PathBuf::from(path) })
            }
            Some("euclid") => {
                let speed: f64 = parts
                    .next()
                    .ok_or_else(|| anyhow!("euclid needs a speed"))?
                    .parse()
                    .context("bad speed")?;
                let (width, height, edge_m) = match parts.next() {
                    Some(dims) => {
                        let (w, h) = parse_dims(dims)?;
                        let edge: f64 = parts
                            .next()
                            .ok_or_else(|| anyhow!("euclid layout needs an edge length"))?
                            .parse()
                            .context("bad edge length")?;
                        (w, h, edge)
                    }
                    None => (100, 100, 100.0),
                };
                Ok(NetworkSpec::Euclid { speed, width, height, edge_m })
            }
            _ => bail!("unknown network spec '{s}' (grid:..., matrix:..., euclid:...)"),
        }
    }
}

impl NetworkSpec {
    /// Builds the oracle. Matrix mode reads the binary matrix file and, when
    /// `PATH.coords.csv` exists next to it, a `node,x,y` coordinate table.
    pub fn build(&self) -> Result<Network> {
        match self {
            NetworkSpec::Grid { width, height, edge_m, speed } => {
                Ok(Network::grid(*width, *height, *edge_m, *speed))
            }
            NetworkSpec::Euclid { speed, width, height, edge_m } => {
                Ok(Network::euclid_grid(*width, *height, *edge_m, *speed))
            }
            NetworkSpec::Matrix { path } => {
                let bytes = std::fs::read(path)
                    .with_context(|| format!("reading matrix file {}", path.display()))?;
                let secs = Network::decode_matrix(&bytes)?;
                let sidecar = PathBuf::from(format!("{}.coords.csv", path.display()));
                let coords = if sidecar.exists() {
                    Some(read_coords(&sidecar, (secs.len() as f64).sqrt() as usize)?)
                } else {
                    None
                };
                Ok(Network::from_matrix(secs, coords)?)
            }
        }
    }
}

fn read_coords(path: &PathBuf, n: usize) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading coordinates {}", path.display()))?;
    let mut coords = vec![None; n];
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("node") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            bail!("{}:{}: expected node,x,y", path.display(), idx + 1);
        }
        let node: usize = fields[0].parse().with_context(|| format!("line {}", idx + 1))?;
        if node >= n {
            bail!("{}:{}: node {} outside 0..{}", path.display(), idx + 1, node, n);
        }
        coords[node] = Some((fields[1].parse()?, fields[2].parse()?));
    }
    coords
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| anyhow!("{}: node {} has no coordinates", path.display(), i)))
        .collect()
}

/// Parses the company spec `share:fleet[,share:fleet]`, e.g. `0.75:30,0.25:10`.
pub fn parse_companies(s: &str) -> Result<Vec<CompanySpec>> {
    let mut out = Vec::new();
    for (i, part) in s.split(',').enumerate() {
        let (share, fleet) = part
            .split_once(':')
            .ok_or_else(|| anyhow!("company '{part}' must be share:fleet"))?;
        out.push(CompanySpec {
            id: i as u32 + 1,
            share: share.parse().context("bad share")?,
            fleet: fleet.parse().context("bad fleet size")?,
        });
    }
    Ok(out)
}

pub fn parse_cost_kind(s: &str) -> Result<CostKind> {
    match s {
        "td" => Ok(CostKind::TotalDuration),
        "wt" => Ok(CostKind::WaitingTime),
        "dt" => Ok(CostKind::DetourTime),
        _ => bail!("cost must be td, wt, or dt"),
    }
}

pub fn parse_solver(s: &str) -> Result<SolverChoice> {
    match s {
        "auto" => Ok(SolverChoice::Auto),
        "insertion" => Ok(SolverChoice::Insertion),
        "lns" => Ok(SolverChoice::Lns),
        _ => bail!("darp solver must be auto, insertion, or lns"),
    }
}

pub fn parse_metric(s: &str) -> Result<DistanceMetric> {
    match s {
        "euclidean" => Ok(DistanceMetric::Euclidean),
        "manhattan" => Ok(DistanceMetric::Manhattan),
        "shortest-path" => Ok(DistanceMetric::ShortestPath),
        _ => bail!("metric must be euclidean, manhattan, or shortest-path"),
    }
}

pub fn parse_switch(s: &str) -> Result<bool> {
    match s {
        "on" | "y" | "yes" | "true" => Ok(true),
        "off" | "n" | "no" | "false" => Ok(false),
        _ => bail!("expected on/off or y/n, got '{s}'"),
    }
}

/// Everything one run needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub requests: PathBuf,
    pub network: NetworkSpec,
    pub fleet: u32,
    pub capacity: u32,
    pub maxn: usize,
    pub batch_period: Secs,
    pub cost_kind: CostKind,
    pub solver: SolverChoice,
    pub metric: DistanceMetric,
    pub rebalance: bool,
    pub accept_rebalance: bool,
    pub pipeline_factor: u32,
    pub companies: Vec<CompanySpec>,
    pub scenario: Option<PathBuf>,
    pub congestion_profile: Option<PathBuf>,
    pub congestion_aware: bool,
    pub max_wait: Secs,
    pub max_detour: Secs,
    pub seed: u64,
    pub warmup: Secs,
    /// Simulated end time; defaults to the last request plus a drain period.
    pub duration: Option<Secs>,
    pub threads: usize,
    pub out_dir: PathBuf,
    /// Dump each batch's solved cost table for offline inspection.
    pub lap_dump_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn scheduler_config(&self) -> SchedulerConfig {
        SchedulerConfig {
            batch_period: self.batch_period,
            cost: CostModel {
                kind: self.cost_kind,
                solver: self.solver,
                ..CostModel::default()
            },
            context: ContextConfig {
                max_candidates: self.maxn,
                metric: self.metric,
                ..ContextConfig::default()
            },
            rebalancing: self.rebalance,
            accept_rebalance: self.accept_rebalance,
            pipeline_factor: self.pipeline_factor,
            companies: self.companies.clone(),
            congestion_aware: self.congestion_aware,
            threads: self.threads,
            lap_dump_dir: self.lap_dump_dir.clone(),
        }
    }

    pub fn load_congestion(&self) -> Result<Option<CongestionProfile>> {
        match &self.congestion_profile {
            None => Ok(None),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading congestion profile {}", path.display()))?;
                Ok(Some(CongestionProfile::parse_csv(&text)?))
            }
        }
    }

    /// Company fleet slices, or the whole fleet under a single operator.
    pub fn company_fleets(&self) -> Result<Vec<(u32, u32)>> {
        if self.companies.is_empty() {
            return Ok(vec![(0, self.fleet)]);
        }
        let total: u32 = self.companies.iter().map(|c| c.fleet).sum();
        if total != self.fleet {
            bail!("company fleets sum to {total}, --fleet says {}", self.fleet);
        }
        Ok(self
            .companies
            .iter()
            .enumerate()
            .map(|(i, c)| (i as u32, c.fleet))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn network_specs_parse() {
        assert_eq!(
            "grid:20x20:100:10".parse::<NetworkSpec>().unwrap(),
            NetworkSpec::Grid { width: 20, height: 20, edge_m: 100.0, speed: 10.0 }
        );
        assert_eq!(
            "euclid:7".parse::<NetworkSpec>().unwrap(),
            NetworkSpec::Euclid { speed: 7.0, width: 100, height: 100, edge_m: 100.0 }
        );
        assert_eq!(
            "euclid:5:10x4:50".parse::<NetworkSpec>().unwrap(),
            NetworkSpec::Euclid { speed: 5.0, width: 10, height: 4, edge_m: 50.0 }
        );
        assert!(matches!(
            "matrix:/tmp/m.bin".parse::<NetworkSpec>().unwrap(),
            NetworkSpec::Matrix { .. }
        ));
        assert!("grid:20x20".parse::<NetworkSpec>().is_err());
        assert!("mesh:3".parse::<NetworkSpec>().is_err());
    }

    #[test]
    fn company_specs_parse() {
        let c = parse_companies("0.75:30,0.25:10").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].share, 0.75);
        assert_eq!(c[1].fleet, 10);
        assert_eq!((c[0].id, c[1].id), (1, 2));
        assert!(parse_companies("0.75").is_err());
    }
}
