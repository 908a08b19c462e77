//! Travel-time oracle: grid graphs, dense node-to-node matrices, or scaled
//! Euclidean distances, with an optional piecewise-constant congestion profile.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::Secs;

/// Index of a node in the loaded network.
pub type NodeId = u32;

/// Sentinel in dense matrix files marking an unreachable pair.
pub const UNREACHABLE_SENTINEL: u32 = u32::MAX;

/// A position in the network: node index plus planar coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub node: NodeId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMetric {
    Euclidean,
    Manhattan,
    ShortestPath,
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("no path between node {from} and node {to}")]
    UnreachablePair { from: NodeId, to: NodeId },
    #[error("node {0} is not part of the network")]
    InvalidNode(NodeId),
    #[error("network carries no coordinates; planar metrics unavailable")]
    MissingCoordinates,
    #[error("malformed travel-time matrix: {0}")]
    MalformedMatrix(String),
    #[error("malformed congestion profile: {0}")]
    MalformedProfile(String),
}

/// Hourly velocity ratios. Effective travel time is base time divided by the
/// ratio in force at the departure instant; hours wrap modulo one day.
#[derive(Debug, Clone)]
pub struct CongestionProfile {
    /// (hour_start, ratio) sorted by hour_start, hour_start in [0, 24).
    segments: Vec<(f64, f64)>,
}

impl CongestionProfile {
    pub fn new(mut segments: Vec<(f64, f64)>) -> Result<Self, NetworkError> {
        for &(h, r) in &segments {
            if !(0.0..24.0).contains(&h) {
                return Err(NetworkError::MalformedProfile(format!(
                    "hour_start {h} outside [0, 24)"
                )));
            }
            if !(r > 0.0) || !r.is_finite() {
                return Err(NetworkError::MalformedProfile(format!(
                    "velocity ratio {r} must be finite and positive"
                )));
            }
        }
        segments.sort_by(|a, b| a.0.total_cmp(&b.0));
        if segments.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(NetworkError::MalformedProfile(
                "duplicate hour_start".into(),
            ));
        }
        Ok(Self { segments })
    }

    /// Parses `hour_start,ratio` lines. A `#` prefix or a `hour_start` header
    /// line is skipped. Hours not covered by any segment fall back to 1.0.
    pub fn parse_csv(text: &str) -> Result<Self, NetworkError> {
        let mut segments = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("hour") {
                continue;
            }
            let mut it = line.split(',');
            let (h, r) = (it.next(), it.next());
            let parse = |s: Option<&str>| {
                s.and_then(|v| v.trim().parse::<f64>().ok()).ok_or_else(|| {
                    NetworkError::MalformedProfile(format!("line {}: expected hour,ratio", idx + 1))
                })
            };
            segments.push((parse(h)?, parse(r)?));
        }
        Self::new(segments)
    }

    /// Ratio in force at absolute time `t` (seconds); 1.0 where undefined.
    pub fn ratio_at(&self, t: Secs) -> f64 {
        let hour = (t / 3600.0).rem_euclid(24.0);
        let mut ratio = 1.0;
        for &(start, r) in &self.segments {
            if start <= hour {
                ratio = r;
            } else {
                break;
            }
        }
        ratio
    }
}

enum Topology {
    Grid {
        adjacency: Vec<Vec<(NodeId, f64)>>,
        sp_cache: RwLock<Vec<Option<Arc<[f64]>>>>,
    },
    Matrix {
        secs: Vec<u32>,
    },
    Euclid {
        speed_mps: f64,
    },
}

/// Immutable travel-time oracle. Safe to query concurrently.
pub struct Network {
    topology: Topology,
    coords: Option<Vec<(f64, f64)>>,
    n: usize,
    congestion: Option<CongestionProfile>,
}

impl Network {
    /// Rectangular grid of `width * height` nodes, 4-connected, every edge
    /// `edge_m` meters long and traversed at `speed_mps`.
    pub fn grid(width: u32, height: u32, edge_m: f64, speed_mps: f64) -> Network {
        assert!(width >= 1 && height >= 1, "grid must have at least one node");
        assert!(edge_m > 0.0 && speed_mps > 0.0, "edge length and speed must be positive");
        let n = (width as usize) * (height as usize);
        let edge_secs = edge_m / speed_mps;
        let mut adjacency = vec![Vec::with_capacity(4); n];
        let mut coords = Vec::with_capacity(n);
        for row in 0..height {
            for col in 0..width {
                let node = (row * width + col) as usize;
                coords.push((col as f64 * edge_m, row as f64 * edge_m));
                let mut push = |r: i64, c: i64| {
                    if r >= 0 && r < height as i64 && c >= 0 && c < width as i64 {
                        adjacency[node].push(((r as u32 * width + c as u32) as NodeId, edge_secs));
                    }
                };
                push(row as i64 - 1, col as i64);
                push(row as i64 + 1, col as i64);
                push(row as i64, col as i64 - 1);
                push(row as i64, col as i64 + 1);
            }
        }
        Network {
            topology: Topology::Grid {
                adjacency,
                sp_cache: RwLock::new(vec![None; n]),
            },
            coords: Some(coords),
            n,
            congestion: None,
        }
    }

    /// Straight-line travel at a single speed between the given coordinates.
    pub fn euclid(coords: Vec<(f64, f64)>, speed_mps: f64) -> Network {
        assert!(!coords.is_empty(), "need at least one node");
        assert!(speed_mps > 0.0, "speed must be positive");
        let n = coords.len();
        Network {
            topology: Topology::Euclid { speed_mps },
            coords: Some(coords),
            n,
            congestion: None,
        }
    }

    /// Euclidean-travel network with nodes laid out on a regular grid.
    pub fn euclid_grid(width: u32, height: u32, edge_m: f64, speed_mps: f64) -> Network {
        let mut coords = Vec::with_capacity((width as usize) * (height as usize));
        for row in 0..height {
            for col in 0..width {
                coords.push((col as f64 * edge_m, row as f64 * edge_m));
            }
        }
        Network::euclid(coords, speed_mps)
    }

    /// Dense node-to-node base times in seconds, row-major. `u32::MAX` marks
    /// an unreachable pair. Coordinates are optional; without them only the
    /// shortest-path context metric is available.
    pub fn from_matrix(
        secs: Vec<u32>,
        coords: Option<Vec<(f64, f64)>>,
    ) -> Result<Network, NetworkError> {
        let n = (secs.len() as f64).sqrt() as usize;
        if n * n != secs.len() || n == 0 {
            return Err(NetworkError::MalformedMatrix(format!(
                "expected a non-empty square matrix, got {} entries",
                secs.len()
            )));
        }
        for (i, &d) in secs.iter().step_by(n + 1).enumerate() {
            if d != 0 {
                return Err(NetworkError::MalformedMatrix(format!(
                    "diagonal entry ({i},{i}) must be 0, got {d}"
                )));
            }
        }
        if let Some(c) = &coords {
            if c.len() != n {
                return Err(NetworkError::MalformedMatrix(format!(
                    "coordinate table has {} rows for {} nodes",
                    c.len(),
                    n
                )));
            }
        }
        Ok(Network {
            topology: Topology::Matrix { secs },
            coords,
            n,
            congestion: None,
        })
    }

    /// Decodes the dense matrix byte format: a little-endian u32 node count
    /// followed by `count * count` little-endian u32 seconds.
    pub fn decode_matrix(bytes: &[u8]) -> Result<Vec<u32>, NetworkError> {
        if bytes.len() < 4 {
            return Err(NetworkError::MalformedMatrix("missing header".into()));
        }
        let n = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let expected = 4 + n * n * 4;
        if bytes.len() != expected {
            return Err(NetworkError::MalformedMatrix(format!(
                "expected {expected} bytes for {n} nodes, got {}",
                bytes.len()
            )));
        }
        Ok(bytes[4..]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    /// Encodes base times into the dense matrix byte format.
    pub fn encode_matrix(n: u32, secs: &[u32]) -> Vec<u8> {
        assert_eq!((n as usize) * (n as usize), secs.len());
        let mut out = Vec::with_capacity(4 + secs.len() * 4);
        out.extend_from_slice(&n.to_le_bytes());
        for &s in secs {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn with_congestion(mut self, profile: CongestionProfile) -> Network {
        self.congestion = Some(profile);
        self
    }

    pub fn congestion(&self) -> Option<&CongestionProfile> {
        self.congestion.as_ref()
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn has_coords(&self) -> bool {
        self.coords.is_some()
    }

    pub fn location(&self, node: NodeId) -> Result<Location, NetworkError> {
        if (node as usize) >= self.n {
            return Err(NetworkError::InvalidNode(node));
        }
        let (x, y) = match &self.coords {
            Some(c) => c[node as usize],
            None => (0.0, 0.0),
        };
        Ok(Location { node, x, y })
    }

    /// Base travel time in seconds, ignoring congestion.
    pub fn base_travel_time(&self, from: NodeId, to: NodeId) -> Result<Secs, NetworkError> {
        if (from as usize) >= self.n {
            return Err(NetworkError::InvalidNode(from));
        }
        if (to as usize) >= self.n {
            return Err(NetworkError::InvalidNode(to));
        }
        if from == to {
            return Ok(0.0);
        }
        match &self.topology {
            Topology::Grid { .. } => {
                let row = self.grid_row(from);
                let t = row[to as usize];
                if t.is_finite() {
                    Ok(t)
                } else {
                    Err(NetworkError::UnreachablePair { from, to })
                }
            }
            Topology::Matrix { secs } => {
                let t = secs[from as usize * self.n + to as usize];
                if t == UNREACHABLE_SENTINEL {
                    Err(NetworkError::UnreachablePair { from, to })
                } else {
                    Ok(t as Secs)
                }
            }
            Topology::Euclid { speed_mps } => {
                let c = self.coords.as_ref().expect("euclid mode always has coords");
                let (ax, ay) = c[from as usize];
                let (bx, by) = c[to as usize];
                Ok(((ax - bx).hypot(ay - by)) / speed_mps)
            }
        }
    }

    fn grid_row(&self, src: NodeId) -> Arc<[f64]> {
        let Topology::Grid { adjacency, sp_cache } = &self.topology else {
            unreachable!("grid_row called on non-grid network")
        };
        if let Some(row) = &sp_cache.read().unwrap()[src as usize] {
            return Arc::clone(row);
        }
        let row: Arc<[f64]> = dijkstra(adjacency, src as usize).into();
        let mut cache = sp_cache.write().unwrap();
        cache[src as usize].get_or_insert_with(|| Arc::clone(&row));
        Arc::clone(cache[src as usize].as_ref().unwrap())
    }
}

/// Single-source shortest path times over an adjacency list.
/// Unreachable nodes get `f64::INFINITY`.
fn dijkstra(adjacency: &[Vec<(NodeId, f64)>], src: usize) -> Vec<f64> {
    #[derive(PartialEq)]
    struct Entry {
        dist: f64,
        node: usize,
    }
    impl Eq for Entry {}
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> Ordering {
            // reversed: BinaryHeap is a max-heap
            other
                .dist
                .total_cmp(&self.dist)
                .then_with(|| other.node.cmp(&self.node))
        }
    }
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }

    let mut dist = vec![f64::INFINITY; adjacency.len()];
    dist[src] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Entry { dist: 0.0, node: src });
    while let Some(Entry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, w) in &adjacency[node] {
            let nd = d + w;
            if nd < dist[next as usize] {
                dist[next as usize] = nd;
                heap.push(Entry { dist: nd, node: next as usize });
            }
        }
    }
    dist
}

/// A read view over the oracle that fixes whether the congestion profile is
/// in force. The scheduler hands an unaware planner the same network with the
/// profile switched off.
#[derive(Clone, Copy)]
pub struct TimeView<'a> {
    net: &'a Network,
    congestion_active: bool,
}

impl<'a> TimeView<'a> {
    pub fn new(net: &'a Network, congestion_active: bool) -> Self {
        Self { net, congestion_active }
    }

    /// Base times only, profile ignored.
    pub fn base(net: &'a Network) -> Self {
        Self { net, congestion_active: false }
    }

    pub fn network(&self) -> &'a Network {
        self.net
    }

    /// Effective travel time for a departure at `depart`: base time divided by
    /// the velocity ratio sampled at the departure instant.
    pub fn travel_time(&self, from: Location, to: Location, depart: Secs) -> Result<Secs, NetworkError> {
        let base = self.net.base_travel_time(from.node, to.node)?;
        if self.congestion_active {
            if let Some(profile) = &self.net.congestion {
                return Ok(base / profile.ratio_at(depart));
            }
        }
        Ok(base)
    }
}

/// Minimal base travel time between two nodes.
pub fn shortest_path_time(net: &Network, from: NodeId, to: NodeId) -> Result<Secs, NetworkError> {
    net.base_travel_time(from, to)
}

/// Distance used by the context-mapping module to rank vehicles.
pub fn context_distance(
    metric: DistanceMetric,
    net: &Network,
    a: &Location,
    b: &Location,
) -> Result<f64, NetworkError> {
    match metric {
        DistanceMetric::Euclidean => {
            if !net.has_coords() {
                return Err(NetworkError::MissingCoordinates);
            }
            Ok((a.x - b.x).hypot(a.y - b.y))
        }
        DistanceMetric::Manhattan => {
            if !net.has_coords() {
                return Err(NetworkError::MissingCoordinates);
            }
            Ok((a.x - b.x).abs() + (a.y - b.y).abs())
        }
        DistanceMetric::ShortestPath => shortest_path_time(net, a.node, b.node),
    }
}
