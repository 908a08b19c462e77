//! Synthetic demand generation: Poisson arrivals with origins and
//! destinations drawn from spatial hotspot mixtures.

use anyhow::{bail, Result};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use fleetmatch::network::{Network, NodeId};
use fleetmatch::{stream_rng, Secs};

const STREAM_DEMAND_GEN: u64 = 6;

/// One mixture component: nodes within `radius_m` of the center node's
/// coordinates, drawn with probability proportional to `weight`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hotspot {
    pub node: NodeId,
    pub weight: f64,
    pub radius_m: f64,
}

/// Parses `node:weight:radius_m[,node:weight:radius_m...]`.
pub fn parse_hotspots(s: &str) -> Result<Vec<Hotspot>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let fields: Vec<&str> = part.split(':').collect();
        if fields.len() != 3 {
            bail!("hotspot '{part}' must be node:weight:radius_m");
        }
        out.push(Hotspot {
            node: fields[0].parse()?,
            weight: fields[1].parse()?,
            radius_m: fields[2].parse()?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DemandSpec {
    pub rate_per_hour: f64,
    pub duration_s: Secs,
    pub start_s: Secs,
    /// Empty means uniform over all nodes.
    pub origin_hotspots: Vec<Hotspot>,
    pub dest_hotspots: Vec<Hotspot>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandRow {
    pub id: u64,
    pub time_s: Secs,
    pub origin: NodeId,
    pub dest: NodeId,
}

struct Mixture {
    /// (cumulative weight, candidate nodes) per component.
    components: Vec<(f64, Vec<NodeId>)>,
    total_weight: f64,
}

impl Mixture {
    fn build(hotspots: &[Hotspot], net: &Network) -> Result<Mixture> {
        if hotspots.is_empty() {
            let all: Vec<NodeId> = (0..net.num_nodes() as u32).collect();
            return Ok(Mixture { components: vec![(1.0, all)], total_weight: 1.0 });
        }
        let mut components = Vec::new();
        let mut acc = 0.0;
        for h in hotspots {
            if !(h.weight > 0.0) {
                bail!("hotspot weight must be positive");
            }
            let center = net.location(h.node)?;
            let nodes: Vec<NodeId> = (0..net.num_nodes() as u32)
                .filter(|&n| {
                    let l = net.location(n).expect("node in range");
                    (l.x - center.x).hypot(l.y - center.y) <= h.radius_m
                })
                .collect();
            if nodes.is_empty() {
                bail!("hotspot at node {} covers no nodes", h.node);
            }
            acc += h.weight;
            components.push((acc, nodes));
        }
        Ok(Mixture { components, total_weight: acc })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> NodeId {
        let pick = rng.random_range(0.0..self.total_weight);
        let component = self
            .components
            .iter()
            .find(|(acc, _)| pick < *acc)
            .unwrap_or(self.components.last().expect("nonempty mixture"));
        component.1[rng.random_range(0..component.1.len())]
    }
}

/// Draws Poisson arrivals over `[start_s, start_s + duration_s)` and samples
/// origin/destination pairs from the mixtures, rejecting same-node trips.
/// Reproducible for a fixed seed.
pub fn generate_demand(spec: &DemandSpec, net: &Network, seed: u64) -> Result<Vec<DemandRow>> {
    if spec.rate_per_hour < 0.0 || !spec.rate_per_hour.is_finite() {
        bail!("rate must be finite and nonnegative");
    }
    if net.num_nodes() < 2 && spec.rate_per_hour > 0.0 {
        bail!("need at least two nodes to generate trips");
    }
    let origins = Mixture::build(&spec.origin_hotspots, net)?;
    let dests = Mixture::build(&spec.dest_hotspots, net)?;
    let mut rng = stream_rng(seed, STREAM_DEMAND_GEN);
    let mut rows = Vec::new();
    if spec.rate_per_hour == 0.0 {
        return Ok(rows);
    }
    let lambda = spec.rate_per_hour / 3600.0;
    let mut t = spec.start_s;
    let mut id = 1u64;
    loop {
        let gap = -(1.0 - rng.random_range(0.0..1.0_f64)).ln() / lambda;
        t += gap;
        if t >= spec.start_s + spec.duration_s {
            break;
        }
        let origin = origins.sample(&mut rng);
        let dest = loop {
            let d = dests.sample(&mut rng);
            if d != origin {
                break d;
            }
        };
        rows.push(DemandRow { id, time_s: t, origin, dest });
        id += 1;
    }
    Ok(rows)
}

pub fn rows_to_csv(rows: &[DemandRow]) -> String {
    let mut out = String::from("id,request_time_s,origin_node,dest_node\n");
    for r in rows {
        out.push_str(&format!("{},{:.3},{},{}\n", r.id, r.time_s, r.origin, r.dest));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> Network {
        Network::grid(10, 10, 100.0, 10.0)
    }

    fn spec(rate: f64) -> DemandSpec {
        DemandSpec {
            rate_per_hour: rate,
            duration_s: 3600.0,
            start_s: 0.0,
            origin_hotspots: Vec::new(),
            dest_hotspots: Vec::new(),
        }
    }

    #[test]
    fn zero_rate_gives_an_empty_stream() {
        assert!(generate_demand(&spec(0.0), &net(), 1).unwrap().is_empty());
    }

    #[test]
    fn hourly_count_is_poisson_like() {
        let rows = generate_demand(&spec(360.0), &net(), 42).unwrap();
        // 3 sigma of a Poisson(360)
        let n = rows.len() as f64;
        assert!((n - 360.0).abs() < 3.0 * 360.0_f64.sqrt(), "count {n}");
        assert!(rows.windows(2).all(|w| w[0].time_s <= w[1].time_s));
        assert!(rows.iter().all(|r| r.origin != r.dest));
        // reproducible
        assert_eq!(rows, generate_demand(&spec(360.0), &net(), 42).unwrap());
        assert_ne!(rows, generate_demand(&spec(360.0), &net(), 43).unwrap());
    }

    #[test]
    fn single_point_hotspot_pins_all_origins() {
        let mut s = spec(100.0);
        s.origin_hotspots = vec![Hotspot { node: 55, weight: 1.0, radius_m: 0.0 }];
        let rows = generate_demand(&s, &net(), 9).unwrap();
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| r.origin == 55));
    }

    #[test]
    fn hotspot_radius_confines_sampling() {
        let mut s = spec(200.0);
        // node 0 corner, radius one edge: nodes 0, 1, 10
        s.origin_hotspots = vec![Hotspot { node: 0, weight: 1.0, radius_m: 100.0 }];
        let rows = generate_demand(&s, &net(), 9).unwrap();
        assert!(rows.iter().all(|r| [0u32, 1, 10].contains(&r.origin)));
    }

    #[test]
    fn csv_roundtrip_shape() {
        let rows = vec![DemandRow { id: 1, time_s: 12.5, origin: 3, dest: 7 }];
        let csv = rows_to_csv(&rows);
        assert_eq!(csv, "id,request_time_s,origin_node,dest_node\n1,12.500,3,7\n");
    }

    #[test]
    fn hotspot_spec_parses() {
        let h = parse_hotspots("5:2.0:300,80:1:0").unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h[0], Hotspot { node: 5, weight: 2.0, radius_m: 300.0 });
        assert!(parse_hotspots("5:1").is_err());
    }
}
