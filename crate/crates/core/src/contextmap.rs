//! Context mapping: picks, per new request, the candidate vehicles that will
//! be asked to price the insertion, bounding both communication and routing
//! work.

use rand_chacha::ChaCha8Rng;

use crate::model::{FleetState, TripRequest, VehicleId, VehicleStatus};
use crate::network::{context_distance, DistanceMetric, Network};
use crate::Secs;

#[derive(Debug, Clone, Copy)]
pub struct ContextConfig {
    /// Cap on idle candidates and on occupied candidates; at most twice this
    /// many vehicles are returned per request.
    pub max_candidates: usize,
    pub metric: DistanceMetric,
    /// Random-stream id for the occupied-vehicle sampling.
    pub stream: u64,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig { max_candidates: 8, metric: DistanceMetric::Euclidean, stream: 1 }
    }
}

/// Selects the nearest available idle vehicles plus a uniform sample of the
/// available occupied ones. Vehicles that are full, on break, or at their
/// pipeline cap never appear. Distance is measured from the vehicle position
/// to the request origin; idle ties break on vehicle id.
pub fn candidate_vehicles(
    request: &TripRequest,
    fleet: &FleetState,
    cfg: &ContextConfig,
    net: &Network,
    pipeline_factor: u32,
    now: Secs,
    rng: &mut ChaCha8Rng,
) -> Vec<VehicleId> {
    let mut idle: Vec<(f64, VehicleId)> = Vec::new();
    let mut occupied: Vec<VehicleId> = Vec::new();
    for v in &fleet.vehicles {
        if v.pipeline_len() >= (pipeline_factor * v.capacity) as usize {
            continue;
        }
        match v.status(now) {
            VehicleStatus::Idle => {
                let d = context_distance(cfg.metric, net, &v.position, &request.origin)
                    .unwrap_or(f64::INFINITY);
                idle.push((d, v.id));
            }
            VehicleStatus::OccupiedAvailable => occupied.push(v.id),
            VehicleStatus::Full | VehicleStatus::OnBreak => {}
        }
    }
    idle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    idle.truncate(cfg.max_candidates);

    occupied.sort_unstable();
    let take = cfg.max_candidates.min(occupied.len());
    let sampled = rand::seq::index::sample(rng, occupied.len(), take);
    let mut sampled: Vec<VehicleId> = sampled.into_iter().map(|i| occupied[i]).collect();
    sampled.sort_unstable();

    let mut out: Vec<VehicleId> = idle.into_iter().map(|(_, id)| id).collect();
    out.extend(sampled);
    out
}
