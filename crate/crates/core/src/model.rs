//! Domain records shared by every stage: trip requests, vehicles and their
//! stop schedules, and the fleet snapshot the scheduler mutates between
//! batches.

use std::collections::HashMap;
use std::fmt;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::network::{shortest_path_time, Location, Network, NetworkError, TimeView};
use crate::Secs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RequestId(pub u64);

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Per-request time limitations: maximum wait before pickup, maximum extra
/// trip time, and an optional cap on the total journey length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeLimits {
    pub max_wait: Secs,
    pub max_detour: Secs,
    pub max_journey: Option<Secs>,
}

impl TimeLimits {
    pub fn new(max_wait: Secs, max_detour: Secs) -> TimeLimits {
        assert!(max_wait >= 0.0, "max_wait must be nonnegative");
        assert!(max_detour >= 0.0, "max_detour must be nonnegative");
        TimeLimits { max_wait, max_detour, max_journey: None }
    }

    pub fn with_max_journey(mut self, max_journey: Secs) -> TimeLimits {
        self.max_journey = Some(max_journey);
        self
    }
}

/// One customer booking with its derived pickup and delivery windows.
/// Windows are fixed at creation and never re-tightened.
#[derive(Debug, Clone)]
pub struct TripRequest {
    pub id: RequestId,
    pub origin: Location,
    pub destination: Location,
    pub request_time: Secs,
    /// (earliest, latest) time at origin.
    pub pickup_window: (Secs, Secs),
    /// (earliest, latest) time at destination.
    pub delivery_window: (Secs, Secs),
    /// Base shortest-path time from origin to destination.
    pub direct_time: Secs,
    pub limits: TimeLimits,
}

impl TripRequest {
    /// Builds an instantaneous request: pickup no later than `request_time`
    /// plus the maximum wait, delivery no later than the latest pickup plus
    /// the direct trip plus the maximum detour.
    pub fn instantaneous(
        id: RequestId,
        origin: Location,
        destination: Location,
        request_time: Secs,
        limits: TimeLimits,
        net: &Network,
    ) -> Result<TripRequest, NetworkError> {
        let direct = shortest_path_time(net, origin.node, destination.node)?;
        let pickup = (request_time, request_time + limits.max_wait);
        let delivery = (pickup.0 + direct, pickup.1 + direct + limits.max_detour);
        Ok(TripRequest {
            id,
            origin,
            destination,
            request_time,
            pickup_window: pickup,
            delivery_window: delivery,
            direct_time: direct,
            limits,
        })
    }

    /// Builds a scheduled request: the caller supplies the pickup window and
    /// the delivery window derives from it.
    pub fn scheduled(
        id: RequestId,
        origin: Location,
        destination: Location,
        request_time: Secs,
        pickup_window: (Secs, Secs),
        limits: TimeLimits,
        net: &Network,
    ) -> Result<TripRequest, NetworkError> {
        assert!(pickup_window.0 <= pickup_window.1, "pickup window inverted");
        let direct = shortest_path_time(net, origin.node, destination.node)?;
        let delivery = (pickup_window.0 + direct, pickup_window.1 + direct + limits.max_detour);
        Ok(TripRequest {
            id,
            origin,
            destination,
            request_time,
            pickup_window,
            delivery_window: delivery,
            direct_time: direct,
            limits,
        })
    }

    /// Copy with the latest-pickup and latest-delivery bounds waived, used
    /// for rebalance offers where the time constraints are loosened.
    pub fn with_waived_deadlines(&self) -> TripRequest {
        let mut r = self.clone();
        r.pickup_window.1 = f64::INFINITY;
        r.delivery_window.1 = f64::INFINITY;
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopKind {
    Pickup,
    Delivery,
    /// Empty repositioning move toward a refused request's origin.
    Relocate,
}

/// One scheduled halt of a vehicle.
#[derive(Debug, Clone)]
pub struct Stop {
    pub kind: StopKind,
    pub request: RequestId,
    pub location: Location,
    /// Service time projected by the planner at commit time.
    pub planned_arrival: Secs,
}

impl Stop {
    pub fn new(kind: StopKind, request: RequestId, location: Location) -> Stop {
        Stop { kind, request, location, planned_arrival: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleStatus {
    Idle,
    OccupiedAvailable,
    Full,
    OnBreak,
}

/// A pending request attached to a vehicle, with its pickup state.
#[derive(Debug, Clone)]
pub struct ScheduledRequest {
    pub request: TripRequest,
    pub picked_up_at: Option<Secs>,
}

/// Executed stop, reported by `advance_to` for metrics collection.
#[derive(Debug, Clone, Copy)]
pub struct StopEvent {
    pub vehicle: VehicleId,
    pub request: RequestId,
    pub kind: StopKind,
    pub time: Secs,
}

#[derive(Debug, Clone)]
pub struct VehicleState {
    pub id: VehicleId,
    /// Index into the run's company table; 0 in single-company runs.
    pub company: u32,
    pub capacity: u32,
    /// Last node reached. Between stops the vehicle is reported here.
    pub position: Location,
    /// Instant the vehicle was last at `position`: the departure time of the
    /// leg in flight, or the current clock when idle.
    pub position_time: Secs,
    pub schedule: Vec<Stop>,
    /// Every request with a pending stop, keyed by id; includes onboard ones.
    pub scheduled: HashMap<RequestId, ScheduledRequest>,
    pub on_break_until: Option<Secs>,
}

impl VehicleState {
    pub fn new(id: VehicleId, company: u32, capacity: u32, position: Location) -> VehicleState {
        VehicleState {
            id,
            company,
            capacity,
            position,
            position_time: 0.0,
            schedule: Vec::new(),
            scheduled: HashMap::new(),
            on_break_until: None,
        }
    }

    pub fn onboard_count(&self) -> usize {
        self.scheduled.values().filter(|s| s.picked_up_at.is_some()).count()
    }

    /// Distinct scheduled-but-uncompleted requests (the pipeline).
    pub fn pipeline_len(&self) -> usize {
        self.scheduled.len()
    }

    pub fn has_customer_stops(&self) -> bool {
        self.schedule.iter().any(|s| s.kind != StopKind::Relocate)
    }

    pub fn is_on_break(&self, now: Secs) -> bool {
        self.on_break_until.is_some_and(|until| until > now)
    }

    pub fn status(&self, now: Secs) -> VehicleStatus {
        if self.is_on_break(now) {
            VehicleStatus::OnBreak
        } else if self.onboard_count() >= self.capacity as usize {
            VehicleStatus::Full
        } else if self.has_customer_stops() {
            VehicleStatus::OccupiedAvailable
        } else {
            VehicleStatus::Idle
        }
    }

    /// Executes schedule stops whose service time falls within `to_time`.
    ///
    /// The vehicle departs `position` at `position_time`, waits at pickups
    /// until the earliest pickup time, and serves deliveries on arrival. The
    /// position advances at stop granularity; a vehicle mid-leg keeps its
    /// last node. An idle vehicle just follows the clock.
    pub fn advance_to(&mut self, view: &TimeView, to_time: Secs) -> Vec<StopEvent> {
        let mut events = Vec::new();
        loop {
            let Some(stop) = self.schedule.first() else {
                self.position_time = to_time;
                break;
            };
            let leg = view
                .travel_time(self.position, stop.location, self.position_time)
                .expect("committed stop must be reachable");
            let arrival = self.position_time + leg;
            let service = match stop.kind {
                StopKind::Pickup => {
                    let earliest = self.scheduled[&stop.request].request.pickup_window.0;
                    arrival.max(earliest)
                }
                _ => arrival,
            };
            if service > to_time {
                break;
            }
            let stop = self.schedule.remove(0);
            self.position = stop.location;
            self.position_time = service;
            match stop.kind {
                StopKind::Pickup => {
                    let entry = self
                        .scheduled
                        .get_mut(&stop.request)
                        .expect("pickup stop for unknown request");
                    entry.picked_up_at = Some(service);
                    debug_assert!(self.onboard_count() <= self.capacity as usize);
                }
                StopKind::Delivery => {
                    self.scheduled.remove(&stop.request);
                }
                StopKind::Relocate => {}
            }
            events.push(StopEvent {
                vehicle: self.id,
                request: stop.request,
                kind: stop.kind,
                time: service,
            });
        }
        events
    }
}

/// Snapshot of the whole fleet plus the batch clock.
#[derive(Debug, Clone)]
pub struct FleetState {
    pub vehicles: Vec<VehicleState>,
    pub clock: Secs,
    pub seed: u64,
}

impl FleetState {
    /// Places vehicles uniformly at random over the network nodes. Company
    /// slices are assigned in order: the first `count` vehicles belong to the
    /// first company and so on.
    pub fn init_random(
        company_fleets: &[(u32, u32)],
        capacity: u32,
        net: &Network,
        seed: u64,
    ) -> FleetState {
        let mut rng = crate::stream_rng(seed, STREAM_FLEET_INIT);
        let mut vehicles = Vec::new();
        let mut next = 0u32;
        for &(company, count) in company_fleets {
            for _ in 0..count {
                let node = rng.random_range(0..net.num_nodes() as u32);
                let position = net.location(node).expect("sampled node in range");
                vehicles.push(VehicleState::new(VehicleId(next), company, capacity, position));
                next += 1;
            }
        }
        FleetState { vehicles, clock: 0.0, seed }
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&VehicleState> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    pub fn vehicle_mut(&mut self, id: VehicleId) -> Option<&mut VehicleState> {
        self.vehicles.iter_mut().find(|v| v.id == id)
    }
}

pub(crate) const STREAM_FLEET_INIT: u64 = 5;

#[allow(unused)]
fn _rng_type_check(r: &mut ChaCha8Rng) -> u64 {
    r.random()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Network;

    fn corridor() -> Network {
        // 7 nodes in a row, 1000 m edges at 10 m/s: 100 s per edge
        Network::grid(7, 1, 1000.0, 10.0)
    }

    #[test]
    fn instantaneous_windows_follow_the_stated_rule() {
        let net = corridor();
        // direct = 6 edges * 100 s = 600 s
        let r = TripRequest::instantaneous(
            RequestId(1),
            net.location(0).unwrap(),
            net.location(6).unwrap(),
            0.0,
            TimeLimits::new(420.0, 420.0),
            &net,
        )
        .unwrap();
        assert_eq!(r.direct_time, 600.0);
        assert_eq!(r.pickup_window, (0.0, 420.0));
        assert_eq!(r.delivery_window, (600.0, 1440.0));
    }

    #[test]
    fn zero_wait_allows_immediate_pickup_only() {
        let net = corridor();
        let r = TripRequest::instantaneous(
            RequestId(2),
            net.location(0).unwrap(),
            net.location(1).unwrap(),
            50.0,
            TimeLimits::new(0.0, 120.0),
            &net,
        )
        .unwrap();
        assert_eq!(r.pickup_window, (50.0, 50.0));
    }

    #[test]
    fn scheduled_windows_pass_through() {
        let net = corridor();
        let r = TripRequest::scheduled(
            RequestId(3),
            net.location(1).unwrap(),
            net.location(3).unwrap(),
            0.0,
            (900.0, 1200.0),
            TimeLimits::new(420.0, 300.0),
            &net,
        )
        .unwrap();
        assert_eq!(r.pickup_window, (900.0, 1200.0));
        assert_eq!(r.delivery_window, (900.0 + 200.0, 1200.0 + 200.0 + 300.0));
    }

    #[test]
    fn idle_vehicle_just_tracks_the_clock() {
        let net = corridor();
        let mut v = VehicleState::new(VehicleId(0), 0, 4, net.location(2).unwrap());
        let events = v.advance_to(&TimeView::base(&net), 500.0);
        assert!(events.is_empty());
        assert_eq!(v.position.node, 2);
        assert_eq!(v.position_time, 500.0);
    }

    fn schedule_request(v: &mut VehicleState, r: &TripRequest) {
        v.scheduled.insert(r.id, ScheduledRequest { request: r.clone(), picked_up_at: None });
        v.schedule.push(Stop::new(StopKind::Pickup, r.id, r.origin));
        v.schedule.push(Stop::new(StopKind::Delivery, r.id, r.destination));
    }

    #[test]
    fn pickup_en_route_boards_the_request() {
        let net = corridor();
        let view = TimeView::base(&net);
        // vehicle at node 0, request from node 1 (pickup at t=100) to node 3
        let r = TripRequest::instantaneous(
            RequestId(7),
            net.location(1).unwrap(),
            net.location(3).unwrap(),
            0.0,
            TimeLimits::new(420.0, 420.0),
            &net,
        )
        .unwrap();
        let mut v = VehicleState::new(VehicleId(1), 0, 4, net.location(0).unwrap());
        schedule_request(&mut v, &r);

        // advance past the pickup (t=100) but short of the delivery (t=300)
        let events = v.advance_to(&view, 150.0);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].kind, StopKind::Pickup);
        assert_eq!(events[0].time, 100.0);
        assert_eq!(v.onboard_count(), 1);
        // mid-leg: last node reached is the pickup node
        assert_eq!(v.position.node, 1);

        let events = v.advance_to(&view, 400.0);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].kind, StopKind::Delivery);
        assert_eq!(events[0].time, 300.0);
        assert_eq!(v.onboard_count(), 0);
        assert!(v.scheduled.is_empty());
        assert_eq!(v.position_time, 400.0);
    }

    #[test]
    fn early_arrival_waits_for_the_pickup_window() {
        let net = corridor();
        let view = TimeView::base(&net);
        // pickup window opens at t=60; the vehicle arrives at t=30
        let r = TripRequest::scheduled(
            RequestId(9),
            net.location(0).unwrap(),
            net.location(2).unwrap(),
            0.0,
            (60.0, 500.0),
            TimeLimits::new(420.0, 420.0),
            &net,
        )
        .unwrap();
        let mut v = VehicleState::new(VehicleId(2), 0, 4, net.location(0).unwrap());
        v.position_time = 30.0;
        schedule_request(&mut v, &r);

        let events = v.advance_to(&view, 1000.0);
        assert_eq!(events[0].time, 60.0, "departure shifts to the window start");
        // downstream arrival shifts with it: 60 + 200
        assert_eq!(events[1].time, 260.0);
    }

    #[test]
    fn random_fleet_init_is_reproducible() {
        let net = corridor();
        let a = FleetState::init_random(&[(0, 5)], 4, &net, 11);
        let b = FleetState::init_random(&[(0, 5)], 4, &net, 11);
        let c = FleetState::init_random(&[(0, 5)], 4, &net, 12);
        let nodes = |f: &FleetState| f.vehicles.iter().map(|v| v.position.node).collect::<Vec<_>>();
        assert_eq!(nodes(&a), nodes(&b));
        assert_ne!(nodes(&a), nodes(&c));
        assert_eq!(a.vehicles.len(), 5);
    }

    #[test]
    fn company_slices_are_assigned_in_order() {
        let net = corridor();
        let f = FleetState::init_random(&[(0, 3), (1, 2)], 4, &net, 1);
        let companies: Vec<u32> = f.vehicles.iter().map(|v| v.company).collect();
        assert_eq!(companies, vec![0, 0, 0, 1, 1]);
    }
}
