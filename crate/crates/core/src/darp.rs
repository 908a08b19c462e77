//! Single-vehicle dial-a-ride pricing: given a vehicle and one new request,
//! find the best feasible augmented stop sequence and its cost.
//!
//! Three solvers share one feasibility model: exact enumeration with pruning
//! (used while few requests are scheduled), an order-preserving insertion
//! heuristic, and a destroy/repair neighborhood search seeded from the
//! insertion solution.

use std::collections::HashMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::model::{RequestId, ScheduledRequest, Stop, StopKind, TripRequest, VehicleState};
use crate::network::{Location, TimeView};
use crate::Secs;

/// What the per-entry assignment cost measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    /// Duration of the augmented route.
    TotalDuration,
    /// Sum of (planned pickup - request time) over customers in the route.
    WaitingTime,
    /// Route duration minus the pre-insertion route duration.
    DetourTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    /// Exact enumeration while at most 3 requests are scheduled, insertion
    /// heuristic otherwise.
    Auto,
    Insertion,
    Lns,
}

/// Destroy/repair search parameters.
#[derive(Debug, Clone, Copy)]
pub struct LnsParams {
    pub destroy_degree: usize,
    pub initial_temperature: f64,
    pub cooling_factor: f64,
    pub max_iterations: usize,
}

impl Default for LnsParams {
    fn default() -> Self {
        LnsParams {
            destroy_degree: 4,
            initial_temperature: 10.0,
            cooling_factor: 0.9,
            max_iterations: 10,
        }
    }
}

/// Cost configuration carried by the scheduler into every pricing call.
#[derive(Debug, Clone)]
pub struct CostModel {
    pub kind: CostKind,
    pub solver: SolverChoice,
    /// Last slot considered for the pickup in the insertion heuristic.
    pub lambda: usize,
    pub lns: LnsParams,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            kind: CostKind::TotalDuration,
            solver: SolverChoice::Auto,
            lambda: 4,
            lns: LnsParams::default(),
        }
    }
}

/// Everything a pricing call needs: the new request, the vehicle's pending
/// stops and requests, and where/when the vehicle resumes driving.
pub struct DarpInstance<'a> {
    pub request: &'a TripRequest,
    /// Pending customer stops in committed order (relocation moves stripped).
    pub schedule: Vec<Stop>,
    pub scheduled: &'a HashMap<RequestId, ScheduledRequest>,
    pub start: Location,
    /// Departure instant from `start`; equals `now` unless a leg is in flight.
    pub start_time: Secs,
    /// The batch clock; durations are measured from here.
    pub now: Secs,
    pub onboard: usize,
    pub capacity: usize,
    pub view: TimeView<'a>,
}

impl<'a> DarpInstance<'a> {
    pub fn for_vehicle(
        vehicle: &'a VehicleState,
        request: &'a TripRequest,
        view: TimeView<'a>,
        now: Secs,
    ) -> DarpInstance<'a> {
        let schedule: Vec<Stop> = vehicle
            .schedule
            .iter()
            .filter(|s| s.kind != StopKind::Relocate)
            .cloned()
            .collect();
        let start_time = if schedule.is_empty() { now } else { vehicle.position_time };
        DarpInstance {
            request,
            schedule,
            scheduled: &vehicle.scheduled,
            start: vehicle.position,
            start_time,
            now,
            onboard: vehicle.onboard_count(),
            capacity: vehicle.capacity as usize,
            view,
        }
    }

    fn request_info(&self, id: RequestId) -> &TripRequest {
        if id == self.request.id {
            self.request
        } else {
            &self.scheduled[&id].request
        }
    }

    fn already_picked_at(&self, id: RequestId) -> Option<Secs> {
        self.scheduled.get(&id).and_then(|s| s.picked_up_at)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    PickupWindow(RequestId),
    DeliveryWindow(RequestId),
    CapacityExceeded,
    MaxJourney(RequestId),
    Unreachable,
}

/// Outcome of simulating one stop sequence.
#[derive(Debug, Clone)]
pub struct RouteEval {
    pub feasible: bool,
    pub violation: Option<Violation>,
    /// Final-stop service time minus the batch clock (0 for an empty route).
    pub duration: Secs,
    /// Service time per stop, aligned with the input sequence.
    pub service_times: Vec<Secs>,
}

/// Simulates `stops` from the instance anchor, waiting at pickups until the
/// window opens. Infeasibility is a result, not an error; the duration is
/// reported either way (it stops growing at the violating stop).
pub fn evaluate_route(inst: &DarpInstance, stops: &[Stop]) -> RouteEval {
    let mut time = inst.start_time;
    let mut loc = inst.start;
    let mut occupancy = inst.onboard;
    let mut service_times = Vec::with_capacity(stops.len());
    let mut pickups_seen: HashMap<RequestId, Secs> = HashMap::new();
    let mut verdict: (bool, Option<Violation>) = (true, None);

    'walk: for stop in stops {
        let leg = match inst.view.travel_time(loc, stop.location, time) {
            Ok(t) => t,
            Err(_) => {
                verdict = (false, Some(Violation::Unreachable));
                break 'walk;
            }
        };
        let arrival = time + leg;
        let info = inst.request_info(stop.request);
        let service = match stop.kind {
            StopKind::Pickup => {
                let service = arrival.max(info.pickup_window.0);
                if service > info.pickup_window.1 {
                    verdict = (false, Some(Violation::PickupWindow(stop.request)));
                    break 'walk;
                }
                occupancy += 1;
                if occupancy > inst.capacity {
                    verdict = (false, Some(Violation::CapacityExceeded));
                    break 'walk;
                }
                pickups_seen.insert(stop.request, service);
                service
            }
            StopKind::Delivery => {
                if arrival > info.delivery_window.1 {
                    verdict = (false, Some(Violation::DeliveryWindow(stop.request)));
                    break 'walk;
                }
                if let Some(max_journey) = info.limits.max_journey {
                    let boarded = pickups_seen
                        .get(&stop.request)
                        .copied()
                        .or_else(|| inst.already_picked_at(stop.request));
                    if let Some(b) = boarded {
                        if arrival - b > max_journey {
                            verdict = (false, Some(Violation::MaxJourney(stop.request)));
                            break 'walk;
                        }
                    }
                }
                occupancy = occupancy.saturating_sub(1);
                arrival
            }
            StopKind::Relocate => arrival,
        };
        time = service;
        loc = stop.location;
        service_times.push(service);
    }

    RouteEval {
        feasible: verdict.0,
        violation: verdict.1,
        duration: (time - inst.now).max(0.0),
        service_times,
    }
}

/// A feasible augmented route and where the new request landed in it.
#[derive(Debug, Clone)]
pub struct DarpSolution {
    /// Full stop sequence with planned service times filled in.
    pub route: Vec<Stop>,
    pub duration: Secs,
    pub pickup_index: usize,
    pub delivery_index: usize,
}

/// Cost entry produced for the assignment stage.
#[derive(Debug, Clone)]
pub struct CostedSolution {
    pub cost: Secs,
    pub solution: DarpSolution,
}

#[derive(Debug, Clone, Copy)]
enum Objective {
    Duration,
    Waiting,
    Detour { pre_duration: Secs },
}

impl Objective {
    fn of(kind: CostKind, inst: &DarpInstance) -> Objective {
        match kind {
            CostKind::TotalDuration => Objective::Duration,
            CostKind::WaitingTime => Objective::Waiting,
            CostKind::DetourTime => {
                let pre = evaluate_route(inst, &inst.schedule).duration;
                Objective::Detour { pre_duration: pre }
            }
        }
    }

    fn value(&self, inst: &DarpInstance, stops: &[Stop], eval: &RouteEval) -> Secs {
        match *self {
            Objective::Duration => eval.duration,
            Objective::Detour { pre_duration } => (eval.duration - pre_duration).max(0.0),
            Objective::Waiting => stops
                .iter()
                .zip(&eval.service_times)
                .filter(|(s, _)| s.kind == StopKind::Pickup)
                .map(|(s, &t)| (t - inst.request_info(s.request).request_time).max(0.0))
                .sum(),
        }
    }
}

fn finish_solution(inst: &DarpInstance, mut route: Vec<Stop>) -> DarpSolution {
    let eval = evaluate_route(inst, &route);
    debug_assert!(eval.feasible, "solver returned an infeasible route");
    for (stop, &t) in route.iter_mut().zip(&eval.service_times) {
        stop.planned_arrival = t;
    }
    let pickup_index = route
        .iter()
        .position(|s| s.request == inst.request.id && s.kind == StopKind::Pickup)
        .expect("new pickup present");
    let delivery_index = route
        .iter()
        .position(|s| s.request == inst.request.id && s.kind == StopKind::Delivery)
        .expect("new delivery present");
    DarpSolution { route, duration: eval.duration, pickup_index, delivery_index }
}

/// Depth-first enumeration over every precedence-valid ordering of the
/// pending stops plus the new pickup/delivery pair, pruning branches whose
/// partial objective already meets the incumbent.
fn exact_search(inst: &DarpInstance, objective: Objective) -> Option<(Vec<Stop>, Secs)> {
    let mut items: Vec<Stop> = inst.schedule.clone();
    items.push(Stop::new(StopKind::Pickup, inst.request.id, inst.request.origin));
    items.push(Stop::new(StopKind::Delivery, inst.request.id, inst.request.destination));
    let n = items.len();
    debug_assert!(n <= 20, "exact enumeration is for small instances");

    // item index of the pickup that must precede each delivery, if pending
    let mut pickup_item: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        if items[i].kind == StopKind::Delivery {
            pickup_item[i] = items
                .iter()
                .position(|s| s.request == items[i].request && s.kind == StopKind::Pickup);
        }
    }

    struct Frame {
        time: Secs,
        loc: Location,
        occupancy: usize,
        waiting: Secs,
    }

    fn descend(
        inst: &DarpInstance,
        objective: Objective,
        items: &[Stop],
        pickup_item: &[Option<usize>],
        used: u32,
        frame: Frame,
        seq: &mut Vec<usize>,
        pickups_at: &mut HashMap<RequestId, Secs>,
        best: &mut Option<(Secs, Vec<usize>)>,
    ) {
        if seq.len() == items.len() {
            let value = match objective {
                Objective::Duration => (frame.time - inst.now).max(0.0),
                Objective::Detour { pre_duration } => {
                    ((frame.time - inst.now).max(0.0) - pre_duration).max(0.0)
                }
                Objective::Waiting => frame.waiting,
            };
            if best.as_ref().is_none_or(|(b, _)| value < *b) {
                *best = Some((value, seq.clone()));
            }
            return;
        }
        for i in 0..items.len() {
            if used & (1 << i) != 0 {
                continue;
            }
            if let Some(p) = pickup_item[i] {
                if used & (1 << p) == 0 {
                    continue;
                }
            }
            let stop = &items[i];
            let Ok(leg) = inst.view.travel_time(frame.loc, stop.location, frame.time) else {
                continue;
            };
            let arrival = frame.time + leg;
            let info = inst.request_info(stop.request);
            let mut occupancy = frame.occupancy;
            let mut waiting = frame.waiting;
            let service = match stop.kind {
                StopKind::Pickup => {
                    let service = arrival.max(info.pickup_window.0);
                    if service > info.pickup_window.1 {
                        continue;
                    }
                    occupancy += 1;
                    if occupancy > inst.capacity {
                        continue;
                    }
                    waiting += (service - info.request_time).max(0.0);
                    service
                }
                StopKind::Delivery => {
                    if arrival > info.delivery_window.1 {
                        continue;
                    }
                    if let Some(max_journey) = info.limits.max_journey {
                        let boarded = pickups_at
                            .get(&stop.request)
                            .copied()
                            .or_else(|| inst.already_picked_at(stop.request));
                        if boarded.is_some_and(|b| arrival - b > max_journey) {
                            continue;
                        }
                    }
                    occupancy = occupancy.saturating_sub(1);
                    arrival
                }
                StopKind::Relocate => arrival,
            };
            // the partial objective can only grow; cut at the incumbent
            let partial = match objective {
                Objective::Duration => (service - inst.now).max(0.0),
                Objective::Detour { pre_duration } => {
                    ((service - inst.now).max(0.0) - pre_duration).max(0.0)
                }
                Objective::Waiting => waiting,
            };
            if best.as_ref().is_some_and(|(b, _)| partial >= *b) {
                continue;
            }
            let mut inserted_pickup = false;
            if stop.kind == StopKind::Pickup {
                pickups_at.insert(stop.request, service);
                inserted_pickup = true;
            }
            seq.push(i);
            descend(
                inst,
                objective,
                items,
                pickup_item,
                used | (1 << i),
                Frame { time: service, loc: stop.location, occupancy, waiting },
                seq,
                pickups_at,
                best,
            );
            seq.pop();
            if inserted_pickup {
                pickups_at.remove(&stop.request);
            }
        }
    }

    let mut best: Option<(Secs, Vec<usize>)> = None;
    let mut seq = Vec::with_capacity(n);
    let mut pickups_at = HashMap::new();
    descend(
        inst,
        objective,
        &items,
        &pickup_item,
        0,
        Frame { time: inst.start_time, loc: inst.start, occupancy: inst.onboard, waiting: 0.0 },
        &mut seq,
        &mut pickups_at,
        &mut best,
    );
    best.map(|(value, seq)| (seq.into_iter().map(|i| items[i].clone()).collect(), value))
}

/// Minimal-duration exact solution over all feasible orderings.
/// Intended for instances with at most 3 scheduled requests.
pub fn exact_darp(inst: &DarpInstance) -> Option<DarpSolution> {
    exact_search(inst, Objective::Duration).map(|(route, _)| finish_solution(inst, route))
}

fn insertion_search(
    inst: &DarpInstance,
    lambda: usize,
    objective: Objective,
) -> Option<(Vec<Stop>, Secs)> {
    assert!(lambda >= 1, "lambda must be at least 1");
    let base = &inst.schedule;
    let len = base.len();
    let pickup = Stop::new(StopKind::Pickup, inst.request.id, inst.request.origin);
    let delivery = Stop::new(StopKind::Delivery, inst.request.id, inst.request.destination);
    let mut best: Option<(Secs, Vec<Stop>)> = None;
    for p in 0..=(lambda - 1).min(len) {
        for d in (p + 1)..=(len + 1) {
            let mut candidate = Vec::with_capacity(len + 2);
            candidate.extend_from_slice(&base[..p]);
            candidate.push(pickup.clone());
            candidate.extend_from_slice(&base[p..]);
            candidate.insert(d, delivery.clone());
            let eval = evaluate_route(inst, &candidate);
            if !eval.feasible {
                continue;
            }
            let value = objective.value(inst, &candidate, &eval);
            if best.as_ref().is_none_or(|(b, _)| value < *b) {
                best = Some((value, candidate));
            }
        }
    }
    best.map(|(value, route)| (route, value))
}

/// Order-preserving insertion of the new pickup/delivery pair. The pickup is
/// tried in the first `lambda` slots; the delivery anywhere after it.
pub fn insertion_heuristic(inst: &DarpInstance, lambda: usize) -> Option<DarpSolution> {
    insertion_search(inst, lambda, Objective::Duration)
        .map(|(route, _)| finish_solution(inst, route))
}

/// Requests present in the route, in order of first appearance.
fn route_requests(route: &[Stop]) -> Vec<RequestId> {
    let mut seen = Vec::new();
    for stop in route {
        if !seen.contains(&stop.request) {
            seen.push(stop.request);
        }
    }
    seen
}

/// Cheapest feasible reinsertion of one request into the partial route.
/// Requests already onboard contribute a delivery stop only.
fn reinsert_cheapest(
    inst: &DarpInstance,
    objective: Objective,
    route: &mut Vec<Stop>,
    rid: RequestId,
) -> bool {
    let info = inst.request_info(rid);
    let onboard = inst.already_picked_at(rid).is_some();
    let len = route.len();
    let mut best: Option<(Secs, Vec<Stop>)> = None;
    if onboard {
        for pos in 0..=len {
            let mut candidate = route.clone();
            candidate.insert(pos, Stop::new(StopKind::Delivery, rid, info.destination));
            let eval = evaluate_route(inst, &candidate);
            if eval.feasible {
                let value = objective.value(inst, &candidate, &eval);
                if best.as_ref().is_none_or(|(b, _)| value < *b) {
                    best = Some((value, candidate));
                }
            }
        }
    } else {
        for p in 0..=len {
            for d in (p + 1)..=(len + 1) {
                let mut candidate = route.clone();
                candidate.insert(p, Stop::new(StopKind::Pickup, rid, info.origin));
                candidate.insert(d, Stop::new(StopKind::Delivery, rid, info.destination));
                let eval = evaluate_route(inst, &candidate);
                if eval.feasible {
                    let value = objective.value(inst, &candidate, &eval);
                    if best.as_ref().is_none_or(|(b, _)| value < *b) {
                        best = Some((value, candidate));
                    }
                }
            }
        }
    }
    match best {
        Some((_, candidate)) => {
            *route = candidate;
            true
        }
        None => false,
    }
}

fn lns_search(
    inst: &DarpInstance,
    params: &LnsParams,
    seed: u64,
    objective: Objective,
    lambda: usize,
) -> Option<(Vec<Stop>, Secs)> {
    assert!(params.destroy_degree >= 1);
    assert!(params.cooling_factor > 0.0 && params.cooling_factor < 1.0);
    assert!(params.initial_temperature > 0.0);
    let (start_route, start_value) = insertion_search(inst, lambda, objective)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = start_route.clone();
    let mut current_value = start_value;
    let mut best_route = start_route;
    let mut best_value = start_value;
    let mut temperature = params.initial_temperature;

    for _ in 0..params.max_iterations {
        let mut candidate = current.clone();
        let requests = route_requests(&candidate);
        let q = params.destroy_degree.min(requests.len());
        let removed: Vec<RequestId> = rand::seq::index::sample(&mut rng, requests.len(), q)
            .into_iter()
            .map(|i| requests[i])
            .collect();
        candidate.retain(|s| !removed.contains(&s.request));

        let mut order = removed;
        order.shuffle(&mut rng);
        let repaired = order
            .iter()
            .all(|&rid| reinsert_cheapest(inst, objective, &mut candidate, rid));
        if !repaired {
            temperature *= params.cooling_factor;
            continue;
        }
        let eval = evaluate_route(inst, &candidate);
        debug_assert!(eval.feasible);
        let value = objective.value(inst, &candidate, &eval);
        if value < best_value {
            best_value = value;
            best_route = candidate;
        } else if accept(value, current_value, temperature, &mut rng) {
            current = candidate;
            current_value = value;
        }
        temperature *= params.cooling_factor;
    }
    Some((best_route, best_value))
}

/// Simulated-annealing acceptance for a non-improving candidate.
fn accept(candidate: Secs, current: Secs, temperature: f64, rng: &mut ChaCha8Rng) -> bool {
    ((current - candidate) / temperature).exp() > rng.random_range(0.0..1.0)
}

/// Destroy/repair improvement over the insertion start. Deterministic for a
/// fixed seed; never worse than the insertion heuristic.
pub fn lns(inst: &DarpInstance, params: &LnsParams, seed: u64) -> Option<DarpSolution> {
    lns_search(inst, params, seed, Objective::Duration, 4)
        .map(|(route, _)| finish_solution(inst, route))
}

/// Prices the insertion of `inst.request` into the vehicle's route under the
/// configured cost kind and solver. `None` encodes infeasibility (the
/// infinite entry of the assignment matrix).
pub fn assignment_cost(inst: &DarpInstance, model: &CostModel, seed: u64) -> Option<CostedSolution> {
    let objective = Objective::of(model.kind, inst);
    let found = match model.solver {
        SolverChoice::Auto => {
            if inst.scheduled.len() <= 3 {
                exact_search(inst, objective)
            } else {
                insertion_search(inst, model.lambda, objective)
            }
        }
        SolverChoice::Insertion => insertion_search(inst, model.lambda, objective),
        SolverChoice::Lns => lns_search(inst, &model.lns, seed, objective, model.lambda),
    };
    found.map(|(route, value)| CostedSolution { cost: value, solution: finish_solution(inst, route) })
}
