//! Per-batch dispatch loop: advance the fleet, select candidates, price
//! insertions, solve the assignment, commit routes, run the reactive
//! rebalancing pass, and collect metrics. Also hosts the multi-company
//! market-share controller.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::assignment::{self, auction_solve_traced, pad_symmetric, CostEntry, RectCosts};
use crate::contextmap::{candidate_vehicles, ContextConfig};
use crate::darp::{assignment_cost, evaluate_route, CostModel, DarpInstance, DarpSolution};
use crate::metrics::{
    AssignedInfo, BatchMetrics, PopulationStats, RequestRecord, ShareSample,
};
use crate::model::{
    FleetState, RequestId, ScheduledRequest, Stop, StopKind, TripRequest, VehicleId,
};
use crate::network::{Network, TimeView};
use crate::scenario::{Scenario, ScenarioEvent};
use crate::{mix, Secs};

pub(crate) const STREAM_CONTEXT: u64 = 1;
pub(crate) const STREAM_LNS: u64 = 2;
pub(crate) const STREAM_DEMAND: u64 = 3;
pub(crate) const STREAM_BREAKS: u64 = 4;

const BREAK_PERIOD: Secs = 1800.0;
const DEADLINE_SLACK: Secs = 1e-6;

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Assignment(#[from] assignment::AssignmentError),
}

/// One company participating in the run. `share` is the agreed fraction of
/// served customers; vehicles carry the index of their company.
#[derive(Debug, Clone)]
pub struct CompanySpec {
    pub id: u32,
    pub share: f64,
    pub fleet: u32,
}

#[derive(Debug, Clone)]
pub struct SchedulerConfig {
    pub batch_period: Secs,
    pub cost: CostModel,
    pub context: ContextConfig,
    pub rebalancing: bool,
    /// Whether customers accept a rebalancing vehicle (served outside their
    /// windows) or refuse it (the vehicle still relocates).
    pub accept_rebalance: bool,
    /// A vehicle holds at most `pipeline_factor * capacity` pending requests.
    pub pipeline_factor: u32,
    /// Empty for a single operator; exactly two entries activate the
    /// share-control penalty.
    pub companies: Vec<CompanySpec>,
    /// Whether the planner sees congestion-adjusted times or base times.
    pub congestion_aware: bool,
    /// Worker threads for the cost phase; 0 or 1 runs sequentially.
    pub threads: usize,
    /// When set, each batch's solved cost table and prices are dumped there
    /// as `lap-<batch>.csv`.
    pub lap_dump_dir: Option<std::path::PathBuf>,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            batch_period: 10.0,
            cost: CostModel::default(),
            context: ContextConfig::default(),
            rebalancing: true,
            accept_rebalance: true,
            pipeline_factor: 2,
            companies: Vec::new(),
            congestion_aware: true,
            threads: 1,
            lap_dump_dir: None,
        }
    }
}

/// Cumulative served counters per company plus the agreed target shares.
#[derive(Debug, Clone)]
pub struct CompanyShareState {
    pub served: Vec<u64>,
    pub targets: Vec<f64>,
}

impl CompanyShareState {
    pub fn new(targets: Vec<f64>) -> CompanyShareState {
        CompanyShareState { served: vec![0; targets.len()], targets }
    }

    pub fn total(&self) -> u64 {
        self.served.iter().sum()
    }

    /// Cubic feedback term for one company: positive once it is over its
    /// agreed share, negative while under. Clamped so that pathological
    /// windup (a share no fleet slice can physically carry) cannot push the
    /// auction's integer arithmetic out of range; the bound still dwarfs any
    /// feasible trip cost.
    pub fn penalty(&self, company: usize) -> f64 {
        let total = self.total() as f64;
        let deviation = self.served[company] as f64 - self.targets[company] * total;
        deviation.powi(3).clamp(-1e9, 1e9)
    }

    /// Signed share violation, measured on the second company.
    pub fn violation(&self) -> f64 {
        if self.served.len() < 2 {
            return 0.0;
        }
        let total = self.total() as f64;
        self.served[1] as f64 - (1.0 - self.targets[0]) * total
    }
}

/// Assignment cost with the share-control penalty applied, floored at zero
/// to keep the auction's costs nonnegative.
pub fn company_penalized_cost(cost: Secs, company: usize, state: &CompanyShareState) -> Secs {
    (cost + state.penalty(company)).max(0.0)
}

/// Hourly snapshot row for the occupancy heat grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatSample {
    pub hour: u64,
    pub node: u32,
    pub vehicles: u32,
    pub onboard: u32,
}

/// The dispatch engine. Owns the network, the fleet, and all run state;
/// `step_batch` consumes one request window at a time.
pub struct Dispatcher {
    net: Network,
    cfg: SchedulerConfig,
    fleet: FleetState,
    seed: u64,
    batch_idx: u64,
    scenario: Scenario,
    scenario_cursor: usize,
    demand_multiplier: f64,
    break_fraction: f64,
    congestion_on: bool,
    next_break_at: Secs,
    next_break_idx: u64,
    shares: Option<CompanyShareState>,
    records: HashMap<RequestId, RequestRecord>,
    batches: Vec<BatchMetrics>,
    heat: Vec<HeatSample>,
    next_heat_hour: u64,
    next_clone_id: u64,
    pool: Option<rayon::ThreadPool>,
}

impl Dispatcher {
    pub fn new(
        net: Network,
        fleet: FleetState,
        cfg: SchedulerConfig,
        scenario: Scenario,
        seed: u64,
    ) -> Result<Dispatcher, SchedulerError> {
        if !(cfg.batch_period > 0.0) {
            return Err(SchedulerError::InvalidConfig("batch period must be positive".into()));
        }
        if cfg.context.max_candidates < 1 {
            return Err(SchedulerError::InvalidConfig("maxn must be at least 1".into()));
        }
        if cfg.pipeline_factor < 1 {
            return Err(SchedulerError::InvalidConfig("pipeline factor must be at least 1".into()));
        }
        let shares = match cfg.companies.len() {
            0 | 1 => None,
            2 => {
                let sum: f64 = cfg.companies.iter().map(|c| c.share).sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(SchedulerError::InvalidConfig(format!(
                        "company shares sum to {sum}, expected 1"
                    )));
                }
                Some(CompanyShareState::new(cfg.companies.iter().map(|c| c.share).collect()))
            }
            n => {
                return Err(SchedulerError::InvalidConfig(format!(
                    "share control supports exactly two companies, got {n}"
                )))
            }
        };
        let n_companies = cfg.companies.len().max(1);
        if fleet.vehicles.iter().any(|v| v.company as usize >= n_companies) {
            return Err(SchedulerError::InvalidConfig(
                "vehicle company index outside the company table".into(),
            ));
        }
        if cfg.context.metric != crate::network::DistanceMetric::ShortestPath && !net.has_coords() {
            return Err(SchedulerError::InvalidConfig(
                "planar context metric on a network without coordinates".into(),
            ));
        }
        let pool = if cfg.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(cfg.threads)
                    .build()
                    .map_err(|e| SchedulerError::InvalidConfig(e.to_string()))?,
            )
        } else {
            None
        };
        let congestion_on = net.congestion().is_some();
        let mut dispatcher = Dispatcher {
            net,
            cfg,
            fleet,
            seed,
            batch_idx: 0,
            scenario,
            scenario_cursor: 0,
            demand_multiplier: 1.0,
            break_fraction: 0.0,
            congestion_on,
            next_break_at: BREAK_PERIOD,
            next_break_idx: 0,
            shares,
            records: HashMap::new(),
            batches: Vec::new(),
            heat: Vec::new(),
            next_heat_hour: 1,
            next_clone_id: 1 << 63,
            pool,
        };
        dispatcher.capture_heat(0);
        Ok(dispatcher)
    }

    pub fn clock(&self) -> Secs {
        self.fleet.clock
    }

    pub fn fleet(&self) -> &FleetState {
        &self.fleet
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn batches(&self) -> &[BatchMetrics] {
        &self.batches
    }

    pub fn heat_samples(&self) -> &[HeatSample] {
        &self.heat
    }

    pub fn share_state(&self) -> Option<&CompanyShareState> {
        self.shares.as_ref()
    }

    /// Request lifecycles, sorted by request id.
    pub fn records_sorted(&self) -> Vec<RequestRecord> {
        let mut out: Vec<RequestRecord> = self.records.values().cloned().collect();
        out.sort_by_key(|r| r.id);
        out
    }

    /// Feeds a time-sorted request stream through consecutive batches until
    /// the clock reaches `until`.
    pub fn run(&mut self, mut requests: Vec<TripRequest>, until: Secs) -> Result<(), SchedulerError> {
        requests.sort_by(|a, b| a.request_time.total_cmp(&b.request_time).then(a.id.cmp(&b.id)));
        let mut i = 0;
        while self.fleet.clock < until {
            let window_end = self.fleet.clock + self.cfg.batch_period;
            let mut window = Vec::new();
            while i < requests.len() && requests[i].request_time < window_end {
                window.push(requests[i].clone());
                i += 1;
            }
            self.step_batch(window)?;
        }
        Ok(())
    }

    /// Processes the requests submitted during the batch window ending at
    /// `clock + batch_period` and advances the clock there.
    pub fn step_batch(
        &mut self,
        window_requests: Vec<TripRequest>,
    ) -> Result<&BatchMetrics, SchedulerError> {
        let wall_start = Instant::now();
        let window_start = self.fleet.clock;
        let window_end = window_start + self.cfg.batch_period;
        let batch = self.batch_idx;
        let now = window_end;

        self.apply_scenario_events(window_end);
        self.apply_breaks(window_end);

        // execute the fleet up to the batch instant and fold the stop events
        // into the per-request records
        let actual = TimeView::new(&self.net, self.congestion_on);
        let mut events = Vec::new();
        for v in &mut self.fleet.vehicles {
            events.extend(v.advance_to(&actual, window_end));
        }
        let mut picked_up = 0usize;
        let mut delivered = 0usize;
        let mut waiting = PopulationStats::default();
        let mut detour = PopulationStats::default();
        let mut window_violations = 0u64;
        for ev in events {
            let Some(rec) = self.records.get_mut(&ev.request) else { continue };
            let rescued = rec.assigned.is_some_and(|a| a.rebalanced);
            match ev.kind {
                StopKind::Pickup => {
                    rec.picked_up_at = Some(ev.time);
                    picked_up += 1;
                    let w = (ev.time - rec.request_time).max(0.0);
                    if rescued {
                        waiting.rescued.add(w);
                    } else {
                        waiting.normal.add(w);
                        if ev.time > rec.pickup_deadline + DEADLINE_SLACK {
                            window_violations += 1;
                        }
                    }
                }
                StopKind::Delivery => {
                    rec.delivered_at = Some(ev.time);
                    delivered += 1;
                    let d = (ev.time - rec.request_time - rec.direct_time).max(0.0);
                    if rescued {
                        detour.rescued.add(d);
                    } else {
                        detour.normal.add(d);
                        if ev.time > rec.delivery_deadline + DEADLINE_SLACK {
                            window_violations += 1;
                        }
                    }
                }
                StopKind::Relocate => {}
            }
        }

        // demand scaling, then request registration
        let requests = self.adjust_demand(window_requests, batch);
        debug_assert!(requests
            .iter()
            .all(|r| r.request_time >= window_start - DEADLINE_SLACK && r.request_time < window_end));
        for r in &requests {
            self.records.insert(
                r.id,
                RequestRecord {
                    id: r.id,
                    request_time: r.request_time,
                    direct_time: r.direct_time,
                    pickup_deadline: r.pickup_window.1,
                    delivery_deadline: r.delivery_window.1,
                    assigned: None,
                    refused_at_batch: None,
                    picked_up_at: None,
                    delivered_at: None,
                },
            );
        }
        let requests_in = requests.len();

        // candidate selection per request
        let plan = TimeView::new(&self.net, self.congestion_on && self.cfg.congestion_aware);
        let mut cols: Vec<TripRequest> = requests;
        cols.sort_by_key(|r| r.id);
        let mut candidates: Vec<Vec<VehicleId>> = Vec::with_capacity(cols.len());
        for r in &cols {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(&[
                self.seed,
                STREAM_CONTEXT,
                self.cfg.context.stream,
                batch,
                r.id.0,
            ]));
            candidates.push(candidate_vehicles(
                r,
                &self.fleet,
                &self.cfg.context,
                &self.net,
                self.cfg.pipeline_factor,
                now,
                &mut rng,
            ));
        }
        let mut row_ids: Vec<VehicleId> = candidates.iter().flatten().copied().collect();
        row_ids.sort_unstable();
        row_ids.dedup();
        let row_of: HashMap<VehicleId, usize> =
            row_ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();

        // price every (vehicle, request) pair; pure over the fleet snapshot,
        // so the fan-out is free to run on a worker pool
        let cost_start = Instant::now();
        let mut tasks: Vec<(usize, usize, VehicleId)> = Vec::new();
        for c in 0..cols.len() {
            for &v in &candidates[c] {
                tasks.push((row_of[&v], c, v));
            }
        }
        let fleet = &self.fleet;
        let cfg = &self.cfg;
        let seed = self.seed;
        let vehicle_index: HashMap<VehicleId, usize> =
            fleet.vehicles.iter().enumerate().map(|(i, v)| (v.id, i)).collect();
        let price_one = |&(_, c, vid): &(usize, usize, VehicleId)| {
            let vehicle = &fleet.vehicles[vehicle_index[&vid]];
            let request: &TripRequest = &cols[c];
            let inst = DarpInstance::for_vehicle(vehicle, request, plan, now);
            let lns_seed = mix(&[seed, STREAM_LNS, batch, vid.0 as u64, request.id.0]);
            assignment_cost(&inst, &cfg.cost, lns_seed)
        };
        let priced: Vec<Option<crate::darp::CostedSolution>> = match &self.pool {
            Some(pool) => pool.install(|| tasks.par_iter().map(price_one).collect()),
            None => tasks.iter().map(price_one).collect(),
        };
        let cost_phase_s = cost_start.elapsed().as_secs_f64();

        // assemble the sparse cost table, applying the share penalty
        let penalties: Option<Vec<f64>> = self
            .shares
            .as_ref()
            .map(|s| (0..s.served.len()).map(|k| s.penalty(k)).collect());
        let mut entries = Vec::new();
        let mut payloads: HashMap<(usize, usize), DarpSolution> = HashMap::new();
        for ((row, c, vid), priced) in tasks.iter().zip(priced) {
            let Some(costed) = priced else { continue };
            let mut cost = costed.cost;
            if let Some(p) = &penalties {
                let company = fleet.vehicles[vehicle_index[vid]].company as usize;
                cost = (cost + p[company]).max(0.0);
            }
            entries.push(CostEntry { row: *row, col: *c, cost: cost.round() as i64 });
            payloads.insert((*row, *c), costed.solution);
        }

        let lap_start = Instant::now();
        let matrix = pad_symmetric(&RectCosts {
            rows: row_ids.len(),
            cols: cols.len(),
            entries,
        })?;
        let (solved, prices) = auction_solve_traced(&matrix)?;
        let lap_phase_s = lap_start.elapsed().as_secs_f64();
        if let Some(dir) = &self.cfg.lap_dump_dir {
            let csv = assignment::debug_dump_csv(&matrix, &solved, &prices);
            let _ = std::fs::create_dir_all(dir);
            let _ = std::fs::write(dir.join(format!("lap-{batch:06}.csv")), csv);
        }

        // commit winning routes
        let mut assigned = 0usize;
        for pair in &solved.matches {
            let vid = row_ids[pair.row];
            let solution = payloads.remove(&(pair.row, pair.col)).expect("matched pair was priced");
            let request = cols[pair.col].clone();
            self.commit_route(vid, &request, solution.route, false, batch, now);
            assigned += 1;
        }

        // reactive rebalancing over what the assignment could not serve
        let refused_requests: Vec<TripRequest> =
            solved.refused.iter().map(|&c| cols[c].clone()).collect();
        let (rebalance_assigned, refused) = if self.cfg.rebalancing && !refused_requests.is_empty()
        {
            self.rebalance_pass(refused_requests, batch, now)?
        } else {
            for r in &refused_requests {
                self.mark_refused(r.id, batch);
            }
            (0, refused_requests.len())
        };
        debug_assert_eq!(requests_in, assigned + rebalance_assigned + refused);

        // occupancy histogram over the whole fleet
        let cap_max =
            self.fleet.vehicles.iter().map(|v| v.capacity).max().unwrap_or(0) as usize;
        let mut occupancy = vec![0u32; cap_max + 1];
        for v in &self.fleet.vehicles {
            occupancy[v.onboard_count()] += 1;
        }

        let shares_sample = self.shares.as_ref().map(|s| ShareSample {
            served: s.served.clone(),
            violation: s.violation(),
        });

        self.fleet.clock = window_end;
        self.batch_idx += 1;
        while (self.next_heat_hour * 3600) as Secs <= window_end {
            self.capture_heat(self.next_heat_hour);
            self.next_heat_hour += 1;
        }

        self.batches.push(BatchMetrics {
            batch,
            window_end,
            requests_in,
            assigned,
            rebalance_assigned,
            refused,
            picked_up,
            delivered,
            waiting,
            detour,
            occupancy,
            window_violations,
            shares: shares_sample,
            cost_phase_s,
            lap_phase_s,
            total_s: wall_start.elapsed().as_secs_f64(),
        });
        Ok(self.batches.last().unwrap())
    }

    /// Loosened-constraint pass over the idle vehicles: matched customers
    /// either board the rerouted vehicle (deadlines waived) or are refused
    /// while the vehicle still relocates toward their origin.
    fn rebalance_pass(
        &mut self,
        refused: Vec<TripRequest>,
        batch: u64,
        now: Secs,
    ) -> Result<(usize, usize), SchedulerError> {
        let plan_congestion = self.congestion_on && self.cfg.congestion_aware;
        let idle: Vec<(VehicleId, crate::network::Location)> = self
            .fleet
            .vehicles
            .iter()
            .filter(|v| !v.is_on_break(now) && !v.has_customer_stops())
            .map(|v| (v.id, v.position))
            .collect();
        let targets: Vec<(RequestId, crate::network::Location)> =
            refused.iter().map(|r| (r.id, r.origin)).collect();
        let outcome = assignment::rebalance_assign(&idle, &targets, &self.net)?;

        let mut rescued = 0usize;
        let mut lost = 0usize;
        for m in &outcome.matches {
            let request = refused.iter().find(|r| r.id == m.request).expect("matched id");
            if self.cfg.accept_rebalance {
                let waived = request.with_waived_deadlines();
                let route = {
                    let plan = TimeView::new(&self.net, plan_congestion);
                    let vehicle = self.fleet.vehicle(m.vehicle).expect("idle vehicle");
                    let inst = DarpInstance {
                        request: &waived,
                        schedule: Vec::new(),
                        scheduled: &vehicle.scheduled,
                        start: vehicle.position,
                        start_time: now,
                        now,
                        onboard: vehicle.onboard_count(),
                        capacity: vehicle.capacity as usize,
                        view: plan,
                    };
                    let route = vec![
                        Stop::new(StopKind::Pickup, waived.id, waived.origin),
                        Stop::new(StopKind::Delivery, waived.id, waived.destination),
                    ];
                    let eval = evaluate_route(&inst, &route);
                    eval.feasible.then(|| {
                        let mut route = route;
                        for (stop, &t) in route.iter_mut().zip(&eval.service_times) {
                            stop.planned_arrival = t;
                        }
                        route
                    })
                };
                match route {
                    Some(route) => {
                        self.commit_route(m.vehicle, &waived, route, true, batch, now);
                        rescued += 1;
                    }
                    None => {
                        self.mark_refused(m.request, batch);
                        lost += 1;
                    }
                }
            } else {
                self.mark_refused(m.request, batch);
                lost += 1;
                let vehicle = self.fleet.vehicle_mut(m.vehicle).expect("idle vehicle");
                vehicle.position_time = now;
                let origin = request.origin;
                vehicle.schedule = vec![Stop::new(StopKind::Relocate, m.request, origin)];
            }
        }
        for id in &outcome.unserved {
            self.mark_refused(*id, batch);
            lost += 1;
        }
        Ok((rescued, lost))
    }

    fn commit_route(
        &mut self,
        vid: VehicleId,
        request: &TripRequest,
        route: Vec<Stop>,
        rebalanced: bool,
        batch: u64,
        now: Secs,
    ) {
        let vehicle = self.fleet.vehicle_mut(vid).expect("committed vehicle exists");
        if !vehicle.has_customer_stops() {
            // idle or relocating vehicles restart from the batch instant
            vehicle.position_time = now;
        }
        vehicle.schedule = route;
        vehicle
            .scheduled
            .insert(request.id, ScheduledRequest { request: request.clone(), picked_up_at: None });
        let company = vehicle.company as usize;
        if let Some(rec) = self.records.get_mut(&request.id) {
            rec.assigned = Some(AssignedInfo { vehicle: vid, batch, rebalanced });
        }
        if let Some(shares) = &mut self.shares {
            shares.served[company] += 1;
        }
    }

    fn mark_refused(&mut self, id: RequestId, batch: u64) {
        if let Some(rec) = self.records.get_mut(&id) {
            rec.refused_at_batch = Some(batch);
        }
    }

    /// Applies scenario events whose timestamp has been reached.
    fn apply_scenario_events(&mut self, window_end: Secs) {
        while self.scenario_cursor < self.scenario.events.len() {
            let (t, event) = self.scenario.events[self.scenario_cursor];
            if t > window_end {
                break;
            }
            match event {
                ScenarioEvent::DemandMultiplier(m) => self.demand_multiplier = m,
                ScenarioEvent::BreakFraction(f) => self.break_fraction = f,
                ScenarioEvent::Congestion(on) => self.congestion_on = on,
            }
            self.scenario_cursor += 1;
        }
    }

    /// Every 30 simulated minutes, sends a seeded choice of
    /// `floor(fraction * idle)` idle vehicles on a 30-minute break.
    fn apply_breaks(&mut self, window_end: Secs) {
        while self.next_break_at <= window_end {
            let at = self.next_break_at;
            let idx = self.next_break_idx;
            self.next_break_at += BREAK_PERIOD;
            self.next_break_idx += 1;
            if self.break_fraction <= 0.0 {
                continue;
            }
            let idle: Vec<usize> = self
                .fleet
                .vehicles
                .iter()
                .enumerate()
                .filter(|(_, v)| {
                    !v.is_on_break(at) && !v.has_customer_stops() && v.onboard_count() == 0
                })
                .map(|(i, _)| i)
                .collect();
            let take = (self.break_fraction * idle.len() as f64).floor() as usize;
            if take == 0 {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(mix(&[self.seed, STREAM_BREAKS, idx]));
            let chosen = rand::seq::index::sample(&mut rng, idle.len(), take);
            for k in chosen {
                let v = &mut self.fleet.vehicles[idle[k]];
                v.on_break_until = Some(at + BREAK_PERIOD);
                v.schedule.clear();
            }
        }
    }

    /// Thins or duplicates the raw window stream to match the demand
    /// multiplier. Duplicates get synthetic ids above the clone watermark.
    fn adjust_demand(&mut self, raw: Vec<TripRequest>, batch: u64) -> Vec<TripRequest> {
        if self.demand_multiplier == 1.0 {
            return raw;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(&[self.seed, STREAM_DEMAND, batch]));
        let whole = self.demand_multiplier.floor() as u64;
        let fraction = self.demand_multiplier - whole as f64;
        let mut out = Vec::new();
        for r in raw {
            let mut copies = whole;
            if rng.random_range(0.0..1.0) < fraction {
                copies += 1;
            }
            for k in 0..copies {
                if k == 0 {
                    out.push(r.clone());
                } else {
                    let mut dup = r.clone();
                    dup.id = RequestId(self.next_clone_id);
                    self.next_clone_id += 1;
                    out.push(dup);
                }
            }
        }
        out
    }

    fn capture_heat(&mut self, hour: u64) {
        let mut per_node: BTreeMap<u32, (u32, u32)> = BTreeMap::new();
        for v in &self.fleet.vehicles {
            let slot = per_node.entry(v.position.node).or_insert((0, 0));
            slot.0 += 1;
            slot.1 += v.onboard_count() as u32;
        }
        for (node, (vehicles, onboard)) in per_node {
            self.heat.push(HeatSample { hour, node, vehicles, onboard });
        }
    }
}
