//! Acceptance suite: one test per criterion, each asserting its stated
//! tolerance and printing a pass line. The simulation criteria share one
//! synthetic scenario: a 20x20 grid with a dominant corner hotspot feeding
//! dispersed destinations, demand scaled proportionally to fleet size.

use std::path::PathBuf;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use fleetmatch::assignment::{
    auction_solve, brute_force_lap, distributed_auction_solve, pad_symmetric, CostEntry, RectCosts,
};
use fleetmatch::darp::{
    evaluate_route, exact_darp, insertion_heuristic, lns, CostKind, DarpInstance, LnsParams,
    SolverChoice,
};
use fleetmatch::model::{
    RequestId, ScheduledRequest, Stop, StopKind, TimeLimits, TripRequest, VehicleId, VehicleState,
};
use fleetmatch::network::{Network, TimeView};

use fleetmatch_cli::config::{NetworkSpec, RunConfig};
use fleetmatch_cli::demand::{generate_demand, rows_to_csv, DemandSpec, Hotspot};
use fleetmatch_cli::runner::{self, RunOutput};

// ---------------------------------------------------------------------------
// shared synthetic scenario
// ---------------------------------------------------------------------------

const GRID: (u32, u32, f64, f64) = (20, 20, 140.0, 10.0);
/// Seconds of maximum wait and maximum detour for every synthetic request.
const WINDOW_S: f64 = 210.0;
/// Demand per vehicle per hour; 40 vehicles over 6 hours draw ~5,000 requests.
const RATE_PER_VEHICLE: f64 = 5000.0 / 6.0 / 40.0;
const HORIZON_S: f64 = 21_600.0;
const WARMUP_S: f64 = 1800.0;

fn scenario_network() -> NetworkSpec {
    NetworkSpec::Grid { width: GRID.0, height: GRID.1, edge_m: GRID.2, speed: GRID.3 }
}

fn scenario_hotspots() -> Vec<Hotspot> {
    vec![
        Hotspot { node: 21, weight: 3.0, radius_m: 700.0 },
        Hotspot { node: 210, weight: 1.0, radius_m: 1900.0 },
    ]
}

fn scratch(name: &str) -> PathBuf {
    let dir =
        std::env::temp_dir().join(format!("fleetmatch-accept-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// The simulation criteria run one at a time so that wall-clock measurements
/// (criteria 4 and 7) are not skewed by sibling tests on the same cores.
fn sim_lock() -> MutexGuard<'static, ()> {
    static LOCK: OnceLock<Mutex<()>> = OnceLock::new();
    match LOCK.get_or_init(|| Mutex::new(())).lock() {
        Ok(guard) => guard,
        Err(poisoned) => poisoned.into_inner(),
    }
}

fn write_scenario_demand(dir: &PathBuf, fleet: u32, seed: u64) -> PathBuf {
    let net = Network::grid(GRID.0, GRID.1, GRID.2, GRID.3);
    let spec = DemandSpec {
        rate_per_hour: fleet as f64 * RATE_PER_VEHICLE,
        duration_s: HORIZON_S,
        start_s: 0.0,
        origin_hotspots: scenario_hotspots(),
        dest_hotspots: Vec::new(),
    };
    let rows = generate_demand(&spec, &net, 100 + seed).unwrap();
    let path = dir.join(format!("demand-{fleet}-{seed}.csv"));
    std::fs::write(&path, rows_to_csv(&rows)).unwrap();
    path
}

struct ScenarioRun {
    fleet: u32,
    seed: u64,
    rebalance: bool,
    companies: Vec<fleetmatch::scheduler::CompanySpec>,
    congestion: Option<&'static str>,
    congestion_aware: bool,
    maxn: Option<usize>,
}

impl ScenarioRun {
    fn new(fleet: u32, seed: u64) -> ScenarioRun {
        ScenarioRun {
            fleet,
            seed,
            rebalance: true,
            companies: Vec::new(),
            congestion: None,
            congestion_aware: true,
            maxn: None,
        }
    }

    fn execute(&self, dir: &PathBuf, label: &str) -> RunOutput {
        let requests = write_scenario_demand(dir, self.fleet, self.seed);
        let congestion_profile = self.congestion.map(|text| {
            let p = dir.join(format!("congestion-{label}.csv"));
            std::fs::write(&p, text).unwrap();
            p
        });
        let cfg = RunConfig {
            requests,
            network: scenario_network(),
            fleet: self.fleet,
            capacity: 4,
            // candidate budget scales with the fleet share, as in the
            // proportional-demand experiment
            maxn: self.maxn.unwrap_or((self.fleet / 5) as usize),
            batch_period: 10.0,
            cost_kind: CostKind::TotalDuration,
            solver: SolverChoice::Auto,
            metric: fleetmatch::network::DistanceMetric::Euclidean,
            rebalance: self.rebalance,
            accept_rebalance: true,
            pipeline_factor: 2,
            companies: self.companies.clone(),
            scenario: None,
            congestion_profile,
            congestion_aware: self.congestion_aware,
            max_wait: WINDOW_S,
            max_detour: WINDOW_S,
            seed: self.seed,
            warmup: WARMUP_S,
            duration: None,
            threads: 1,
            out_dir: dir.join(format!("out-{label}")),
            lap_dump_dir: None,
        };
        runner::execute(&cfg).unwrap()
    }
}

// ---------------------------------------------------------------------------
// criterion 1: auction optimality against the brute-force oracle
// ---------------------------------------------------------------------------

fn random_rect(rng: &mut ChaCha8Rng, max_dim: usize, density: f64) -> RectCosts {
    let rows = rng.random_range(1..=max_dim);
    let cols = rng.random_range(1..=max_dim);
    let mut entries = Vec::new();
    for row in 0..rows {
        for col in 0..cols {
            if rng.random_range(0.0..1.0) < density {
                entries.push(CostEntry { row, col, cost: rng.random_range(0..=1000) });
            }
        }
    }
    RectCosts { rows, cols, entries }
}

#[test]
fn criterion_1_lap_optimality() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10_001);
    for trial in 0..1000 {
        let costs = random_rect(&mut rng, 6, 0.65);
        let matrix = pad_symmetric(&costs).unwrap();
        let auction = auction_solve(&matrix).unwrap();
        let oracle = brute_force_lap(&matrix).unwrap();
        assert_eq!(auction.objective, oracle.objective, "trial {trial}");
        assert_eq!(auction.matches.len(), oracle.matches.len(), "trial {trial}");
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "1000 instances took {elapsed:.2}s, budget is 5s");
    println!("criterion 1 (LAP optimality, 1000 instances, {elapsed:.2}s): PASS");
}

// ---------------------------------------------------------------------------
// criterion 2: distributed bid exchange equals the centralized auction
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_distributed_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(10_002);
    for trial in 0..500 {
        let mut entries = Vec::new();
        for row in 0..6 {
            for col in 0..6 {
                if rng.random_range(0.0..1.0) < 0.75 {
                    entries.push(CostEntry { row, col, cost: rng.random_range(0..=1000) });
                }
            }
        }
        let costs = RectCosts { rows: 6, cols: 6, entries };
        let matrix = pad_symmetric(&costs).unwrap();
        let companies: Vec<u32> = (0..6).map(|r| if (r + trial) % 2 == 0 { 1 } else { 2 }).collect();
        let central = auction_solve(&matrix).unwrap();
        let distributed = distributed_auction_solve(&matrix, &companies).unwrap();
        assert_eq!(distributed.result.objective, central.objective, "trial {trial}");
        assert!(!distributed.log.is_empty());
    }
    println!("criterion 2 (distributed equivalence, 500 two-company splits): PASS");
}

// ---------------------------------------------------------------------------
// criterion 3: DARP solver dominance against an unpruned permutation oracle
// ---------------------------------------------------------------------------

struct DarpCase {
    vehicle: VehicleState,
    request: TripRequest,
}

fn random_darp_case(net: &Network, rng: &mut ChaCha8Rng) -> DarpCase {
    let nodes = net.num_nodes() as u32;
    let pick_pair = |rng: &mut ChaCha8Rng| {
        let o = rng.random_range(0..nodes);
        let d = (o + 1 + rng.random_range(0..nodes - 1)) % nodes;
        (o, d)
    };
    let capacity = rng.random_range(1..=3u32);
    let mut vehicle =
        VehicleState::new(VehicleId(0), 0, capacity, net.location(rng.random_range(0..nodes)).unwrap());
    let scheduled = rng.random_range(0..=3usize);
    let mut onboard = 0;
    for k in 0..scheduled {
        let (o, d) = pick_pair(rng);
        let t = -rng.random_range(0.0..200.0);
        let r = TripRequest::instantaneous(
            RequestId(100 + k as u64),
            net.location(o).unwrap(),
            net.location(d).unwrap(),
            t,
            TimeLimits::new(rng.random_range(200.0..600.0), rng.random_range(200.0..600.0)),
            net,
        )
        .unwrap();
        if onboard < capacity && rng.random_range(0.0..1.0) < 0.4 {
            vehicle
                .scheduled
                .insert(r.id, ScheduledRequest { request: r.clone(), picked_up_at: Some(t) });
            vehicle.schedule.push(Stop::new(StopKind::Delivery, r.id, r.destination));
            onboard += 1;
        } else {
            vehicle
                .scheduled
                .insert(r.id, ScheduledRequest { request: r.clone(), picked_up_at: None });
            vehicle.schedule.push(Stop::new(StopKind::Pickup, r.id, r.origin));
            vehicle.schedule.push(Stop::new(StopKind::Delivery, r.id, r.destination));
        }
    }
    let (o, d) = pick_pair(rng);
    let request = TripRequest::instantaneous(
        RequestId(1),
        net.location(o).unwrap(),
        net.location(d).unwrap(),
        0.0,
        TimeLimits::new(rng.random_range(200.0..600.0), rng.random_range(200.0..600.0)),
        net,
    )
    .unwrap();
    DarpCase { vehicle, request }
}

/// Unpruned oracle: every precedence-valid ordering of the pending stops plus
/// the new pair, scored by `evaluate_route` alone.
fn permutation_oracle(inst: &DarpInstance) -> Option<f64> {
    let mut items: Vec<Stop> = inst.schedule.clone();
    items.push(Stop::new(StopKind::Pickup, inst.request.id, inst.request.origin));
    items.push(Stop::new(StopKind::Delivery, inst.request.id, inst.request.destination));
    let pickup_of: Vec<Option<usize>> = items
        .iter()
        .map(|s| {
            (s.kind == StopKind::Delivery)
                .then(|| {
                    items
                        .iter()
                        .position(|p| p.request == s.request && p.kind == StopKind::Pickup)
                })
                .flatten()
        })
        .collect();
    fn walk(
        inst: &DarpInstance,
        items: &[Stop],
        pickup_of: &[Option<usize>],
        seq: &mut Vec<usize>,
        best: &mut Option<f64>,
    ) {
        if seq.len() == items.len() {
            let route: Vec<Stop> = seq.iter().map(|&i| items[i].clone()).collect();
            let eval = evaluate_route(inst, &route);
            if eval.feasible && best.is_none_or(|b| eval.duration < b) {
                *best = Some(eval.duration);
            }
            return;
        }
        for i in 0..items.len() {
            if seq.contains(&i) {
                continue;
            }
            if let Some(p) = pickup_of[i] {
                if !seq.contains(&p) {
                    continue;
                }
            }
            seq.push(i);
            walk(inst, items, pickup_of, seq, best);
            seq.pop();
        }
    }
    let mut best = None;
    walk(inst, &items, &pickup_of, &mut Vec::new(), &mut best);
    best
}

#[test]
fn criterion_3_darp_dominance_chain() {
    let started = Instant::now();
    let net = Network::grid(12, 12, 100.0, 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(10_003);
    let params = LnsParams { max_iterations: 10, ..LnsParams::default() };
    let mut exact_checked = 0u32;
    let mut chains_checked = 0u32;
    for trial in 0..2000u64 {
        let case = random_darp_case(&net, &mut rng);
        let inst = DarpInstance::for_vehicle(&case.vehicle, &case.request, TimeView::base(&net), 0.0);
        let exact = exact_darp(&inst);
        let oracle = permutation_oracle(&inst);
        match (&exact, oracle) {
            (None, None) => {}
            (Some(sol), Some(best)) => {
                assert_eq!(sol.duration, best, "trial {trial}: pruned exact vs oracle");
                exact_checked += 1;
            }
            (a, b) => {
                panic!("trial {trial}: feasibility disagreement exact={} oracle={}", a.is_some(), b.is_some())
            }
        }
        if let Some(ins) = insertion_heuristic(&inst, 4) {
            let improved = lns(&inst, &params, trial).expect("lns starts from insertion");
            let exact = exact.as_ref().expect("insertion feasible implies exact feasible");
            assert!(exact.duration <= improved.duration + 1e-9, "trial {trial}");
            assert!(improved.duration <= ins.duration + 1e-9, "trial {trial}");
            for sol in [&ins, &improved, exact] {
                let eval = evaluate_route(&inst, &sol.route);
                assert!(eval.feasible, "trial {trial}: returned route must be feasible");
            }
            chains_checked += 1;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "2000 instances took {elapsed:.2}s, budget is 30s");
    assert!(exact_checked > 1000 && chains_checked > 1000, "generator must produce feasible cases");
    println!(
        "criterion 3 (DARP dominance, 2000 instances, {exact_checked} exact / {chains_checked} chains, {elapsed:.2}s): PASS"
    );
}

// ---------------------------------------------------------------------------
// criterion 4: feasibility and real-time budget on the reference scenario
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_feasibility_under_simulation() {
    let _serial = sim_lock();
    let dir = scratch("c4");
    let out = ScenarioRun::new(40, 1).execute(&dir, "c4");
    let requests = out.records.len();
    assert!(
        (4500..=5500).contains(&requests),
        "expected ~5000 requests over six hours, got {requests}"
    );
    assert_eq!(out.summary.window_violations, 0, "time-window violations for served customers");
    for b in &out.batches {
        // occupancy histogram has no mass beyond the seat capacity
        assert!(b.occupancy.len() <= 5);
        assert_eq!(b.occupancy.iter().sum::<u32>(), 40);
    }
    let max_batch = out.batches.iter().map(|b| b.total_s).fold(0.0, f64::max);
    assert!(max_batch < 1.0, "slowest batch took {max_batch:.3}s, budget is 1s");
    println!(
        "criterion 4 (feasibility, {requests} requests, SR {:.2}%, slowest batch {:.4}s): PASS",
        out.summary.service_rate_pct, max_batch
    );
}

// ---------------------------------------------------------------------------
// criterion 5: service-rate trends across fleet size and rebalancing
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_fleet_size_and_rebalancing_trends() {
    let _serial = sim_lock();
    let dir = scratch("c5");
    let seeds = [1u64, 2, 3, 4, 5];
    let mut means = Vec::new();
    for fleet in [20u32, 40, 80] {
        let mut acc = 0.0;
        for &seed in &seeds {
            let out = ScenarioRun::new(fleet, seed).execute(&dir, &format!("f{fleet}-s{seed}"));
            acc += out.summary.service_rate_pct;
        }
        means.push(acc / seeds.len() as f64);
    }
    assert!(
        means[0] < means[1] && means[1] < means[2],
        "service rate must increase with proportional scale: {means:?}"
    );

    let mut off_acc = 0.0;
    for &seed in &seeds {
        let mut run = ScenarioRun::new(20, seed);
        run.rebalance = false;
        off_acc += run.execute(&dir, &format!("off-s{seed}")).summary.service_rate_pct;
    }
    let off_mean = off_acc / seeds.len() as f64;
    let gap = means[0] - off_mean;
    assert!(
        gap >= 5.0,
        "rebalancing should add at least 5 percentage points at the smallest fleet, got {gap:.2}"
    );
    println!(
        "criterion 5 (trends: SR {:.2} -> {:.2} -> {:.2}; rebalancing +{gap:.2}pp at fleet 20): PASS",
        means[0], means[1], means[2]
    );
}

// ---------------------------------------------------------------------------
// criterion 6: two-company share control
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_share_control() {
    let _serial = sim_lock();
    let dir = scratch("c6");
    let mut run = ScenarioRun::new(40, 1);
    run.companies = vec![
        fleetmatch::scheduler::CompanySpec { id: 1, share: 0.75, fleet: 30 },
        fleetmatch::scheduler::CompanySpec { id: 2, share: 0.25, fleet: 10 },
    ];
    let out = run.execute(&dir, "c6");
    let burn_in = 7200.0;
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    for b in &out.batches {
        if b.window_end <= burn_in {
            continue;
        }
        let Some(s) = &b.shares else { continue };
        let total: u64 = s.served.iter().sum();
        if total == 0 {
            continue;
        }
        worst = worst.max(s.violation.abs() / total as f64);
        samples += 1;
    }
    assert!(samples > 1000, "expected a long post-burn-in trace, got {samples} samples");
    assert!(
        worst < 0.01,
        "relative share violation must stay below 1% after burn-in, got {:.4}%",
        worst * 100.0
    );
    println!(
        "criterion 6 (share control, worst |V|/total {:.3}% over {samples} batches): PASS",
        worst * 100.0
    );
}

// ---------------------------------------------------------------------------
// criterion 7: cost-phase time scales linearly in the candidate budget
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_cost_phase_scaling() {
    let _serial = sim_lock();
    let dir = scratch("c7");
    // two measurements per point, keeping the minimum, to damp scheduler noise
    let mut totals = Vec::new();
    for maxn in [4usize, 8, 16] {
        let mut best = f64::INFINITY;
        for rep in 0..2 {
            let mut run = ScenarioRun::new(80, 1);
            run.maxn = Some(maxn);
            let out = run.execute(&dir, &format!("maxn{maxn}-{rep}"));
            best = best.min(out.batches.iter().map(|b| b.cost_phase_s).sum::<f64>());
        }
        totals.push(best);
    }
    let r1 = totals[1] / totals[0];
    let r2 = totals[2] / totals[1];
    for (label, r) in [("4->8", r1), ("8->16", r2)] {
        assert!(
            (1.5..=2.5).contains(&r),
            "cost phase {label} ratio {r:.2} outside 2 +/- 25%"
        );
    }
    println!(
        "criterion 7 (cost-phase scaling {:.3}s / {:.3}s / {:.3}s, ratios {r1:.2} and {r2:.2}): PASS",
        totals[0], totals[1], totals[2]
    );
}

// ---------------------------------------------------------------------------
// criterion 8: byte-identical replays
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_determinism() {
    let _serial = sim_lock();
    let dir = scratch("c8");
    let a = ScenarioRun::new(20, 9).execute(&dir, "a");
    let b = ScenarioRun::new(20, 9).execute(&dir, "b");
    let read = |p: &PathBuf| std::fs::read(p).unwrap();
    assert_eq!(read(&a.artifacts.metrics), read(&b.artifacts.metrics), "metrics.csv");
    assert_eq!(read(&a.artifacts.summary), read(&b.artifacts.summary), "summary.json");
    assert_eq!(read(&a.artifacts.occupancy), read(&b.artifacts.occupancy), "occupancy.csv");
    assert_eq!(read(&a.artifacts.heatgrid), read(&b.artifacts.heatgrid), "heatgrid.csv");
    println!("criterion 8 (determinism: four artifacts byte-identical across replays): PASS");
}

// ---------------------------------------------------------------------------
// criterion 9: congestion sensitivity, oracle-aware vs unaware
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_congestion_sensitivity() {
    let _serial = sim_lock();
    let dir = scratch("c9");
    const PROFILE: &str = "hour_start,ratio\n0,1.0\n2,0.6\n4,1.0\n";
    let seeds = [1u64, 2, 3];
    let mut sr_base = 0.0;
    let mut sr_aware = 0.0;
    let mut wait_aware = 0.0;
    let mut wait_unaware = 0.0;
    for &seed in &seeds {
        let base = ScenarioRun::new(40, seed).execute(&dir, &format!("base-{seed}"));
        sr_base += base.summary.service_rate_pct;

        let mut aware = ScenarioRun::new(40, seed);
        aware.congestion = Some(PROFILE);
        let aware = aware.execute(&dir, &format!("aware-{seed}"));
        sr_aware += aware.summary.service_rate_pct;
        wait_aware += aware.summary.waiting_all_s.unwrap();

        let mut unaware = ScenarioRun::new(40, seed);
        unaware.congestion = Some(PROFILE);
        unaware.congestion_aware = false;
        let unaware = unaware.execute(&dir, &format!("unaware-{seed}"));
        wait_unaware += unaware.summary.waiting_all_s.unwrap();
    }
    let n = seeds.len() as f64;
    let (sr_base, sr_aware) = (sr_base / n, sr_aware / n);
    let (wait_aware, wait_unaware) = (wait_aware / n, wait_unaware / n);
    assert!(
        sr_aware < sr_base,
        "midday congestion must reduce the service rate: {sr_aware:.2} vs {sr_base:.2}"
    );
    assert!(
        wait_aware <= wait_unaware,
        "planning with congestion-adjusted times must not wait longer: {wait_aware:.1}s vs {wait_unaware:.1}s"
    );
    println!(
        "criterion 9 (congestion: SR {sr_base:.2} -> {sr_aware:.2}; waiting aware {:.2} min <= unaware {:.2} min): PASS",
        wait_aware / 60.0,
        wait_unaware / 60.0
    );
}
