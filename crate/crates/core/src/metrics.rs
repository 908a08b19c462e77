//! Per-batch counters and run-level aggregation.

use thiserror::Error;

use crate::model::{RequestId, VehicleId};
use crate::Secs;

/// Running sum/count pair for one served population.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SumCount {
    pub sum: Secs,
    pub count: u64,
}

impl SumCount {
    pub fn add(&mut self, v: Secs) {
        self.sum += v;
        self.count += 1;
    }

    pub fn merge(self, other: SumCount) -> SumCount {
        SumCount { sum: self.sum + other.sum, count: self.count + other.count }
    }

    pub fn mean(&self) -> Option<Secs> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

/// Split of one time statistic into the normally-served population and the
/// rebalance-rescued one; the blended aggregate is their merge.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PopulationStats {
    pub normal: SumCount,
    pub rescued: SumCount,
}

impl PopulationStats {
    pub fn all(&self) -> SumCount {
        self.normal.merge(self.rescued)
    }
}

/// Cumulative served counters of a multi-company run at one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareSample {
    pub served: Vec<u64>,
    /// Signed deviation of the second company from its agreed share.
    pub violation: f64,
}

#[derive(Debug, Clone)]
pub struct BatchMetrics {
    pub batch: u64,
    pub window_end: Secs,
    pub requests_in: usize,
    /// Requests committed to vehicles through the main assignment.
    pub assigned: usize,
    /// Requests rescued by an accepted rebalance offer.
    pub rebalance_assigned: usize,
    /// Final refusals in this batch.
    pub refused: usize,
    pub picked_up: usize,
    pub delivered: usize,
    /// Waiting times of pickups executed during this batch.
    pub waiting: PopulationStats,
    /// Detour times of deliveries executed during this batch.
    pub detour: PopulationStats,
    /// Vehicles per onboard count, after commitments.
    pub occupancy: Vec<u32>,
    /// Deadline misses observed at execution for non-rescued customers.
    pub window_violations: u64,
    pub shares: Option<ShareSample>,
    pub cost_phase_s: f64,
    pub lap_phase_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignedInfo {
    pub vehicle: VehicleId,
    pub batch: u64,
    pub rebalanced: bool,
}

/// Lifecycle of one request across the run.
#[derive(Debug, Clone)]
pub struct RequestRecord {
    pub id: RequestId,
    pub request_time: Secs,
    pub direct_time: Secs,
    pub pickup_deadline: Secs,
    pub delivery_deadline: Secs,
    pub assigned: Option<AssignedInfo>,
    pub refused_at_batch: Option<u64>,
    pub picked_up_at: Option<Secs>,
    pub delivered_at: Option<Secs>,
}

impl RequestRecord {
    pub fn waiting(&self) -> Option<Secs> {
        self.picked_up_at.map(|t| (t - self.request_time).max(0.0))
    }

    pub fn detour(&self) -> Option<Secs> {
        self.delivered_at.map(|t| (t - self.request_time - self.direct_time).max(0.0))
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("no batches after the warm-up cutoff")]
pub struct EmptyRun;

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub batches: usize,
    pub requests_total: usize,
    pub served: usize,
    pub refused: usize,
    pub rebalance_served: usize,
    pub service_rate_pct: f64,
    pub waiting_all_s: Option<f64>,
    pub waiting_normal_s: Option<f64>,
    pub waiting_rescued_s: Option<f64>,
    pub detour_all_s: Option<f64>,
    pub detour_normal_s: Option<f64>,
    pub detour_rescued_s: Option<f64>,
    pub occupancy_mean_fraction: Vec<f64>,
    pub window_violations: u64,
    pub share_served: Option<Vec<u64>>,
    pub share_violation_final: Option<f64>,
    pub share_violation_abs_max: Option<f64>,
    pub mean_cost_phase_s: f64,
    pub mean_lap_phase_s: f64,
    pub mean_batch_s: f64,
}

/// Aggregates a run, ignoring requests issued and batches ended before the
/// warm-up cutoff. Deadline violations are counted over the whole run.
pub fn summarize_run(
    batches: &[BatchMetrics],
    records: &[RequestRecord],
    warmup: Secs,
) -> Result<RunSummary, EmptyRun> {
    let live: Vec<&BatchMetrics> = batches.iter().filter(|b| b.window_end > warmup).collect();
    if live.is_empty() {
        return Err(EmptyRun);
    }
    let eligible: Vec<&RequestRecord> =
        records.iter().filter(|r| r.request_time >= warmup).collect();

    let served = eligible.iter().filter(|r| r.assigned.is_some()).count();
    let rebalance_served =
        eligible.iter().filter(|r| r.assigned.is_some_and(|a| a.rebalanced)).count();
    let refused = eligible.iter().filter(|r| r.refused_at_batch.is_some()).count();
    let total = eligible.len();
    let service_rate_pct =
        if total == 0 { 0.0 } else { served as f64 / total as f64 * 100.0 };

    let mut waiting = PopulationStats::default();
    let mut detour = PopulationStats::default();
    for r in &eligible {
        let Some(info) = r.assigned else { continue };
        if let Some(w) = r.waiting() {
            if info.rebalanced {
                waiting.rescued.add(w);
            } else {
                waiting.normal.add(w);
            }
        }
        if let Some(d) = r.detour() {
            if info.rebalanced {
                detour.rescued.add(d);
            } else {
                detour.normal.add(d);
            }
        }
    }

    let hist_len = live.iter().map(|b| b.occupancy.len()).max().unwrap_or(0);
    let mut occupancy_mean_fraction = vec![0.0; hist_len];
    for b in &live {
        let fleet: u32 = b.occupancy.iter().sum();
        if fleet == 0 {
            continue;
        }
        for (i, &c) in b.occupancy.iter().enumerate() {
            occupancy_mean_fraction[i] += c as f64 / fleet as f64;
        }
    }
    for v in &mut occupancy_mean_fraction {
        *v /= live.len() as f64;
    }

    let share_samples: Vec<&ShareSample> =
        live.iter().filter_map(|b| b.shares.as_ref()).collect();
    let (share_served, share_violation_final, share_violation_abs_max) =
        match share_samples.last() {
            Some(last) => (
                Some(last.served.clone()),
                Some(last.violation),
                Some(
                    share_samples
                        .iter()
                        .map(|s| s.violation.abs())
                        .fold(0.0, f64::max),
                ),
            ),
            None => (None, None, None),
        };

    let nb = live.len() as f64;
    Ok(RunSummary {
        batches: live.len(),
        requests_total: total,
        served,
        refused,
        rebalance_served,
        service_rate_pct,
        waiting_all_s: waiting.all().mean(),
        waiting_normal_s: waiting.normal.mean(),
        waiting_rescued_s: waiting.rescued.mean(),
        detour_all_s: detour.all().mean(),
        detour_normal_s: detour.normal.mean(),
        detour_rescued_s: detour.rescued.mean(),
        occupancy_mean_fraction,
        window_violations: batches.iter().map(|b| b.window_violations).sum(),
        share_served,
        share_violation_final,
        share_violation_abs_max,
        mean_cost_phase_s: live.iter().map(|b| b.cost_phase_s).sum::<f64>() / nb,
        mean_lap_phase_s: live.iter().map(|b| b.lap_phase_s).sum::<f64>() / nb,
        mean_batch_s: live.iter().map(|b| b.total_s).sum::<f64>() / nb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: u64, t: Secs, served: bool, rebalanced: bool) -> RequestRecord {
        RequestRecord {
            id: RequestId(id),
            request_time: t,
            direct_time: 100.0,
            pickup_deadline: t + 420.0,
            delivery_deadline: t + 940.0,
            assigned: served.then_some(AssignedInfo {
                vehicle: VehicleId(0),
                batch: 0,
                rebalanced,
            }),
            refused_at_batch: (!served).then_some(0),
            picked_up_at: served.then_some(t + 60.0),
            delivered_at: served.then_some(t + 200.0),
        }
    }

    fn batch(window_end: Secs) -> BatchMetrics {
        BatchMetrics {
            batch: 0,
            window_end,
            requests_in: 0,
            assigned: 0,
            rebalance_assigned: 0,
            refused: 0,
            picked_up: 0,
            delivered: 0,
            waiting: PopulationStats::default(),
            detour: PopulationStats::default(),
            occupancy: vec![2, 1, 0],
            window_violations: 0,
            shares: None,
            cost_phase_s: 0.0,
            lap_phase_s: 0.0,
            total_s: 0.0,
        }
    }

    #[test]
    fn all_served_means_full_service_rate() {
        let records: Vec<_> = (0..10).map(|i| record(i, 100.0, true, false)).collect();
        let s = summarize_run(&[batch(200.0)], &records, 0.0).unwrap();
        assert_eq!(s.service_rate_pct, 100.0);
        assert_eq!(s.served, 10);
        assert_eq!(s.waiting_normal_s, Some(60.0));
        assert_eq!(s.detour_normal_s, Some(100.0));
        assert_eq!(s.waiting_rescued_s, None);
    }

    #[test]
    fn ninety_five_of_one_hundred() {
        let mut records: Vec<_> = (0..95).map(|i| record(i, 100.0, true, false)).collect();
        records.extend((95..100).map(|i| record(i, 100.0, false, false)));
        let s = summarize_run(&[batch(200.0)], &records, 0.0).unwrap();
        assert_eq!(s.service_rate_pct, 95.00);
        assert_eq!(s.refused, 5);
    }

    #[test]
    fn warmup_filters_requests_and_batches() {
        let records =
            vec![record(0, 50.0, false, false), record(1, 150.0, true, true)];
        let s = summarize_run(&[batch(100.0), batch(200.0)], &records, 100.0).unwrap();
        assert_eq!(s.requests_total, 1);
        assert_eq!(s.served, 1);
        assert_eq!(s.rebalance_served, 1);
        assert_eq!(s.batches, 1);
        assert_eq!(s.waiting_all_s, Some(60.0));
        assert_eq!(s.waiting_normal_s, None);
        assert!(matches!(summarize_run(&[batch(100.0)], &records, 100.0), Err(EmptyRun)));
    }

    #[test]
    fn occupancy_fractions_average_over_batches() {
        let s = summarize_run(&[batch(10.0), batch(20.0)], &[], 0.0).unwrap();
        assert_eq!(s.occupancy_mean_fraction, vec![2.0 / 3.0, 1.0 / 3.0, 0.0]);
    }
}
