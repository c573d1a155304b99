//! Response-time statistics and slot utilization, computed from traces.
//!
//! Reports are reconstructed purely from the event trace (plus the
//! workload and board geometry for resource lookups), never from
//! scheduler internals, so every policy is measured identically.

use crate::board::SlotSize;
use crate::engine::{AppId, BoardId, EventKind, EventTrace, SlotId};
use crate::migrate::{DSample, MigrationRecord};
use crate::sched::Policy;
use crate::time::SimTime;
use crate::workload::{AppSpec, Workload};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("percentile of an empty sample set")]
    EmptySamples,
    #[error("percentile {p} outside (0, 100]")]
    BadPercentile { p: f64 },
    #[error("workload digests differ: {left} vs {right}")]
    DigestMismatch { left: String, right: String },
    #[error("app {app} never completed in the trace")]
    Incomplete { app: AppId },
}

/// Nearest-rank percentile: the smallest sample whose rank is at least
/// ⌈p/100 · n⌉. The rank is computed in exact integer arithmetic (p is
/// taken at 10⁻⁴ precision), so no interpolation and no float edge
/// cases.
pub fn percentile(samples: &[u64], p: f64) -> Result<u64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(MetricsError::BadPercentile { p });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let p_micro = (p * 10_000.0).round() as u128;
    let n = sorted.len() as u128;
    let rank = (p_micro * n).div_ceil(1_000_000).max(1) as usize;
    Ok(sorted[rank - 1])
}

/// Exact occupancy as a rational: resource·busy-time over
/// capacity·horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occupancy {
    pub num: u128,
    pub den: u128,
}

impl Occupancy {
    pub const ZERO: Occupancy = Occupancy { num: 0, den: 1 };

    pub fn new(num: u128, den: u128) -> Self {
        Occupancy {
            num,
            den: den.max(1),
        }
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Exact cross-multiplied ratio check: self == factor_num/factor_den · other.
    pub fn equals_scaled(&self, other: &Occupancy, factor_num: u128, factor_den: u128) -> bool {
        self.num * other.den * factor_den == other.num * self.den * factor_num
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppReport {
    pub app: AppId,
    pub arrival_us: u64,
    pub completion_us: u64,
    pub response_us: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlotReport {
    pub board: BoardId,
    pub slot: SlotId,
    /// Fraction of the horizon the slot hosted a loaded bitstream.
    pub busy_fraction: f64,
    /// Time-weighted resource occupancy while hosting (LUT component).
    pub lut_occupancy: f64,
    /// Time-weighted resource occupancy while hosting (FF component).
    pub ff_occupancy: f64,
}

/// Everything measured from one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub policy: String,
    pub seed: u64,
    pub config_digest: String,
    pub workload_digest: String,
    pub apps: Vec<AppReport>,
    pub mean_response_ms: f64,
    pub p95_response_ms: f64,
    pub p99_response_ms: f64,
    /// PR service starts that waited behind another load.
    pub blocked_pr_count: u32,
    pub slots: Vec<SlotReport>,
    pub migrations: Vec<MigrationRecord>,
    pub d_series: Vec<DSample>,
}

impl RunReport {
    pub fn response_samples_us(&self) -> Vec<u64> {
        self.apps.iter().map(|a| a.response_us).collect()
    }
}

/// Mean-response improvement of `policy` over `baseline`; values above
/// 1 mean the policy is faster. Both reports must come from the same
/// workload.
pub fn normalized_reduction(policy: &RunReport, baseline: &RunReport) -> Result<f64, MetricsError> {
    if policy.workload_digest != baseline.workload_digest {
        return Err(MetricsError::DigestMismatch {
            left: policy.workload_digest.clone(),
            right: baseline.workload_digest.clone(),
        });
    }
    Ok(baseline.mean_response_ms / policy.mean_response_ms)
}

/// Geometry the reconstruction needs per board.
#[derive(Debug, Clone, Copy)]
pub struct BoardGeometry {
    pub board: BoardId,
    pub big_count: u32,
    pub little_count: u32,
    pub little_capacity: u32,
}

impl BoardGeometry {
    fn slot_size(&self, slot: SlotId) -> SlotSize {
        if slot < self.big_count {
            SlotSize::Big
        } else {
            SlotSize::Little
        }
    }

    fn capacity(&self, slot: SlotId) -> u64 {
        match self.slot_size(slot) {
            SlotSize::Big => 2 * self.little_capacity as u64,
            SlotSize::Little => self.little_capacity as u64,
        }
    }
}

struct Hosting {
    opened: SimTime,
    last_item_end: Option<SimTime>,
    lut: u64,
    ff: u64,
}

/// Builds the report from a trace. Slot statistics are reconstructed
/// from PR completions and item completions; each hosting interval runs
/// from the PR completion to the hosted stage's last item completion.
pub fn build_report(
    trace: &EventTrace,
    workload: &Workload,
    specs: &[AppSpec],
    boards: &[BoardGeometry],
    policy: Policy,
    config_digest: &str,
) -> Result<RunReport, MetricsError> {
    let mut arrivals: BTreeMap<AppId, SimTime> = BTreeMap::new();
    let mut completions: BTreeMap<AppId, SimTime> = BTreeMap::new();
    let mut blocked_pr_count = 0u32;
    let mut horizon = SimTime::ZERO;

    // slot hosting reconstruction
    let mut open: BTreeMap<(BoardId, SlotId), Hosting> = BTreeMap::new();
    let mut busy: BTreeMap<(BoardId, SlotId), (u64, u128, u128)> = BTreeMap::new();

    let spec_of = |app: AppId| -> &AppSpec {
        let name = &workload.apps[app as usize].spec;
        specs
            .iter()
            .find(|s| &s.name == name)
            .expect("workload validated against the catalog")
    };
    let close_hosting =
        |h: Hosting, busy: &mut BTreeMap<(BoardId, SlotId), (u64, u128, u128)>, key| {
            if let Some(end) = h.last_item_end {
                let span = (end - h.opened).as_us();
                let entry = busy.entry(key).or_insert((0, 0, 0));
                entry.0 += span;
                entry.1 += span as u128 * h.lut as u128;
                entry.2 += span as u128 * h.ff as u128;
            }
        };

    for ev in &trace.events {
        horizon = horizon.max(ev.t);
        match &ev.kind {
            EventKind::AppArrival { app } => {
                arrivals.insert(*app, ev.t);
            }
            EventKind::AppComplete { app } => {
                completions.insert(*app, ev.t);
            }
            EventKind::PrStart { blocked, .. } => {
                if *blocked > 0 {
                    blocked_pr_count += 1;
                }
            }
            EventKind::PrComplete {
                app,
                task,
                slot,
                board,
            } if policy != Policy::Exclusive => {
                let key = (*board, *slot);
                if let Some(h) = open.remove(&key) {
                    close_hosting(h, &mut busy, key);
                }
                let geometry = boards.iter().find(|g| g.board == *board);
                if let Some(g) = geometry {
                    let spec = spec_of(*app);
                    let members = match g.slot_size(*slot) {
                        SlotSize::Big => 3,
                        SlotSize::Little => 1,
                    };
                    let (mut lut, mut ff) = (0u64, 0u64);
                    for t in *task..(*task + members).min(spec.task_count()) {
                        let r = spec.tasks[t as usize].resource;
                        lut += r.lut_units as u64;
                        ff += r.ff_units as u64;
                    }
                    open.insert(
                        key,
                        Hosting {
                            opened: ev.t,
                            last_item_end: None,
                            lut,
                            ff,
                        },
                    );
                }
            }
            EventKind::BatchItemComplete { slot, board, .. } => {
                if let Some(h) = open.get_mut(&(*board, *slot)) {
                    h.last_item_end = Some(ev.t);
                }
            }
            _ => {}
        }
    }
    for (key, h) in open {
        close_hosting(h, &mut busy, key);
    }

    let mut apps = Vec::with_capacity(workload.apps.len());
    for inst in &workload.apps {
        let arrival = arrivals.get(&inst.id).copied().unwrap_or(inst.arrival);
        let completion = completions
            .get(&inst.id)
            .copied()
            .ok_or(MetricsError::Incomplete { app: inst.id })?;
        apps.push(AppReport {
            app: inst.id,
            arrival_us: arrival.as_us(),
            completion_us: completion.as_us(),
            response_us: (completion - arrival).as_us(),
        });
    }

    let samples: Vec<u64> = apps.iter().map(|a| a.response_us).collect();
    let mean_us = samples.iter().sum::<u64>() as f64 / samples.len().max(1) as f64;
    let p95 = percentile(&samples, 95.0)? as f64 / 1_000.0;
    let p99 = percentile(&samples, 99.0)? as f64 / 1_000.0;

    let mut slots = Vec::new();
    if policy != Policy::Exclusive {
        for g in boards {
            for slot in 0..(g.big_count + g.little_count) {
                let (busy_us, lut_w, ff_w) =
                    busy.get(&(g.board, slot)).copied().unwrap_or((0, 0, 0));
                let horizon_us = horizon.as_us().max(1);
                let cap = g.capacity(slot) as u128;
                slots.push(SlotReport {
                    board: g.board,
                    slot,
                    busy_fraction: busy_us as f64 / horizon_us as f64,
                    lut_occupancy: Occupancy::new(lut_w, cap * horizon_us as u128).as_f64(),
                    ff_occupancy: Occupancy::new(ff_w, cap * horizon_us as u128).as_f64(),
                });
            }
        }
    }

    Ok(RunReport {
        policy: policy.as_str().to_string(),
        seed: workload.seed,
        config_digest: config_digest.to_string(),
        workload_digest: workload.digest(),
        apps,
        mean_response_ms: mean_us / 1_000.0,
        p95_response_ms: p95,
        p99_response_ms: p99,
        blocked_pr_count,
        slots,
        migrations: Vec::new(),
        d_series: Vec::new(),
    })
}

/// Occupancy of a task hosted alone in a Little slot for some fraction
/// of the horizon (resource units over capacity, time-weighted).
pub fn little_occupancy(resource: u64, capacity: u64, busy_us: u64, horizon_us: u64) -> Occupancy {
    Occupancy::new(
        resource as u128 * busy_us as u128,
        capacity as u128 * horizon_us as u128,
    )
}

/// Occupancy of a 3-in-1 bundle hosted in a Big slot: the members'
/// summed resources over twice the Little capacity.
pub fn bundle_occupancy(
    resources: [u64; 3],
    little_capacity: u64,
    busy_us: u64,
    horizon_us: u64,
) -> Occupancy {
    let sum: u64 = resources.iter().sum();
    Occupancy::new(
        sum as u128 * busy_us as u128,
        2 * little_capacity as u128 * horizon_us as u128,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn percentile_on_uniform_grid() {
        let samples: Vec<u64> = (1..=100).collect();
        assert_eq!(percentile(&samples, 95.0).unwrap(), 95);
        assert_eq!(percentile(&samples, 99.0).unwrap(), 99);
        assert_eq!(percentile(&samples, 100.0).unwrap(), 100);
    }

    #[test]
    fn percentile_singleton_and_small() {
        assert_eq!(percentile(&[7], 99.0).unwrap(), 7);
        // ⌈0.5·4⌉ = 2 → second order statistic
        assert_eq!(percentile(&[10, 20, 30, 40], 50.0).unwrap(), 20);
    }

    #[test]
    fn percentile_rejects_bad_input() {
        assert_eq!(
            percentile(&[], 95.0).unwrap_err(),
            MetricsError::EmptySamples
        );
        assert!(percentile(&[1], 0.0).is_err());
        assert!(percentile(&[1], 100.5).is_err());
    }

    fn report_with(mean_ms: f64, digest: &str) -> RunReport {
        RunReport {
            policy: "fcfs".into(),
            seed: 0,
            config_digest: "c".into(),
            workload_digest: digest.into(),
            apps: vec![],
            mean_response_ms: mean_ms,
            p95_response_ms: mean_ms,
            p99_response_ms: mean_ms,
            blocked_pr_count: 0,
            slots: vec![],
            migrations: vec![],
            d_series: vec![],
        }
    }

    #[test]
    fn reduction_is_baseline_over_policy() {
        let baseline = report_with(1366.0, "w");
        let policy = report_with(100.0, "w");
        let r = normalized_reduction(&policy, &baseline).unwrap();
        assert!((r - 13.66).abs() < 1e-12);
        assert_eq!(normalized_reduction(&baseline, &baseline).unwrap(), 1.0);
        let slower = report_with(2000.0, "w");
        assert!(normalized_reduction(&slower, &baseline).unwrap() < 1.0);
    }

    #[test]
    fn reduction_rejects_mismatched_workloads() {
        let a = report_with(1.0, "w1");
        let b = report_with(1.0, "w2");
        assert!(matches!(
            normalized_reduction(&a, &b),
            Err(MetricsError::DigestMismatch { .. })
        ));
    }

    #[test]
    fn bundle_occupancy_is_1_5x_mean_of_members() {
        // three tasks at 40% of a Little slot, always hosted:
        // bundle = 1200/2000 = 0.6, mean little = 0.4, ratio 3/2
        let bundle = bundle_occupancy([400, 400, 400], 1000, 100, 100);
        assert_eq!(bundle.as_f64(), 0.6);
        let mean_sum = Occupancy::new((400 + 400 + 400) as u128 * 100, 3 * 1000 * 100);
        assert!(bundle.equals_scaled(&mean_sum, 3, 2));
    }

    #[test]
    fn idle_slot_has_zero_occupancy() {
        let o = little_occupancy(500, 1000, 0, 100);
        assert_eq!(o.as_f64(), 0.0);
    }

    #[test]
    fn half_resource_full_time_is_half() {
        let o = little_occupancy(500, 1000, 100, 100);
        assert_eq!(o.as_f64(), 0.5);
    }

    proptest! {
        #[test]
        fn percentiles_are_monotone(
            mut samples in proptest::collection::vec(0u64..10_000, 1..200),
            p in 1u32..100,
            q_delta in 0u32..50,
        ) {
            samples.sort_unstable();
            let q = (p + q_delta).min(100);
            let vp = percentile(&samples, p as f64).unwrap();
            let vq = percentile(&samples, q as f64).unwrap();
            prop_assert!(vp <= vq);
        }

        #[test]
        fn bundle_identity_holds_for_any_triple(
            r1 in 1u64..1000, r2 in 1u64..1000, r3 in 1u64..1000,
            busy in 1u64..1000, horizon in 1000u64..2000,
        ) {
            let bundle = bundle_occupancy([r1, r2, r3], 1000, busy, horizon);
            // mean of the three member occupancies, as an exact rational
            let mean = Occupancy::new(
                (r1 + r2 + r3) as u128 * busy as u128,
                3 * 1000 * horizon as u128,
            );
            prop_assert!(bundle.equals_scaled(&mean, 3, 2));
        }
    }
}
