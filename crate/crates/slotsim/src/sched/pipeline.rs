//! Pipeline stage models, 3-in-1 bundling, and the optimal-slot search.
//!
//! A stage is either a single task (one slot, one item at a time) or a
//! 3-in-1 bundle. Bundles execute in one of two modes:
//!
//! * serial — the three member tasks run back to back per item, so one
//!   item costs the sum of the member times and the whole batch costs
//!   `sum * N`;
//! * pipelined — the members form an internal 3-deep pipeline paced by
//!   the slowest member, so the batch costs `t_max * (N + 2)` (fill two
//!   extra item periods, then one item per period).
//!
//! Serial wins exactly when `t_max * (N + 2) > (t1 + t2 + t3) * N`,
//! strictly; ties pick pipelined execution.
//!
//! The optimal slot count for an app is found by exhaustive search over
//! a deterministic makespan estimate: simulate the app alone on `s`
//! identical slots, serial PR included, stages reloading freed slots in
//! pipeline order. The smallest `s` whose makespan is within
//! `(1 + epsilon)` of the full-pipeline makespan is chosen.

use crate::time::SimTime;
use crate::workload::{AppSpec, ResourceVec};
use serde::{Deserialize, Serialize};

/// Execution mode of a 3-in-1 bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundleMode {
    Serial,
    Parallel,
}

/// Per-item timing behaviour of a hosted stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageModel {
    /// One item in flight at a time; each takes `item_us`.
    Serial { item_us: u64 },
    /// Internal 3-deep pipeline: items may enter every `unit_us` and
    /// each spends `3 * unit_us` inside.
    Pipelined { unit_us: u64 },
}

impl StageModel {
    /// Wall time one item occupies the slot from its start event.
    pub fn item_duration(&self) -> SimTime {
        match self {
            StageModel::Serial { item_us } => SimTime(*item_us),
            StageModel::Pipelined { unit_us } => SimTime(3 * unit_us),
        }
    }

    /// Minimum gap between consecutive item starts.
    pub fn start_interval(&self) -> SimTime {
        match self {
            StageModel::Serial { item_us } => SimTime(*item_us),
            StageModel::Pipelined { unit_us } => SimTime(*unit_us),
        }
    }

    /// Whether an item may start while the previous one is still in
    /// flight.
    pub fn overlaps_items(&self) -> bool {
        matches!(self, StageModel::Pipelined { .. })
    }
}

/// Static plan for one schedulable stage of an application.
#[derive(Debug, Clone, PartialEq)]
pub struct StagePlan {
    /// Index of the first member task in the app's pipeline.
    pub first_task: u32,
    /// 1 for a plain task, 3 for a bundle.
    pub member_count: u32,
    pub model: StageModel,
    /// Summed demand of the member tasks.
    pub resource: ResourceVec,
    /// Bundle execution mode, when this stage is a bundle.
    pub mode: Option<BundleMode>,
}

/// True when an app with `unfinished_tasks` tasks left can be bundled:
/// at least one full bundle and no remainder, since an app bound to Big
/// slots must finish all of its tasks there.
pub fn can_bundle(unfinished_tasks: u32) -> bool {
    unfinished_tasks >= 3 && unfinished_tasks.is_multiple_of(3)
}

/// Picks the execution mode for a 3-in-1 bundle. Serial is chosen only
/// when it is strictly faster than the internal pipeline.
pub fn bundle_3in1(t1: SimTime, t2: SimTime, t3: SimTime, batch: u32) -> BundleMode {
    let t_max = t1.as_us().max(t2.as_us()).max(t3.as_us()) as u128;
    let sum = (t1.as_us() + t2.as_us() + t3.as_us()) as u128;
    let n = batch as u128;
    if t_max * (n + 2) > sum * n {
        BundleMode::Serial
    } else {
        BundleMode::Parallel
    }
}

/// Modeled whole-batch time of a bundle under a given mode, in µs
/// (launch overhead excluded, as in the selection criterion).
pub fn bundle_modeled_time(
    t1: SimTime,
    t2: SimTime,
    t3: SimTime,
    batch: u32,
    mode: BundleMode,
) -> u128 {
    let t_max = t1.as_us().max(t2.as_us()).max(t3.as_us()) as u128;
    let sum = (t1.as_us() + t2.as_us() + t3.as_us()) as u128;
    match mode {
        BundleMode::Serial => sum * batch as u128,
        BundleMode::Parallel => t_max * (batch as u128 + 2),
    }
}

/// Task-granularity stages for Little-slot execution.
pub fn little_stages(spec: &AppSpec, launch_overhead: SimTime) -> Vec<StagePlan> {
    spec.tasks
        .iter()
        .map(|t| StagePlan {
            first_task: t.index,
            member_count: 1,
            model: StageModel::Serial {
                item_us: (t.exec_per_item + launch_overhead).as_us(),
            },
            resource: t.resource,
            mode: None,
        })
        .collect()
}

/// Bundle-granularity stages for Big-slot execution. The task count
/// must satisfy [`can_bundle`].
pub fn big_stages(spec: &AppSpec, batch: u32, launch_overhead: SimTime) -> Vec<StagePlan> {
    assert!(
        can_bundle(spec.task_count()),
        "app {} with {} tasks cannot be bundled",
        spec.name,
        spec.task_count()
    );
    spec.tasks
        .chunks(3)
        .map(|triple| {
            let (a, b, c) = (&triple[0], &triple[1], &triple[2]);
            let mode = bundle_3in1(a.exec_per_item, b.exec_per_item, c.exec_per_item, batch);
            let model = match mode {
                BundleMode::Serial => StageModel::Serial {
                    item_us: (a.exec_per_item + b.exec_per_item + c.exec_per_item).as_us()
                        + 3 * launch_overhead.as_us(),
                },
                BundleMode::Parallel => StageModel::Pipelined {
                    unit_us: a
                        .exec_per_item
                        .as_us()
                        .max(b.exec_per_item.as_us())
                        .max(c.exec_per_item.as_us())
                        + launch_overhead.as_us(),
                },
            };
            StagePlan {
                first_task: a.index,
                member_count: 3,
                model,
                resource: a.resource + b.resource + c.resource,
                mode: Some(mode),
            }
        })
        .collect()
}

/// Deterministic makespan of an app alone on `slots` identical slots.
///
/// Stages load in pipeline order through a serial PR engine; the first
/// `slots` stages request PR at t = 0, and each later stage requests PR
/// the moment the stage `slots` positions earlier finishes its batch
/// (freeing a slot). Item `j` of a stage cannot finish before item `j`
/// of the previous stage.
pub fn pipeline_makespan(models: &[StageModel], batch: u32, slots: u32, pr_us: u64) -> u64 {
    assert!(slots >= 1, "at least one slot");
    let k = models.len();
    if k == 0 || batch == 0 {
        return 0;
    }
    let s = slots as usize;
    let n = batch as usize;
    let mut prev_exit = vec![0u64; n + 1];
    // finish time of each stage's full batch, for slot-reuse requests
    let mut stage_done = vec![0u64; k];
    let mut engine_free = 0u64;
    for (i, model) in models.iter().enumerate() {
        let request = if i < s { 0 } else { stage_done[i - s] };
        let pr_start = request.max(engine_free);
        let ready = pr_start + pr_us;
        engine_free = ready;
        let mut exit = vec![0u64; n + 1];
        let mut last_exit = 0u64;
        for j in 1..=n {
            let avail = prev_exit[j].max(ready);
            last_exit = match model {
                StageModel::Serial { item_us } => last_exit.max(avail) + item_us,
                StageModel::Pipelined { unit_us } => (last_exit + unit_us).max(avail + 3 * unit_us),
            };
            exit[j] = last_exit;
        }
        stage_done[i] = exit[n];
        prev_exit = exit;
    }
    stage_done[k - 1]
}

/// Smallest slot count whose makespan is within `(1 + epsilon)` of the
/// full-pipeline makespan. `epsilon` is applied with micro-unit
/// precision so the comparison is exact integer arithmetic.
pub fn optimal_slots(models: &[StageModel], batch: u32, pr_us: u64, epsilon: f64) -> u32 {
    let k = models.len() as u32;
    if k <= 1 {
        return 1;
    }
    let best = pipeline_makespan(models, batch, k, pr_us) as u128;
    let eps_micro = (epsilon * 1_000_000.0).round() as u128;
    for s in 1..k {
        let m = pipeline_makespan(models, batch, s, pr_us) as u128;
        if m * 1_000_000 <= best * (1_000_000 + eps_micro) {
            return s;
        }
    }
    k
}
