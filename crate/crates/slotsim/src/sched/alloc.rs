//! Slot allocation: binding, rebinding, and redistribution ledgers.
//!
//! The adaptive allocator runs at every scheduler tick. It keeps three
//! app lists — waiting (`c_wait`), bound to Big slots (`s_big`), bound
//! to Little slots (`s_little`) — plus the per-app allocation caps
//! `R = (R_big, R_little)`. An app never holds both slot kinds.
//!
//! Big headroom is a reservation count: the Big-slot total minus the
//! unfinished stage counts of every Big-bound app. Binding an app
//! consumes one unit of headroom regardless of its cap; actual slot
//! occupancy is gated separately by the `U < R` check at dispatch.
//! The Little budget (`l_left`) likewise counts reservations,
//! `min(R_little, unfinished)` per bound app, so caps beyond an app's
//! remaining work do not starve later arrivals.

use crate::engine::AppId;
use std::collections::BTreeMap;

/// Allocation-relevant view of one app.
#[derive(Debug, Clone, Copy)]
pub struct AllocAppInfo {
    /// Any stage has been dispatched to a slot.
    pub started: bool,
    /// Unfinished task count is ≥ 3 and divisible by 3.
    pub can_bundle: bool,
    /// Optimal Big-slot count for the bundled pipeline.
    pub o_big: u32,
    /// Optimal Little-slot count for the task pipeline.
    pub o_little: u32,
    /// Unfinished stages at the app's current granularity (tasks when
    /// Little-bound or waiting, bundles when Big-bound).
    pub unfinished: u32,
}

/// Board-level inputs to one allocation pass.
#[derive(Debug, Clone, Copy)]
pub struct AllocInputs {
    pub big_total: u32,
    pub little_total: u32,
    /// Physically idle Little slots at tick time.
    pub little_idle: u32,
}

/// Allocation ledgers for one board.
#[derive(Debug, Clone, Default)]
pub struct SchedState {
    /// Apps awaiting allocation, arrival order.
    pub c_wait: Vec<AppId>,
    /// Apps bound to Big slots, binding order.
    pub s_big: Vec<AppId>,
    /// Apps bound to Little slots, binding order (the runnable-queue
    /// order used by redistribution).
    pub s_little: Vec<AppId>,
    /// Allocation caps per app: (R_big, R_little).
    pub r: BTreeMap<AppId, (u32, u32)>,
}

impl SchedState {
    pub fn r_of(&self, app: AppId) -> (u32, u32) {
        self.r.get(&app).copied().unwrap_or((0, 0))
    }

    pub fn is_bound(&self, app: AppId) -> bool {
        self.s_big.contains(&app) || self.s_little.contains(&app)
    }

    /// Drops an app from every ledger (completion or migration).
    pub fn remove(&mut self, app: AppId) {
        self.c_wait.retain(|&a| a != app);
        self.s_big.retain(|&a| a != app);
        self.s_little.retain(|&a| a != app);
        self.r.remove(&app);
    }
}

/// One observable effect of an allocation pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AllocChange {
    /// A not-yet-started Little-bound app returned to the waiting list.
    Rebound {
        app: AppId,
    },
    BoundBig {
        app: AppId,
        r_big: u32,
    },
    BoundLittle {
        app: AppId,
        r_little: u32,
    },
    /// Redistribution raised an app's Little cap.
    Redistributed {
        app: AppId,
        r_little: u32,
    },
}

/// The adaptive allocation pass: primary allocation with Big priority,
/// rebinding of unstarted Little apps while Big headroom exists, and
/// redistribution of leftover Little budget in runnable-queue order.
pub fn allocate_slots(
    state: &mut SchedState,
    inputs: AllocInputs,
    info: &BTreeMap<AppId, AllocAppInfo>,
) -> Vec<AllocChange> {
    let mut changes = Vec::new();
    let unfinished = |app: AppId| info.get(&app).map(|i| i.unfinished).unwrap_or(0);

    let reserved_big: i64 = state.s_big.iter().map(|&a| unfinished(a) as i64).sum();
    let mut b_avail = inputs.big_total as i64 - reserved_big;

    // No slot available: skip the allocation.
    if b_avail <= 0 && inputs.little_idle == 0 {
        return changes;
    }

    // Unbind unstarted Little apps for rebinding while Big headroom exists.
    if b_avail > 0 {
        let mut kept = Vec::with_capacity(state.s_little.len());
        for &app in &state.s_little {
            let started = info.get(&app).map(|i| i.started).unwrap_or(true);
            if !started {
                state.r.insert(app, (0, 0));
                state.c_wait.push(app);
                changes.push(AllocChange::Rebound { app });
            } else {
                kept.push(app);
            }
        }
        state.s_little = kept;
    }

    // Primary allocation over the waiting list.
    let mut l_left: i64 = inputs.little_total as i64
        - state
            .s_little
            .iter()
            .map(|&a| state.r_of(a).1.min(unfinished(a)) as i64)
            .sum::<i64>();
    let waiting = std::mem::take(&mut state.c_wait);
    for app in waiting {
        let app_info = match info.get(&app) {
            Some(i) => *i,
            None => continue,
        };
        if b_avail > 0 && app_info.can_bundle {
            state.r.insert(app, (app_info.o_big, 0));
            state.s_big.push(app);
            b_avail -= 1;
            changes.push(AllocChange::BoundBig {
                app,
                r_big: app_info.o_big,
            });
            continue;
        }
        if inputs.little_idle > 0 && l_left > 0 {
            state.r.insert(app, (0, app_info.o_little));
            state.s_little.push(app);
            l_left -= app_info.o_little as i64;
            changes.push(AllocChange::BoundLittle {
                app,
                r_little: app_info.o_little,
            });
            continue;
        }
        state.c_wait.push(app);
    }

    // Redistribution of leftover Little budget, front of the runnable
    // queue first. The grant is capped by the budget and by the app's
    // remaining need, so the budget never goes negative.
    if l_left > 0 {
        for &app in &state.s_little {
            if l_left <= 0 {
                break;
            }
            let (r_big, r_little) = state.r_of(app);
            let need = unfinished(app);
            if need > r_little {
                let grant = (need - r_little).min(l_left as u32);
                state.r.insert(app, (r_big, r_little + grant));
                l_left -= grant as i64;
                changes.push(AllocChange::Redistributed {
                    app,
                    r_little: r_little + grant,
                });
            }
        }
    }

    changes
}

/// Strict arrival-order allocation for the FCFS and round-robin
/// baselines: the head of the waiting list binds only when its whole
/// requirement fits the unreserved budget, and nothing behind it may
/// leapfrog.
pub fn fcfs_allocate(
    state: &mut SchedState,
    little_total: u32,
    info: &BTreeMap<AppId, AllocAppInfo>,
) -> Vec<AllocChange> {
    let mut changes = Vec::new();
    while let Some(&head) = state.c_wait.first() {
        let app_info = match info.get(&head) {
            Some(i) => *i,
            None => break,
        };
        let need = app_info
            .o_little
            .min(little_total)
            .min(app_info.unfinished)
            .max(1);
        let reserved: u32 = state
            .s_little
            .iter()
            .map(|&a| {
                let r = state.r_of(a).1;
                let n = info.get(&a).map(|i| i.unfinished).unwrap_or(0);
                r.min(n)
            })
            .sum();
        if reserved + need > little_total {
            break;
        }
        state.c_wait.remove(0);
        state.r.insert(head, (0, need));
        state.s_little.push(head);
        changes.push(AllocChange::BoundLittle {
            app: head,
            r_little: need,
        });
    }
    changes
}
