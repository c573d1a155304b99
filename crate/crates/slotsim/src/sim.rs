//! The simulation driver: boards, apps, scheduling, and migration wired
//! onto the event kernel.
//!
//! Everything is event-driven. Each processed event requests a
//! scheduler tick on the affected board at the current instant (ticks
//! coalesce per board and timestamp); the tick runs allocation, item
//! launches, PR dispatch, and preemption. PR requests enter the serial
//! engine the moment the scheduler decides them — queue wait is the
//! observable feeding the contention metric — while batch launches on a
//! single-core board are deferred past any PR service window in
//! progress.

use crate::board::{
    full_fabric_duration, pr_duration, Board, PrAdmission, SlotLayout, SlotSize, SlotState,
};
use crate::config::{LayoutKind, RunConfig, SwitchConfig};
use crate::engine::{AppId, BoardId, EngineError, Event, EventKind, Kernel, SlotId, TaskId};
use crate::migrate::{
    compute_d_switch, plan_migration, DSample, MetricWindow, MigrationRecord, SwitchAction,
    SwitchController, SwitchWindow,
};
use crate::sched::{
    allocate_slots, big_stages, can_bundle, fcfs_allocate, little_stages, optimal_slots,
    AllocAppInfo, AllocChange, AllocInputs, AllocatorKind, Policy, SchedState, StagePlan,
};
use crate::time::SimTime;
use crate::workload::{catalog, AppSpec, Workload};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Board(#[from] crate::board::BoardError),
    #[error("workload references unknown app spec `{name}`")]
    UnknownSpec { name: String },
}

/// Runtime state of one schedulable stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StageState {
    /// Not hosted anywhere; needs (re-)configuration.
    Pending,
    /// A PR request is queued or in service for this stage.
    PrInFlight,
    Hosted,
    /// Preempted: releases its slot at the next item boundary.
    Evicting,
    Done,
}

#[derive(Debug, Clone)]
struct StageRun {
    plan: StagePlan,
    items_total: u32,
    items_started: u32,
    items_done: u32,
    state: StageState,
    slot: Option<SlotId>,
    hosted_at: SimTime,
    last_start: SimTime,
    /// (item, generation) of the in-flight start event, if any.
    scheduled_start: Option<(u32, u32)>,
    /// Bumped on eviction so stale start events are discarded.
    gen: u32,
}

impl StageRun {
    fn new(plan: StagePlan, items_total: u32) -> Self {
        StageRun {
            plan,
            items_total,
            items_started: 0,
            items_done: 0,
            state: StageState::Pending,
            slot: None,
            hosted_at: SimTime::ZERO,
            last_start: SimTime::ZERO,
            scheduled_start: None,
            gen: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct AppRun {
    id: AppId,
    spec_idx: usize,
    batch: u32,
    arrival: SimTime,
    board: Option<BoardId>,
    bound: Option<SlotSize>,
    /// Slots currently committed, per kind: (big, little).
    used: (u32, u32),
    started: bool,
    completed: Option<SimTime>,
    stages: Vec<StageRun>,
    o_big: u32,
    o_little: u32,
    /// Continuous slot tenure start, for the preemption quantum.
    occupied_since: Option<SimTime>,
}

impl AppRun {
    fn stage_by_task(&self, task: TaskId) -> Option<usize> {
        self.stages.iter().position(|s| s.plan.first_task == task)
    }

    fn unfinished_stages(&self) -> u32 {
        self.stages
            .iter()
            .filter(|s| s.state != StageState::Done)
            .count() as u32
    }

    fn all_done(&self) -> bool {
        self.stages.iter().all(|s| s.state == StageState::Done)
    }

    fn used_of(&self, kind: SlotSize) -> u32 {
        match kind {
            SlotSize::Big => self.used.0,
            SlotSize::Little => self.used.1,
        }
    }

    fn used_mut(&mut self, kind: SlotSize) -> &mut u32 {
        match kind {
            SlotSize::Big => &mut self.used.0,
            SlotSize::Little => &mut self.used.1,
        }
    }
}

/// Snapshot of one board's allocation ledgers after a tick, for test
/// assertions.
#[derive(Debug, Clone)]
pub struct AllocSnapshot {
    pub time: SimTime,
    pub board: BoardId,
    pub c_wait: Vec<AppId>,
    pub s_big: Vec<AppId>,
    pub s_little: Vec<AppId>,
    pub r: BTreeMap<AppId, (u32, u32)>,
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    pub record_alloc_snapshots: bool,
}

/// Everything a finished run produces besides the report.
#[derive(Debug)]
pub struct RunOutcome {
    pub events: Vec<Event>,
    pub d_series: Vec<DSample>,
    pub migrations: Vec<MigrationRecord>,
    pub alloc_snapshots: Vec<AllocSnapshot>,
    pub clock: SimTime,
}

pub struct Simulation {
    policy: Policy,
    cal: crate::config::Calibration,
    switching: SwitchConfig,
    kernel: Kernel,
    boards: Vec<Board>,
    sched: Vec<SchedState>,
    /// Dispatch order per board: binding order, rotated on eviction.
    q_order: Vec<Vec<AppId>>,
    /// Earliest allowed tick per board (migration handoff delay).
    tick_floor: Vec<SimTime>,
    excl_current: Vec<Option<AppId>>,
    last_rotation: Vec<Option<SimTime>>,
    apps: Vec<AppRun>,
    specs: Vec<AppSpec>,
    active_board: BoardId,
    tick_pending: BTreeSet<(BoardId, u64)>,
    controller: Option<SwitchController>,
    window: MetricWindow,
    window_blocked: BTreeSet<(AppId, u32)>,
    migrations: Vec<MigrationRecord>,
    alloc_snapshots: Vec<AllocSnapshot>,
    options: SimOptions,
}

impl Simulation {
    pub fn new(config: &RunConfig, workload: &Workload) -> Result<Self, SimError> {
        Self::with_catalog(config, workload, catalog(&config.calibration))
    }

    /// Builds a simulation against an explicit catalog (scenario runs
    /// use hand-crafted specs).
    pub fn with_catalog(
        config: &RunConfig,
        workload: &Workload,
        specs: Vec<AppSpec>,
    ) -> Result<Self, SimError> {
        let cal = config.calibration.clone();
        let policy = config.policy;
        let pr_mode = policy.pr_mode();
        let boards: Vec<Board> = config
            .boards
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let mut board = Board::new(i as BoardId, SlotLayout::from_config(b, &cal), pr_mode);
                board.resident = i == 0;
                board
            })
            .collect();
        let overhead = cal.launch_overhead();
        let pr_little = cal.little_pr().as_us();
        let pr_big = pr_duration(SlotSize::Big, &cal).as_us();
        let mut apps = Vec::with_capacity(workload.apps.len());
        for inst in &workload.apps {
            let spec_idx = specs
                .iter()
                .position(|s| s.name == inst.spec)
                .ok_or_else(|| SimError::UnknownSpec {
                    name: inst.spec.clone(),
                })?;
            let spec = &specs[spec_idx];
            let little = little_stages(spec, overhead);
            let little_models: Vec<_> = little.iter().map(|s| s.model).collect();
            let o_little = optimal_slots(&little_models, inst.batch, pr_little, cal.epsilon);
            let o_big = if can_bundle(spec.task_count()) {
                let big = big_stages(spec, inst.batch, overhead);
                let big_models: Vec<_> = big.iter().map(|s| s.model).collect();
                optimal_slots(&big_models, inst.batch, pr_big, cal.epsilon)
            } else {
                0
            };
            apps.push(AppRun {
                id: inst.id,
                spec_idx,
                batch: inst.batch,
                arrival: inst.arrival,
                board: None,
                bound: None,
                used: (0, 0),
                started: false,
                completed: None,
                stages: little
                    .into_iter()
                    .map(|p| StageRun::new(p, inst.batch))
                    .collect(),
                o_big,
                o_little,
                occupied_since: None,
            });
        }
        let n_boards = boards.len();
        let controller = config
            .switching
            .enabled
            .then(|| SwitchController::new(config.switching.t1, config.switching.t2));
        Ok(Simulation {
            policy,
            switching: config.switching.clone(),
            window: MetricWindow::new(config.switching.window_updates.max(1)),
            cal,
            kernel: Kernel::new(),
            boards,
            sched: vec![SchedState::default(); n_boards],
            q_order: vec![Vec::new(); n_boards],
            tick_floor: vec![SimTime::ZERO; n_boards],
            excl_current: vec![None; n_boards],
            last_rotation: vec![None; n_boards],
            apps,
            specs,
            active_board: 0,
            tick_pending: BTreeSet::new(),
            controller,
            window_blocked: BTreeSet::new(),
            migrations: Vec::new(),
            alloc_snapshots: Vec::new(),
            options: SimOptions::default(),
        })
    }

    pub fn with_options(mut self, options: SimOptions) -> Self {
        self.options = options;
        self
    }

    /// Runs to quiescence (or `until`, whichever comes first) and
    /// returns the canonical trace plus side outputs.
    pub fn run(mut self, until: SimTime) -> Result<RunOutcome, SimError> {
        for app in &self.apps {
            self.kernel
                .push(app.arrival, EventKind::AppArrival { app: app.id })?;
        }
        while let Some(ev) = self.kernel.pop_next(until) {
            if let Some(recorded) = self.handle(ev)? {
                self.kernel.record(recorded);
            }
        }
        let clock = self.kernel.clock();
        Ok(RunOutcome {
            events: self.kernel.into_trace(),
            d_series: self.controller.map(|c| c.history).unwrap_or_default(),
            migrations: self.migrations,
            alloc_snapshots: self.alloc_snapshots,
            clock,
        })
    }

    // ── event dispatch ─────────────────────────────────────────────

    fn handle(&mut self, ev: Event) -> Result<Option<Event>, SimError> {
        let now = ev.t;
        match ev.kind.clone() {
            EventKind::AppArrival { app } => {
                let board = self.active_board;
                self.apps[app as usize].board = Some(board);
                self.sched[board as usize].c_wait.push(app);
                self.candidate_update(now)?;
                self.request_tick(board, now)?;
                Ok(Some(ev))
            }
            EventKind::SchedulerTick { board } => {
                self.tick_pending.remove(&(board, now.as_us()));
                self.run_tick(board, now)?;
                Ok(Some(ev))
            }
            EventKind::PrEnqueued { .. } => Ok(Some(ev)),
            EventKind::PrStart {
                app,
                task,
                slot,
                board,
                blocked,
            } => {
                self.on_pr_start(app, task, slot, board, blocked, now)?;
                Ok(Some(ev))
            }
            EventKind::PrComplete {
                app,
                task,
                slot,
                board,
            } => {
                self.on_pr_complete(app, task, slot, board, now)?;
                Ok(Some(ev))
            }
            EventKind::BatchItemStart {
                app,
                task,
                item,
                slot,
                board,
            } => self.on_item_start(ev.clone(), app, task, item, slot, board, now),
            EventKind::BatchItemComplete {
                app,
                task,
                item,
                slot,
                board,
            } => {
                self.on_item_complete(app, task, item, slot, board, now)?;
                Ok(Some(ev))
            }
            EventKind::AppComplete { app } => {
                self.on_app_complete(app, now)?;
                Ok(Some(ev))
            }
            EventKind::MetricWindowTick { window, .. } => {
                let d = self.on_metric_window(window, now)?;
                Ok(Some(Event {
                    t: ev.t,
                    seq: ev.seq,
                    kind: EventKind::MetricWindowTick { window, d },
                }))
            }
            EventKind::PrewarmStart { .. }
            | EventKind::SwitchTriggered { .. }
            | EventKind::MigrationComplete { .. } => Ok(Some(ev)),
        }
    }

    fn request_tick(&mut self, board: BoardId, t: SimTime) -> Result<(), SimError> {
        let t = t.max(self.tick_floor[board as usize]);
        if self.tick_pending.insert((board, t.as_us())) {
            self.kernel.push(t, EventKind::SchedulerTick { board })?;
        }
        Ok(())
    }

    // ── PR lifecycle ───────────────────────────────────────────────

    /// Commits a stage to a slot and admits its PR request. Emits the
    /// enqueue record and, when the engine is idle, the service start.
    fn dispatch_pr(
        &mut self,
        app: AppId,
        stage_idx: usize,
        slot: SlotId,
        board: BoardId,
        now: SimTime,
    ) -> Result<(), SimError> {
        let a = &mut self.apps[app as usize];
        let task = a.stages[stage_idx].plan.first_task;
        a.stages[stage_idx].state = StageState::PrInFlight;
        let kind = self.boards[board as usize].slot(slot).size;
        *a.used_mut(kind) += 1;
        a.started = true;
        let first_tenure = a.occupied_since.is_none();
        if first_tenure && kind == SlotSize::Little {
            a.occupied_since = Some(now);
        }
        let admission = self.boards[board as usize].pr_request(app, stage_idx as u32, slot, now)?;
        self.kernel.push(
            now,
            EventKind::PrEnqueued {
                app,
                task,
                slot,
                board,
            },
        )?;
        if let PrAdmission::Started { request } = admission {
            debug_assert_eq!(request.enqueued, now);
            self.kernel.push(
                now,
                EventKind::PrStart {
                    app,
                    task,
                    slot,
                    board,
                    blocked: 0,
                },
            )?;
        }
        if first_tenure && kind == SlotSize::Little {
            let quantum = self.cal.preempt_quantum();
            self.request_tick(board, now + quantum)?;
        }
        Ok(())
    }

    fn on_pr_start(
        &mut self,
        app: AppId,
        task: TaskId,
        slot: SlotId,
        board: BoardId,
        blocked: u64,
        now: SimTime,
    ) -> Result<(), SimError> {
        if self.policy == Policy::Exclusive {
            // full-fabric image load; no slot or engine bookkeeping
            self.kernel.push(
                now + full_fabric_duration(&self.cal),
                EventKind::PrComplete {
                    app,
                    task,
                    slot,
                    board,
                },
            )?;
            return Ok(());
        }
        let b = &mut self.boards[board as usize];
        let request =
            b.pr.in_service()
                .cloned()
                .expect("service start without an in-service request");
        debug_assert_eq!((request.app, request.slot), (app, slot));
        b.begin_service(&request, now, &self.cal);
        if blocked > 0 {
            self.window_blocked.insert((app, request.stage));
        }
        let dur = pr_duration(request.size, &self.cal);
        self.kernel.push(
            now + dur,
            EventKind::PrComplete {
                app,
                task,
                slot,
                board,
            },
        )?;
        Ok(())
    }

    fn on_pr_complete(
        &mut self,
        app: AppId,
        task: TaskId,
        slot: SlotId,
        board: BoardId,
        now: SimTime,
    ) -> Result<(), SimError> {
        if self.policy == Policy::Exclusive {
            // the whole pipeline is resident once the image is loaded
            let slot_count = self.boards[board as usize].layout.slot_count().max(1);
            let a = &mut self.apps[app as usize];
            for (i, stage) in a.stages.iter_mut().enumerate() {
                stage.state = StageState::Hosted;
                stage.slot = Some(i as u32 % slot_count);
                stage.hosted_at = now;
            }
            self.request_tick(board, now)?;
            return Ok(());
        }
        let a = &mut self.apps[app as usize];
        let stage_idx = a.stage_by_task(task).expect("stage for completed PR");
        let stage = &mut a.stages[stage_idx];
        debug_assert_eq!(stage.state, StageState::PrInFlight);
        stage.state = StageState::Hosted;
        stage.slot = Some(slot);
        stage.hosted_at = now;
        let b = &mut self.boards[board as usize];
        b.slot_mut(slot).state = SlotState::Loaded;
        if let Some(next) = b.pr.complete_and_pop() {
            let blocked = (now - next.enqueued).as_us();
            let next_task = self.apps[next.app as usize].stages[next.stage as usize]
                .plan
                .first_task;
            self.kernel.push(
                now,
                EventKind::PrStart {
                    app: next.app,
                    task: next_task,
                    slot: next.slot,
                    board,
                    blocked,
                },
            )?;
        }
        self.request_tick(board, now)?;
        Ok(())
    }

    // ── batch items ────────────────────────────────────────────────

    /// Schedules the next item start for a hosted stage if all of its
    /// dependencies are satisfied.
    fn try_schedule_item(
        &mut self,
        app: AppId,
        stage_idx: usize,
        now: SimTime,
    ) -> Result<(), SimError> {
        let a = &self.apps[app as usize];
        let stage = &a.stages[stage_idx];
        if stage.state != StageState::Hosted || stage.scheduled_start.is_some() {
            return Ok(());
        }
        let next = stage.items_started + 1;
        if next > stage.items_total {
            return Ok(());
        }
        if !stage.plan.model.overlaps_items() && stage.items_done < stage.items_started {
            return Ok(());
        }
        if self.policy == Policy::Exclusive {
            // whole-fabric serial execution: a task starts only after
            // its predecessor finishes the entire batch
            if stage_idx > 0 {
                let prev = &a.stages[stage_idx - 1];
                if prev.items_done < prev.items_total {
                    return Ok(());
                }
            }
        } else if stage_idx > 0 && a.stages[stage_idx - 1].items_done < next {
            return Ok(());
        }
        let mut start = now;
        if stage.plan.model.overlaps_items() && stage.items_started > 0 {
            start = start.max(stage.last_start + stage.plan.model.start_interval());
        }
        let board = a.board.expect("hosted stage has a board");
        if let Some(end) = self.boards[board as usize].launch_deferred_until(start) {
            start = end;
        }
        let slot = stage.slot.expect("hosted stage has a slot");
        let task = stage.plan.first_task;
        let gen = stage.gen;
        self.apps[app as usize].stages[stage_idx].scheduled_start = Some((next, gen));
        self.kernel.push(
            start,
            EventKind::BatchItemStart {
                app,
                task,
                item: next,
                slot,
                board,
            },
        )?;
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn on_item_start(
        &mut self,
        ev: Event,
        app: AppId,
        task: TaskId,
        item: u32,
        slot: SlotId,
        board: BoardId,
        now: SimTime,
    ) -> Result<Option<Event>, SimError> {
        let stage_idx = match self.apps[app as usize].stage_by_task(task) {
            Some(i) => i,
            None => return Ok(None),
        };
        let stage = &self.apps[app as usize].stages[stage_idx];
        match stage.scheduled_start {
            Some((it, gen)) if it == item && gen == stage.gen => {}
            // superseded by an eviction or rebundling: drop silently
            _ => return Ok(None),
        }
        if stage.state != StageState::Hosted {
            self.apps[app as usize].stages[stage_idx].scheduled_start = None;
            return Ok(None);
        }
        // a PR service window may have opened since this start was
        // scheduled; re-issue it at the window end
        if let Some(end) = self.boards[board as usize].launch_deferred_until(now) {
            self.kernel.push(
                end,
                EventKind::BatchItemStart {
                    app,
                    task,
                    item,
                    slot,
                    board,
                },
            )?;
            return Ok(None);
        }
        let stage = &mut self.apps[app as usize].stages[stage_idx];
        stage.scheduled_start = None;
        stage.items_started = item;
        stage.last_start = now;
        let duration = stage.plan.model.item_duration();
        if self.policy != Policy::Exclusive {
            self.boards[board as usize].slot_mut(slot).state = SlotState::Executing;
        }
        self.kernel.push(
            now + duration,
            EventKind::BatchItemComplete {
                app,
                task,
                item,
                slot,
                board,
            },
        )?;
        if self.apps[app as usize].stages[stage_idx]
            .plan
            .model
            .overlaps_items()
        {
            self.try_schedule_item(app, stage_idx, now)?;
        }
        Ok(Some(ev))
    }

    #[allow(clippy::too_many_arguments)]
    fn on_item_complete(
        &mut self,
        app: AppId,
        task: TaskId,
        item: u32,
        slot: SlotId,
        board: BoardId,
        now: SimTime,
    ) -> Result<(), SimError> {
        let stage_idx = self.apps[app as usize]
            .stage_by_task(task)
            .expect("stage for completed item");
        let a = &mut self.apps[app as usize];
        let stage = &mut a.stages[stage_idx];
        stage.items_done = stage.items_done.max(item);
        let evicting = stage.state == StageState::Evicting;
        if stage.items_done == stage.items_total {
            // finished, whether or not an eviction was pending
            stage.state = StageState::Done;
            stage.slot = None;
            let kind = self.boards[board as usize].slot(slot).size;
            if self.policy != Policy::Exclusive {
                *a.used_mut(kind) -= 1;
                let b = &mut self.boards[board as usize];
                b.slot_mut(slot).state = SlotState::Idle;
                b.slot_mut(slot).hosted = None;
                // pre-loading: the freed slot immediately takes the
                // app's next unhosted stage, ahead of demand — unless a
                // preemption wanted this slot for someone else
                if self.policy.preloads() && !evicting {
                    self.try_preload(app, slot, board, now)?;
                }
            }
            if self.apps[app as usize].all_done() {
                self.kernel.push(now, EventKind::AppComplete { app })?;
            }
        } else if evicting {
            if stage.items_done == stage.items_started {
                self.finish_eviction(app, stage_idx, board, now)?;
            }
        } else {
            self.try_schedule_item(app, stage_idx, now)?;
        }
        // the next stage may have been waiting on this item
        if stage_idx + 1 < self.apps[app as usize].stages.len() {
            self.try_schedule_item(app, stage_idx + 1, now)?;
        }
        self.request_tick(board, now)?;
        Ok(())
    }

    fn try_preload(
        &mut self,
        app: AppId,
        slot: SlotId,
        board: BoardId,
        now: SimTime,
    ) -> Result<(), SimError> {
        // speculative loads only ride an idle engine; demand requests
        // must never queue behind them
        if !self.boards[board as usize].pr.is_empty() {
            return Ok(());
        }
        let a = &self.apps[app as usize];
        let kind = self.boards[board as usize].slot(slot).size;
        let bound = match a.bound {
            Some(k) if k == kind => k,
            _ => return Ok(()),
        };
        let r = self.r_of(app, bound);
        if a.used_of(bound) >= r {
            return Ok(());
        }
        let next_pending = a.stages.iter().position(|s| s.state == StageState::Pending);
        if let Some(stage_idx) = next_pending {
            self.dispatch_pr(app, stage_idx, slot, board, now)?;
        }
        Ok(())
    }

    fn finish_eviction(
        &mut self,
        app: AppId,
        stage_idx: usize,
        board: BoardId,
        now: SimTime,
    ) -> Result<(), SimError> {
        let a = &mut self.apps[app as usize];
        let stage = &mut a.stages[stage_idx];
        let slot = stage.slot.take().expect("evicting stage has a slot");
        stage.state = StageState::Pending;
        stage.gen += 1;
        stage.scheduled_start = None;
        let kind = self.boards[board as usize].slot(slot).size;
        *a.used_mut(kind) -= 1;
        // a fresh quantum for what the app still holds; rotated-out
        // apps are unbound and carry no tenure at all
        a.occupied_since = a.bound.is_some().then_some(now);
        let b = &mut self.boards[board as usize];
        b.slot_mut(slot).state = SlotState::Idle;
        b.slot_mut(slot).hosted = None;
        // rotate the evicted app behind its peers
        let q = &mut self.q_order[board as usize];
        if let Some(pos) = q.iter().position(|&x| x == app) {
            let id = q.remove(pos);
            q.push(id);
        }
        self.request_tick(board, now)?;
        Ok(())
    }

    fn on_app_complete(&mut self, app: AppId, now: SimTime) -> Result<(), SimError> {
        let board = self.apps[app as usize].board.expect("completed app board");
        {
            let a = &mut self.apps[app as usize];
            a.completed = Some(now);
            a.bound = None;
            a.occupied_since = None;
            debug_assert_eq!(a.used, (0, 0), "app completed with slots still committed");
        }
        self.sched[board as usize].remove(app);
        self.q_order[board as usize].retain(|&x| x != app);
        if self.excl_current[board as usize] == Some(app) {
            self.excl_current[board as usize] = None;
        }
        // a draining board is released once its last app finishes
        if self.boards[board as usize].draining {
            let remaining = self
                .apps
                .iter()
                .any(|x| x.board == Some(board) && x.completed.is_none());
            if !remaining {
                let b = &mut self.boards[board as usize];
                b.draining = false;
                b.prewarmed_for = None;
                debug_assert!(b.pr.is_empty());
            }
        }
        self.candidate_update(now)?;
        self.request_tick(board, now)?;
        Ok(())
    }

    // ── the scheduler tick ─────────────────────────────────────────

    fn run_tick(&mut self, board: BoardId, now: SimTime) -> Result<(), SimError> {
        let b = &self.boards[board as usize];
        if !b.resident && !b.draining {
            return Ok(());
        }
        match self.policy.allocator() {
            AllocatorKind::WholeFabric => self.exclusive_admit(board, now)?,
            AllocatorKind::StrictFifo => {
                if self.boards[board as usize].resident {
                    let info = self.alloc_info(board);
                    let little_total = self.boards[board as usize].layout.little_count;
                    let changes =
                        fcfs_allocate(&mut self.sched[board as usize], little_total, &info);
                    self.apply_alloc_changes(board, &changes);
                }
            }
            AllocatorKind::Adaptive => {
                let info = self.alloc_info(board);
                let layout = &self.boards[board as usize].layout;
                let inputs = AllocInputs {
                    big_total: layout.big_count,
                    little_total: layout.little_count,
                    little_idle: self.boards[board as usize].idle_count(SlotSize::Little),
                };
                let changes = allocate_slots(&mut self.sched[board as usize], inputs, &info);
                self.apply_alloc_changes(board, &changes);
            }
        }

        // launch batch execution for hosted stages
        let order = self.q_order[board as usize].clone();
        for app in &order {
            let n_stages = self.apps[*app as usize].stages.len();
            for stage_idx in 0..n_stages {
                self.try_schedule_item(*app, stage_idx, now)?;
            }
        }

        // schedule ready stages into idle slots
        if self.policy.allocator() != AllocatorKind::WholeFabric {
            self.dispatch_ready(board, now)?;
        }

        // preemption
        let evicted = if self.policy.rotates() {
            self.rotate_quantum(board, now)?
        } else if self.policy.preempts() {
            self.preempt_quantum(board, now)?
        } else {
            false
        };

        #[cfg(debug_assertions)]
        if !evicted && self.policy == Policy::VersaBigLittle {
            self.assert_work_conserving(board);
        }
        let _ = evicted;

        if self.options.record_alloc_snapshots {
            let s = &self.sched[board as usize];
            self.alloc_snapshots.push(AllocSnapshot {
                time: now,
                board,
                c_wait: s.c_wait.clone(),
                s_big: s.s_big.clone(),
                s_little: s.s_little.clone(),
                r: s.r.clone(),
            });
        }
        Ok(())
    }

    fn alloc_info(&self, board: BoardId) -> BTreeMap<AppId, AllocAppInfo> {
        let mut info = BTreeMap::new();
        let s = &self.sched[board as usize];
        let ids = s
            .c_wait
            .iter()
            .chain(s.s_big.iter())
            .chain(s.s_little.iter());
        for &id in ids {
            let a = &self.apps[id as usize];
            let task_count = self.specs[a.spec_idx].task_count();
            info.insert(
                id,
                AllocAppInfo {
                    started: a.started,
                    can_bundle: self.policy.uses_big() && can_bundle(task_count),
                    o_big: a.o_big.max(1),
                    o_little: a.o_little,
                    unfinished: a.unfinished_stages(),
                },
            );
        }
        info
    }

    fn apply_alloc_changes(&mut self, board: BoardId, changes: &[AllocChange]) {
        for change in changes {
            match change {
                AllocChange::Rebound { app } => {
                    let a = &mut self.apps[*app as usize];
                    debug_assert!(!a.started);
                    a.bound = None;
                    self.q_order[board as usize].retain(|x| x != app);
                }
                AllocChange::BoundBig { app, .. } => {
                    let a = &mut self.apps[*app as usize];
                    debug_assert!(!a.started);
                    a.bound = Some(SlotSize::Big);
                    // online 3-in-1 bundling: the ready tasks are
                    // replaced by bundle stages
                    let spec = &self.specs[a.spec_idx];
                    a.stages = big_stages(spec, a.batch, self.cal.launch_overhead())
                        .into_iter()
                        .map(|p| StageRun::new(p, a.batch))
                        .collect();
                    self.q_order[board as usize].push(*app);
                }
                AllocChange::BoundLittle { app, .. } => {
                    let a = &mut self.apps[*app as usize];
                    a.bound = Some(SlotSize::Little);
                    self.q_order[board as usize].push(*app);
                }
                AllocChange::Redistributed { .. } => {}
            }
        }
    }

    fn r_of(&self, app: AppId, kind: SlotSize) -> u32 {
        let board = match self.apps[app as usize].board {
            Some(b) => b,
            None => return 0,
        };
        let (r_big, r_little) = self.sched[board as usize].r_of(app);
        match kind {
            SlotSize::Big => r_big,
            SlotSize::Little => r_little,
        }
    }

    /// True when the stage's next item has its pipeline input available.
    fn demand_ready(&self, app: AppId, stage_idx: usize) -> bool {
        let a = &self.apps[app as usize];
        if stage_idx == 0 {
            return true;
        }
        a.stages[stage_idx - 1].items_done > a.stages[stage_idx].items_done
    }

    fn dispatch_ready(&mut self, board: BoardId, now: SimTime) -> Result<(), SimError> {
        let order = self.q_order[board as usize].clone();
        for app in order {
            let kind = match self.apps[app as usize].bound {
                Some(k) => k,
                None => continue,
            };
            let r = self.r_of(app, kind);
            let n_stages = self.apps[app as usize].stages.len();
            for stage_idx in 0..n_stages {
                if self.apps[app as usize].used_of(kind) >= r {
                    break;
                }
                let stage_state = self.apps[app as usize].stages[stage_idx].state;
                if stage_state != StageState::Pending {
                    continue;
                }
                if !self.demand_ready(app, stage_idx) {
                    continue;
                }
                let idle = self.boards[board as usize].idle_slot_ids(kind);
                let slot = match idle.first() {
                    Some(&s) => s,
                    None => break,
                };
                self.dispatch_pr(app, stage_idx, slot, board, now)?;
            }
        }
        Ok(())
    }

    fn exclusive_admit(&mut self, board: BoardId, now: SimTime) -> Result<(), SimError> {
        if self.excl_current[board as usize].is_some() {
            return Ok(());
        }
        let app = {
            let s = &mut self.sched[board as usize];
            if s.c_wait.is_empty() {
                return Ok(());
            }
            s.c_wait.remove(0)
        };
        self.excl_current[board as usize] = Some(app);
        self.q_order[board as usize].push(app);
        let a = &mut self.apps[app as usize];
        a.bound = Some(SlotSize::Little);
        a.started = true;
        // full-fabric image: one reconfiguration covering the whole app
        self.kernel.push(
            now,
            EventKind::PrEnqueued {
                app,
                task: 0,
                slot: 0,
                board,
            },
        )?;
        self.kernel.push(
            now,
            EventKind::PrStart {
                app,
                task: 0,
                slot: 0,
                board,
                blocked: 0,
            },
        )?;
        Ok(())
    }

    // ── preemption ─────────────────────────────────────────────────

    /// One-slot eviction when an app exceeds its quantum while another
    /// app waits for that slot kind. Big slots are never preempted.
    fn preempt_quantum(&mut self, board: BoardId, now: SimTime) -> Result<bool, SimError> {
        if self.boards[board as usize].idle_count(SlotSize::Little) > 0 {
            return Ok(false);
        }
        let quantum = self.cal.preempt_quantum();
        let waiters = self.little_waiters(board);
        if waiters.is_empty() {
            return Ok(false);
        }
        // victim: the app longest over its quantum, skipping any app
        // that is itself the only waiter
        let mut candidates: Vec<(SimTime, AppId)> = self.q_order[board as usize]
            .iter()
            .filter_map(|&id| {
                let a = &self.apps[id as usize];
                let since = a.occupied_since?;
                if a.bound != Some(SlotSize::Little) || since + quantum > now {
                    return None;
                }
                let has_hosted = a.stages.iter().any(|s| {
                    s.state == StageState::Hosted
                        && s.slot
                            .map(|sl| self.boards[board as usize].slot(sl).size == SlotSize::Little)
                            .unwrap_or(false)
                });
                has_hosted.then_some((since, id))
            })
            .collect();
        candidates.sort();
        let victim = match candidates
            .into_iter()
            .find(|&(_, id)| waiters.iter().any(|&w| w != id))
        {
            Some((_, id)) => id,
            None => return Ok(false),
        };
        // evict the victim's longest-hosted Little slot at the next
        // item boundary
        let stage_idx = {
            let a = &self.apps[victim as usize];
            let mut hosted: Vec<(SimTime, SlotId, usize)> = a
                .stages
                .iter()
                .enumerate()
                .filter_map(|(i, s)| match (s.state, s.slot) {
                    (StageState::Hosted, Some(sl))
                        if self.boards[board as usize].slot(sl).size == SlotSize::Little =>
                    {
                        Some((s.hosted_at, sl, i))
                    }
                    _ => None,
                })
                .collect();
            hosted.sort();
            match hosted.first() {
                Some(&(_, _, i)) => i,
                None => return Ok(false),
            }
        };
        self.begin_eviction(victim, stage_idx, board, now)?;
        Ok(true)
    }

    /// Apps that could run right now if a Little slot were free.
    fn little_waiters(&self, board: BoardId) -> Vec<AppId> {
        let mut waiters: Vec<AppId> = self.sched[board as usize].c_wait.clone();
        for &id in &self.q_order[board as usize] {
            let a = &self.apps[id as usize];
            if a.bound != Some(SlotSize::Little) {
                continue;
            }
            let r = self.r_of(id, SlotSize::Little);
            if a.used_of(SlotSize::Little) >= r {
                continue;
            }
            let has_eligible = (0..a.stages.len())
                .any(|i| a.stages[i].state == StageState::Pending && self.demand_ready(id, i));
            if has_eligible {
                waiters.push(id);
            }
        }
        waiters
    }

    /// Round-robin rotation of slot ownership toward the waiting list:
    /// when the head waiter cannot bind, the longest-resident app past
    /// its time slice releases its slots and re-queues behind the
    /// waiting list — but only if that actually makes the head fit.
    /// At most one rotation per slice per board, so co-resident apps
    /// whose slices expire together are not mass-evicted.
    fn rotate_quantum(&mut self, board: BoardId, now: SimTime) -> Result<bool, SimError> {
        let head = match self.sched[board as usize].c_wait.first() {
            Some(&app) => app,
            None => return Ok(false),
        };
        let slice = self.cal.rr_slice();
        // rotations settle for half a slice before the next one; all
        // rotations are head-fitting, so consecutive ones are useful
        if let Some(last) = self.last_rotation[board as usize] {
            if now < last + SimTime(slice.as_us() / 2) {
                return Ok(false);
            }
        }
        let little_total = self.boards[board as usize].layout.little_count;
        let reserved_of = |id: AppId| {
            let a = &self.apps[id as usize];
            self.sched[board as usize]
                .r_of(id)
                .1
                .min(a.unfinished_stages())
        };
        let head_need = {
            let a = &self.apps[head as usize];
            a.o_little
                .min(little_total)
                .min(a.unfinished_stages())
                .max(1)
        };
        let reserved: u32 = self.sched[board as usize]
            .s_little
            .iter()
            .map(|&id| reserved_of(id))
            .sum();
        let mut candidates: Vec<(SimTime, AppId)> = self.q_order[board as usize]
            .iter()
            .filter_map(|&id| {
                let a = &self.apps[id as usize];
                let since = a.occupied_since?;
                if since + slice > now || a.completed.is_some() {
                    return None;
                }
                // wait for in-flight PRs to settle before rotating
                if a.stages.iter().any(|s| s.state == StageState::PrInFlight) {
                    return None;
                }
                // pointless eviction: the head still would not fit
                if reserved - reserved_of(id) + head_need > little_total {
                    return None;
                }
                // an app about to finish is cheaper to let drain than
                // to re-queue behind the whole waiting list
                if self.remaining_work_estimate(id) <= slice {
                    return None;
                }
                Some((since, id))
            })
            .collect();
        candidates.sort();
        let victim = match candidates.first() {
            Some(&(_, id)) => id,
            None => return Ok(false),
        };
        let stage_count = self.apps[victim as usize].stages.len();
        for stage_idx in 0..stage_count {
            if self.apps[victim as usize].stages[stage_idx].state == StageState::Hosted {
                self.begin_eviction(victim, stage_idx, board, now)?;
            }
        }
        // unbind and re-queue at the tail of the waiting list
        let a = &mut self.apps[victim as usize];
        a.bound = None;
        a.occupied_since = None;
        let s = &mut self.sched[board as usize];
        s.s_little.retain(|&x| x != victim);
        s.r.insert(victim, (0, 0));
        s.c_wait.push(victim);
        self.q_order[board as usize].retain(|&x| x != victim);
        self.last_rotation[board as usize] = Some(now);
        Ok(true)
    }

    /// Serial-time upper bound on an app's unfinished work, scaled by
    /// its slot allocation.
    fn remaining_work_estimate(&self, app: AppId) -> SimTime {
        let a = &self.apps[app as usize];
        let total: u64 = a
            .stages
            .iter()
            .map(|s| {
                let left = (s.items_total - s.items_done) as u64;
                left * s.plan.model.start_interval().as_us()
            })
            .sum();
        let slots = self.r_of(app, SlotSize::Little).max(1) as u64;
        SimTime(total / slots)
    }

    /// Marks a hosted stage for eviction; the slot is released at the
    /// next item boundary (immediately when no item is in flight).
    /// Completed items are never rolled back.
    fn begin_eviction(
        &mut self,
        app: AppId,
        stage_idx: usize,
        board: BoardId,
        now: SimTime,
    ) -> Result<(), SimError> {
        let stage = &mut self.apps[app as usize].stages[stage_idx];
        debug_assert_eq!(stage.state, StageState::Hosted);
        stage.state = StageState::Evicting;
        stage.gen += 1;
        stage.scheduled_start = None;
        if stage.items_started == stage.items_done {
            self.finish_eviction(app, stage_idx, board, now)?;
        }
        Ok(())
    }

    #[cfg(debug_assertions)]
    fn assert_work_conserving(&self, board: BoardId) {
        for &app in &self.q_order[board as usize] {
            let a = &self.apps[app as usize];
            let kind = match a.bound {
                Some(k) => k,
                None => continue,
            };
            if a.used_of(kind) >= self.r_of(app, kind) {
                continue;
            }
            for i in 0..a.stages.len() {
                if a.stages[i].state == StageState::Pending
                    && self.demand_ready(app, i)
                    && !self.boards[board as usize].idle_slot_ids(kind).is_empty()
                {
                    panic!(
                        "work conservation violated: app {app} stage {i} ready, \
                         idle {kind:?} slot unused on board {board}"
                    );
                }
            }
        }
    }

    // ── switching and migration ────────────────────────────────────

    fn candidate_update(&mut self, now: SimTime) -> Result<(), SimError> {
        if self.controller.is_none() {
            return Ok(());
        }
        if let Some(window) = self.window.update() {
            self.kernel
                .push(now, EventKind::MetricWindowTick { window, d: 0.0 })?;
        }
        Ok(())
    }

    fn switch_window(&self) -> SwitchWindow {
        let mut n_pr = 0u32;
        let mut n_apps = 0u32;
        let mut n_batch = 0u64;
        for a in &self.apps {
            if a.started {
                n_pr += a.stages.len() as u32;
            }
            if a.board.is_some() && a.completed.is_none() {
                n_apps += 1;
                n_batch += a.batch as u64;
            }
        }
        SwitchWindow {
            n_blocked: self.window_blocked.len() as u32,
            n_pr,
            n_apps,
            n_batch,
        }
    }

    fn on_metric_window(&mut self, window: u32, now: SimTime) -> Result<f64, SimError> {
        let w = self.switch_window();
        let d = compute_d_switch(&w);
        self.window_blocked.clear();
        let action = match self.controller.as_mut() {
            Some(c) => c.step(d),
            None => SwitchAction::None,
        };
        let applied = match action {
            SwitchAction::None => "none".to_string(),
            SwitchAction::Prewarm(layout) => match self.find_spare() {
                Some(spare) => {
                    self.prewarm(spare, layout, now)?;
                    action.as_str().to_string()
                }
                None => "prewarm_skipped".to_string(),
            },
            SwitchAction::Switch(layout) => match self.find_spare() {
                Some(spare) => {
                    self.prewarm(spare, layout, now)?;
                    self.perform_switch(spare, layout, now)?;
                    action.as_str().to_string()
                }
                None => "switch_skipped".to_string(),
            },
        };
        if let Some(c) = self.controller.as_mut() {
            let state = c.state;
            c.history.push(DSample {
                window,
                time: now,
                d,
                state,
                action: applied,
            });
        }
        Ok(d)
    }

    fn find_spare(&self) -> Option<BoardId> {
        self.boards
            .iter()
            .find(|b| !b.resident && !b.draining)
            .map(|b| b.id)
    }

    fn prewarm(
        &mut self,
        board: BoardId,
        layout: LayoutKind,
        now: SimTime,
    ) -> Result<(), SimError> {
        if self.boards[board as usize].prewarmed_for == Some(layout) {
            return Ok(());
        }
        let cal = &self.cal;
        let cfg = crate::config::BoardConfig::new(layout);
        let new_layout = SlotLayout::from_config(&cfg, cal);
        let b = &mut self.boards[board as usize];
        b.reprogram(new_layout);
        b.prewarmed_for = Some(layout);
        self.kernel.push(
            now,
            EventKind::PrewarmStart {
                board,
                layout: layout.as_str().to_string(),
            },
        )?;
        Ok(())
    }

    fn perform_switch(
        &mut self,
        to: BoardId,
        layout: LayoutKind,
        now: SimTime,
    ) -> Result<(), SimError> {
        let from = self.active_board;
        let candidates: Vec<(AppId, bool)> = self
            .apps
            .iter()
            .filter(|a| a.board == Some(from) && a.completed.is_none())
            .map(|a| (a.id, a.started))
            .collect();
        let (moved, drained) = plan_migration(
            &candidates,
            to,
            layout,
            self.boards[to as usize].prewarmed_for,
            self.boards[to as usize].pr.is_empty(),
        )
        .expect("controller pre-warms before switching");

        let overhead = self.switching.migration_overhead();
        for &app in &moved {
            let a = &mut self.apps[app as usize];
            debug_assert!(!a.started && a.used == (0, 0));
            a.board = Some(to);
            a.bound = None;
            // allocation state resets: slot counts differ across
            // layouts, so the new board reallocates from scratch
            let spec = &self.specs[a.spec_idx];
            a.stages = little_stages(spec, self.cal.launch_overhead())
                .into_iter()
                .map(|p| StageRun::new(p, a.batch))
                .collect();
            self.sched[from as usize].remove(app);
            self.q_order[from as usize].retain(|&x| x != app);
            self.sched[to as usize].c_wait.push(app);
        }

        {
            let b = &mut self.boards[to as usize];
            b.resident = true;
            b.prewarmed_for = None;
        }
        {
            let b = &mut self.boards[from as usize];
            b.resident = false;
            b.draining = !drained.is_empty();
            if drained.is_empty() {
                b.prewarmed_for = None;
            }
        }
        self.active_board = to;
        if let Some(c) = self.controller.as_mut() {
            c.confirm_switch(layout);
        }
        self.kernel.push(
            now,
            EventKind::SwitchTriggered {
                from,
                to,
                layout: layout.as_str().to_string(),
            },
        )?;
        self.kernel.push(
            now + overhead,
            EventKind::MigrationComplete {
                from,
                to,
                moved: moved.len() as u32,
                drained: drained.len() as u32,
            },
        )?;
        self.migrations.push(MigrationRecord {
            from,
            to,
            time: now,
            moved_apps: moved,
            drained_apps: drained,
            overhead,
        });
        // the migration overhead delays the first scheduling tick on
        // the new board
        self.tick_floor[to as usize] = now + overhead;
        self.request_tick(to, now + overhead)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{BoardConfig, Calibration, OutputConfig, RunConfig, WorkloadSource};
    use crate::workload::{generate_sequence, Preset};

    fn config(policy: Policy, layout: LayoutKind) -> RunConfig {
        RunConfig {
            version: 1,
            workload: WorkloadSource::Generated {
                preset: Preset::Loose,
                n_apps: 3,
                seed: 1,
            },
            boards: vec![BoardConfig::new(layout)],
            policy,
            calibration: Calibration::default(),
            switching: SwitchConfig::default(),
            output: OutputConfig::default(),
        }
    }

    fn run(policy: Policy, layout: LayoutKind, preset: Preset, n: u32, seed: u64) -> RunOutcome {
        let cfg = config(policy, layout);
        let w = generate_sequence(preset, n, seed, &cfg.calibration);
        Simulation::new(&cfg, &w)
            .unwrap()
            .run(SimTime::from_ms(100_000_000))
            .unwrap()
    }

    fn completions(outcome: &RunOutcome) -> Vec<AppId> {
        outcome
            .events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::AppComplete { app } => Some(app),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn every_policy_completes_every_app() {
        for policy in Policy::ALL {
            let layout = if policy.uses_big() {
                LayoutKind::BigLittle
            } else {
                LayoutKind::OnlyLittle
            };
            let outcome = run(policy, layout, Preset::Standard, 6, 3);
            let mut done = completions(&outcome);
            done.sort();
            assert_eq!(done, vec![0, 1, 2, 3, 4, 5], "policy {policy}");
        }
    }

    #[test]
    fn traces_are_canonically_sorted_and_monotone() {
        let outcome = run(
            Policy::VersaBigLittle,
            LayoutKind::BigLittle,
            Preset::Stress,
            8,
            7,
        );
        let mut prev = (0u64, 0u8, 0u64);
        for e in &outcome.events {
            let key = (e.t.as_us(), e.kind.rank(), e.seq);
            assert!(key > prev || prev == (0, 0, 0), "unsorted at {key:?}");
            prev = key;
        }
    }

    #[test]
    fn identical_runs_yield_identical_traces() {
        let a = run(
            Policy::NimblockMode,
            LayoutKind::OnlyLittle,
            Preset::Stress,
            8,
            11,
        );
        let b = run(
            Policy::NimblockMode,
            LayoutKind::OnlyLittle,
            Preset::Stress,
            8,
            11,
        );
        assert_eq!(a.events, b.events);
    }

    #[test]
    fn exclusive_apps_never_overlap() {
        let outcome = run(
            Policy::Exclusive,
            LayoutKind::OnlyLittle,
            Preset::Stress,
            4,
            2,
        );
        // collect per-app first launch and completion
        let mut first_launch: BTreeMap<AppId, SimTime> = BTreeMap::new();
        let mut completion: BTreeMap<AppId, SimTime> = BTreeMap::new();
        for e in &outcome.events {
            match e.kind {
                EventKind::BatchItemStart { app, .. } => {
                    first_launch.entry(app).or_insert(e.t);
                }
                EventKind::AppComplete { app } => {
                    completion.insert(app, e.t);
                }
                _ => {}
            }
        }
        let f = full_fabric_duration(&Calibration::default());
        for app in 1..4u32 {
            let prev_done = completion[&(app - 1)];
            let launch = first_launch[&app];
            assert!(
                launch >= prev_done + f,
                "app {app} launched at {launch} before {prev_done} + {f}"
            );
        }
    }

    #[test]
    fn serial_pr_never_overlaps_on_a_board() {
        for policy in [Policy::NimblockMode, Policy::VersaBigLittle] {
            let layout = if policy.uses_big() {
                LayoutKind::BigLittle
            } else {
                LayoutKind::OnlyLittle
            };
            let outcome = run(policy, layout, Preset::Stress, 10, 5);
            let mut intervals: Vec<(SimTime, SimTime)> = Vec::new();
            let mut open: BTreeMap<(AppId, TaskId), SimTime> = BTreeMap::new();
            for e in &outcome.events {
                match e.kind {
                    EventKind::PrStart { app, task, .. } => {
                        open.insert((app, task), e.t);
                    }
                    EventKind::PrComplete { app, task, .. } => {
                        if let Some(start) = open.remove(&(app, task)) {
                            intervals.push((start, e.t));
                        }
                    }
                    _ => {}
                }
            }
            intervals.sort();
            for pair in intervals.windows(2) {
                assert!(
                    pair[0].1 <= pair[1].0,
                    "{policy}: PR intervals overlap: {pair:?}"
                );
            }
        }
    }

    #[test]
    fn slots_host_one_stage_at_a_time() {
        // every item event on a slot must belong to the stage named by
        // the latest PR request for that slot, and no item activity may
        // fall inside a reconfiguration interval
        let outcome = run(
            Policy::VersaBigLittle,
            LayoutKind::BigLittle,
            Preset::Stress,
            10,
            9,
        );
        let mut last_host: BTreeMap<SlotId, (AppId, TaskId)> = BTreeMap::new();
        let mut reconfiguring: BTreeMap<SlotId, bool> = BTreeMap::new();
        for e in &outcome.events {
            match e.kind {
                EventKind::PrEnqueued {
                    app, task, slot, ..
                } => {
                    last_host.insert(slot, (app, task));
                }
                EventKind::PrStart { slot, .. } => {
                    reconfiguring.insert(slot, true);
                }
                EventKind::PrComplete { slot, .. } => {
                    reconfiguring.insert(slot, false);
                }
                EventKind::BatchItemStart {
                    app, task, slot, ..
                }
                | EventKind::BatchItemComplete {
                    app, task, slot, ..
                } => {
                    assert_eq!(
                        last_host.get(&slot),
                        Some(&(app, task)),
                        "item event for a stage that does not hold slot {slot} at {}",
                        e.t
                    );
                    assert_ne!(
                        reconfiguring.get(&slot),
                        Some(&true),
                        "item activity during reconfiguration of slot {slot} at {}",
                        e.t
                    );
                }
                _ => {}
            }
        }
    }

    #[test]
    fn allocation_caps_bound_concurrent_slot_use() {
        // two 9-task apps split the 8 Little slots; each app's
        // concurrently held slots never exceed the cap the allocator
        // granted it
        let mut cfg = config(Policy::NimblockMode, LayoutKind::OnlyLittle);
        cfg.workload = WorkloadSource::Generated {
            preset: Preset::Loose,
            n_apps: 2,
            seed: 2,
        };
        let mut w = generate_sequence(Preset::Loose, 2, 2, &cfg.calibration);
        for app in &mut w.apps {
            app.spec = "of".into();
            app.batch = 20;
            app.arrival = SimTime::ZERO;
        }
        let sim = Simulation::new(&cfg, &w).unwrap().with_options(SimOptions {
            record_alloc_snapshots: true,
        });
        let outcome = sim.run(SimTime::from_ms(100_000_000)).unwrap();
        let max_r = |app: AppId| {
            outcome
                .alloc_snapshots
                .iter()
                .filter_map(|s| s.r.get(&app).map(|&(_, l)| l))
                .max()
                .unwrap_or(0)
        };
        // track concurrently held slots per app: held from PR enqueue
        // until the hosted stage's last item completes
        let mut holder: BTreeMap<SlotId, AppId> = BTreeMap::new();
        let mut peak: BTreeMap<AppId, usize> = BTreeMap::new();
        for e in &outcome.events {
            match e.kind {
                EventKind::PrEnqueued { app, slot, .. } => {
                    holder.insert(slot, app);
                    let now = holder.values().filter(|&&a| a == app).count();
                    let p = peak.entry(app).or_insert(0);
                    *p = (*p).max(now);
                }
                EventKind::BatchItemComplete {
                    app,
                    task,
                    item,
                    slot,
                    ..
                } => {
                    // the final item of a stage releases its slot
                    if item == 20 {
                        let _ = task;
                        if holder.get(&slot) == Some(&app) {
                            holder.remove(&slot);
                        }
                    }
                }
                _ => {}
            }
        }
        for (&app, &p) in &peak {
            let cap = max_r(app);
            assert!(
                p as u32 <= cap,
                "app {app} held {p} Little slots concurrently with cap {cap}"
            );
        }
    }

    #[test]
    fn bundled_app_loads_one_bitstream_per_bundle() {
        // a single 6-task app on a Big.Little board binds Big and loads
        // exactly 2 bundles
        let mut cfg = config(Policy::VersaBigLittle, LayoutKind::BigLittle);
        cfg.workload = WorkloadSource::Generated {
            preset: Preset::Loose,
            n_apps: 1,
            seed: 5,
        };
        let mut w = generate_sequence(Preset::Loose, 1, 5, &cfg.calibration);
        w.apps[0].spec = "lenet".into();
        w.apps[0].batch = 10;
        let outcome = Simulation::new(&cfg, &w)
            .unwrap()
            .run(SimTime::from_ms(1_000_000))
            .unwrap();
        let pr_tasks: Vec<TaskId> = outcome
            .events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::PrEnqueued { task, .. } => Some(task),
                _ => None,
            })
            .collect();
        assert_eq!(pr_tasks, vec![0, 3], "expected one PR per bundle");
        assert_eq!(completions(&outcome), vec![0]);
    }
}
