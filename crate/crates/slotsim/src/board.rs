//! One FPGA: slot layout, slot state machines, and the serial PR engine.
//!
//! The PR engine models the serial configuration port: one bitstream in
//! service at a time, FIFO order, and — in single-core mode — a CPU
//! block window covering each service interval during which batch
//! launches on the board are deferred. Queue admission itself is never
//! deferred; the wait between enqueue and service start is the
//! `blocked` duration that feeds the contention metric.

use crate::config::{BoardConfig, Calibration, LayoutKind};
use crate::engine::{BoardId, SlotId};
use crate::time::SimTime;
use crate::workload::ResourceVec;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BoardError {
    #[error("slot {slot} on board {board} is {state:?}, cannot accept a PR request")]
    SlotBusy {
        board: BoardId,
        slot: SlotId,
        state: SlotState,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotSize {
    Big,
    Little,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotState {
    Idle,
    Reconfiguring,
    Loaded,
    Executing,
    Draining,
}

/// Whether PR service blocks the scheduling core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrMode {
    /// Scheduler and PR share one core: every service interval is a
    /// block window for launches on this board.
    SingleCore,
    /// PR runs on a dedicated core; launches are never deferred.
    DualCore,
}

/// Slot geometry of one board.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotLayout {
    pub kind: LayoutKind,
    pub big_count: u32,
    pub little_count: u32,
    pub little_capacity: ResourceVec,
}

impl SlotLayout {
    pub fn from_config(cfg: &BoardConfig, cal: &Calibration) -> Self {
        SlotLayout {
            kind: cfg.layout,
            big_count: cfg.big_count(),
            little_count: cfg.little_count(),
            little_capacity: ResourceVec {
                lut_units: cal.little_capacity,
                ff_units: cal.little_capacity,
            },
        }
    }

    /// Big slots hold exactly twice the resources of a Little slot.
    pub fn big_capacity(&self) -> ResourceVec {
        ResourceVec {
            lut_units: self.little_capacity.lut_units * 2,
            ff_units: self.little_capacity.ff_units * 2,
        }
    }

    pub fn slot_count(&self) -> u32 {
        self.big_count + self.little_count
    }
}

/// PR service time for one slot size. The bitstream scales with the
/// region, so a Big slot takes twice the Little time; a full-fabric
/// load covers eight Little-equivalents (2 Big + 4 Little).
pub fn pr_duration(size: SlotSize, cal: &Calibration) -> SimTime {
    match size {
        SlotSize::Little => cal.little_pr(),
        SlotSize::Big => SimTime(cal.little_pr().as_us() * 2),
    }
}

/// Full-fabric reconfiguration time for the exclusive baseline.
pub fn full_fabric_duration(cal: &Calibration) -> SimTime {
    SimTime(cal.little_pr().as_us() * 8)
}

/// The CPU interval occupied by a PR service, if any. Launches strictly
/// inside the window are deferred to its end; actions at the exact
/// boundary instants proceed (the core issues them before the load
/// begins or right as it finishes).
pub fn cpu_block_window(
    mode: PrMode,
    start: SimTime,
    duration: SimTime,
) -> Option<(SimTime, SimTime)> {
    match mode {
        PrMode::SingleCore => Some((start, start + duration)),
        PrMode::DualCore => None,
    }
}

/// A reconfigurable region. `hosted` names the (app, stage) pair whose
/// bitstream currently occupies it.
#[derive(Debug, Clone)]
pub struct Slot {
    pub id: SlotId,
    pub size: SlotSize,
    pub state: SlotState,
    pub hosted: Option<(u32, u32)>,
}

/// One queued or in-service PR request.
#[derive(Debug, Clone, PartialEq)]
pub struct PrRequest {
    pub app: u32,
    pub stage: u32,
    pub slot: SlotId,
    pub size: SlotSize,
    pub enqueued: SimTime,
}

/// Outcome of admitting a request to the engine.
#[derive(Debug, Clone, PartialEq)]
pub enum PrAdmission {
    /// The engine was idle: service starts immediately.
    Started { request: PrRequest },
    /// The engine is busy: the request waits in FIFO order.
    Queued,
}

/// Serial PR service queue. At most one request is in service at any
/// instant; completion pops the next request in FIFO order.
#[derive(Debug, Clone, Default)]
pub struct PrEngine {
    in_service: Option<PrRequest>,
    fifo: VecDeque<PrRequest>,
}

impl PrEngine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn busy(&self) -> bool {
        self.in_service.is_some()
    }

    pub fn in_service(&self) -> Option<&PrRequest> {
        self.in_service.as_ref()
    }

    pub fn queue_len(&self) -> usize {
        self.fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.in_service.is_none() && self.fifo.is_empty()
    }

    /// Admits a request; if the engine is idle the request enters
    /// service at once.
    pub fn admit(&mut self, request: PrRequest) -> PrAdmission {
        if self.in_service.is_none() {
            self.in_service = Some(request.clone());
            PrAdmission::Started { request }
        } else {
            self.fifo.push_back(request);
            PrAdmission::Queued
        }
    }

    /// Completes the in-service request and starts the next queued one,
    /// if any. Returns the request that just entered service.
    pub fn complete_and_pop(&mut self) -> Option<PrRequest> {
        self.in_service = None;
        if let Some(next) = self.fifo.pop_front() {
            self.in_service = Some(next.clone());
            Some(next)
        } else {
            None
        }
    }
}

/// Full board state: layout, slots, PR engine, CPU-block bookkeeping.
#[derive(Debug, Clone)]
pub struct Board {
    pub id: BoardId,
    pub layout: SlotLayout,
    pub slots: Vec<Slot>,
    pub pr: PrEngine,
    pub pr_mode: PrMode,
    /// Latest CPU block window (single-core boards only).
    pub cpu_window: Option<(SimTime, SimTime)>,
    /// Accepting new applications.
    pub resident: bool,
    /// Finishing started applications before release.
    pub draining: bool,
    /// Layout staged by a prewarm, waiting for a switch.
    pub prewarmed_for: Option<LayoutKind>,
}

impl Board {
    pub fn new(id: BoardId, layout: SlotLayout, pr_mode: PrMode) -> Self {
        let slots = Self::build_slots(&layout);
        Board {
            id,
            layout,
            slots,
            pr: PrEngine::new(),
            pr_mode,
            cpu_window: None,
            resident: true,
            draining: false,
            prewarmed_for: None,
        }
    }

    fn build_slots(layout: &SlotLayout) -> Vec<Slot> {
        let mut slots = Vec::with_capacity(layout.slot_count() as usize);
        for id in 0..layout.big_count {
            slots.push(Slot {
                id,
                size: SlotSize::Big,
                state: SlotState::Idle,
                hosted: None,
            });
        }
        for id in layout.big_count..layout.slot_count() {
            slots.push(Slot {
                id,
                size: SlotSize::Little,
                state: SlotState::Idle,
                hosted: None,
            });
        }
        slots
    }

    /// Swaps in a new layout (static-region reprogram while the board is
    /// idle) and clears all slot state.
    pub fn reprogram(&mut self, layout: SlotLayout) {
        self.slots = Self::build_slots(&layout);
        self.layout = layout;
        self.pr = PrEngine::new();
        self.cpu_window = None;
    }

    /// Idle and uncommitted: a slot picked by the dispatcher is marked
    /// hosted immediately so one tick never double-books it.
    pub fn idle_slot_ids(&self, size: SlotSize) -> Vec<SlotId> {
        self.slots
            .iter()
            .filter(|s| s.size == size && s.state == SlotState::Idle && s.hosted.is_none())
            .map(|s| s.id)
            .collect()
    }

    pub fn idle_count(&self, size: SlotSize) -> u32 {
        self.idle_slot_ids(size).len() as u32
    }

    pub fn slot(&self, id: SlotId) -> &Slot {
        &self.slots[id as usize]
    }

    pub fn slot_mut(&mut self, id: SlotId) -> &mut Slot {
        &mut self.slots[id as usize]
    }

    /// Admits a PR request for an idle slot. Records the request in the
    /// engine; the caller schedules the start/complete events.
    pub fn pr_request(
        &mut self,
        app: u32,
        stage: u32,
        slot_id: SlotId,
        now: SimTime,
    ) -> Result<PrAdmission, BoardError> {
        let slot = &self.slots[slot_id as usize];
        if slot.state != SlotState::Idle {
            return Err(BoardError::SlotBusy {
                board: self.id,
                slot: slot_id,
                state: slot.state,
            });
        }
        let size = slot.size;
        self.slots[slot_id as usize].hosted = Some((app, stage));
        Ok(self.pr.admit(PrRequest {
            app,
            stage,
            slot: slot_id,
            size,
            enqueued: now,
        }))
    }

    /// Registers a service start: marks the slot reconfiguring and, on
    /// single-core boards, extends the CPU block window.
    pub fn begin_service(&mut self, request: &PrRequest, now: SimTime, cal: &Calibration) {
        self.slots[request.slot as usize].state = SlotState::Reconfiguring;
        let dur = pr_duration(request.size, cal);
        if let Some(window) = cpu_block_window(self.pr_mode, now, dur) {
            self.cpu_window = Some(window);
        }
    }

    /// True when a launch at `t` falls strictly inside the current CPU
    /// block window; such launches are deferred to the window end.
    pub fn launch_deferred_until(&self, t: SimTime) -> Option<SimTime> {
        match self.cpu_window {
            Some((start, end)) if t > start && t < end => Some(end),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal() -> Calibration {
        Calibration::default()
    }

    fn little_board() -> Board {
        let cfg = BoardConfig::new(LayoutKind::OnlyLittle);
        Board::new(0, SlotLayout::from_config(&cfg, &cal()), PrMode::SingleCore)
    }

    #[test]
    fn big_capacity_is_twice_little() {
        let cfg = BoardConfig::new(LayoutKind::BigLittle);
        let layout = SlotLayout::from_config(&cfg, &cal());
        assert_eq!(layout.big_count, 2);
        assert_eq!(layout.little_count, 4);
        assert_eq!(
            layout.big_capacity().lut_units,
            2 * layout.little_capacity.lut_units
        );
        assert_eq!(
            layout.big_capacity().ff_units,
            2 * layout.little_capacity.ff_units
        );
    }

    #[test]
    fn pr_durations_follow_region_size() {
        let c = cal();
        assert_eq!(pr_duration(SlotSize::Little, &c), SimTime::from_ms(30));
        assert_eq!(pr_duration(SlotSize::Big, &c), SimTime::from_ms(60));
        assert_eq!(full_fabric_duration(&c), SimTime::from_ms(240));
        assert!(pr_duration(SlotSize::Little, &c) > SimTime::ZERO);
    }

    #[test]
    fn idle_engine_starts_service_immediately() {
        let mut b = little_board();
        let adm = b.pr_request(1, 0, 0, SimTime::ZERO).unwrap();
        match adm {
            PrAdmission::Started { request } => {
                assert_eq!(request.enqueued, SimTime::ZERO);
            }
            PrAdmission::Queued => panic!("engine was idle"),
        }
    }

    #[test]
    fn busy_engine_queues_fifo() {
        let mut b = little_board();
        let first = b.pr_request(1, 0, 0, SimTime::ZERO).unwrap();
        assert!(matches!(first, PrAdmission::Started { .. }));
        // engine busy until t=40 in the caller's schedule; enqueue at t=10
        let second = b.pr_request(2, 0, 1, SimTime::from_ms(10)).unwrap();
        assert_eq!(second, PrAdmission::Queued);
        let third = b.pr_request(3, 0, 2, SimTime::from_ms(10)).unwrap();
        assert_eq!(third, PrAdmission::Queued);
        // completion pops in enqueue order
        let next = b.pr.complete_and_pop().unwrap();
        assert_eq!(next.app, 2);
        // blocked duration is start minus enqueue: 40 - 10 = 30
        let start = SimTime::from_ms(40);
        assert_eq!(start - next.enqueued, SimTime::from_ms(30));
        let last = b.pr.complete_and_pop().unwrap();
        assert_eq!(last.app, 3);
    }

    #[test]
    fn occupied_slot_rejects_requests() {
        let mut b = little_board();
        b.pr_request(1, 0, 0, SimTime::ZERO).unwrap();
        b.slot_mut(0).state = SlotState::Reconfiguring;
        let err = b.pr_request(2, 0, 0, SimTime::ZERO).unwrap_err();
        assert_eq!(
            err,
            BoardError::SlotBusy {
                board: 0,
                slot: 0,
                state: SlotState::Reconfiguring,
            }
        );
    }

    #[test]
    fn block_window_modes() {
        assert_eq!(
            cpu_block_window(
                PrMode::SingleCore,
                SimTime::from_ms(100),
                SimTime::from_ms(30)
            ),
            Some((SimTime::from_ms(100), SimTime::from_ms(130)))
        );
        assert_eq!(
            cpu_block_window(
                PrMode::DualCore,
                SimTime::from_ms(100),
                SimTime::from_ms(30)
            ),
            None
        );
    }

    #[test]
    fn launch_deferral_is_strict_interior() {
        let mut b = little_board();
        b.cpu_window = Some((SimTime::from_ms(100), SimTime::from_ms(130)));
        assert_eq!(b.launch_deferred_until(SimTime::from_ms(100)), None);
        assert_eq!(
            b.launch_deferred_until(SimTime::from_ms(110)),
            Some(SimTime::from_ms(130))
        );
        assert_eq!(b.launch_deferred_until(SimTime::from_ms(130)), None);
    }
}
