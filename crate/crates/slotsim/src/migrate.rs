//! Contention metric, hysteresis switch loop, and live migration.
//!
//! The degradation score combines the fraction of PR requests that
//! queued behind another load in the current window with the ratio of
//! candidate apps to their total batch size:
//!
//! ```text
//! D = (n_blocked / n_pr) * (n_apps / n_batch)
//! ```
//!
//! Batch sizes are at least one per app, so D sits in [0, 1]; higher
//! means more PR contention now and more conflict potential ahead.
//! The switch loop is a Schmitt trigger over D with thresholds
//! `t2 < t1`: crossing t1 upward on an Only.Little board switches to
//! Big.Little, falling to t2 switches back, and inside the buffer zone
//! the spare board is pre-warmed toward the side D is moving.

use crate::config::LayoutKind;
use crate::engine::AppId;
use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Window counters feeding one metric recomputation.
#[derive(Debug, Clone, Copy, Default)]
pub struct SwitchWindow {
    /// Distinct stages whose PR request waited behind another load
    /// during this window.
    pub n_blocked: u32,
    /// Stage count of every app that has started or completed, summed
    /// over the whole run (a bundle is one PR unit).
    pub n_pr: u32,
    /// Apps arrived and not yet completed.
    pub n_apps: u32,
    /// Total batch size over those apps.
    pub n_batch: u64,
}

/// Evaluates the degradation score, clamped to [0, 1]. Returns 0 when
/// nothing has loaded yet or no candidates exist.
pub fn compute_d_switch(w: &SwitchWindow) -> f64 {
    if w.n_pr == 0 || w.n_batch == 0 || w.n_blocked == 0 {
        return 0.0;
    }
    let contention = w.n_blocked as f64 / w.n_pr as f64;
    let pressure = w.n_apps as f64 / w.n_batch as f64;
    (contention * pressure).clamp(0.0, 1.0)
}

/// Counts candidate-queue updates (arrivals and completions) and fires
/// a recomputation every `n` of them.
#[derive(Debug, Clone)]
pub struct MetricWindow {
    updates_per_window: u32,
    counter: u32,
    next_index: u32,
}

impl MetricWindow {
    pub fn new(updates_per_window: u32) -> Self {
        assert!(updates_per_window >= 1);
        MetricWindow {
            updates_per_window,
            counter: 0,
            next_index: 0,
        }
    }

    /// Registers one candidate-queue update; returns the window index
    /// when a recomputation is due.
    pub fn update(&mut self) -> Option<u32> {
        self.counter += 1;
        if self.counter >= self.updates_per_window {
            self.counter = 0;
            let idx = self.next_index;
            self.next_index += 1;
            Some(idx)
        } else {
            None
        }
    }
}

/// Controller decision for one metric sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchAction {
    None,
    Prewarm(LayoutKind),
    Switch(LayoutKind),
}

impl SwitchAction {
    pub fn as_str(&self) -> &'static str {
        match self {
            SwitchAction::None => "none",
            SwitchAction::Prewarm(LayoutKind::BigLittle) => "prewarm_big_little",
            SwitchAction::Prewarm(LayoutKind::OnlyLittle) => "prewarm_only_little",
            SwitchAction::Switch(LayoutKind::BigLittle) => "switch_big_little",
            SwitchAction::Switch(LayoutKind::OnlyLittle) => "switch_only_little",
        }
    }
}

/// One row of the exported D-series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DSample {
    pub window: u32,
    pub time: SimTime,
    pub d: f64,
    /// Controller side after applying this sample's action.
    pub state: LayoutKind,
    /// Action decided for this sample ("skipped" suffix when no spare
    /// board was available to honor it).
    pub action: String,
}

/// Schmitt-trigger switch controller.
#[derive(Debug, Clone)]
pub struct SwitchController {
    pub t1: f64,
    pub t2: f64,
    pub state: LayoutKind,
    prev_d: Option<f64>,
    pub history: Vec<DSample>,
}

impl SwitchController {
    pub fn new(t1: f64, t2: f64) -> Self {
        assert!(t2 < t1, "thresholds must leave a buffer zone");
        SwitchController {
            t1,
            t2,
            state: LayoutKind::OnlyLittle,
            prev_d: None,
            history: Vec::new(),
        }
    }

    /// Decides the action for a fresh D sample. Crossings flip the
    /// stored layout side only when the caller confirms the switch via
    /// [`SwitchController::confirm_switch`], since a missing spare
    /// board degrades the action to none.
    pub fn step(&mut self, d: f64) -> SwitchAction {
        let prev = self.prev_d.replace(d);
        match self.state {
            LayoutKind::OnlyLittle if d >= self.t1 => SwitchAction::Switch(LayoutKind::BigLittle),
            LayoutKind::BigLittle if d <= self.t2 => SwitchAction::Switch(LayoutKind::OnlyLittle),
            _ if d > self.t2 && d < self.t1 => match prev {
                Some(p) if d > p && self.state == LayoutKind::OnlyLittle => {
                    SwitchAction::Prewarm(LayoutKind::BigLittle)
                }
                Some(p) if d < p && self.state == LayoutKind::BigLittle => {
                    SwitchAction::Prewarm(LayoutKind::OnlyLittle)
                }
                _ => SwitchAction::None,
            },
            _ => SwitchAction::None,
        }
    }

    /// Commits an executed switch: the controller is now on `layout`.
    pub fn confirm_switch(&mut self, layout: LayoutKind) {
        self.state = layout;
    }
}

/// Outcome of one cross-board migration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MigrationRecord {
    pub from: u32,
    pub to: u32,
    pub time: SimTime,
    /// Apps with no started work: transferred to the new board and
    /// reset to the waiting list.
    pub moved_apps: Vec<AppId>,
    /// Apps with started work: they finish on the old board.
    pub drained_apps: Vec<AppId>,
    pub overhead: SimTime,
}

#[derive(Debug, Error, PartialEq)]
pub enum MigrateError {
    #[error("target board {board} is not pre-warmed for {layout:?}")]
    NotPrewarmed { board: u32, layout: LayoutKind },
    #[error("target board {board} is not idle")]
    TargetBusy { board: u32 },
}

/// App-level classification for a migration: apps with any started work
/// drain in place, the rest move. Partial pipelines never split across
/// boards.
pub fn plan_migration(
    candidates: &[(AppId, bool)],
    target_board: u32,
    target_layout: LayoutKind,
    prewarmed_for: Option<LayoutKind>,
    target_idle: bool,
) -> Result<(Vec<AppId>, Vec<AppId>), MigrateError> {
    if prewarmed_for != Some(target_layout) {
        return Err(MigrateError::NotPrewarmed {
            board: target_board,
            layout: target_layout,
        });
    }
    if !target_idle {
        return Err(MigrateError::TargetBusy {
            board: target_board,
        });
    }
    let mut moved = Vec::new();
    let mut drained = Vec::new();
    for &(app, started) in candidates {
        if started {
            drained.push(app);
        } else {
            moved.push(app);
        }
    }
    Ok((moved, drained))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_blocked_gives_zero() {
        let w = SwitchWindow {
            n_blocked: 0,
            n_pr: 12,
            n_apps: 4,
            n_batch: 40,
        };
        assert_eq!(compute_d_switch(&w), 0.0);
    }

    #[test]
    fn worst_case_gives_exactly_one() {
        // every PR blocked and one-item batches per app
        let w = SwitchWindow {
            n_blocked: 9,
            n_pr: 9,
            n_apps: 5,
            n_batch: 5,
        };
        assert_eq!(compute_d_switch(&w), 1.0);
    }

    #[test]
    fn direct_evaluation() {
        let w = SwitchWindow {
            n_blocked: 3,
            n_pr: 12,
            n_apps: 5,
            n_batch: 50,
        };
        assert_eq!(compute_d_switch(&w), 0.025);
    }

    #[test]
    fn empty_window_is_zero_by_convention() {
        assert_eq!(compute_d_switch(&SwitchWindow::default()), 0.0);
    }

    #[test]
    fn window_fires_every_n_updates() {
        let mut w = MetricWindow::new(4);
        assert_eq!(w.update(), None);
        assert_eq!(w.update(), None);
        assert_eq!(w.update(), None);
        assert_eq!(w.update(), Some(0));
        assert_eq!(w.update(), None);
    }

    #[test]
    fn degenerate_window_fires_every_update() {
        let mut w = MetricWindow::new(1);
        assert_eq!(w.update(), Some(0));
        assert_eq!(w.update(), Some(1));
    }

    #[test]
    fn upward_crossing_switches_to_big_little() {
        let mut c = SwitchController::new(0.5, 0.2);
        assert_eq!(c.step(0.6), SwitchAction::Switch(LayoutKind::BigLittle));
    }

    #[test]
    fn downward_crossing_switches_back() {
        let mut c = SwitchController::new(0.5, 0.2);
        c.confirm_switch(LayoutKind::BigLittle);
        assert_eq!(c.step(0.15), SwitchAction::Switch(LayoutKind::OnlyLittle));
    }

    #[test]
    fn buffer_zone_never_switches() {
        let mut c = SwitchController::new(0.5, 0.2);
        assert_eq!(c.step(0.35), SwitchAction::None);
        // rising inside the buffer pre-warms toward Big.Little
        assert_eq!(c.step(0.4), SwitchAction::Prewarm(LayoutKind::BigLittle));
        // falling inside the buffer on the Only.Little side: no action
        assert_eq!(c.step(0.3), SwitchAction::None);
    }

    #[test]
    fn migration_classifies_by_started_work() {
        let candidates = vec![(0, false), (1, false), (2, true), (3, false)];
        let (moved, drained) = plan_migration(
            &candidates,
            1,
            LayoutKind::BigLittle,
            Some(LayoutKind::BigLittle),
            true,
        )
        .unwrap();
        assert_eq!(moved, vec![0, 1, 3]);
        assert_eq!(drained, vec![2]);
    }

    #[test]
    fn migration_with_empty_ready_list() {
        let (moved, drained) = plan_migration(
            &[],
            1,
            LayoutKind::OnlyLittle,
            Some(LayoutKind::OnlyLittle),
            true,
        )
        .unwrap();
        assert!(moved.is_empty());
        assert!(drained.is_empty());
    }

    #[test]
    fn migration_requires_prewarmed_target() {
        let err = plan_migration(&[(0, false)], 1, LayoutKind::BigLittle, None, true).unwrap_err();
        assert_eq!(
            err,
            MigrateError::NotPrewarmed {
                board: 1,
                layout: LayoutKind::BigLittle
            }
        );
        let err = plan_migration(
            &[(0, false)],
            1,
            LayoutKind::BigLittle,
            Some(LayoutKind::OnlyLittle),
            true,
        )
        .unwrap_err();
        assert!(matches!(err, MigrateError::NotPrewarmed { .. }));
    }

    proptest! {
        #[test]
        fn d_always_in_unit_interval(
            n_blocked in 0u32..100,
            extra_pr in 0u32..100,
            n_apps in 0u32..50,
            batch_factor in 1u64..31,
        ) {
            let w = SwitchWindow {
                n_blocked,
                n_pr: n_blocked + extra_pr,
                n_apps,
                n_batch: n_apps as u64 * batch_factor,
            };
            let d = compute_d_switch(&w);
            prop_assert!((0.0..=1.0).contains(&d));
        }

        #[test]
        fn random_walks_never_switch_in_the_buffer_and_alternate(
            ds in proptest::collection::vec(0.0f64..1.0, 1..200),
        ) {
            let mut c = SwitchController::new(0.5, 0.2);
            let mut last_switch: Option<LayoutKind> = None;
            for d in ds {
                let action = c.step(d);
                if let SwitchAction::Switch(layout) = action {
                    prop_assert!(d >= c.t1 || d <= c.t2, "switch inside buffer at D={d}");
                    if let Some(prev) = last_switch {
                        prop_assert_ne!(prev, layout, "consecutive switches to the same side");
                    }
                    last_switch = Some(layout);
                    c.confirm_switch(layout);
                }
            }
        }
    }
}
