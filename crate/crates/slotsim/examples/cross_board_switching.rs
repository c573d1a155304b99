//! Hysteresis-driven cross-board switching on a long workload: the
//! contention score crosses the upper threshold, the waiting apps
//! migrate to a pre-warmed Big.Little board while started apps drain in
//! place, and the run is compared against a board pinned to
//! Only.Little.
//!
//! ```bash
//! cargo run --release -p slotsim --example cross_board_switching
//! ```

use slotsim::config::{BoardConfig, LayoutKind, RunConfig, SwitchConfig, WorkloadSource};
use slotsim::runner::{self, d_series_csv};
use slotsim::sched::Policy;
use slotsim::workload::Preset;

fn main() {
    let seed = 100u64;
    let workload = WorkloadSource::Generated {
        preset: Preset::Standard,
        n_apps: 80,
        seed,
    };

    let pinned_cfg = RunConfig::single_board(
        workload.clone(),
        LayoutKind::OnlyLittle,
        Policy::VersaBigLittle,
    );
    let pinned = runner::run(&pinned_cfg).expect("pinned run");

    let mut switching_cfg = pinned_cfg.clone();
    switching_cfg
        .boards
        .push(BoardConfig::new(LayoutKind::BigLittle));
    switching_cfg.switching = SwitchConfig {
        enabled: true,
        t1: 0.002,
        t2: 0.0005,
        window_updates: 4,
        migration_overhead_ms: 1.13,
    };
    let switching = runner::run(&switching_cfg).expect("switching run");

    println!(
        "pinned Only.Little : mean {:.0} ms, p99 {:.0} ms",
        pinned.report.mean_response_ms, pinned.report.p99_response_ms
    );
    println!(
        "with switching     : mean {:.0} ms, p99 {:.0} ms",
        switching.report.mean_response_ms, switching.report.p99_response_ms
    );
    println!(
        "reduction          : {:.2}x with {} switches, {:.2} ms total migration overhead",
        pinned.report.mean_response_ms / switching.report.mean_response_ms,
        switching.report.migrations.len(),
        switching
            .report
            .migrations
            .iter()
            .map(|m| m.overhead.as_ms_f64())
            .sum::<f64>()
    );
    for m in &switching.report.migrations {
        println!(
            "  switch at {:9}: board {} -> board {}, moved {:2} apps, drained {:2}",
            m.time.to_string(),
            m.from,
            m.to,
            m.moved_apps.len(),
            m.drained_apps.len()
        );
    }

    let path = std::env::temp_dir().join("slotsim-dseries.csv");
    std::fs::write(&path, d_series_csv(&switching.report)).expect("write csv");
    println!("\nplot-ready D series written to {}", path.display());
    println!("first windows:");
    for line in d_series_csv(&switching.report).lines().take(8) {
        println!("  {line}");
    }
}
