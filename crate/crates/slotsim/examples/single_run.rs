//! Run one simulation end to end and inspect its artifacts.
//!
//! ```bash
//! cargo run -p slotsim --example single_run
//! ```

use slotsim::config::{LayoutKind, RunConfig, WorkloadSource};
use slotsim::engine::EventKind;
use slotsim::runner;
use slotsim::sched::Policy;
use slotsim::workload::Preset;

fn main() {
    let config = RunConfig::single_board(
        WorkloadSource::Generated {
            preset: Preset::Standard,
            n_apps: 10,
            seed: 7,
        },
        LayoutKind::BigLittle,
        Policy::VersaBigLittle,
    );
    let artifacts = runner::run(&config).expect("run");

    let report = &artifacts.report;
    println!(
        "policy {} on seed {}: {} apps completed",
        report.policy,
        report.seed,
        report.apps.len()
    );
    println!(
        "mean response {:.1} ms, p95 {:.1} ms, p99 {:.1} ms, blocked PR starts {}",
        report.mean_response_ms,
        report.p95_response_ms,
        report.p99_response_ms,
        report.blocked_pr_count
    );
    for app in &report.apps {
        println!(
            "  app {:2}: arrival {:8} us, response {:8} us",
            app.app, app.arrival_us, app.response_us
        );
    }

    println!("\nbusiest slots:");
    let mut slots = report.slots.clone();
    slots.sort_by(|a, b| b.busy_fraction.total_cmp(&a.busy_fraction));
    for s in slots.iter().take(4) {
        println!(
            "  board {} slot {}: busy {:.1}%, lut occupancy {:.2}, ff occupancy {:.2}",
            s.board,
            s.slot,
            100.0 * s.busy_fraction,
            s.lut_occupancy,
            s.ff_occupancy
        );
    }

    let prs = artifacts
        .trace
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::PrStart { .. }))
        .count();
    println!(
        "\ntrace: {} events, {} PR services, first 5 lines:",
        artifacts.trace.events.len(),
        prs
    );
    for line in artifacts.trace.to_jsonl().lines().take(5) {
        println!("  {line}");
    }
}
