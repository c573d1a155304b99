//! The built-in two-app contention scenario in all three pipelining
//! modes: single-core scheduling (launches stall behind PR), dual-core
//! on uniform Little slots (launches never stall), and the full
//! Big.Little system (the first app bundles into a Big slot and stops
//! contending altogether).
//!
//! ```bash
//! cargo run -p slotsim --example contention_scenario
//! ```

use slotsim::engine::EventKind;
use slotsim::runner::fig2;
use slotsim::sched::Policy;

fn main() {
    for mode in [
        Policy::NimblockMode,
        Policy::VersaOnlyLittle,
        Policy::VersaBigLittle,
    ] {
        let artifacts = fig2(mode).expect("scenario");
        println!("== {mode} ==");
        for check in &artifacts.checks {
            println!(
                "  [{}] {} {}",
                if check.pass { "ok" } else { "FAIL" },
                check.name,
                check.detail
            );
        }
        println!("  {}", artifacts.summary);

        // completion times tell the whole story
        for ev in &artifacts.trace.events {
            if let EventKind::AppComplete { app } = ev.kind {
                println!("  app {} completes at {}", app + 1, ev.t);
            }
        }
        println!();
    }
}
