//! Deterministic discrete-event simulator of fine-grained
//! spatio-temporal FPGA sharing in a cluster.
//!
//! The simulated system shares each FPGA between applications through
//! partially reconfigurable slots. Two board layouts exist — 2 Big +
//! 4 Little slots, or 8 uniform Little slots — where a Big slot holds
//! twice the resources of a Little one and can host three consecutive
//! pipeline tasks bundled into a single bitstream. The hypervisor model
//! captures the two effects that dominate real sharing behaviour:
//!
//! * the configuration port is serial, so concurrent reconfiguration
//!   requests queue behind each other (PR contention);
//! * on a single scheduling core, each load also stalls task launches
//!   (execution blocking) — unless scheduling and PR are split across
//!   two cores.
//!
//! Six policies are provided: exclusive whole-fabric multiplexing,
//! FCFS, round-robin, a single-core pipelining baseline, and the
//! dual-core sharing system on both layouts. A contention score drives
//! hysteresis-based cross-board switching with live migration.
//!
//! # Quick start
//!
//! ```
//! use slotsim::config::{LayoutKind, RunConfig, WorkloadSource};
//! use slotsim::sched::Policy;
//! use slotsim::workload::Preset;
//!
//! let config = RunConfig::single_board(
//!     WorkloadSource::Generated { preset: Preset::Standard, n_apps: 4, seed: 7 },
//!     LayoutKind::BigLittle,
//!     Policy::VersaBigLittle,
//! );
//! let artifacts = slotsim::runner::run(&config).unwrap();
//! assert_eq!(artifacts.report.apps.len(), 4);
//! ```
//!
//! # Runnable examples
//!
//! ```bash
//! cargo run -p slotsim --example single_run
//! cargo run -p slotsim --example generate_workload
//! cargo run -p slotsim --example bundling_modes
//! cargo run -p slotsim --example slot_allocation
//! cargo run -p slotsim --example contention_scenario
//! cargo run -p slotsim --example policy_comparison
//! cargo run -p slotsim --example cross_board_switching
//! ```
//!
//! The same capabilities are reachable through the thin `slotsim`
//! binary (`run`, `compare`, `fig2`, `gen-workload` subcommands).

pub mod board;
pub mod config;
pub mod engine;
pub mod metrics;
pub mod migrate;
pub mod runner;
pub mod sched;
pub mod sim;
pub mod time;
pub mod workload;

pub use time::SimTime;
