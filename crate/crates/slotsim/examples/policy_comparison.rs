//! Compare all six policies across congestion presets, normalized to
//! the exclusive whole-fabric baseline.
//!
//! ```bash
//! cargo run --release -p slotsim --example policy_comparison
//! ```

use slotsim::config::Calibration;
use slotsim::runner::{compare, compare_csv};
use slotsim::sched::Policy;
use slotsim::workload::Preset;
use std::collections::BTreeMap;

fn main() {
    let cal = Calibration::default();
    let seeds: Vec<u64> = (0..5).collect();
    let presets = [Preset::Loose, Preset::Standard, Preset::Stress];
    let rows = compare(&cal, &presets, &Policy::ALL, &seeds, 20).expect("sweep");

    // seed-averaged means per (preset, policy)
    let mut agg: BTreeMap<(Preset, Policy), Vec<f64>> = BTreeMap::new();
    for r in &rows {
        agg.entry((r.preset, r.policy)).or_default().push(r.mean_ms);
    }
    println!(
        "{:10} {:>14} {:>14} {:>14} {:>14} {:>14} {:>14}",
        "preset", "exclusive", "fcfs", "rr", "nimblock", "only-little", "big-little"
    );
    for preset in presets {
        print!("{:10}", preset.as_str());
        for policy in Policy::ALL {
            let means = &agg[&(preset, policy)];
            let mean = means.iter().sum::<f64>() / means.len() as f64;
            print!("{:>14}", format!("{mean:.0} ms"));
        }
        println!();
    }

    let csv = compare_csv(&rows);
    let path = std::env::temp_dir().join("slotsim-comparison.csv");
    std::fs::write(&path, &csv).expect("write csv");
    println!(
        "\nfull per-seed table ({} rows) written to {}",
        rows.len(),
        path.display()
    );
}
