//! Generate seeded workload sequences for every congestion preset and
//! save one of them as JSON.
//!
//! ```bash
//! cargo run -p slotsim --example generate_workload
//! ```

use slotsim::config::Calibration;
use slotsim::workload::{generate_sequence, Preset, Workload};

fn main() {
    let cal = Calibration::default();
    for preset in Preset::ALL {
        let w = generate_sequence(preset, 8, 1, &cal);
        let last = w.apps.last().unwrap();
        println!(
            "{:9}: 8 apps, last arrival {:7.1} ms, specs {:?}",
            preset.as_str(),
            last.arrival.as_ms_f64(),
            w.apps.iter().map(|a| a.spec.as_str()).collect::<Vec<_>>()
        );
    }

    let w = generate_sequence(Preset::Standard, 20, 1, &cal);
    let path = std::env::temp_dir().join("slotsim-workload.json");
    w.save(&path).expect("save workload");
    println!("\nsaved a 20-app standard sequence to {}", path.display());

    let back = Workload::load(&path, &cal).expect("load workload");
    assert_eq!(w, back);
    println!("reloaded it; round trip is exact");
}
