//! The 3-in-1 bundling decision: serial vs internally pipelined
//! execution of three consecutive tasks in a Big slot.
//!
//! A pipelined bundle finishes a batch in t_max * (N + 2); a serial
//! bundle takes (t1 + t2 + t3) * N. Serial wins only when one member
//! dominates the triple and the batch is short.
//!
//! ```bash
//! cargo run -p slotsim --example bundling_modes
//! ```

use slotsim::sched::{bundle_3in1, bundle_modeled_time, BundleMode};
use slotsim::time::SimTime;

fn main() {
    let triples: [(u64, u64, u64); 4] = [(10, 10, 10), (1, 1, 28), (5, 20, 8), (2, 3, 25)];
    print!("{:>12}", "batch N");
    for (a, b, c) in triples {
        print!("{:>16}", format!("({a},{b},{c}) ms"));
    }
    println!();
    for n in [1u32, 2, 3, 5, 10, 30] {
        print!("{:>12}", n);
        for (a, b, c) in triples {
            let (a, b, c) = (
                SimTime::from_ms(a),
                SimTime::from_ms(b),
                SimTime::from_ms(c),
            );
            let mode = bundle_3in1(a, b, c, n);
            let time = bundle_modeled_time(a, b, c, n, mode) / 1000;
            let tag = match mode {
                BundleMode::Serial => "serial",
                BundleMode::Parallel => "pipe",
            };
            print!("{:>16}", format!("{tag} {time}ms"));
        }
        println!();
    }
    println!();
    println!("a dominant member pays the pipeline fill twice over, so short");
    println!("batches with one heavy task run serially; everything else pipelines");
}
