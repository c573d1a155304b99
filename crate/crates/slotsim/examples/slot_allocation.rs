//! The adaptive slot allocator, step by step: Big-first binding,
//! rebinding of unstarted Little apps, and redistribution of leftover
//! Little budget.
//!
//! ```bash
//! cargo run -p slotsim --example slot_allocation
//! ```

use slotsim::sched::{allocate_slots, AllocAppInfo, AllocInputs, SchedState};
use std::collections::BTreeMap;

fn show(label: &str, state: &SchedState) {
    println!(
        "{label}: waiting {:?}, big {:?}, little {:?}, caps {:?}",
        state.c_wait, state.s_big, state.s_little, state.r
    );
}

fn main() {
    let inputs = AllocInputs {
        big_total: 2,
        little_total: 4,
        little_idle: 4,
    };

    // two 6-task bundleable apps (2 bundles each) arriving one tick apart
    let mut info: BTreeMap<u32, AllocAppInfo> = BTreeMap::new();
    info.insert(
        0,
        AllocAppInfo {
            started: false,
            can_bundle: true,
            o_big: 2,
            o_little: 4,
            unfinished: 2,
        },
    );

    let mut state = SchedState::default();
    state.c_wait = vec![0];
    show("initial", &state);

    // pass 1: app 0 takes the Big side with its optimal bundle count
    let changes = allocate_slots(&mut state, inputs, &info);
    println!("pass 1 changes: {changes:?}");
    show("after pass 1", &state);

    // pass 2: app 1 arrives; app 0's two unfinished bundles consume all
    // Big headroom, so app 1 binds Little, and the leftover budget tops
    // its cap up to its remaining task count
    info.insert(
        1,
        AllocAppInfo {
            started: false,
            can_bundle: true,
            o_big: 2,
            o_little: 3,
            unfinished: 6,
        },
    );
    info.get_mut(&0).unwrap().started = true;
    state.c_wait.push(1);
    let changes = allocate_slots(&mut state, inputs, &info);
    println!("pass 2 changes: {changes:?}");
    show("after pass 2", &state);

    // pass 3: app 0 finishes its first bundle; Big headroom frees while
    // app 1 has not started yet, so app 1 unbinds and rebinds Big
    info.get_mut(&0).unwrap().unfinished = 1;
    let changes = allocate_slots(&mut state, inputs, &info);
    println!("pass 3 changes: {changes:?}");
    show("after pass 3", &state);
}
