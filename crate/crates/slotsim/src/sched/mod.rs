//! Hypervisor scheduling logic: slot allocation, the per-tick
//! scheduling pass, 3-in-1 bundling, and the policy matrix.

mod alloc;
mod pipeline;
mod policy;

pub use alloc::{
    allocate_slots, fcfs_allocate, AllocAppInfo, AllocChange, AllocInputs, SchedState,
};
pub use pipeline::{
    big_stages, bundle_3in1, bundle_modeled_time, can_bundle, little_stages, optimal_slots,
    pipeline_makespan, BundleMode, StageModel, StagePlan,
};
pub use policy::{AllocatorKind, Policy};
