//! Scheduling policies and their capability matrix.

use crate::board::PrMode;
use serde::{Deserialize, Serialize};

/// The four baselines plus the two slot-sharing configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Whole-fabric temporal multiplexing: one app at a time with a
    /// full reconfiguration between apps.
    Exclusive,
    /// Strict arrival-order allocation of Little slots, no preemption,
    /// single-core PR.
    Fcfs,
    /// FCFS plus time-slice rotation of slot ownership.
    Rr,
    /// Little-slot pipelining with preemption, but PR and scheduling
    /// share one core: every PR service defers launches.
    NimblockMode,
    /// Dual-core scheduling on 8 Little slots with preemption and task
    /// pre-loading.
    VersaOnlyLittle,
    /// The full system: adaptive Big/Little allocation, online 3-in-1
    /// bundling, dual-core scheduling, preemption in Little slots only.
    VersaBigLittle,
}

/// How a policy binds apps to slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocatorKind {
    /// One app owns the whole fabric at a time.
    WholeFabric,
    /// Strict head-of-line reservation of Little slots.
    StrictFifo,
    /// The adaptive binding/rebinding/redistribution pass.
    Adaptive,
}

impl Policy {
    pub const ALL: [Policy; 6] = [
        Policy::Exclusive,
        Policy::Fcfs,
        Policy::Rr,
        Policy::NimblockMode,
        Policy::VersaOnlyLittle,
        Policy::VersaBigLittle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Policy::Exclusive => "exclusive",
            Policy::Fcfs => "fcfs",
            Policy::Rr => "rr",
            Policy::NimblockMode => "nimblock_mode",
            Policy::VersaOnlyLittle => "versa_only_little",
            Policy::VersaBigLittle => "versa_big_little",
        }
    }

    pub fn pr_mode(&self) -> PrMode {
        match self {
            Policy::VersaOnlyLittle | Policy::VersaBigLittle => PrMode::DualCore,
            _ => PrMode::SingleCore,
        }
    }

    /// Whether the policy may bind bundleable apps to Big slots.
    pub fn uses_big(&self) -> bool {
        matches!(self, Policy::VersaBigLittle)
    }

    /// Whether a freed slot is immediately reloaded with the app's next
    /// unhosted task, ahead of demand.
    pub fn preloads(&self) -> bool {
        matches!(self, Policy::VersaOnlyLittle | Policy::VersaBigLittle)
    }

    /// Per-slot quantum preemption in Little slots.
    pub fn preempts(&self) -> bool {
        matches!(
            self,
            Policy::NimblockMode | Policy::VersaOnlyLittle | Policy::VersaBigLittle
        )
    }

    /// Whole-app time-slice rotation (round robin).
    pub fn rotates(&self) -> bool {
        matches!(self, Policy::Rr)
    }

    pub fn allocator(&self) -> AllocatorKind {
        match self {
            Policy::Exclusive => AllocatorKind::WholeFabric,
            Policy::Fcfs | Policy::Rr => AllocatorKind::StrictFifo,
            Policy::NimblockMode | Policy::VersaOnlyLittle | Policy::VersaBigLittle => {
                AllocatorKind::Adaptive
            }
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "exclusive" => Ok(Policy::Exclusive),
            "fcfs" => Ok(Policy::Fcfs),
            "rr" => Ok(Policy::Rr),
            "nimblock_mode" => Ok(Policy::NimblockMode),
            "versa_only_little" => Ok(Policy::VersaOnlyLittle),
            "versa_big_little" => Ok(Policy::VersaBigLittle),
            other => Err(format!(
                "unknown policy `{other}` (expected exclusive|fcfs|rr|nimblock_mode|versa_only_little|versa_big_little)"
            )),
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
