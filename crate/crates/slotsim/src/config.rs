//! Run configuration and calibration.
//!
//! A run is described by a single versioned JSON document: workload
//! source, cluster inventory, policy, calibration, and switching
//! parameters. The calibration block carries everything that real
//! hardware would dictate (per-item task times, abstract resource
//! vectors, PR service time, preemption quantum) with documented
//! defaults; all of it can be overridden from a file.

use crate::sched::Policy;
use crate::time::SimTime;
use crate::workload::Preset;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Per-task calibration: execution time per batch item and the abstract
/// resource demand in Little-slot units (capacity 1000 per component).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCalibration {
    pub exec_ms: f64,
    pub lut_units: u32,
    pub ff_units: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppCalibration {
    pub name: String,
    pub tasks: Vec<TaskCalibration>,
}

/// Everything hardware-dependent, in one place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Calibration {
    /// Partial-reconfiguration service time for a Little slot, ms.
    /// A Big slot takes twice this; a full-fabric load takes eight times.
    pub little_pr_ms: f64,
    /// Buffer allocation and launch cost added to every batch item, ms.
    pub launch_overhead_ms: f64,
    /// Continuous-occupancy quantum before a slot may be preempted, ms.
    pub preempt_quantum_ms: f64,
    /// Round-robin whole-app time slice, ms. Longer than the slot
    /// quantum because rotating an app out re-loads every slot it held.
    pub rr_slice_ms: f64,
    /// Knee tolerance for the optimal-slot search: the smallest slot
    /// count whose makespan is within (1 + epsilon) of the best.
    pub epsilon: f64,
    /// Little-slot capacity per resource component; Big is twice this.
    pub little_capacity: u32,
    /// The benchmark application catalog.
    pub apps: Vec<AppCalibration>,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            little_pr_ms: 30.0,
            launch_overhead_ms: 0.1,
            preempt_quantum_ms: 500.0,
            rr_slice_ms: 2000.0,
            epsilon: 0.05,
            little_capacity: 1000,
            apps: default_catalog(),
        }
    }
}

/// Default per-task timings and resource demands.
///
/// The pipeline shapes (task counts 3/6/6/6/9) are fixed; the numbers
/// are a representative desk-scale calibration. Per-item times sit in
/// the tens of milliseconds so that a standard arrival stream keeps
/// several apps resident at once, and consecutive task triples are
/// balanced (partitioning splits work evenly), which keeps a bundle's
/// internal pipeline close to its members' natural pace. Resource
/// demands span 40–95% of a Little slot with every consecutive triple
/// fitting the doubled Big-slot capacity.
fn default_catalog() -> Vec<AppCalibration> {
    fn app(name: &str, tasks: &[(f64, u32, u32)]) -> AppCalibration {
        AppCalibration {
            name: name.to_string(),
            tasks: tasks
                .iter()
                .map(|&(exec_ms, lut_units, ff_units)| TaskCalibration {
                    exec_ms,
                    lut_units,
                    ff_units,
                })
                .collect(),
        }
    }
    vec![
        app(
            "3dr",
            &[(99.7, 620, 580), (112.1, 680, 640), (104.5, 650, 600)],
        ),
        app(
            "lenet",
            &[
                (79.6, 540, 500),
                (90.4, 580, 540),
                (84.2, 560, 520),
                (119.9, 660, 620),
                (129.4, 700, 650),
                (124.7, 680, 630),
            ],
        ),
        app(
            "ic",
            &[
                (137.2, 700, 660),
                (149.6, 740, 690),
                (144.8, 720, 670),
                (169.7, 780, 720),
                (183.9, 820, 760),
                (174.5, 800, 740),
            ],
        ),
        app(
            "an",
            &[
                (211.9, 900, 830),
                (229.2, 950, 880),
                (219.6, 920, 850),
                (165.1, 760, 700),
                (179.4, 800, 740),
                (171.4, 780, 720),
            ],
        ),
        app(
            "of",
            &[
                (90.4, 560, 520),
                (99.7, 600, 560),
                (95.0, 580, 540),
                (129.4, 680, 630),
                (141.9, 720, 670),
                (134.0, 700, 650),
                (109.1, 620, 580),
                (119.9, 650, 610),
                (115.3, 640, 590),
            ],
        ),
    ]
}

impl Calibration {
    pub fn little_pr(&self) -> SimTime {
        SimTime::from_ms_f64(self.little_pr_ms)
    }

    pub fn launch_overhead(&self) -> SimTime {
        SimTime::from_ms_f64(self.launch_overhead_ms)
    }

    pub fn preempt_quantum(&self) -> SimTime {
        SimTime::from_ms_f64(self.preempt_quantum_ms)
    }

    pub fn rr_slice(&self) -> SimTime {
        SimTime::from_ms_f64(self.rr_slice_ms)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cal: Calibration =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.little_pr_ms <= 0.0 {
            return Err(invalid("calibration.little_pr_ms", "must be positive"));
        }
        if self.launch_overhead_ms < 0.0 {
            return Err(invalid(
                "calibration.launch_overhead_ms",
                "must be non-negative",
            ));
        }
        if self.preempt_quantum_ms <= 0.0 {
            return Err(invalid(
                "calibration.preempt_quantum_ms",
                "must be positive",
            ));
        }
        if self.rr_slice_ms <= 0.0 {
            return Err(invalid("calibration.rr_slice_ms", "must be positive"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(invalid("calibration.epsilon", "must be in [0, 1)"));
        }
        if self.little_capacity == 0 {
            return Err(invalid("calibration.little_capacity", "must be positive"));
        }
        for app in &self.apps {
            if app.tasks.is_empty() {
                return Err(invalid(
                    &format!("calibration.apps.{}", app.name),
                    "has no tasks",
                ));
            }
            for (i, t) in app.tasks.iter().enumerate() {
                if t.exec_ms <= 0.0 {
                    return Err(invalid(
                        &format!("calibration.apps.{}.tasks[{i}].exec_ms", app.name),
                        "must be positive",
                    ));
                }
                if t.lut_units == 0
                    || t.ff_units == 0
                    || t.lut_units > self.little_capacity
                    || t.ff_units > self.little_capacity
                {
                    return Err(invalid(
                        &format!("calibration.apps.{}.tasks[{i}]", app.name),
                        "resource units must be in (0, little_capacity]",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Where the applications come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadSource {
    Generated {
        preset: Preset,
        n_apps: u32,
        seed: u64,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    BigLittle,
    OnlyLittle,
}

impl LayoutKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LayoutKind::BigLittle => "big_little",
            LayoutKind::OnlyLittle => "only_little",
        }
    }
}

/// One FPGA in the cluster inventory. Slot counts default to the two
/// canonical layouts (2 Big + 4 Little, or 8 Little) but any mix is
/// accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardConfig {
    pub layout: LayoutKind,
    #[serde(default)]
    pub big_slots: Option<u32>,
    #[serde(default)]
    pub little_slots: Option<u32>,
}

impl BoardConfig {
    pub fn new(layout: LayoutKind) -> Self {
        BoardConfig {
            layout,
            big_slots: None,
            little_slots: None,
        }
    }

    pub fn big_count(&self) -> u32 {
        self.big_slots.unwrap_or(match self.layout {
            LayoutKind::BigLittle => 2,
            LayoutKind::OnlyLittle => 0,
        })
    }

    pub fn little_count(&self) -> u32 {
        self.little_slots.unwrap_or(match self.layout {
            LayoutKind::BigLittle => 4,
            LayoutKind::OnlyLittle => 8,
        })
    }
}

/// Cross-board switching parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwitchConfig {
    pub enabled: bool,
    /// Upper threshold: crossing it on an Only.Little board triggers the
    /// switch to Big.Little.
    pub t1: f64,
    /// Lower threshold: falling to it on a Big.Little board triggers the
    /// switch back. Must be strictly below `t1`.
    pub t2: f64,
    /// Candidate-queue updates between metric recomputations.
    pub window_updates: u32,
    /// Fixed per-switch migration overhead, ms.
    pub migration_overhead_ms: f64,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        SwitchConfig {
            enabled: false,
            t1: 0.5,
            t2: 0.2,
            window_updates: 4,
            migration_overhead_ms: 1.13,
        }
    }
}

impl SwitchConfig {
    pub fn migration_overhead(&self) -> SimTime {
        SimTime::from_ms_f64(self.migration_overhead_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub trace_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
    pub dseries_path: Option<PathBuf>,
}

/// The complete description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub workload: WorkloadSource,
    pub boards: Vec<BoardConfig>,
    pub policy: Policy,
    #[serde(default)]
    pub calibration: Calibration,
    #[serde(default)]
    pub switching: SwitchConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_version() -> u32 {
    1
}

impl RunConfig {
    /// A single-board run with default calibration.
    pub fn single_board(workload: WorkloadSource, layout: LayoutKind, policy: Policy) -> Self {
        RunConfig {
            version: 1,
            workload,
            boards: vec![BoardConfig::new(layout)],
            policy,
            calibration: Calibration::default(),
            switching: SwitchConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != 1 {
            return Err(invalid("version", "only version 1 is supported"));
        }
        if self.boards.is_empty() {
            return Err(invalid("boards", "at least one board is required"));
        }
        if self.switching.enabled {
            if self.boards.len() < 2 {
                return Err(invalid(
                    "boards",
                    "switching requires at least one spare board",
                ));
            }
            if self.switching.t2 >= self.switching.t1 {
                return Err(invalid(
                    "switching.t2",
                    format!(
                        "must be strictly below t1 ({} >= {})",
                        self.switching.t2, self.switching.t1
                    ),
                ));
            }
            if !(self.switching.t1 > 0.0 && self.switching.t1 < 1.0)
                || !(self.switching.t2 > 0.0 && self.switching.t2 < 1.0)
            {
                return Err(invalid("switching", "thresholds must lie in (0, 1)"));
            }
            if self.switching.window_updates == 0 {
                return Err(invalid("switching.window_updates", "must be positive"));
            }
        }
        if let WorkloadSource::Generated { n_apps, .. } = &self.workload {
            if *n_apps == 0 {
                return Err(invalid("workload.n_apps", "must be at least 1"));
            }
        }
        self.calibration.validate()?;
        Ok(())
    }

    /// Stable digest of the canonical JSON form; stamped into every
    /// output file so mismatched artifacts can be rejected.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex_string(&hasher.finalize())
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config() -> RunConfig {
        RunConfig::single_board(
            WorkloadSource::Generated {
                preset: Preset::Standard,
                n_apps: 5,
                seed: 1,
            },
            LayoutKind::OnlyLittle,
            Policy::VersaOnlyLittle,
        )
    }

    #[test]
    fn default_calibration_is_valid() {
        Calibration::default().validate().unwrap();
    }

    #[test]
    fn thresholds_must_leave_a_buffer_zone() {
        let mut cfg = base_config();
        cfg.boards.push(BoardConfig::new(LayoutKind::BigLittle));
        cfg.switching.enabled = true;
        cfg.switching.t1 = 0.2;
        cfg.switching.t2 = 0.2;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("switching.t2"), "{err}");
    }

    #[test]
    fn switching_requires_a_spare() {
        let mut cfg = base_config();
        cfg.switching.enabled = true;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_round_trips_and_digest_is_stable() {
        let cfg = base_config();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.digest(), back.digest());
    }

    #[test]
    fn layout_defaults_match_canonical_counts() {
        let bl = BoardConfig::new(LayoutKind::BigLittle);
        assert_eq!((bl.big_count(), bl.little_count()), (2, 4));
        let ol = BoardConfig::new(LayoutKind::OnlyLittle);
        assert_eq!((ol.big_count(), ol.little_count()), (0, 8));
    }
}
