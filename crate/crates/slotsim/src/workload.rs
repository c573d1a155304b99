//! Benchmark application catalog and workload sequence generation.
//!
//! Applications are linear task pipelines with a batch size. The catalog
//! carries five benchmark pipelines (task counts 3, 6, 6, 6, 9); a
//! workload is a seeded sequence of application instances drawn from the
//! catalog with preset-controlled inter-arrival gaps.

use crate::config::{hex_string, Calibration};
use crate::engine::AppId;
use crate::time::SimTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkloadError {
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
    #[error("app {app}: {message}")]
    Invalid { app: String, message: String },
}

/// Abstract resource demand, in Little-slot units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceVec {
    pub lut_units: u32,
    pub ff_units: u32,
}

impl std::ops::Add for ResourceVec {
    type Output = ResourceVec;
    fn add(self, other: ResourceVec) -> ResourceVec {
        ResourceVec {
            lut_units: self.lut_units + other.lut_units,
            ff_units: self.ff_units + other.ff_units,
        }
    }
}

/// One pipeline stage: the unit of partial reconfiguration and slot
/// execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub index: u32,
    /// Per-batch-item execution time.
    pub exec_per_item: SimTime,
    pub resource: ResourceVec,
}

/// A benchmark application: an ordered chain of tasks T1 → … → Tk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppSpec {
    pub name: String,
    pub tasks: Vec<TaskSpec>,
}

impl AppSpec {
    pub fn task_count(&self) -> u32 {
        self.tasks.len() as u32
    }
}

/// Builds the application catalog from a calibration table.
pub fn catalog(cal: &Calibration) -> Vec<AppSpec> {
    cal.apps
        .iter()
        .map(|app| AppSpec {
            name: app.name.clone(),
            tasks: app
                .tasks
                .iter()
                .enumerate()
                .map(|(i, t)| TaskSpec {
                    index: i as u32,
                    exec_per_item: SimTime::from_ms_f64(t.exec_ms),
                    resource: ResourceVec {
                        lut_units: t.lut_units,
                        ff_units: t.ff_units,
                    },
                })
                .collect(),
        })
        .collect()
}

/// Congestion presets: fixed or uniformly sampled inter-arrival gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Loose,
    Standard,
    Stress,
    Realtime,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Loose,
        Preset::Standard,
        Preset::Stress,
        Preset::Realtime,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::Loose => "loose",
            Preset::Standard => "standard",
            Preset::Stress => "stress",
            Preset::Realtime => "realtime",
        }
    }

    /// Inter-arrival gap bounds in ms (inclusive).
    pub fn gap_bounds_ms(&self) -> (u64, u64) {
        match self {
            Preset::Loose => (5000, 5000),
            Preset::Standard => (1500, 2000),
            Preset::Stress => (150, 200),
            Preset::Realtime => (50, 50),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "loose" => Ok(Preset::Loose),
            "standard" => Ok(Preset::Standard),
            "stress" => Ok(Preset::Stress),
            "realtime" => Ok(Preset::Realtime),
            other => Err(format!(
                "unknown preset `{other}` (expected loose|standard|stress|realtime)"
            )),
        }
    }
}

/// One application instance in a workload sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppInstance {
    pub id: AppId,
    /// Catalog name of the spec this instance runs.
    pub spec: String,
    pub batch: u32,
    pub arrival: SimTime,
}

/// An ordered application sequence with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    #[serde(default = "default_version")]
    pub version: u32,
    pub preset: Preset,
    pub seed: u64,
    pub apps: Vec<AppInstance>,
}

fn default_version() -> u32 {
    1
}

pub const BATCH_MIN: u32 = 5;
pub const BATCH_MAX: u32 = 30;

/// Generates a seeded application sequence for a preset.
///
/// App types are drawn uniformly from the catalog, batch sizes uniformly
/// from [5, 30], and gaps per the preset bounds; the first app arrives
/// at t = 0. The same `(preset, n_apps, seed)` always yields the same
/// workload.
pub fn generate_sequence(preset: Preset, n_apps: u32, seed: u64, cal: &Calibration) -> Workload {
    let specs = catalog(cal);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (gap_lo, gap_hi) = preset.gap_bounds_ms();
    let mut apps = Vec::with_capacity(n_apps as usize);
    let mut arrival = SimTime::ZERO;
    for id in 0..n_apps {
        if id > 0 {
            let gap_ms = if gap_lo == gap_hi {
                gap_lo
            } else {
                rng.gen_range(gap_lo..=gap_hi)
            };
            arrival += SimTime::from_ms(gap_ms);
        }
        let spec = &specs[rng.gen_range(0..specs.len())];
        let batch = rng.gen_range(BATCH_MIN..=BATCH_MAX);
        apps.push(AppInstance {
            id,
            spec: spec.name.clone(),
            batch,
            arrival,
        });
    }
    Workload {
        version: 1,
        preset,
        seed,
        apps,
    }
}

impl Workload {
    pub fn validate(&self, cal: &Calibration) -> Result<(), WorkloadError> {
        let names: Vec<&str> = cal.apps.iter().map(|a| a.name.as_str()).collect();
        let mut prev = SimTime::ZERO;
        for app in &self.apps {
            if app.batch == 0 {
                return Err(WorkloadError::Invalid {
                    app: format!("#{}", app.id),
                    message: "batch size must be at least 1".into(),
                });
            }
            if !names.contains(&app.spec.as_str()) {
                return Err(WorkloadError::Invalid {
                    app: format!("#{}", app.id),
                    message: format!("unknown spec `{}`", app.spec),
                });
            }
            if app.arrival < prev {
                return Err(WorkloadError::Invalid {
                    app: format!("#{}", app.id),
                    message: format!(
                        "arrival {} earlier than previous arrival {}",
                        app.arrival, prev
                    ),
                });
            }
            prev = app.arrival;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), WorkloadError> {
        let text = serde_json::to_string_pretty(self).expect("workload serializes");
        std::fs::write(path, text).map_err(|source| WorkloadError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path, cal: &Calibration) -> Result<Workload, WorkloadError> {
        let text = std::fs::read_to_string(path).map_err(|source| WorkloadError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let w: Workload = serde_json::from_str(&text).map_err(|source| WorkloadError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        w.validate(cal)?;
        Ok(w)
    }

    /// Stable digest used to pair reports with the workload they came from.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("workload serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex_string(&hasher.finalize())
    }
}
