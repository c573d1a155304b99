//! Thin command-line front end over the library runner.

use clap::{Parser, Subcommand};
use serde_json::json;
use slotsim::config::{Calibration, RunConfig, WorkloadSource};
use slotsim::runner;
use slotsim::sched::Policy;
use slotsim::workload::{generate_sequence, Preset};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "slotsim", about = "FPGA slot-sharing cluster simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation from a JSON config and write its artifacts.
    Run {
        /// Path to the run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the policy from the config.
        #[arg(long)]
        policy: Option<Policy>,
        /// Override the generated-workload seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Write trace/report/D-series under this directory, overriding
        /// the config's output paths.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Sweep presets × policies × seeds and emit a comparison CSV.
    Compare {
        /// Comma-separated presets (loose,standard,stress,realtime).
        #[arg(long, value_delimiter = ',', default_value = "standard")]
        presets: Vec<Preset>,
        /// Comma-separated policies, or "all".
        #[arg(long, default_value = "all")]
        policies: String,
        /// Inclusive seed range, e.g. 0..9, or a comma-separated list.
        #[arg(long, default_value = "0..9")]
        seeds: String,
        /// Applications per generated sequence.
        #[arg(long, default_value_t = 20)]
        apps: u32,
        /// Optional calibration override file.
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in two-app contention scenario and print the
    /// ordering checks.
    Fig2 {
        /// nimblock_mode, versa_only_little, or versa_big_little.
        #[arg(long)]
        mode: Policy,
        /// Optional path for the annotated trace (JSONL).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a workload sequence and save it as JSON.
    GenWorkload {
        #[arg(long)]
        preset: Preset,
        #[arg(long, default_value_t = 20)]
        apps: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Optional calibration override file.
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>, String> {
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: u64 = lo
            .trim()
            .parse()
            .map_err(|e| format!("bad seed range: {e}"))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .map_err(|e| format!("bad seed range: {e}"))?;
        if hi < lo {
            return Err(format!("empty seed range {spec}"));
        }
        Ok((lo..=hi).collect())
    } else {
        spec.split(',')
            .map(|s| s.trim().parse().map_err(|e| format!("bad seed: {e}")))
            .collect()
    }
}

fn parse_policies(spec: &str) -> Result<Vec<Policy>, String> {
    if spec == "all" {
        return Ok(Policy::ALL.to_vec());
    }
    spec.split(',').map(|s| s.trim().parse()).collect()
}

fn load_calibration(path: &Option<PathBuf>) -> Result<Calibration, String> {
    match path {
        Some(p) => Calibration::load(p).map_err(|e| e.to_string()),
        None => Ok(Calibration::default()),
    }
}

fn real_main() -> Result<(), String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            policy,
            seed,
            out_dir,
        } => {
            let mut cfg = RunConfig::load(&config).map_err(|e| e.to_string())?;
            if let Some(p) = policy {
                cfg.policy = p;
            }
            if let Some(s) = seed {
                if let WorkloadSource::Generated { seed, .. } = &mut cfg.workload {
                    *seed = s;
                }
            }
            if let Some(dir) = out_dir {
                cfg.output.trace_path = Some(dir.join("trace.jsonl"));
                cfg.output.report_path = Some(dir.join("report.json"));
                cfg.output.dseries_path = Some(dir.join("dseries.csv"));
            }
            cfg.validate().map_err(|e| e.to_string())?;
            let artifacts = runner::run(&cfg).map_err(|e| e.to_string())?;
            runner::write_artifacts(&artifacts, &cfg).map_err(|e| e.to_string())?;
            println!(
                "{} apps, mean response {:.3} ms, p95 {:.3} ms, p99 {:.3} ms, {} migrations",
                artifacts.report.apps.len(),
                artifacts.report.mean_response_ms,
                artifacts.report.p95_response_ms,
                artifacts.report.p99_response_ms,
                artifacts.report.migrations.len()
            );
            Ok(())
        }
        Command::Compare {
            presets,
            policies,
            seeds,
            apps,
            calibration,
            out,
        } => {
            let policies = parse_policies(&policies)?;
            let seeds = parse_seeds(&seeds)?;
            let cal = load_calibration(&calibration)?;
            let rows = runner::compare(&cal, &presets, &policies, &seeds, apps)
                .map_err(|e| e.to_string())?;
            let csv = runner::compare_csv(&rows);
            match out {
                Some(path) => {
                    std::fs::write(&path, csv).map_err(|e| e.to_string())?;
                    println!("{} rows written to {}", rows.len(), path.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Fig2 { mode, out } => {
            if !matches!(
                mode,
                Policy::NimblockMode | Policy::VersaOnlyLittle | Policy::VersaBigLittle
            ) {
                return Err(format!("fig2 supports the pipelining modes, not {mode}"));
            }
            let artifacts = runner::fig2(mode).map_err(|e| e.to_string())?;
            for check in &artifacts.checks {
                println!(
                    "[{}] {} {}",
                    if check.pass { "ok" } else { "FAIL" },
                    check.name,
                    check.detail
                );
            }
            println!("{}", artifacts.summary);
            if let Some(path) = out {
                std::fs::write(&path, artifacts.trace.to_jsonl()).map_err(|e| e.to_string())?;
            }
            if artifacts.checks.iter().all(|c| c.pass) {
                Ok(())
            } else {
                Err("scenario checks failed".into())
            }
        }
        Command::GenWorkload {
            preset,
            apps,
            seed,
            out,
            calibration,
        } => {
            let cal = load_calibration(&calibration)?;
            let w = generate_sequence(preset, apps, seed, &cal);
            w.save(&out).map_err(|e| e.to_string())?;
            println!("{} apps written to {}", w.apps.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("{}", json!({ "error": message }));
            ExitCode::FAILURE
        }
    }
}
