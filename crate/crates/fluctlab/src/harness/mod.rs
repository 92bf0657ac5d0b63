//! Experiment orchestration: configuration, seed derivation, experiment
//! drivers, output emission and the process exit-code contract
//! (0 = all checks passed, 2 = numerical checks failed, 3 = invalid config).

pub mod config;
pub mod experiments;
pub mod output;
pub mod seeds;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::{run_experiment, ExperimentReport};
pub use output::{OutputWriter, RunManifest};

use crate::error::Result;
use std::path::Path;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_CONFIG_INVALID: i32 = 3;

/// Run one experiment end-to-end: compute, emit CSVs + plot script, write the
/// manifest. Returns the manifest.
pub fn run_to_directory(cfg: &ExperimentConfig, dir: &Path) -> Result<RunManifest> {
    let started = std::time::Instant::now();
    let run_id = cfg.run_id();
    let mut out = OutputWriter::new(dir, &run_id)?;
    let report = run_experiment(cfg, &mut out)?;
    out.emit_plot_script()?;
    let manifest = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment.as_str().to_string(),
        run_id,
        master_seed: cfg.master_seed,
        workers: cfg.workers,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        stage_seeds: report.stage_seeds.clone(),
        config: serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null),
        files: out.files.clone(),
        metrics: report.metrics.clone(),
        pass: report.failures.is_empty(),
        failures: report.failures.clone(),
    };
    manifest.write(dir)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_stable() {
        assert_eq!(EXIT_OK, 0);
        assert_eq!(EXIT_CHECK_FAILED, 2);
        assert_eq!(EXIT_CONFIG_INVALID, 3);
    }
}
