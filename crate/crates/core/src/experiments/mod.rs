//! Seeded, parallel Monte Carlo experiments comparing simulated clustering
//! behavior with the closed-form bounds.
//!
//! Every replication draws from its own random stream, addressed by
//! `(seed, experiment kind, grid point, replication)`. Replications are
//! partitioned statically over worker threads and merged by index, so output
//! files are byte-identical for any worker count.

mod config;
mod davis_kahan;
mod misclassification;
mod opnorm;
mod output;
mod runner;
mod subgaussian;

use std::path::Path;

pub use config::{apply_override, parse_json, parse_with_overrides, ExperimentConfig, GridPoint, MFromN};
pub use davis_kahan::{perturbation_terms, run_davis_kahan_check, DavisKahanRow, PerturbationTerms, GAP_TOL};
pub use misclassification::{run_misclassification, run_recovery, SummaryRow};
pub use opnorm::{
    calibrate, run_opnorm, Calibration, NormTailRow, OpNormRow, CALIBRATION_MIN_REPS, CALIBRATION_SAFETY,
};
pub use output::{sidecar_path, to_table, write_outputs, Tabular};
pub use runner::{effective_workers, mean_stderr, order_statistic, run_reps, RepResults};
pub use subgaussian::{probe_directions, run_subgaussian_check, DirectionKind, SubgaussianRow};

use crate::error::Result;
use crate::format::{to_json, write_atomic};
use crate::sampler::RngStream;

/// Random stream of one replication.
pub(crate) fn stream_for(seed: u64, tag: u64, grid_index: usize, rep: usize) -> RngStream {
    RngStream::for_path(seed, &[tag, grid_index as u64, rep as u64])
}

/// The experiment kinds exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Misclassification,
    Recovery,
    OpNorm,
    Subgaussian,
    DavisKahan,
    Calibrate,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Misclassification => "misclassification",
            Experiment::Recovery => "recovery",
            Experiment::OpNorm => "opnorm",
            Experiment::Subgaussian => "subgaussian",
            Experiment::DavisKahan => "davis-kahan",
            Experiment::Calibrate => "calibrate",
        }
    }

    /// Runs the experiment and writes its CSV and sidecar to `output`. For
    /// calibration the CSV holds the operator-norm rows, and the calibrated
    /// constants are written to the sidecar and returned as JSON.
    pub fn run_to(self, cfg: &ExperimentConfig, output: &Path) -> Result<Option<String>> {
        let kind = self.name();
        match self {
            Experiment::Misclassification => {
                let rows = run_misclassification(cfg)?;
                write_outputs(
                    output,
                    kind,
                    cfg,
                    &to_table(&rows),
                    failures(rows.iter().map(|r| r.failed_reps)),
                )?;
            }
            Experiment::Recovery => {
                let rows = run_recovery(cfg)?;
                write_outputs(
                    output,
                    kind,
                    cfg,
                    &to_table(&rows),
                    failures(rows.iter().map(|r| r.failed_reps)),
                )?;
            }
            Experiment::OpNorm => {
                let rows = run_opnorm(cfg)?;
                write_outputs(
                    output,
                    kind,
                    cfg,
                    &to_table(&rows),
                    failures(rows.iter().map(|r| r.failed_reps)),
                )?;
            }
            Experiment::Subgaussian => {
                let rows = run_subgaussian_check(cfg)?;
                let extra = serde_json::json!({ "all_pass": rows.iter().all(|r| r.pass) });
                write_outputs(output, kind, cfg, &to_table(&rows), extra)?;
            }
            Experiment::DavisKahan => {
                let rows = run_davis_kahan_check(cfg)?;
                let extra = serde_json::json!({
                    "reps_checked": rows.len(),
                    "all_hold": rows.iter().all(|r| r.holds),
                    "all_gaps_ok": rows.iter().all(|r| r.gap_ok),
                });
                write_outputs(output, kind, cfg, &to_table(&rows), extra)?;
            }
            Experiment::Calibrate => {
                let cal = calibrate(cfg)?;
                let extra = serde_json::json!({
                    "constants": cal.constants,
                    "max_c_hat": cal.max_c_hat,
                    "safety_factor": cal.safety_factor,
                    "norm_tail": cal.norm_tail,
                });
                write_outputs(output, kind, cfg, &to_table(&cal.opnorm), extra)?;
                return Ok(Some(to_json(&cal.constants)?));
            }
        }
        Ok(None)
    }
}

fn failures(counts: impl Iterator<Item = usize>) -> serde_json::Value {
    serde_json::json!({ "failed_reps": counts.sum::<usize>() })
}

/// Writes `contents` atomically; re-exported for callers that produce
/// their own files alongside experiment output.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    write_atomic(path, contents.as_bytes())
}
