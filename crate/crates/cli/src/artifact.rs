//! Run directory layout and artifact writers.
//!
//! Every accepted run yields: the effective config, a trajectory table, a
//! schedule document, certificate reports (JSON and flat CSV), a summary
//! document, and plots. Reruns with identical configs produce byte-
//! identical numeric artifacts: floats print in Rust's shortest
//! round-trip form, structures serialize with fixed field order, and no
//! timestamps enter any file.

use anyhow::{Context, Result};
use mobctrl_core::certificates::CertificateReport;
use mobctrl_core::control::ControlSchedule;
use mobctrl_core::state::Trajectory;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub struct RunArtifact {
    dir: PathBuf,
}

/// Trajectory tables keep at most this many rows (uniform row stride,
/// final state always kept).
const MAX_TRAJECTORY_ROWS: usize = 512;

impl RunArtifact {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir.join("plots"))
            .with_context(|| format!("cannot create run directory {}", dir.display()))?;
        Ok(RunArtifact { dir: dir.to_path_buf() })
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn write_config(&self, effective_toml: &str) -> Result<()> {
        self.write("config.toml", effective_toml)
    }

    /// Fixed column order: `t, y_1, …, y_n`.
    pub fn write_trajectory(&self, traj: &Trajectory) -> Result<()> {
        let mut csv = String::from("t");
        for i in 1..=traj.grid.n {
            let _ = write!(csv, ",y_{i}");
        }
        csv.push('\n');
        let stride = traj.states.len().div_ceil(MAX_TRAJECTORY_ROWS).max(1);
        let last = traj.states.len() - 1;
        for (k, state) in traj.states.iter().enumerate() {
            if k % stride != 0 && k != last {
                continue;
            }
            let _ = write!(csv, "{}", state.time);
            for v in &state.values {
                let _ = write!(csv, ",{v}");
            }
            csv.push('\n');
        }
        self.write("trajectory.csv", &csv)
    }

    /// Schedule document, optionally extended with a certificate block
    /// (per-stage bounds, thresholds, measured norms).
    pub fn write_schedule(
        &self,
        schedule: &ControlSchedule,
        certificate_block: Option<serde_json::Value>,
    ) -> Result<()> {
        let doc = schedule
            .to_document()
            .map_err(|e| anyhow::anyhow!("schedule serialization: {e}"))?;
        let text = match certificate_block {
            None => doc,
            Some(block) => {
                let mut value: serde_json::Value = serde_json::from_str(&doc)?;
                value
                    .as_object_mut()
                    .expect("schedule document is an object")
                    .insert("certificate".to_string(), block);
                serde_json::to_string_pretty(&value)?
            }
        };
        self.write("schedule.json", &text)
    }

    pub fn write_certificates(&self, reports: &[CertificateReport]) -> Result<()> {
        self.write("certificates.json", &serde_json::to_string_pretty(reports)?)?;
        let mut csv = String::from("name,margin,bound,verdict\n");
        for r in reports {
            csv.push_str(&r.csv_row());
            csv.push('\n');
        }
        self.write("certificates.csv", &csv)
    }

    pub fn write_summary<T: Serialize>(&self, summary: &T) -> Result<()> {
        self.write("summary.json", &serde_json::to_string_pretty(summary)?)
    }

    pub fn write_plot(&self, name: &str, svg: &str) -> Result<()> {
        let path = self.dir.join("plots").join(format!("{name}.svg"));
        std::fs::write(&path, svg)
            .with_context(|| format!("cannot write {}", path.display()))
    }

    /// Failure marker retaining whatever partial artifacts exist.
    pub fn write_failure(&self, stage: &str, error: &str) -> Result<()> {
        let body = serde_json::json!({ "failed_stage": stage, "error": error });
        self.write("failure.json", &serde_json::to_string_pretty(&body)?)
    }
}
