use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{OutputFormat, ScenarioConfig};
use super::report::{PlotData, RunReport, ScenarioRun};
use crate::dynamics::Trajectory;
use crate::error::{NvneError, Result};
use crate::hermitian::Operator;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ScenarioConfig,
    pub report: RunReport,
}

/// Output directory: explicit flag, then the environment, then the config,
/// then `nvne-out/<id>`.
pub fn resolve_output_dir(flag: Option<&Path>, env: Option<&Path>, cfg: &ScenarioConfig) -> PathBuf {
    flag.or(env)
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.directory.clone())
        .unwrap_or_else(|| Path::new("nvne-out").join(&cfg.id))
}

fn element_label(prefix: &str, i: usize, j: usize, dim: usize) -> String {
    if dim <= 10 {
        format!("{prefix}_rho_{i}{j}")
    } else {
        format!("{prefix}_rho_{i}_{j}")
    }
}

/// `t, re_rho_ij, im_rho_ij, ... , C1..C5, Hq`, matrix elements column-major.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let dim = traj.dim();
    let mut out = String::from("t");
    for j in 0..dim {
        for i in 0..dim {
            write!(out, ",{},{}", element_label("re", i, j, dim), element_label("im", i, j, dim)).unwrap();
        }
    }
    let n_casimirs = traj.invariants.first().map_or(0, |s| s.casimirs.len());
    for n in 1..=n_casimirs {
        write!(out, ",C{n}").unwrap();
    }
    out.push_str(",Hq\n");
    for ((t, state), inv) in traj.times.iter().zip(&traj.states).zip(&traj.invariants) {
        write!(out, "{t}").unwrap();
        let m = state.matrix();
        for j in 0..dim {
            for i in 0..dim {
                write!(out, ",{},{}", m[(i, j)].re, m[(i, j)].im).unwrap();
            }
        }
        for c in &inv.casimirs {
            write!(out, ",{c}").unwrap();
        }
        writeln!(out, ",{}", inv.energy).unwrap();
    }
    out
}

pub fn plot_csv(plot: &PlotData) -> String {
    let mut out = plot.columns.join(",");
    out.push('\n');
    for row in &plot.rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| NvneError::Io(format!("{}: {e}", path.display())))
}

/// Writes the requested formats into `dir` and returns the paths written.
pub fn emit_outputs(run: &ScenarioRun, cfg: &ScenarioConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| NvneError::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    if cfg.output.formats.contains(&OutputFormat::Csv) {
        if let Some(traj) = &run.trajectory {
            let path = dir.join(TRAJECTORY_FILE);
            write(&path, &trajectory_csv(traj))?;
            written.push(path);
        }
        if let Some(plot) = &run.plot {
            let path = dir.join(format!("{}.csv", plot.name));
            write(&path, &plot_csv(plot))?;
            written.push(path);
        }
    }
    if cfg.output.formats.contains(&OutputFormat::Json) {
        let summary = Summary {
            config: cfg.clone(),
            report: run.report.clone(),
        };
        let path = dir.join(SUMMARY_FILE);
        let text = serde_json::to_string_pretty(&summary).map_err(|e| NvneError::Io(e.to_string()))?;
        write(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}
