//! Seeded experiment driver, statistics, CSV/SVG output and the acceptance checks.

pub mod check;
mod config;
mod emit;
mod runner;
mod stats;
mod sweep;

pub use config::{
    Algorithm, AgentSpec, EnvKind, EnvSpec, ExperimentKind, RunConfig, ValueFnKind, OUT_DIR_ENV,
};
pub use emit::{column_band, emit_group, format_float, read_csv, render_svg, write_csv, CSV_HEADER};
pub use runner::{build_environment, run_experiment, run_seed, RunGroup, RunMetrics, SignAgreement, StepRecord};
pub use stats::{confidence_interval, mean_present, rolling_mean_sparse, rolling_stats, t_critical, ConfidenceBand};
pub use sweep::{parse_grid, run_sweep, SweepPoint};

use std::path::PathBuf;

use crate::error::Result;

/// Runs an experiment and writes every group's CSV and plots to the
/// configured output directory.
pub fn run_and_emit(cfg: &RunConfig) -> Result<(Vec<RunGroup>, Vec<PathBuf>)> {
    let groups = run_experiment(cfg)?;
    let mut paths = Vec::new();
    for g in &groups {
        paths.extend(emit_group(&cfg.output_dir, g, cfg.metric_window)?);
    }
    Ok((groups, paths))
}

/// One line per group: mean gap, final estimate, sign agreement.
pub fn summarize(groups: &[RunGroup]) -> Vec<String> {
    groups
        .iter()
        .map(|g| {
            let gaps: Vec<Option<f64>> = g.runs.iter().flat_map(|r| r.gaps()).collect();
            let mut line = format!("{}: seeds={}", g.label, g.runs.len());
            if let Some(m) = mean_present(&gaps) {
                line += &format!(" mean|δe−δi|={m:.6e}");
            }
            let finals: Vec<Option<f64>> = g
                .runs
                .iter()
                .map(|r| r.records.last().and_then(|x| x.r_bar))
                .collect();
            if let Some(m) = mean_present(&finals) {
                line += &format!(" final_r_bar={m:.6}");
            }
            let (a, t) = g
                .runs
                .iter()
                .filter_map(|r| r.sign_agreement)
                .fold((0, 0), |(a, t), s| (a + s.agree, t + s.total));
            if t > 0 {
                line += &format!(" sign_agreement={:.6}", a as f64 / t as f64);
            }
            line
        })
        .collect()
}
