use std::path::PathBuf;

use super::config::RunConfig;
use super::runner::{run_experiment, RunGroup};
use crate::error::{Error, Result};

/// One grid point: the overrides applied and the groups it produced.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub label: String,
    pub overrides: Vec<(String, toml::Value)>,
    pub config: RunConfig,
    pub groups: Vec<RunGroup>,
}

/// Expands `[grid] key = [v1, v2, …]` into the cartesian product of
/// overrides, keys in sorted order. Keys are `section.field` or a bare
/// agent field.
pub fn parse_grid(text: &str) -> Result<Vec<Vec<(String, toml::Value)>>> {
    let doc: toml::Table = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
    let Some(toml::Value::Table(grid)) = doc.get("grid") else {
        return Err(Error::config("grid file needs a [grid] section"));
    };
    if doc.len() != 1 {
        return Err(Error::config("grid file takes only a [grid] section"));
    }
    let mut points: Vec<Vec<(String, toml::Value)>> = vec![Vec::new()];
    let mut keys: Vec<&String> = grid.keys().collect();
    keys.sort();
    for key in keys {
        let toml::Value::Array(values) = &grid[key] else {
            return Err(Error::config(format!("grid entry {key} must be an array")));
        };
        if values.is_empty() {
            return Err(Error::config(format!("grid entry {key} is empty")));
        }
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

fn point_label(base: &str, overrides: &[(String, toml::Value)]) -> String {
    let mut label = base.to_string();
    for (k, v) in overrides {
        let v = match v {
            toml::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let field = k.rsplit('.').next().unwrap_or(k);
        label += &format!("__{field}_{v}");
    }
    label.replace(['/', '\\', ' ', '"'], "_")
}

/// Parses every grid point up front (so a bad point fails before any run),
/// then runs them in order.
pub fn run_sweep(base: &str, grid: &str, output_dir: Option<PathBuf>) -> Result<Vec<SweepPoint>> {
    let configs = parse_grid(grid)?
        .into_iter()
        .map(|overrides| {
            let mut cfg = RunConfig::from_toml_with_overrides(base, &overrides)?.with_env_overrides();
            if let Some(dir) = &output_dir {
                cfg.output_dir = dir.clone();
            }
            cfg.name = point_label(&cfg.name, &overrides);
            cfg.validate()?;
            Ok((overrides, cfg))
        })
        .collect::<Result<Vec<_>>>()?;
    configs
        .into_iter()
        .map(|(overrides, config)| {
            let groups = run_experiment(&config)?;
            Ok(SweepPoint {
                label: config.name.clone(),
                overrides,
                config,
                groups,
            })
        })
        .collect()
}
