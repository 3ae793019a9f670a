//! Scenario files: one TOML document with `[model]`, `[supply]`, `[solver]`
//! and `[run]`. Unknown keys are rejected everywhere.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::model::{validate_hypotheses, RateModel, Supply, ValidationConfig};
use crate::periodic::SolverConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: RateModel,
    pub supply: Supply,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub run: RunConfig,
}

/// Explicit values or an evenly spaced range (geometric when `log = true`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range(GridRange),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub log: bool,
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let pts = match self {
            Grid::Values(v) => v.clone(),
            Grid::Range(GridRange { min, max, count, log }) => {
                let (min, max, n) = (*min, *max, *count);
                if n == 0 || !(max >= min) || (*log && !(min > 0.0)) {
                    return Err(CliError::Config(format!("invalid grid range {self:?}")));
                }
                if n == 1 {
                    vec![min]
                } else if *log {
                    (0..n)
                        .map(|i| min * (max / min).powf(i as f64 / (n - 1) as f64))
                        .collect()
                } else {
                    (0..n)
                        .map(|i| min + (max - min) * i as f64 / (n - 1) as f64)
                        .collect()
                }
            }
        };
        if pts.is_empty() || pts.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(CliError::Config(format!("grid values must be positive: {self:?}")));
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `profile`: every pair from `sigma_bar × radius`.
    pub sigma_bar: Vec<f64>,
    pub radius: Vec<f64>,
    /// `gmap` grids.
    pub sigma_bar_grid: Option<Grid>,
    pub radius_grid: Option<Grid>,
    /// `simulate` initial radius.
    pub r0: f64,
    /// `simulate` final time; defaults to `solver.integrator.horizon`.
    pub horizon: Option<f64>,
    /// `periodic`: optional start of the period-map iteration (default `R⁺`).
    pub start: Option<f64>,
    /// `periodic`: convergence study from these multiples of `R^#`.
    pub convergence_factors: Vec<f64>,
    pub periods: usize,
    pub burn_in: usize,
    /// `sweep`: subcommand run in every cell.
    pub sweep_command: Option<String>,
    /// `sweep`: dotted scenario paths and the values each takes.
    pub sweep: BTreeMap<String, Vec<toml::Value>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sigma_bar: Vec::new(),
            radius: Vec::new(),
            sigma_bar_grid: None,
            radius_grid: None,
            r0: 1.0,
            horizon: None,
            start: None,
            convergence_factors: Vec::new(),
            periods: 30,
            burn_in: 2,
            sweep_command: None,
            sweep: BTreeMap::new(),
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let s: Scenario = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.check()?;
        self.supply.check()?;
        self.solver.check(self.supply.omega)?;
        let report = validate_hypotheses(&self.model, &ValidationConfig::for_supply(&self.model, &self.supply));
        if let Some(bad) = report.failures().next() {
            return Err(CliError::Config(format!(
                "hypothesis {:?} fails: {} (witness σ = {:?})",
                bad.hypothesis, bad.detail, bad.witness
            )));
        }
        if !(self.run.r0 > 0.0) {
            return Err(CliError::Config(format!("run.r0 must be positive, got {}", self.run.r0)));
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.run.horizon.unwrap_or(self.solver.integrator.horizon)
    }
}

/// Sets `path` (dot separated) in a TOML table, creating tables as needed.
pub fn set_path(root: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| CliError::Config(format!("empty sweep key {path:?}")))?;
    let mut table = root;
    for p in parts {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("sweep key {path:?}: {p:?} is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
