use std::path::Path;

use log::info;
use rayon::prelude::*;
use serde::Serialize;

use super::output::write_json;
use super::scenario::{set_path, Scenario};
use super::{run_command, CliError, Command};

#[derive(Serialize)]
struct CellRecord {
    cell: String,
    parameters: toml::Table,
    exit_code: i32,
    error: Option<String>,
}

#[derive(Serialize)]
struct Manifest {
    command: &'static str,
    keys: Vec<String>,
    cells: Vec<CellRecord>,
    exit_code: i32,
}

/// Row-major cartesian product; the last key varies fastest.
fn product(lists: &[&Vec<toml::Value>]) -> Vec<Vec<toml::Value>> {
    lists.iter().fold(vec![Vec::new()], |acc, list| {
        acc.iter()
            .flat_map(|prefix| {
                list.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect()
    })
}

pub fn sweep(text: &str, out: &Path) -> Result<(), CliError> {
    let base: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let root = Scenario::from_toml(text)?;
    let name = root
        .run
        .sweep_command
        .as_deref()
        .ok_or_else(|| CliError::Config("sweep needs run.sweep_command".into()))?;
    let command = match Command::parse(name) {
        Some(Command::Sweep) | None => return Err(CliError::Config(format!("unknown sweep command {name:?}"))),
        Some(c) => c,
    };
    if root.run.sweep.is_empty() || root.run.sweep.values().any(|v| v.is_empty()) {
        return Err(CliError::Config("run.sweep must map keys to non-empty lists".into()));
    }
    let keys: Vec<String> = root.run.sweep.keys().cloned().collect();
    let lists: Vec<&Vec<toml::Value>> = root.run.sweep.values().collect();
    let combos = product(&lists);
    info!("sweep: {} cells of {}", combos.len(), command.name());

    // the cell scenarios carry no sweep section of their own
    let mut template = base;
    if let Some(run) = template.get_mut("run").and_then(|r| r.as_table_mut()) {
        run.remove("sweep");
        run.remove("sweep_command");
    }

    let cells: Vec<CellRecord> = combos
        .into_par_iter()
        .enumerate()
        .map(|(i, values)| {
            let cell = format!("cell_{i:04}");
            let mut params = toml::Table::new();
            for (k, v) in keys.iter().zip(&values) {
                params.insert(k.clone(), v.clone());
            }
            let result = run_cell(&template, &keys, &values, command, &out.join(&cell));
            CellRecord {
                cell,
                parameters: params,
                exit_code: result.as_ref().map_or_else(|e| e.exit_code(), |_| 0),
                error: result.err().map(|e| e.to_string()),
            }
        })
        .collect();

    let exit_code = cells.iter().map(|c| c.exit_code).max().unwrap_or(0);
    let manifest = Manifest {
        command: command.name(),
        keys,
        cells,
        exit_code,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    match exit_code {
        0 => Ok(()),
        1 => Err(CliError::Config("one or more sweep cells had configuration errors".into())),
        3 => Err(CliError::Ambiguous(crate::Error::Precondition(
            "one or more sweep cells were ambiguous".into(),
        ))),
        _ => Err(CliError::Solver(crate::Error::Precondition(
            "one or more sweep cells failed".into(),
        ))),
    }
}

fn run_cell(
    template: &toml::Table,
    keys: &[String],
    values: &[toml::Value],
    command: Command,
    dir: &Path,
) -> Result<(), CliError> {
    let mut table = template.clone();
    for (k, v) in keys.iter().zip(values) {
        set_path(&mut table, k, v.clone())?;
    }
    let text = toml::to_string(&table).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join("scenario.toml");
    std::fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
    let sc = Scenario::from_toml(&text)?;
    run_command(command, &sc, dir)
}
