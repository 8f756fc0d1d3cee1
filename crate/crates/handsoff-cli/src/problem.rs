// Copyright 2026 Handsoff Contributors
// SPDX-License-Identifier: Apache-2.0

//! Problem files: a JSON document with the plant, initial state and
//! horizon, plus optional grid size, channel weights and time bits.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use handsoff::PlantModel;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    x0: Vec<f64>,
    #[serde(rename = "T")]
    horizon: f64,
    #[serde(rename = "N", default)]
    n_grid: Option<usize>,
    #[serde(default)]
    lambda: Option<Vec<f64>>,
    #[serde(rename = "b", default)]
    bits: Option<u8>,
}

/// Validated problem description.
pub struct Problem {
    pub plant: PlantModel,
    pub x0: DVector<f64>,
    pub horizon: f64,
    pub n_grid: Option<usize>,
    pub lambda: DVector<f64>,
    pub bits: u8,
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(CliError::input(format!(
            "{what} must be a non-empty matrix"
        )));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::input(format!("{what} has ragged rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Loads and validates a problem file; every failure maps to exit 2.
pub fn load_problem(path: &Path) -> Result<Problem, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let raw: RawProblem = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;

    let a = matrix_from_rows(&raw.a, "A")?;
    let b = matrix_from_rows(&raw.b, "B")?;
    let plant = PlantModel::new(a, b).map_err(|e| CliError::input(e.to_string()))?;

    if raw.x0.len() != plant.state_dim() {
        return Err(CliError::input(format!(
            "x0 has length {}, expected {}",
            raw.x0.len(),
            plant.state_dim()
        )));
    }
    if raw.x0.iter().any(|v| !v.is_finite()) {
        return Err(CliError::input("x0 has non-finite entries".into()));
    }
    if raw.horizon <= 0.0 || !raw.horizon.is_finite() {
        return Err(CliError::input(format!(
            "T must be positive, got {}",
            raw.horizon
        )));
    }
    let lambda = match raw.lambda {
        Some(l) => {
            if l.len() != plant.input_dim() {
                return Err(CliError::input(format!(
                    "lambda has length {}, expected {}",
                    l.len(),
                    plant.input_dim()
                )));
            }
            if l.iter().any(|v| *v <= 0.0 || !v.is_finite()) {
                return Err(CliError::input("lambda entries must be positive".into()));
            }
            DVector::from_vec(l)
        }
        None => DVector::from_element(plant.input_dim(), 1.0),
    };
    let bits = raw.bits.unwrap_or(8);
    if !(1..=32).contains(&bits) {
        return Err(CliError::input(format!(
            "b must lie in [1, 32], got {bits}"
        )));
    }
    Ok(Problem {
        plant,
        x0: DVector::from_vec(raw.x0),
        horizon: raw.horizon,
        n_grid: raw.n_grid,
        lambda,
        bits,
    })
}
