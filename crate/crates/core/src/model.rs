//! Plant, problem and signal types plus the problem-file and signal-CSV formats.
//!
//! A problem file is a JSON object:
//!
//! ```json
//! { "A": [[0, 1], [0, 0]], "B": [[0], [1]], "x0": [1, 0], "T": 10, "N": 100, "weights": [1] }
//! ```
//!
//! Matrices are row-major arrays of rows. `weights` is optional and defaults to
//! all ones. Data is always continuous-time; discretization happens internally
//! so that `h = T / N` exactly.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

/// Continuous-time LTI pair `(A, B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl PlantModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let plant = PlantModel { a, b };
        plant.validate()?;
        Ok(plant)
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (ar, ac) = self.a.shape();
        let (br, bc) = self.b.shape();
        if ar == 0 || ar != ac {
            return Err(Error::DimensionMismatch(format!(
                "A must be square with n >= 1, got {ar}x{ac}"
            )));
        }
        if bc == 0 || br != ar {
            return Err(Error::DimensionMismatch(format!(
                "B must be {ar}xm with m >= 1, got {br}x{bc}"
            )));
        }
        if self.a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("A".into()));
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("B".into()));
        }
        Ok(())
    }
}

/// Plant, initial state, horizon `T`, grid size `N` and per-channel weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    pub plant: PlantModel,
    pub x0: DVector<f64>,
    pub horizon: f64,
    pub steps: usize,
    pub weights: Vec<f64>,
}

impl ControlProblem {
    pub fn new(
        plant: PlantModel,
        x0: DVector<f64>,
        horizon: f64,
        steps: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let p = ControlProblem {
            plant,
            x0,
            horizon,
            steps,
            weights,
        };
        validate_problem(&p)?;
        Ok(p)
    }

    /// Builds a problem with unit weights.
    pub fn with_unit_weights(
        plant: PlantModel,
        x0: DVector<f64>,
        horizon: f64,
        steps: usize,
    ) -> Result<Self> {
        let m = plant.m();
        Self::new(plant, x0, horizon, steps, vec![1.0; m])
    }

    /// Grid step `h = T / N`.
    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn n(&self) -> usize {
        self.plant.n()
    }

    pub fn m(&self) -> usize {
        self.plant.m()
    }
}

/// Checks every invariant of a [`ControlProblem`]. Nothing is repaired.
pub fn validate_problem(p: &ControlProblem) -> Result<()> {
    p.plant.validate()?;
    let n = p.plant.n();
    let m = p.plant.m();
    if p.x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "x0 has length {}, expected n = {n}",
            p.x0.len()
        )));
    }
    if p.x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("x0".into()));
    }
    if p.weights.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "weights has length {}, expected m = {m}",
            p.weights.len()
        )));
    }
    if !(p.horizon.is_finite() && p.horizon > 0.0) || p.steps == 0 || p.step() <= 0.0 {
        return Err(Error::NonpositiveHorizon {
            horizon: p.horizon,
            steps: p.steps,
        });
    }
    for (index, &value) in p.weights.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("weights[{index}]")));
        }
        if value <= 0.0 {
            return Err(Error::NonpositiveWeight { index, value });
        }
    }
    Ok(())
}

/// Piecewise-constant control on the grid, stacked as `[u[0]; u[1]; ...; u[N-1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    values: Vec<f64>,
    step: f64,
    inputs: usize,
    steps: usize,
}

impl ControlSignal {
    pub fn new(values: Vec<f64>, step: f64, inputs: usize, steps: usize) -> Result<Self> {
        if inputs == 0 || steps == 0 {
            return Err(Error::DimensionMismatch(format!(
                "signal needs m >= 1 and N >= 1, got m = {inputs}, N = {steps}"
            )));
        }
        if values.len() != inputs * steps {
            return Err(Error::LengthMismatch(format!(
                "signal has {} values, expected m*N = {}",
                values.len(),
                inputs * steps
            )));
        }
        if values.iter().any(|v| !v.is_finite()) || !(step.is_finite() && step > 0.0) {
            return Err(Error::NonFinite("control signal".into()));
        }
        Ok(ControlSignal {
            values,
            step,
            inputs,
            steps,
        })
    }

    pub fn zeros(step: f64, inputs: usize, steps: usize) -> Result<Self> {
        Self::new(vec![0.0; inputs * steps], step, inputs, steps)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.step * self.steps as f64
    }

    /// Control value `u_d[k]` (length `m`).
    pub fn slot(&self, k: usize) -> &[f64] {
        &self.values[k * self.inputs..(k + 1) * self.inputs]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Discrete J1: `h * sum_k sum_i lambda_i |u_i[k]|`.
    pub fn l1_cost(&self, weights: &[f64]) -> f64 {
        let sum: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| weights[j % self.inputs] * v.abs())
            .sum();
        self.step * sum
    }

    /// Holds each grid value for `substeps` finer steps.
    pub fn refine(&self, substeps: usize) -> Result<Self> {
        if substeps == 0 {
            return Err(Error::Config("substeps must be at least 1".into()));
        }
        let mut values = Vec::with_capacity(self.values.len() * substeps);
        for k in 0..self.steps {
            for _ in 0..substeps {
                values.extend_from_slice(self.slot(k));
            }
        }
        Self::new(
            values,
            self.step / substeps as f64,
            self.inputs,
            self.steps * substeps,
        )
    }
}

/// State samples on a uniform grid, `states[k] = x(k h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub step: f64,
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn terminal(&self) -> Option<&DVector<f64>> {
        self.states.last()
    }
}

pub fn read_problem(text: &str) -> Result<ControlProblem> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        field: None,
        line: Some(e.line()),
        column: Some(e.column()),
        message: e.to_string(),
    })?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::field("<root>", "problem document must be an object"))?;
    for key in obj.keys() {
        if !matches!(key.as_str(), "A" | "B" | "x0" | "T" | "N" | "weights") {
            return Err(Error::field(key, "unknown field"));
        }
    }

    let a = matrix_field(obj, "A")?;
    let b = matrix_field(obj, "B")?;
    let x0 = DVector::from_vec(vector_field(obj, "x0")?);
    let horizon = required(obj, "T")?
        .as_f64()
        .ok_or_else(|| Error::field("T", "expected a number"))?;
    let steps = required(obj, "N")?
        .as_u64()
        .ok_or_else(|| Error::field("N", "expected a non-negative integer"))?;
    let steps = usize::try_from(steps).map_err(|_| Error::field("N", "too large"))?;
    let weights = match obj.get("weights") {
        None | Some(Value::Null) => vec![1.0; b.ncols().max(1)],
        Some(_) => vector_field(obj, "weights")?,
    };

    ControlProblem::new(PlantModel { a, b }, x0, horizon, steps, weights)
}

/// Serializes a problem in the same format [`read_problem`] accepts.
pub fn write_problem(p: &ControlProblem) -> String {
    let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect()
    };
    let doc = json!({
        "A": rows(&p.plant.a),
        "B": rows(&p.plant.b),
        "x0": p.x0.iter().copied().collect::<Vec<_>>(),
        "T": p.horizon,
        "N": p.steps,
        "weights": p.weights,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("problem document serializes");
    s.push('\n');
    s
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::field(key, "missing required field"))
}

fn number(v: &Value, key: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::field(key, format!("expected a number, got {v}")))
}

fn vector_field(obj: &Map<String, Value>, key: &str) -> Result<Vec<f64>> {
    required(obj, key)?
        .as_array()
        .ok_or_else(|| Error::field(key, "expected an array of numbers"))?
        .iter()
        .map(|v| number(v, key))
        .collect()
}

fn matrix_field(obj: &Map<String, Value>, key: &str) -> Result<DMatrix<f64>> {
    let rows = required(obj, key)?
        .as_array()
        .ok_or_else(|| Error::field(key, "expected an array of rows"))?;
    let mut data = Vec::new();
    let mut cols = None;
    for row in rows {
        let row = row
            .as_array()
            .ok_or_else(|| Error::field(key, "each row must be an array"))?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::DimensionMismatch(format!(
                    "{key} has ragged rows ({c} and {} entries)",
                    row.len()
                )))
            }
            _ => {}
        }
        for v in row {
            data.push(number(v, key)?);
        }
    }
    let cols = cols.unwrap_or(0);
    Ok(DMatrix::from_row_slice(rows.len(), cols, &data))
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Emits the plotting CSV: `t,u1..um,x1..xn`, one row per grid point.
///
/// The last row repeats the final control value.
pub fn write_signal(s: &ControlSignal, traj: &Trajectory) -> Result<String> {
    if traj.states.len() != s.steps() + 1 {
        return Err(Error::LengthMismatch(format!(
            "trajectory has {} samples, expected N+1 = {}",
            traj.states.len(),
            s.steps() + 1
        )));
    }
    let n = traj.states[0].len();
    if traj.states.iter().any(|x| x.len() != n) {
        return Err(Error::LengthMismatch("ragged trajectory".into()));
    }

    let mut out = String::from("t");
    for i in 1..=s.inputs() {
        let _ = write!(out, ",u{i}");
    }
    for i in 1..=n {
        let _ = write!(out, ",x{i}");
    }
    out.push('\n');

    for (k, x) in traj.states.iter().enumerate() {
        let u = s.slot(k.min(s.steps() - 1));
        out.push_str(&fmt17(k as f64 * s.step()));
        for v in u.iter().chain(x.iter()) {
            out.push(',');
            out.push_str(&fmt17(*v));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses a CSV produced by [`write_signal`] back into a signal and trajectory.
pub fn read_signal(text: &str) -> Result<(ControlSignal, Trajectory)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::field("header", "empty CSV"))?
        .split(',')
        .map(str::trim)
        .collect();
    if header.first() != Some(&"t") {
        return Err(Error::field("header", "first column must be t"));
    }
    let m = header.iter().filter(|h| h.starts_with('u')).count();
    let n = header.iter().filter(|h| h.starts_with('x')).count();
    if m == 0 || n == 0 || header.len() != 1 + m + n {
        return Err(Error::field("header", "expected t,u1..um,x1..xn"));
    }

    let mut times = Vec::new();
    let mut controls = Vec::new();
    let mut states = Vec::new();
    for (idx, line) in lines.enumerate() {
        let cells: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                field: None,
                line: Some(idx + 2),
                column: None,
                message: e.to_string(),
            })?;
        if cells.len() != 1 + m + n {
            return Err(Error::Parse {
                field: None,
                line: Some(idx + 2),
                column: None,
                message: format!("expected {} columns, got {}", 1 + m + n, cells.len()),
            });
        }
        times.push(cells[0]);
        controls.push(cells[1..=m].to_vec());
        states.push(DVector::from_column_slice(&cells[1 + m..]));
    }
    if times.len() < 2 {
        return Err(Error::LengthMismatch("signal CSV needs at least two rows".into()));
    }
    let steps = times.len() - 1;
    let step = times[steps] / steps as f64;
    let values = controls[..steps].concat();
    let signal = ControlSignal::new(values, step, m, steps)?;
    Ok((signal, Trajectory { step, states }))
}
