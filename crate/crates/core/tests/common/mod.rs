#![allow(dead_code)]

use std::path::PathBuf;

use handsoff::discretize::{build_reachability, matrix_exponential};
use handsoff::{ControlProblem, PlantModel};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn testdata(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("testdata").join(name)
}

pub fn double_integrator() -> PlantModel {
    PlantModel::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
    )
    .unwrap()
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Random plant with spectral abscissa shifted to `-margin` or below.
pub fn random_stable_plant<R: Rng>(rng: &mut R, n: usize, m: usize, margin: f64) -> PlantModel {
    let mut a = random_matrix(rng, n, n);
    let bound = a.abs().row_sum().max();
    for i in 0..n {
        a[(i, i)] -= bound + margin;
    }
    PlantModel::new(a, random_matrix(rng, n, m)).unwrap()
}

/// Problem whose `x0` is steered to the origin by a random control bounded by
/// `interior < 1`, so it is strictly feasible.
pub fn reachable_problem<R: Rng>(
    rng: &mut R,
    plant: PlantModel,
    horizon: f64,
    steps: usize,
    interior: f64,
) -> ControlProblem {
    let (n, m) = (plant.n(), plant.m());
    let probe = ControlProblem::with_unit_weights(plant.clone(), DVector::zeros(n), horizon, steps).unwrap();
    let dp = build_reachability(&probe).unwrap();
    let u0 = DVector::from_fn(m * steps, |_, _| rng.gen_range(-interior..interior));
    let flow = matrix_exponential(&(&plant.a * horizon)).unwrap();
    let x0 = flow.lu().solve(&(-(&dp.phi * u0))).unwrap();
    ControlProblem::with_unit_weights(plant, x0, horizon, steps).unwrap()
}
