//! Zero-order-hold discretization and the reachability data of the finite
//! L1 program: `A_d`, `B_d`, `Phi_N` and the terminal offset `A_d^N x0`.

mod expm;

pub use expm::matrix_exponential;
#[cfg(test)]
pub(crate) use expm::norm1;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{validate_problem, ControlProblem, PlantModel};

/// Largest accepted `m * N`; `Phi_N` is stored dense.
pub const MAX_DECISION_VARIABLES: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedPlant {
    /// One-step state transition `e^{A h}`.
    pub ad: DMatrix<f64>,
    /// ZOH input map `int_0^h e^{A t} B dt`.
    pub bd: DMatrix<f64>,
    pub step: f64,
    pub steps: usize,
    /// `[A_d^{N-1} B_d, ..., A_d B_d, B_d]`, `n x mN`.
    pub phi: DMatrix<f64>,
    /// Terminal state under zero control, `A_d^N x0`.
    pub offset: DVector<f64>,
}

impl DiscretizedPlant {
    pub fn n(&self) -> usize {
        self.ad.nrows()
    }

    pub fn m(&self) -> usize {
        self.bd.ncols()
    }

    pub fn horizon(&self) -> f64 {
        self.step * self.steps as f64
    }

    /// `A_d^N x0 + Phi_N U`.
    pub fn terminal_state(&self, u: &[f64]) -> DVector<f64> {
        &self.offset + &self.phi * DVector::from_column_slice(u)
    }
}

/// `(A_d, B_d)` from a single exponential of `[[A, B], [0, 0]] h`.
pub fn zoh_discretize(plant: &PlantModel, h: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    plant.validate()?;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Config(format!("step length must be positive, got {h}")));
    }
    let n = plant.n();
    let m = plant.m();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&plant.a * h));
    aug.view_mut((0, n), (n, m)).copy_from(&(&plant.b * h));
    let e = matrix_exponential(&aug)?;
    Ok((
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    ))
}

pub fn build_reachability(problem: &ControlProblem) -> Result<DiscretizedPlant> {
    validate_problem(problem)?;
    let n = problem.n();
    let m = problem.m();
    let steps = problem.steps;
    let cols = m
        .checked_mul(steps)
        .filter(|&c| c <= MAX_DECISION_VARIABLES)
        .ok_or(Error::TooLarge(m.saturating_mul(steps)))?;

    let step = problem.step();
    let (ad, bd) = zoh_discretize(&problem.plant, step)?;

    // block j = A_d^{N-1-j} B_d, filled right to left
    let mut phi = DMatrix::zeros(n, cols);
    let mut block = bd.clone();
    for j in (0..steps).rev() {
        phi.view_mut((0, j * m), (n, m)).copy_from(&block);
        if j > 0 {
            block = &ad * &block;
        }
    }

    let mut offset = problem.x0.clone();
    for _ in 0..steps {
        offset = &ad * &offset;
    }

    Ok(DiscretizedPlant {
        ad,
        bd,
        step,
        steps,
        phi,
        offset,
    })
}

/// Minimum row slack `min_k (sum_j |Phi[k, j]| - |c_k|)`.
///
/// A negative value certifies infeasibility: row `k` of `Phi U` cannot reach
/// `-c_k` with `|U| <= 1`. A nonnegative value certifies nothing.
pub fn feasibility_radius(dp: &DiscretizedPlant) -> f64 {
    dp.phi
        .row_iter()
        .zip(dp.offset.iter())
        .map(|(row, c)| row.iter().map(|v| v.abs()).sum::<f64>() - c.abs())
        .fold(f64::INFINITY, f64::min)
}
