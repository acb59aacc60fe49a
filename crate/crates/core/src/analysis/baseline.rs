use nalgebra::DVector;

use crate::discretize::DiscretizedPlant;
use crate::error::{Error, Result};
use crate::model::ControlSignal;

/// Singular-value ratio below which `Phi Phi^T` counts as singular
/// (its condition number would exceed `1/eps`).
const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBaseline {
    pub signal: ControlSignal,
    /// Set when `|U|_inf > 1`; the baseline is then not admissible.
    pub bound_violation: bool,
}

/// Minimum-L2 control `U = Phi^T (Phi Phi^T)^{-1} (-c)`, computed as the
/// minimum-norm least-squares solution through an SVD of `Phi`.
pub fn min_energy_baseline(dp: &DiscretizedPlant) -> Result<EnergyBaseline> {
    let svd = dp.phi.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if dp.phi.nrows() > dp.phi.ncols() || smax.is_nan() || smax <= 0.0 || smin <= RANK_TOL * smax {
        return Err(Error::RankDeficient);
    }
    let target: DVector<f64> = -&dp.offset;
    let u = svd
        .solve(&target, 0.0)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let values: Vec<f64> = u.iter().copied().collect();
    let bound_violation = values.iter().any(|v| v.abs() > 1.0);
    Ok(EnergyBaseline {
        signal: ControlSignal::new(values, dp.step, dp.m(), dp.steps)?,
        bound_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::build_reachability;
    use crate::model::{ControlProblem, PlantModel};
    use nalgebra::DMatrix;

    fn integrator(x0: f64, horizon: f64, steps: usize) -> DiscretizedPlant {
        let p = ControlProblem::with_unit_weights(
            PlantModel::new(DMatrix::from_element(1, 1, 0.0), DMatrix::from_element(1, 1, 1.0))
                .unwrap(),
            DVector::from_element(1, x0),
            horizon,
            steps,
        )
        .unwrap();
        build_reachability(&p).unwrap()
    }

    #[test]
    fn zero_state() {
        let b = min_energy_baseline(&integrator(0.0, 1.0, 4)).unwrap();
        assert!(b.signal.values().iter().all(|&v| v == 0.0));
        assert!(!b.bound_violation);
    }

    #[test]
    fn uniform_for_integrator() {
        // 0.5 * sum U = -1 has minimum-norm solution U_k = -0.5
        let b = min_energy_baseline(&integrator(1.0, 2.0, 4)).unwrap();
        for v in b.signal.values() {
            assert!((v + 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_normal_equations() {
        let p = ControlProblem::with_unit_weights(
            PlantModel::new(
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -0.5]),
                DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            )
            .unwrap(),
            DVector::from_vec(vec![1.0, 0.3]),
            4.0,
            20,
        )
        .unwrap();
        let dp = build_reachability(&p).unwrap();
        let b = min_energy_baseline(&dp).unwrap();
        let gram = &dp.phi * dp.phi.transpose();
        let v = gram.lu().solve(&(-&dp.offset)).unwrap();
        let oracle = dp.phi.transpose() * v;
        for (a, e) in b.signal.values().iter().zip(oracle.iter()) {
            assert!((a - e).abs() < 1e-10);
        }
        assert!(dp.terminal_state(b.signal.values()).norm() < 1e-10);
    }

    #[test]
    fn zero_input_matrix_is_rank_deficient() {
        let p = ControlProblem::with_unit_weights(
            PlantModel::new(DMatrix::from_element(1, 1, -1.0), DMatrix::from_element(1, 1, 0.0))
                .unwrap(),
            DVector::from_element(1, 1.0),
            1.0,
            5,
        )
        .unwrap();
        let dp = build_reachability(&p).unwrap();
        assert_eq!(min_energy_baseline(&dp), Err(Error::RankDeficient));
    }
}
