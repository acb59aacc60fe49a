use nalgebra::{DMatrix, DVector};

use crate::discretize::{zoh_discretize, DiscretizedPlant};
use crate::error::{Error, Result};
use crate::model::{ControlSignal, PlantModel, Trajectory};

fn check_dims(n: usize, m: usize, s: &ControlSignal, x0: &DVector<f64>) -> Result<()> {
    if s.inputs() != m {
        return Err(Error::DimensionMismatch(format!(
            "signal has {} channels, plant has {m}",
            s.inputs()
        )));
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "x0 has length {}, plant has n = {n}",
            x0.len()
        )));
    }
    Ok(())
}

fn recurse(ad: &DMatrix<f64>, bd: &DMatrix<f64>, s: &ControlSignal, x0: &DVector<f64>) -> Trajectory {
    let mut states = Vec::with_capacity(s.steps() + 1);
    let mut x = x0.clone();
    states.push(x.clone());
    for k in 0..s.steps() {
        x = ad * &x + bd * DVector::from_column_slice(s.slot(k));
        states.push(x.clone());
    }
    Trajectory {
        step: s.step(),
        states,
    }
}

/// `x[k+1] = A_d x[k] + B_d u[k]`, `N + 1` samples.
pub fn simulate_discrete(
    dp: &DiscretizedPlant,
    s: &ControlSignal,
    x0: &DVector<f64>,
) -> Result<Trajectory> {
    check_dims(dp.n(), dp.m(), s, x0)?;
    if s.steps() != dp.steps || (s.step() - dp.step).abs() > 1e-12 * dp.step {
        return Err(Error::LengthMismatch(format!(
            "signal grid ({} x {}) differs from plant grid ({} x {})",
            s.steps(),
            s.step(),
            dp.steps,
            dp.step
        )));
    }
    Ok(recurse(&dp.ad, &dp.bd, s, x0))
}

/// Exact flow of `x' = Ax + Bu` under the held control, sampled `substeps`
/// times per grid interval.
pub fn simulate_continuous(
    plant: &PlantModel,
    s: &ControlSignal,
    x0: &DVector<f64>,
    substeps: usize,
) -> Result<Trajectory> {
    check_dims(plant.n(), plant.m(), s, x0)?;
    let fine = s.refine(substeps)?;
    let (ad, bd) = zoh_discretize(plant, fine.step())?;
    Ok(recurse(&ad, &bd, &fine, x0))
}

/// Classical fourth-order Runge-Kutta on the same fine grid; an independent
/// cross-check of [`simulate_continuous`].
pub fn simulate_rk4(
    plant: &PlantModel,
    s: &ControlSignal,
    x0: &DVector<f64>,
    substeps: usize,
) -> Result<Trajectory> {
    check_dims(plant.n(), plant.m(), s, x0)?;
    let fine = s.refine(substeps)?;
    let dt = fine.step();
    let mut states = Vec::with_capacity(fine.steps() + 1);
    let mut x = x0.clone();
    states.push(x.clone());
    for k in 0..fine.steps() {
        let bu = &plant.b * DVector::from_column_slice(fine.slot(k));
        let f = |x: &DVector<f64>| &plant.a * x + &bu;
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (dt / 2.0)));
        let k3 = f(&(&x + &k2 * (dt / 2.0)));
        let k4 = f(&(&x + &k3 * dt));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        states.push(x.clone());
    }
    Ok(Trajectory { step: dt, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::build_reachability;
    use crate::model::ControlProblem;

    fn scalar(a: f64) -> PlantModel {
        PlantModel::new(DMatrix::from_element(1, 1, a), DMatrix::from_element(1, 1, 1.0)).unwrap()
    }

    #[test]
    fn zero_control_is_homogeneous() {
        let plant = PlantModel::new(
            DMatrix::from_row_slice(2, 2, &[-0.1, 1.0, -1.0, -0.1]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap();
        let x0 = DVector::from_vec(vec![1.0, -0.5]);
        let p = ControlProblem::with_unit_weights(plant, x0.clone(), 3.0, 6).unwrap();
        let dp = build_reachability(&p).unwrap();
        let traj = simulate_discrete(&dp, &ControlSignal::zeros(0.5, 1, 6).unwrap(), &x0).unwrap();
        let mut x = x0;
        for state in &traj.states {
            assert!((state - &x).norm() < 1e-14);
            x = &dp.ad * x;
        }
    }

    #[test]
    fn integrator_full_brake() {
        let p = ControlProblem::with_unit_weights(scalar(0.0), DVector::from_element(1, 1.0), 1.0, 10)
            .unwrap();
        let dp = build_reachability(&p).unwrap();
        let s = ControlSignal::new(vec![-1.0; 10], 0.1, 1, 10).unwrap();
        let traj = simulate_discrete(&dp, &s, &p.x0).unwrap();
        assert_eq!(traj.states.len(), 11);
        assert!(traj.terminal().unwrap()[0].abs() < 1e-14);
    }

    #[test]
    fn scalar_decay_free_response() {
        let s = ControlSignal::zeros(0.25, 1, 4).unwrap();
        let traj = simulate_continuous(&scalar(-1.0), &s, &DVector::from_element(1, 1.0), 10).unwrap();
        assert_eq!(traj.states.len(), 41);
        assert!((traj.terminal().unwrap()[0] - (-1f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn rk4_fourth_order() {
        let plant = PlantModel::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -4.0, -0.3]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap();
        let s = ControlSignal::new(vec![1.0, -0.4, 0.0, 0.7], 0.25, 1, 4).unwrap();
        let x0 = DVector::from_vec(vec![0.2, 0.0]);
        let exact = simulate_continuous(&plant, &s, &x0, 1).unwrap();
        let err = |sub| {
            let rk = simulate_rk4(&plant, &s, &x0, sub).unwrap();
            (rk.terminal().unwrap() - exact.terminal().unwrap()).norm()
        };
        let ratio = err(4) / err(8);
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }
}
