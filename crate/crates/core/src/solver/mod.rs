//! The finite L1 program
//!
//! ```text
//! minimize  h * sum_k sum_i lambda_i |u_i[k]|
//! subject to  |U|_inf <= 1,   A_d^N x0 + Phi_N U = 0
//! ```
//!
//! solved as a split-variable LP with [`solve_ip`] and polished to a sparse
//! vertex with [`polish_to_vertex`].

mod ipm;
mod lp;
mod polish;

pub use ipm::{is_farkas_certificate, reach_gauge, solve_ip, Gauge, IpmOptions, LpSolution, LpStatus};
pub use lp::{build_lp, recombine, LpProblem, WeightMatrix};
pub use polish::{nonzeros, polish_to_vertex, PolishOptions, Polished};

use nalgebra::DVector;
use serde::Serialize;

use crate::discretize::{build_reachability, feasibility_radius, DiscretizedPlant};
use crate::error::{Error, Result};
use crate::model::{validate_problem, ControlProblem, ControlSignal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub opt_tol: f64,
    /// Terminal error limit, relative: `feas_tol * (1 + ||x0||)`.
    pub feas_tol: f64,
    pub sparsity_threshold: f64,
    pub polish: bool,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            opt_tol: 1e-8,
            feas_tol: 1e-6,
            sparsity_threshold: 1e-6,
            polish: true,
            max_iter: 200,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("opt_tol", self.opt_tol),
            ("feas_tol", self.feas_tol),
            ("sparsity_threshold", self.sparsity_threshold),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn ipm(&self) -> IpmOptions {
        IpmOptions {
            tol: self.opt_tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::IterationLimit => "iteration_limit",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }
}

impl From<LpStatus> for SolveStatus {
    fn from(s: LpStatus) -> Self {
        match s {
            LpStatus::Optimal => SolveStatus::Optimal,
            LpStatus::Infeasible => SolveStatus::Infeasible,
            LpStatus::IterationLimit => SolveStatus::IterationLimit,
            LpStatus::NumericalFailure => SolveStatus::NumericalFailure,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Discrete J1 of `signal`, `h * sum lambda_i |u|`. NaN unless optimal.
    pub objective: f64,
    /// Certified lower bound from the interior-point dual.
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub signal: ControlSignal,
    /// Interior-point solution before polishing.
    pub unpolished: ControlSignal,
    /// `||A_d^N x0 + Phi_N U||_2`.
    pub terminal_error: f64,
    pub polish_applied: bool,
    pub polish_rounds: usize,
    pub feasibility_slack: f64,
    pub certificate: Option<DVector<f64>>,
}

/// Validates, discretizes and solves.
pub fn solve(problem: &ControlProblem, opts: &SolveOptions) -> Result<SolveReport> {
    validate_problem(problem)?;
    let dp = build_reachability(problem)?;
    let weights = WeightMatrix::new(problem.weights.clone())?;
    solve_discretized(&dp, &weights, problem.x0.norm(), opts)
}

/// Solves from precomputed reachability data; `x0_norm` scales the
/// terminal-error acceptance limit.
pub fn solve_discretized(
    dp: &DiscretizedPlant,
    weights: &WeightMatrix,
    x0_norm: f64,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    let m = dp.m();
    let mn = m * dp.steps;
    let zero = ControlSignal::zeros(dp.step, m, dp.steps)?;
    let feas_limit = opts.feas_tol * (1.0 + x0_norm);
    let slack = feasibility_radius(dp);
    let lp = build_lp(dp, weights)?;

    let blank = |status: SolveStatus, iterations: usize, certificate| SolveReport {
        status,
        objective: f64::NAN,
        dual_objective: f64::NAN,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        gap: f64::NAN,
        iterations,
        signal: zero.clone(),
        unpolished: zero.clone(),
        terminal_error: dp.offset.norm(),
        polish_applied: false,
        polish_rounds: 0,
        feasibility_slack: slack,
        certificate,
    };

    if slack < 0.0 {
        let (k, _) = dp
            .phi
            .row_iter()
            .zip(dp.offset.iter())
            .map(|(row, c)| row.iter().map(|v| v.abs()).sum::<f64>() - c.abs())
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, s)| if s < acc.1 { (k, s) } else { acc });
        let mut y = DVector::zeros(dp.n());
        y[k] = lp.rhs[k].signum();
        return Ok(blank(SolveStatus::Infeasible, 0, Some(y)));
    }

    if lp.rhs.iter().all(|&v| v == 0.0) {
        // U = 0 is feasible with cost 0 and y = 0, z = c certifies it
        return Ok(SolveReport {
            status: SolveStatus::Optimal,
            objective: 0.0,
            dual_objective: 0.0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            gap: 0.0,
            terminal_error: 0.0,
            ..blank(SolveStatus::Optimal, 0, None)
        });
    }

    let sol = solve_ip(&lp, &opts.ipm())?;
    if sol.status != LpStatus::Optimal {
        let mut r = blank(sol.status.into(), sol.iterations, sol.certificate.clone());
        if sol.status != LpStatus::Infeasible {
            r.primal_residual = sol.primal_residual;
            r.dual_residual = sol.dual_residual;
            r.gap = sol.gap;
        }
        return Ok(r);
    }

    let raw: Vec<f64> = recombine(&sol.x, mn).into_iter().map(clamp_overshoot).collect();
    let unpolished = ControlSignal::new(raw.clone(), dp.step, m, dp.steps)?;

    let (values, polish_applied, polish_rounds) = if opts.polish {
        let popts = PolishOptions {
            ipm: opts.ipm(),
            feas_limit,
            threshold: opts.sparsity_threshold,
            ..PolishOptions::default()
        };
        match polish_to_vertex(&lp, &sol, &popts) {
            Ok(p) => (p.values.into_iter().map(clamp_overshoot).collect(), true, p.rounds),
            Err(Error::PolishFailed(_)) => (raw, false, 0),
            Err(e) => return Err(e),
        }
    } else {
        (raw, false, 0)
    };

    let signal = ControlSignal::new(values, dp.step, m, dp.steps)?;
    let terminal_error = dp.terminal_state(signal.values()).norm();
    let status = if terminal_error <= feas_limit {
        SolveStatus::Optimal
    } else {
        SolveStatus::NumericalFailure
    };
    Ok(SolveReport {
        status,
        objective: signal.l1_cost(weights.as_slice()),
        dual_objective: sol.dual_objective,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        gap: sol.gap,
        iterations: sol.iterations,
        signal,
        unpolished,
        terminal_error,
        polish_applied,
        polish_rounds,
        feasibility_slack: slack,
        certificate: None,
    })
}

fn clamp_overshoot(v: f64) -> f64 {
    if v.abs() > 1.0 && v.abs() <= 1.0 + 1e-9 {
        v.signum()
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PlantModel;
    use nalgebra::DMatrix;

    fn scalar_integrator(x0: f64, horizon: f64, steps: usize) -> ControlProblem {
        ControlProblem::with_unit_weights(
            PlantModel::new(DMatrix::from_element(1, 1, 0.0), DMatrix::from_element(1, 1, 1.0))
                .unwrap(),
            DVector::from_element(1, x0),
            horizon,
            steps,
        )
        .unwrap()
    }

    fn double_integrator(horizon: f64, steps: usize) -> ControlProblem {
        ControlProblem::with_unit_weights(
            PlantModel::new(
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
                DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            )
            .unwrap(),
            DVector::from_vec(vec![1.0, 0.0]),
            horizon,
            steps,
        )
        .unwrap()
    }

    #[test]
    fn zero_state_zero_control() {
        let r = solve(&scalar_integrator(0.0, 1.0, 5), &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, 0.0);
        assert!(r.signal.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn infeasible_scalar() {
        let r = solve(&scalar_integrator(2.0, 1.0, 10), &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.certificate.is_some());
    }

    #[test]
    fn infeasible_detected_by_lp_phase() {
        // slack certificate is silent (rows reach 1.0 >= 0.9), the LP phase must decide
        let p = ControlProblem::with_unit_weights(
            PlantModel::new(
                DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.0]),
                DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            )
            .unwrap(),
            DVector::from_vec(vec![0.9, -0.9]),
            1.0,
            4,
        )
        .unwrap();
        let r = solve(&p, &SolveOptions::default()).unwrap();
        assert!(r.feasibility_slack >= 0.0);
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn non_normal_scalar_polishes_to_four_slots() {
        let r = solve(&scalar_integrator(1.0, 2.0, 8), &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.polish_applied);
        assert_eq!(nonzeros(r.unpolished.values(), 1e-6), 8);
        assert_eq!(nonzeros(r.signal.values(), 1e-6), 4);
        for v in r.signal.values() {
            assert!(v.abs() < 1e-6 || (v + 1.0).abs() < 1e-6);
        }
        assert!((r.objective - 1.0).abs() < 1e-7);
    }

    #[test]
    fn double_integrator_short_horizon() {
        let r = solve(&double_integrator(5.0, 8), &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(nonzeros(r.signal.values(), 1e-6), 2);
        assert!(r.objective - r.dual_objective <= 1e-7 * (1.0 + r.objective));
    }

    #[test]
    fn no_polish_keeps_interior_point() {
        let opts = SolveOptions {
            polish: false,
            ..SolveOptions::default()
        };
        let r = solve(&scalar_integrator(1.0, 2.0, 8), &opts).unwrap();
        assert!(!r.polish_applied);
        assert_eq!(r.signal, r.unpolished);
        assert!(r.signal.values().iter().all(|v| (v + 0.5).abs() < 1e-6));
    }
}
