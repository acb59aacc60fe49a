//! Exhaustive L0 search and the L0/L1 equivalence check.
//!
//! The decision vector `U` has `mN` atoms (channel `i` at slot `k` is atom
//! `k*m + i`). A support `S` is feasible when `Phi_S U_S = -c` has a solution
//! with `|U_S|_inf <= 1`. Supports are visited by increasing cardinality; the
//! discrete weighted `J0(S) = h * sum_{j in S} lambda_{channel(j)}` is
//! minimized, which for uniform weights is the first cardinality with a
//! feasible support.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::sparsity::weighted_l0;
use crate::discretize::{build_reachability, DiscretizedPlant};
use crate::error::{Error, Result};
use crate::model::{validate_problem, ControlProblem, ControlSignal};
use crate::solver::{
    nonzeros, reach_gauge, solve_discretized, solve_ip, IpmOptions, LpProblem, LpStatus,
    SolveOptions, SolveStatus, WeightMatrix,
};

/// Largest `mN` the exhaustive search accepts.
pub const EXHAUSTIVE_LIMIT: usize = 24;
/// Witness supports kept in a report; the total is always counted.
pub const MAX_STORED_WITNESSES: usize = 4096;

const GAUGE_TOL: f64 = 1e-7;
const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L0Oracle {
    /// Cardinality of the minimizing supports.
    pub min_support: usize,
    /// Discrete weighted `J0` of the minimizing supports.
    pub min_weighted_l0: f64,
    /// Minimizing supports in lexicographic order (atom indices).
    pub witnesses: Vec<Vec<usize>>,
    pub witness_count: usize,
    /// Smallest `J1` attainable on any stored witness support.
    pub best_j1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    /// Nonzero atoms of the (polished) L1 solution.
    pub l1_support: usize,
    /// Minimum feasible support found by exhaustive search.
    pub l0_support: usize,
    /// Nonzero atoms of the interior-point solution before polishing.
    pub unpolished_support: usize,
    pub l1_objective: f64,
    /// Least `J1` over the minimal supports.
    pub l0_certified_objective: f64,
    pub l1_weighted_l0: f64,
    pub l0_weighted_l0: f64,
    pub agree: bool,
    pub polish_applied: bool,
    /// Dimension of the optimal face around the interior-point solution;
    /// positive values witness non-uniqueness of the L1 minimizer.
    pub optimal_face_dim: usize,
    pub witness_supports: Vec<Vec<usize>>,
    pub witness_count: usize,
}

struct Feasibility<'a> {
    dp: &'a DiscretizedPlant,
    target: DVector<f64>,
    ipm: IpmOptions,
}

impl Feasibility<'_> {
    fn subset_lp(&self, support: &[usize], cost: Option<&[f64]>) -> LpProblem {
        let n = self.dp.n();
        let k = support.len();
        let mut eq = DMatrix::zeros(n, 2 * k);
        let mut c = DVector::zeros(2 * k);
        for (col, &j) in support.iter().enumerate() {
            let phi_j = self.dp.phi.column(j);
            eq.set_column(col, &phi_j);
            eq.set_column(k + col, &(-phi_j));
            if let Some(cost) = cost {
                c[col] = cost[j];
                c[k + col] = cost[j];
            }
        }
        LpProblem {
            cost: c,
            eq,
            rhs: self.target.clone(),
            upper: DVector::from_element(2 * k, 1.0),
        }
    }

    /// Unique solution on `support` when `Phi_S` has full column rank and the
    /// system is consistent; `Err(())` when it is inconsistent.
    fn unique_solution(&self, support: &[usize]) -> Option<std::result::Result<DVector<f64>, ()>> {
        let sub = self.dp.phi.select_columns(support.iter());
        let svd = sub.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if support.len() > self.dp.n() || smin.is_nan() || smin <= 1e-12 * smax {
            return None;
        }
        let u = svd.solve(&self.target, 0.0).ok()?;
        let residual = (&sub * &u - &self.target).norm();
        if residual <= 1e-9 * (1.0 + self.target.norm()) {
            Some(Ok(u))
        } else {
            Some(Err(()))
        }
    }

    fn feasible(&self, support: &[usize]) -> bool {
        if support.is_empty() {
            return self.target.amax() <= 1e-14;
        }
        for (row, t) in self.dp.phi.row_iter().zip(self.target.iter()) {
            let reach: f64 = support.iter().map(|&j| row[j].abs()).sum();
            if reach < t.abs() - 1e-12 * (1.0 + t.abs()) {
                return false;
            }
        }
        match self.unique_solution(support) {
            Some(Ok(u)) => u.amax() <= 1.0 + BOUND_TOL,
            Some(Err(())) => false,
            None => reach_gauge(&self.subset_lp(support, None), &self.ipm)
                .map(|g| g.alpha >= 1.0 - GAUGE_TOL)
                .unwrap_or(false),
        }
    }

    fn min_j1(&self, support: &[usize], atom_cost: &[f64]) -> f64 {
        if support.is_empty() {
            return 0.0;
        }
        if let Some(Ok(u)) = self.unique_solution(support) {
            return support
                .iter()
                .zip(u.iter())
                .map(|(&j, v)| atom_cost[j] * v.abs())
                .sum();
        }
        match solve_ip(&self.subset_lp(support, Some(atom_cost)), &self.ipm) {
            Ok(s) if s.status == LpStatus::Optimal => s.primal_objective,
            _ => f64::NAN,
        }
    }
}

/// Visits every `k`-subset of `start..total` extending `prefix` in
/// lexicographic order.
fn for_each_combination(
    prefix: &mut Vec<usize>,
    start: usize,
    total: usize,
    k: usize,
    f: &mut dyn FnMut(&[usize]),
) {
    if prefix.len() == k {
        f(prefix);
        return;
    }
    let remaining = k - prefix.len();
    for j in start..=total.saturating_sub(remaining) {
        prefix.push(j);
        for_each_combination(prefix, j + 1, total, k, f);
        prefix.pop();
    }
}

/// Exhaustive minimum-support search over at most `max_support` atoms.
pub fn l0_oracle(
    dp: &DiscretizedPlant,
    weights: &WeightMatrix,
    max_support: usize,
) -> Result<L0Oracle> {
    let m = dp.m();
    let total = dp.phi.ncols();
    if total > EXHAUSTIVE_LIMIT {
        return Err(Error::ExhaustiveBoundExceeded(total));
    }
    if weights.channels() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {m} channels",
            weights.channels()
        )));
    }
    let atom_cost: Vec<f64> = weights.expand(dp.steps).map(|l| l * dp.step).collect();
    let min_atom = atom_cost.iter().copied().fold(f64::INFINITY, f64::min);
    let ctx = Feasibility {
        dp,
        target: -&dp.offset,
        ipm: IpmOptions::default(),
    };
    let cost_of = |s: &[usize]| s.iter().map(|&j| atom_cost[j]).sum::<f64>();
    let tol = |c: f64| 1e-12 * (1.0 + c.abs());

    let mut best: Option<(f64, Vec<Vec<usize>>, usize)> = None;
    for k in 0..=max_support.min(total) {
        if let Some((c, _, _)) = &best {
            if k as f64 * min_atom > c + tol(*c) {
                break;
            }
        }
        let bound = best.as_ref().map(|b| b.0);
        // split by leading atom so tiers run in parallel; concatenation keeps
        // lexicographic order
        let firsts: Vec<usize> = if k == 0 { vec![usize::MAX] } else { (0..=total - k).collect() };
        let found: Vec<Vec<Vec<usize>>> = firsts
            .par_iter()
            .map(|&first| {
                let mut hits = Vec::new();
                let mut check = |s: &[usize]| {
                    let c = cost_of(s);
                    if bound.is_some_and(|b| c > b + tol(b)) {
                        return;
                    }
                    if ctx.feasible(s) {
                        hits.push(s.to_vec());
                    }
                };
                if first == usize::MAX {
                    check(&[]);
                } else {
                    let mut prefix = vec![first];
                    for_each_combination(&mut prefix, first + 1, total, k, &mut check);
                }
                hits
            })
            .collect();
        for s in found.into_iter().flatten() {
            let c = cost_of(&s);
            match &mut best {
                Some((bc, list, count)) if (c - *bc).abs() <= tol(*bc) => {
                    *count += 1;
                    if list.len() < MAX_STORED_WITNESSES {
                        list.push(s);
                    }
                }
                Some((bc, _, _)) if c > *bc => {}
                _ => best = Some((c, vec![s], 1)),
            }
        }
    }

    let Some((min_weighted_l0, witnesses, witness_count)) = best else {
        return Err(Error::Infeasible);
    };
    let min_support = witnesses[0].len();
    let best_j1 = witnesses
        .par_iter()
        .map(|s| ctx.min_j1(s, &atom_cost))
        .reduce(|| f64::INFINITY, f64::min);
    Ok(L0Oracle {
        min_support,
        min_weighted_l0,
        witnesses,
        witness_count,
        best_j1,
    })
}

/// `#free - rank(Phi_free)` where free entries lie strictly inside `(-1, 1)`
/// and away from zero.
pub fn optimal_face_dimension(dp: &DiscretizedPlant, u: &[f64], threshold: f64) -> usize {
    let free: Vec<usize> = (0..u.len())
        .filter(|&j| u[j].abs() > threshold && u[j].abs() < 1.0 - threshold)
        .collect();
    if free.is_empty() {
        return 0;
    }
    let sub = dp.phi.select_columns(free.iter());
    let sv = sub.singular_values();
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-10 * smax).count();
    free.len() - rank
}

/// Solves (with the configured polish) and compares against the exhaustive
/// L0 minimum.
pub fn verify_equivalence(problem: &ControlProblem, opts: &SolveOptions) -> Result<EquivalenceReport> {
    validate_problem(problem)?;
    let mn = problem.m() * problem.steps;
    if mn > EXHAUSTIVE_LIMIT {
        return Err(Error::ExhaustiveBoundExceeded(mn));
    }
    let dp = build_reachability(problem)?;
    let weights = WeightMatrix::new(problem.weights.clone())?;
    let report = solve_discretized(&dp, &weights, problem.x0.norm(), opts)?;
    match report.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(Error::Infeasible),
        other => return Err(Error::Solver(other.as_str().into())),
    }
    let oracle = l0_oracle(&dp, &weights, mn)?;

    let thr = opts.sparsity_threshold;
    let signal: &ControlSignal = &report.signal;
    let l1_support_set: Vec<usize> = (0..mn).filter(|&j| signal.values()[j].abs() > thr).collect();
    let l1_weighted_l0 = weighted_l0(signal, weights.as_slice(), thr);
    let same_cost = (l1_weighted_l0 - oracle.min_weighted_l0).abs()
        <= 1e-9 * (1.0 + oracle.min_weighted_l0);
    let in_family = oracle.witness_count > oracle.witnesses.len()
        || oracle.witnesses.contains(&l1_support_set);

    Ok(EquivalenceReport {
        l1_support: l1_support_set.len(),
        l0_support: oracle.min_support,
        unpolished_support: nonzeros(report.unpolished.values(), thr),
        l1_objective: report.objective,
        l0_certified_objective: oracle.best_j1,
        l1_weighted_l0,
        l0_weighted_l0: oracle.min_weighted_l0,
        agree: same_cost && in_family,
        polish_applied: report.polish_applied,
        optimal_face_dim: optimal_face_dimension(&dp, report.unpolished.values(), thr),
        witness_supports: oracle.witnesses,
        witness_count: oracle.witness_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PlantModel;

    fn integrator(x0: f64, horizon: f64, steps: usize) -> ControlProblem {
        ControlProblem::with_unit_weights(
            PlantModel::new(DMatrix::from_element(1, 1, 0.0), DMatrix::from_element(1, 1, 1.0))
                .unwrap(),
            DVector::from_element(1, x0),
            horizon,
            steps,
        )
        .unwrap()
    }

    #[test]
    fn combinations_are_lexicographic() {
        let mut seen = Vec::new();
        for_each_combination(&mut Vec::new(), 0, 4, 2, &mut |s| seen.push(s.to_vec()));
        assert_eq!(
            seen,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
    }

    #[test]
    fn zero_state_needs_no_support() {
        let dp = build_reachability(&integrator(0.0, 1.0, 6)).unwrap();
        let o = l0_oracle(&dp, &WeightMatrix::new(vec![1.0]).unwrap(), 6).unwrap();
        assert_eq!(o.min_support, 0);
        assert_eq!(o.witnesses, vec![Vec::<usize>::new()]);
    }

    #[test]
    fn integrator_needs_four_slots() {
        let dp = build_reachability(&integrator(1.0, 2.0, 8)).unwrap();
        let o = l0_oracle(&dp, &WeightMatrix::new(vec![1.0]).unwrap(), 8).unwrap();
        assert_eq!(o.min_support, 4);
        // any 4 of 8 slots at -1
        assert_eq!(o.witness_count, 70);
        assert!((o.best_j1 - 1.0).abs() < 1e-7);
    }

    #[test]
    fn infeasible_when_no_support_works() {
        let dp = build_reachability(&integrator(3.0, 2.0, 8)).unwrap();
        assert_eq!(
            l0_oracle(&dp, &WeightMatrix::new(vec![1.0]).unwrap(), 8),
            Err(Error::Infeasible)
        );
    }

    #[test]
    fn bound_enforced() {
        let p = integrator(1.0, 30.0, 30);
        assert_eq!(
            verify_equivalence(&p, &SolveOptions::default()),
            Err(Error::ExhaustiveBoundExceeded(30))
        );
    }

    #[test]
    fn face_dimension_of_integrator_center() {
        let dp = build_reachability(&integrator(1.0, 2.0, 8)).unwrap();
        assert_eq!(optimal_face_dimension(&dp, &[-0.5; 8], 1e-6), 7);
        let mut vertex = vec![0.0; 8];
        vertex[..4].fill(-1.0);
        assert_eq!(optimal_face_dimension(&dp, &vertex, 1e-6), 0);
    }
}
