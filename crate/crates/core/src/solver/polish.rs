//! Crossover from an interior-point optimum to a sparse vertex of the optimal face.
//!
//! The interior point converges to the analytic center of the optimal face,
//! which is its least sparse point whenever the face is not a singleton. The
//! polish keeps the L1 objective pinned at its optimum (as a capped equality
//! with a slack) and runs reweighted-L1 rounds, `w_j <- 1/(|U_j| + eps)`, each
//! a full interior-point solve. A small index-proportional perturbation of the
//! weights breaks exact ties between symmetric slots; which of several equally
//! sparse vertices comes out is otherwise unspecified.
//!
//! The result is finally snapped: near-zero entries to 0, near-saturated
//! entries to +-1, and the remaining entries corrected by a minimum-norm
//! least-squares step so the terminal equality holds to working precision.

use nalgebra::{DMatrix, DVector};

use super::ipm::{solve_ip, IpmOptions, LpSolution, LpStatus};
use super::lp::{recombine, LpProblem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolishOptions {
    pub ipm: IpmOptions,
    /// Accepted terminal error `||A_d^N x0 + Phi U||`.
    pub feas_limit: f64,
    pub threshold: f64,
    pub epsilon: f64,
    pub max_rounds: usize,
}

impl Default for PolishOptions {
    fn default() -> Self {
        PolishOptions {
            ipm: IpmOptions::default(),
            feas_limit: 1e-6,
            threshold: 1e-6,
            epsilon: 1e-6,
            max_rounds: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polished {
    pub values: Vec<f64>,
    pub objective: f64,
    pub rounds: usize,
    pub snapped: bool,
}

/// Relative weight perturbation used for tie-breaking.
const TIE_BREAK: f64 = 1e-3;

struct Parts<'a> {
    lp: &'a LpProblem,
    mn: usize,
    phi: DMatrix<f64>,
    base: Vec<f64>,
}

impl Parts<'_> {
    fn objective(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.base).map(|(v, c)| c * v.abs()).sum()
    }

    fn terminal_error(&self, u: &[f64]) -> f64 {
        (&self.phi * DVector::from_column_slice(u) - &self.lp.rhs).norm()
    }
}

pub fn nonzeros(u: &[f64], threshold: f64) -> usize {
    u.iter().filter(|v| v.abs() > threshold).count()
}

fn support(u: &[f64], threshold: f64) -> Vec<bool> {
    u.iter().map(|v| v.abs() > threshold).collect()
}

/// Polishes the optimum of a split-variable LP built by [`super::build_lp`].
pub fn polish_to_vertex(
    lp: &LpProblem,
    interior: &LpSolution,
    opts: &PolishOptions,
) -> Result<Polished> {
    if interior.status != LpStatus::Optimal {
        return Err(Error::PolishFailed("interior solution is not optimal".into()));
    }
    let nv = lp.vars();
    if !nv.is_multiple_of(2) || interior.x.len() != nv {
        return Err(Error::DimensionMismatch("polish expects a split-variable LP".into()));
    }
    let mn = nv / 2;
    let parts = Parts {
        lp,
        mn,
        phi: lp.eq.columns(0, mn).into_owned(),
        base: lp.cost.rows(0, mn).iter().copied().collect(),
    };

    let start = recombine(&interior.x, mn);
    let j_ref = parts.objective(&start);
    let accept_bound = j_ref + 1e-7 * (1.0 + j_ref.abs());
    if j_ref == 0.0 {
        return Ok(Polished {
            values: start,
            objective: 0.0,
            rounds: 0,
            snapped: false,
        });
    }
    let cap = j_ref + 1e-8 * (1.0 + j_ref.abs());
    let admissible =
        |u: &[f64]| parts.objective(u) <= accept_bound && parts.terminal_error(u) <= opts.feas_limit;

    let mut current = start.clone();
    let mut best: Option<Vec<f64>> = None;
    let mut rounds = 0;
    for round in 1..=opts.max_rounds {
        let rlp = reweighted_lp(&parts, &current, cap, opts.epsilon);
        let sol = solve_ip(&rlp, &opts.ipm)?;
        if sol.status != LpStatus::Optimal {
            break;
        }
        let cand: Vec<f64> = recombine(&sol.x.rows(0, 2 * mn).into_owned(), mn);
        if !admissible(&cand) {
            break;
        }
        rounds = round;
        let settled = support(&cand, opts.threshold) == support(&current, opts.threshold)
            && cand
                .iter()
                .zip(&current)
                .all(|(a, b)| (a - b).abs() <= 1e-6);
        best = Some(cand.clone());
        current = cand;
        if settled {
            break;
        }
    }

    let Some(mut values) = best else {
        return Err(Error::PolishFailed("no reweighted round produced an admissible point".into()));
    };
    let mut snapped = false;
    if let Some(s) = snap(&parts, &values, opts.threshold) {
        if admissible(&s) {
            values = s;
            snapped = true;
        }
    }
    if nonzeros(&values, opts.threshold) > nonzeros(&start, opts.threshold) {
        return Err(Error::PolishFailed("polish would enlarge the support".into()));
    }
    Ok(Polished {
        objective: parts.objective(&values),
        values,
        rounds,
        snapped,
    })
}

/// `min sum_j w_j (U+_j + U-_j)` over the optimal face
/// `{Phi U = -c, sum_j base_j (U+_j + U-_j) + t = cap, t >= 0}`.
fn reweighted_lp(parts: &Parts, current: &[f64], cap: f64, epsilon: f64) -> LpProblem {
    let mn = parts.mn;
    let n = parts.lp.rows();
    let weights: Vec<f64> = current
        .iter()
        .zip(&parts.base)
        .enumerate()
        .map(|(j, (u, c))| c * (1.0 + TIE_BREAK * j as f64 / mn as f64) / (u.abs() + epsilon))
        .collect();
    let mut cost = DVector::zeros(2 * mn + 1);
    for (j, w) in weights.iter().enumerate() {
        cost[j] = *w;
        cost[mn + j] = *w;
    }
    let mut eq = DMatrix::zeros(n + 1, 2 * mn + 1);
    eq.view_mut((0, 0), (n, 2 * mn))
        .copy_from(&parts.lp.eq.columns(0, 2 * mn));
    for (j, c) in parts.base.iter().enumerate() {
        eq[(n, j)] = *c;
        eq[(n, mn + j)] = *c;
    }
    eq[(n, 2 * mn)] = 1.0;
    let mut rhs = DVector::zeros(n + 1);
    rhs.rows_mut(0, n).copy_from(&parts.lp.rhs);
    rhs[n] = cap;
    let mut upper = DVector::from_element(2 * mn + 1, 1.0);
    upper[2 * mn] = cap;
    LpProblem {
        cost,
        eq,
        rhs,
        upper,
    }
}

fn snap(parts: &Parts, u: &[f64], threshold: f64) -> Option<Vec<f64>> {
    let mut out: Vec<f64> = u
        .iter()
        .map(|&v| {
            if v.abs() <= threshold {
                0.0
            } else if v.abs() >= 1.0 - threshold {
                v.signum()
            } else {
                v
            }
        })
        .collect();
    let free: Vec<usize> = (0..out.len())
        .filter(|&j| out[j] != 0.0 && out[j].abs() != 1.0)
        .collect();
    if !free.is_empty() {
        let residual = &parts.lp.rhs - &parts.phi * DVector::from_column_slice(&out);
        let sub = parts.phi.select_columns(free.iter());
        let delta = sub.svd(true, true).solve(&residual, 1e-13).ok()?;
        for (k, &j) in free.iter().enumerate() {
            let v = out[j] + delta[k];
            if v.abs() > 1.0 + 1e-9 {
                return None;
            }
            out[j] = v.clamp(-1.0, 1.0);
        }
    }
    Some(out)
}
