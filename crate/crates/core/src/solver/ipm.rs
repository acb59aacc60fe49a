//! Primal-dual interior point for box-bounded LPs
//!
//! ```text
//! minimize c^T x   s.t.  A x = b,  0 <= x <= u
//! ```
//!
//! Mehrotra predictor-corrector on the infeasible-start path. With `s = u - x`
//! and multipliers `z >= 0` (for `x >= 0`) and `w >= 0` (for `s >= 0`), each
//! Newton step reduces to the `rows x rows` normal equations
//! `A D A^T dy = r`, `D = (Z/X + W/S)^{-1}`, factored once per iteration and
//! reused for the corrector.
//!
//! Infeasibility is reported only with a Farkas certificate: a `y` with
//! `b^T y > sum_j u_j max(0, (A^T y)_j)`, which no feasible `x` can satisfy.
//! Candidates come from the dual iterates (which diverge along such a
//! direction when the primal is infeasible) and, if the main solve stalls,
//! from the dual of the reach-gauge LP `max a s.t. A x = a b, 0 <= x <= u`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::lp::LpProblem;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmOptions {
    /// Relative primal, dual and gap tolerance.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    /// Multipliers of `x >= 0`.
    pub z: DVector<f64>,
    /// Multipliers of `x <= u`.
    pub w: DVector<f64>,
    pub iterations: usize,
    pub primal_objective: f64,
    /// `b^T y - u^T w`; a lower bound on the optimum when the dual residual is small.
    pub dual_objective: f64,
    /// `||b - A x|| / (1 + ||b||)`.
    pub primal_residual: f64,
    /// `||c - A^T y - z + w|| / (1 + ||c||)`.
    pub dual_residual: f64,
    /// `|primal - dual| / (1 + |primal|)`.
    pub gap: f64,
    /// Farkas certificate when `status == Infeasible`.
    pub certificate: Option<DVector<f64>>,
}

/// Reach gauge `alpha* = max { a in [0, 2] : A x = a b, 0 <= x <= u }`.
#[derive(Debug, Clone)]
pub struct Gauge {
    pub alpha: f64,
    pub status: LpStatus,
    pub certificate: Option<DVector<f64>>,
}

const STEP_FRACTION: f64 = 0.995;
const FARKAS_MARGIN: f64 = 1e-9;

/// Checks `b^T y > sum_j u_j max(0, (A^T y)_j)` with a rounding margin.
pub fn is_farkas_certificate(lp: &LpProblem, y: &DVector<f64>) -> bool {
    let ymax = y.amax();
    if !(ymax > 0.0 && ymax.is_finite()) {
        return false;
    }
    let y = y / ymax;
    let aty = lp.eq.tr_mul(&y);
    let support: f64 = aty
        .iter()
        .zip(lp.upper.iter())
        .map(|(a, u)| u * a.max(0.0))
        .sum();
    let scale = lp.rhs.lp_norm(1)
        + lp
            .eq
            .column_iter()
            .zip(lp.upper.iter())
            .map(|(col, u)| u * col.lp_norm(1))
            .sum::<f64>();
    lp.rhs.dot(&y) - support > FARKAS_MARGIN * scale.max(f64::MIN_POSITIVE)
}

/// Solves a box-bounded LP.
pub fn solve_ip(lp: &LpProblem, opts: &IpmOptions) -> Result<LpSolution> {
    lp.validate()?;
    let mut sol = match Scaled::new(lp) {
        Ok(scaled) => mehrotra(lp, &scaled, opts),
        Err(cert) => certified_infeasible(lp, cert, 0),
    };
    if matches!(sol.status, LpStatus::IterationLimit | LpStatus::NumericalFailure) {
        let gauge = reach_gauge(lp, opts)?;
        if let Some(cert) = gauge.certificate {
            sol = certified_infeasible(lp, cert, sol.iterations);
        }
    }
    Ok(sol)
}

/// Largest fraction of `b` reachable within the box, with a Farkas
/// certificate attached whenever `alpha* < 1`.
pub fn reach_gauge(lp: &LpProblem, opts: &IpmOptions) -> Result<Gauge> {
    lp.validate()?;
    if lp.rhs.iter().all(|&v| v == 0.0) {
        return Ok(Gauge {
            alpha: f64::INFINITY,
            status: LpStatus::Optimal,
            certificate: None,
        });
    }
    let nv = lp.vars();
    let rows = lp.rows();
    let mut eq = DMatrix::zeros(rows, nv + 1);
    eq.view_mut((0, 0), (rows, nv)).copy_from(&lp.eq);
    eq.set_column(nv, &(-&lp.rhs));
    let mut cost = DVector::zeros(nv + 1);
    cost[nv] = -1.0;
    let mut upper = DVector::from_element(nv + 1, 2.0);
    upper.rows_mut(0, nv).copy_from(&lp.upper);
    let glp = LpProblem {
        cost,
        eq,
        rhs: DVector::zeros(rows),
        upper,
    };
    let scaled = Scaled::new(&glp).expect("gauge LP has a zero right-hand side");
    let run = mehrotra(&glp, &scaled, opts);
    let alpha = run.x[nv];
    let certificate = (run.status == LpStatus::Optimal && alpha < 1.0)
        .then(|| run.y.clone())
        .filter(|y| is_farkas_certificate(lp, y));
    Ok(Gauge {
        alpha,
        status: run.status,
        certificate,
    })
}

fn certified_infeasible(lp: &LpProblem, cert: DVector<f64>, iterations: usize) -> LpSolution {
    let nv = lp.vars();
    LpSolution {
        status: LpStatus::Infeasible,
        x: DVector::zeros(nv),
        y: cert.clone(),
        z: DVector::zeros(nv),
        w: DVector::zeros(nv),
        iterations,
        primal_objective: f64::NAN,
        dual_objective: f64::INFINITY,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        gap: f64::NAN,
        certificate: Some(cert),
    }
}

/// Row- and cost-equilibrated copy of an LP. Zero rows are dropped.
///
/// When the kept rows are numerically independent they are also
/// orthonormalized: with `(S A)^T = Q R` the constraints become
/// `Q^T x = R^{-T} S b`, which has the same feasible set and a far better
/// conditioned normal matrix when the rows of `A` are nearly dependent.
struct Scaled {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    u: DVector<f64>,
    /// original row index and its scale for each kept row
    rows: Vec<(usize, f64)>,
    /// triangular factor of the orthonormalization, if applied
    r: Option<DMatrix<f64>>,
    cost_scale: f64,
}

/// Smallest accepted `|R_ii| / max |R_ii|` for orthonormalization.
const ORTHO_RANK_TOL: f64 = 1e-9;

impl Scaled {
    /// Fails with a certificate when a zero row has a nonzero right-hand side.
    fn new(lp: &LpProblem) -> std::result::Result<Self, DVector<f64>> {
        let mut rows = Vec::new();
        for (i, row) in lp.eq.row_iter().enumerate() {
            let r = row.amax();
            if r > 0.0 {
                rows.push((i, 1.0 / r));
            } else if lp.rhs[i] != 0.0 {
                let mut y = DVector::zeros(lp.rows());
                y[i] = lp.rhs[i].signum();
                return Err(y);
            }
        }
        let nv = lp.vars();
        let mut a = DMatrix::zeros(rows.len(), nv);
        let mut b = DVector::zeros(rows.len());
        for (k, &(i, s)) in rows.iter().enumerate() {
            a.set_row(k, &(lp.eq.row(i) * s));
            b[k] = lp.rhs[i] * s;
        }
        let mut r = None;
        if !rows.is_empty() && rows.len() <= nv {
            let qr = a.transpose().qr();
            let rf = qr.r();
            let diag = rf.diagonal().abs();
            if diag.min() > ORTHO_RANK_TOL * diag.max() {
                if let Some(bt) = rf.transpose().solve_lower_triangular(&b) {
                    a = qr.q().transpose();
                    b = bt;
                    r = Some(rf);
                }
            }
        }
        let cmax = lp.cost.amax();
        let cost_scale = if cmax > 0.0 { cmax } else { 1.0 };
        Ok(Scaled {
            a,
            b,
            c: &lp.cost / cost_scale,
            u: lp.upper.clone(),
            rows,
            r,
            cost_scale,
        })
    }

    /// Residual of the kept, row-scaled constraints.
    fn row_residual(&self, rs: &DVector<f64>) -> DVector<f64> {
        match &self.r {
            Some(r) => r.tr_mul(rs),
            None => rs.clone(),
        }
    }

    /// Maps a scaled dual `y` back to the original rows.
    fn unscale_y(&self, ys: &DVector<f64>, total_rows: usize) -> DVector<f64> {
        let ys = match &self.r {
            Some(r) => r.solve_upper_triangular(ys).unwrap_or_else(|| ys.clone()),
            None => ys.clone(),
        };
        let mut y = DVector::zeros(total_rows);
        for (k, &(i, s)) in self.rows.iter().enumerate() {
            y[i] = ys[k] * s * self.cost_scale;
        }
        y
    }
}

struct Direction {
    dx: DVector<f64>,
    dy: DVector<f64>,
    dz: DVector<f64>,
    ds: DVector<f64>,
    dw: DVector<f64>,
}

struct Newton<'a> {
    a: &'a DMatrix<f64>,
    d: DVector<f64>,
    normal: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl<'a> Newton<'a> {
    fn new(a: &'a DMatrix<f64>, d: DVector<f64>) -> Option<Self> {
        let ad = scale_columns(a, &d);
        let normal = &ad * a.transpose();
        let chol = factor(&normal)?;
        Some(Newton { a, d, normal, chol })
    }

    #[allow(clippy::too_many_arguments)]
    fn solve(
        &self,
        it: &Iterate,
        r_b: &DVector<f64>,
        r_c: &DVector<f64>,
        r_u: &DVector<f64>,
        r_xz: &DVector<f64>,
        r_sw: &DVector<f64>,
    ) -> Direction {
        let rhat = r_c - r_xz.component_div(&it.x) + (r_sw - it.w.component_mul(r_u)).component_div(&it.s);
        let rhs = r_b + self.a * self.d.component_mul(&rhat);
        let mut dy = self.chol.solve(&rhs);
        // one step of refinement against the unregularized matrix
        let res = &rhs - &self.normal * &dy;
        dy += self.chol.solve(&res);
        let dx = self.d.component_mul(&(self.a.tr_mul(&dy) - &rhat));
        let dz = (r_xz - it.z.component_mul(&dx)).component_div(&it.x);
        let ds = r_u - &dx;
        let dw = (r_sw - it.w.component_mul(&ds)).component_div(&it.s);
        Direction { dx, dy, dz, ds, dw }
    }
}

fn scale_columns(a: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    for (mut col, &dj) in out.column_iter_mut().zip(d.iter()) {
        col *= dj;
    }
    out
}

fn factor(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let scale = m.diagonal().amax().max(f64::MIN_POSITIVE);
    for reg in [1e-14, 1e-12, 1e-10, 1e-8] {
        let mut r = m.clone();
        for i in 0..r.nrows() {
            r[(i, i)] += reg * scale;
        }
        if let Some(c) = Cholesky::new(r) {
            return Some(c);
        }
    }
    None
}

#[derive(Clone)]
struct Iterate {
    x: DVector<f64>,
    s: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    w: DVector<f64>,
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&x, &d)| -x / d)
        .fold(1.0, f64::min)
}

struct Metrics {
    primal: f64,
    dual: f64,
    gap: f64,
    pobj: f64,
    dobj: f64,
}

fn mehrotra(lp: &LpProblem, sc: &Scaled, opts: &IpmOptions) -> LpSolution {
    let nv = sc.c.len();
    let a = &sc.a;
    let half = &sc.u * 0.5;
    let mut it = Iterate {
        x: half.clone(),
        s: half,
        y: DVector::zeros(sc.b.len()),
        z: sc.c.map(|c| c.max(0.0) + 1.0),
        w: sc.c.map(|c| (-c).max(0.0) + 1.0),
    };
    let b_norm = lp.rhs.norm();
    let c_norm = lp.cost.norm();
    let u_norm = sc.u.norm();
    let complementarity_pairs = (2 * nv) as f64;

    let mut status = LpStatus::IterationLimit;
    let mut iterations = 0;
    let mut certificate = None;
    let mut stalled = 0;

    for iter in 0..=opts.max_iter {
        iterations = iter;
        let r_b = &sc.b - a * &it.x;
        let r_c = &sc.c - a.tr_mul(&it.y) - &it.z + &it.w;
        let r_u = &sc.u - &it.x - &it.s;

        let m = metrics(sc, &it, &r_b, &r_c, b_norm, c_norm);
        let bound_res = r_u.norm() / (1.0 + u_norm);
        if !(m.primal.is_finite() && m.dual.is_finite() && m.gap.is_finite()) {
            status = LpStatus::NumericalFailure;
            break;
        }
        if m.primal <= opts.tol && bound_res <= opts.tol && m.dual <= opts.tol && m.gap <= opts.tol {
            status = LpStatus::Optimal;
            break;
        }
        let y_orig = sc.unscale_y(&it.y, lp.rows());
        if is_farkas_certificate(lp, &y_orig) {
            status = LpStatus::Infeasible;
            certificate = Some(y_orig);
            break;
        }
        if iter == opts.max_iter {
            break;
        }

        let mu = (it.x.dot(&it.z) + it.s.dot(&it.w)) / complementarity_pairs;
        let d_inv = it.z.component_div(&it.x) + it.w.component_div(&it.s);
        let d = d_inv.map(|v| 1.0 / v);
        let Some(newton) = Newton::new(a, d) else {
            status = LpStatus::NumericalFailure;
            break;
        };

        // predictor
        let r_xz = -it.x.component_mul(&it.z);
        let r_sw = -it.s.component_mul(&it.w);
        let aff = newton.solve(&it, &r_b, &r_c, &r_u, &r_xz, &r_sw);
        let ap = max_step(&it.x, &aff.dx).min(max_step(&it.s, &aff.ds));
        let ad = max_step(&it.z, &aff.dz).min(max_step(&it.w, &aff.dw));
        let mu_aff = ((&it.x + &aff.dx * ap).dot(&(&it.z + &aff.dz * ad))
            + (&it.s + &aff.ds * ap).dot(&(&it.w + &aff.dw * ad)))
            / complementarity_pairs;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let target = sigma * mu;
        let r_xz = r_xz.add_scalar(target) - aff.dx.component_mul(&aff.dz);
        let r_sw = r_sw.add_scalar(target) - aff.ds.component_mul(&aff.dw);
        let dir = newton.solve(&it, &r_b, &r_c, &r_u, &r_xz, &r_sw);

        let ap = (STEP_FRACTION * max_step(&it.x, &dir.dx).min(max_step(&it.s, &dir.ds))).min(1.0);
        let ad = (STEP_FRACTION * max_step(&it.z, &dir.dz).min(max_step(&it.w, &dir.dw))).min(1.0);
        it.x += &dir.dx * ap;
        it.s += &dir.ds * ap;
        it.y += &dir.dy * ad;
        it.z += &dir.dz * ad;
        it.w += &dir.dw * ad;

        if ap < 1e-12 && ad < 1e-12 {
            stalled += 1;
            if stalled >= 3 {
                status = LpStatus::NumericalFailure;
                break;
            }
        } else {
            stalled = 0;
        }
    }

    let r_b = &sc.b - a * &it.x;
    let r_c = &sc.c - a.tr_mul(&it.y) - &it.z + &it.w;
    let m = metrics(sc, &it, &r_b, &r_c, b_norm, c_norm);
    LpSolution {
        status,
        y: sc.unscale_y(&it.y, lp.rows()),
        z: &it.z * sc.cost_scale,
        w: &it.w * sc.cost_scale,
        x: it.x,
        iterations,
        primal_objective: m.pobj,
        dual_objective: m.dobj,
        primal_residual: m.primal,
        dual_residual: m.dual,
        gap: m.gap,
        certificate,
    }
}

fn metrics(
    sc: &Scaled,
    it: &Iterate,
    r_b: &DVector<f64>,
    r_c: &DVector<f64>,
    b_norm: f64,
    c_norm: f64,
) -> Metrics {
    // undo row scaling on the primal residual
    let primal_abs = sc
        .rows
        .iter()
        .zip(sc.row_residual(r_b).iter())
        .map(|(&(_, s), r)| (r / s).powi(2))
        .sum::<f64>()
        .sqrt();
    let pobj = sc.cost_scale * sc.c.dot(&it.x);
    let dobj = sc.cost_scale * (sc.b.dot(&it.y) - sc.u.dot(&it.w));
    Metrics {
        primal: primal_abs / (1.0 + b_norm),
        dual: sc.cost_scale * r_c.norm() / (1.0 + c_norm),
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs()),
        pobj,
        dobj,
    }
}
