use nalgebra::{DMatrix, DVector};

use crate::discretize::DiscretizedPlant;
use crate::error::{Error, Result};

/// Per-channel weights `lambda_1..lambda_m`; the full `Lambda` is the
/// `N`-fold block diagonal repetition of `diag(lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    lambda: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::DimensionMismatch("empty weight vector".into()));
        }
        for (index, &value) in lambda.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonpositiveWeight { index, value });
            }
        }
        Ok(WeightMatrix { lambda })
    }

    pub fn channels(&self) -> usize {
        self.lambda.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambda
    }

    /// Diagonal of `Lambda` for `steps` grid slots.
    pub fn expand(&self, steps: usize) -> impl Iterator<Item = f64> + '_ {
        self.lambda.iter().copied().cycle().take(self.lambda.len() * steps)
    }
}

/// `minimize cost^T x  s.t.  eq x = rhs,  0 <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub cost: DVector<f64>,
    pub eq: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub upper: DVector<f64>,
}

impl LpProblem {
    pub fn vars(&self) -> usize {
        self.cost.len()
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let nv = self.vars();
        if self.eq.shape() != (self.rows(), nv) || self.upper.len() != nv {
            return Err(Error::DimensionMismatch(format!(
                "LP with {} vars, {} rows has eq {:?} and {} bounds",
                nv,
                self.rows(),
                self.eq.shape(),
                self.upper.len()
            )));
        }
        let finite = |v: &f64| v.is_finite();
        if !(self.cost.iter().all(finite) && self.eq.iter().all(finite) && self.rhs.iter().all(finite))
        {
            return Err(Error::NonFinite("LP data".into()));
        }
        if self.upper.iter().any(|&u| !(u.is_finite() && u > 0.0)) {
            return Err(Error::Config("LP upper bounds must be finite and positive".into()));
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.cost.dot(x)
    }
}

/// Split-variable LP: `U = U+ - U-`, `U+, U- in [0, 1]^{mN}`,
/// cost `h * lambda` on both halves and `[Phi, -Phi] [U+; U-] = -c`.
pub fn build_lp(dp: &DiscretizedPlant, weights: &WeightMatrix) -> Result<LpProblem> {
    let m = dp.m();
    if weights.channels() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {m} input channels",
            weights.channels()
        )));
    }
    let mn = dp.phi.ncols();
    if mn != m * dp.steps {
        return Err(Error::DimensionMismatch(format!(
            "Phi has {mn} columns, expected m*N = {}",
            m * dp.steps
        )));
    }

    let half: Vec<f64> = weights.expand(dp.steps).map(|l| l * dp.step).collect();
    let cost = DVector::from_iterator(2 * mn, half.iter().chain(half.iter()).copied());

    let n = dp.n();
    let mut eq = DMatrix::zeros(n, 2 * mn);
    eq.view_mut((0, 0), (n, mn)).copy_from(&dp.phi);
    eq.view_mut((0, mn), (n, mn)).copy_from(&(-&dp.phi));

    Ok(LpProblem {
        cost,
        eq,
        rhs: -&dp.offset,
        upper: DVector::from_element(2 * mn, 1.0),
    })
}

/// Recombines a split solution `[U+; U-]` into `U`.
pub fn recombine(x: &DVector<f64>, mn: usize) -> Vec<f64> {
    (0..mn).map(|j| x[j] - x[mn + j]).collect()
}
