//! Sparse primal-dual interior-point solver for
//!
//! ```text
//! minimize f(x)  subject to  c(x) = 0,  l ≤ x ≤ u
//! ```
//!
//! with exact first and second derivatives supplied by the problem. Steps
//! come from the regularized KKT system, factorized by a sparse `LDLᵀ`
//! without pivoting under an ordering that keeps the system quasi-definite
//! in practice. Inertia is corrected by adding a multiple of the identity to
//! the Hessian block, and steps are globalized with an `ℓ₁` exact-penalty
//! merit function on the barrier objective.

mod check;
mod ipm;
mod ldl;
mod scaling;

use serde::{Deserialize, Serialize};

pub use check::{check_derivatives, DerivativeReport};
pub use ipm::{solve, solve_warm};
pub use ldl::{KktPattern, LdlFactor};
pub use scaling::Scaled;

/// Problem interface. Sparse structures are fixed for the lifetime of the
/// problem; value callbacks fill arrays aligned with them.
pub trait NlpProblem {
    fn num_variables(&self) -> usize;
    fn num_constraints(&self) -> usize;
    /// Lower and upper bounds; infinite entries mean "unbounded".
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn objective(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
    fn constraints(&self, x: &[f64], c: &mut [f64]);
    /// `(row, column)` of each Jacobian entry.
    fn jacobian_structure(&self) -> Vec<(usize, usize)>;
    fn jacobian_values(&self, x: &[f64], values: &mut [f64]);
    /// Lower-triangle `(row, column)` entries (`row ≥ column`) of the
    /// Lagrangian Hessian. Duplicates are summed.
    fn hessian_structure(&self) -> Vec<(usize, usize)>;
    /// Values of `σ ∇²f + Σᵢ yᵢ ∇²cᵢ`.
    fn hessian_values(&self, x: &[f64], obj_factor: f64, y: &[f64], values: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NlpStatus {
    Converged,
    /// Residuals met the relaxed tolerance but not the requested one.
    Acceptable,
    MaxIterations,
    LineSearchFailure,
    LinearSolverFailure,
    /// Converged to a point that minimizes infeasibility but is not feasible.
    Infeasible,
    NonFiniteEvaluation,
}

impl NlpStatus {
    pub fn is_success(self) -> bool {
        matches!(self, NlpStatus::Converged | NlpStatus::Acceptable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlpOptions {
    pub tol: f64,
    pub acceptable_tol: f64,
    /// Iterations in a row at the acceptable level before giving up early.
    pub acceptable_iter: usize,
    pub max_iter: usize,
    pub mu_init: f64,
    pub bound_push: f64,
    /// Finite-difference derivative check at the start of each solve.
    pub check_derivatives: bool,
    /// Keep the per-iteration log in the result.
    pub keep_log: bool,
}

impl Default for NlpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            acceptable_tol: 1e-5,
            acceptable_iter: 15,
            max_iter: 1000,
            mu_init: 0.1,
            bound_push: 1e-2,
            check_derivatives: cfg!(debug_assertions),
            keep_log: false,
        }
    }
}

/// Dual starting point for warm starts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WarmStart {
    pub y: Vec<f64>,
    pub z_lower: Vec<f64>,
    pub z_upper: Vec<f64>,
    /// Barrier parameter to restart from.
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.feasibility).max(self.complementarity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iter: usize,
    pub objective: f64,
    pub feasibility: f64,
    pub stationarity: f64,
    pub mu: f64,
    pub step: f64,
    pub regularization: f64,
}

impl std::fmt::Display for IterationLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:4} {:+.10e} {:.3e} {:.3e} {:.1e} {:.3e} {:.1e}",
            self.iter, self.objective, self.feasibility, self.stationarity, self.mu, self.step, self.regularization
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlpResult {
    pub x: Vec<f64>,
    /// Equality multipliers (Lagrangian `f + yᵀc`).
    pub y: Vec<f64>,
    pub z_lower: Vec<f64>,
    pub z_upper: Vec<f64>,
    pub objective: f64,
    pub status: NlpStatus,
    pub kkt: KktResiduals,
    pub iterations: usize,
    /// Final barrier parameter, useful for warm starts.
    pub mu: f64,
    pub log: Vec<IterationLog>,
}

impl NlpResult {
    pub fn warm_start(&self) -> WarmStart {
        WarmStart { y: self.y.clone(), z_lower: self.z_lower.clone(), z_upper: self.z_upper.clone(), mu: self.mu }
    }
}

/// Unscaled max-norm KKT residuals of `(x, y, z)`.
pub fn kkt_residuals<P: NlpProblem + ?Sized>(problem: &P, x: &[f64], y: &[f64], z_lower: &[f64], z_upper: &[f64]) -> KktResiduals {
    let n = problem.num_variables();
    let m = problem.num_constraints();
    let (lo, hi) = problem.bounds();
    let mut g = vec![0.0; n];
    problem.gradient(x, &mut g);
    let jac = problem.jacobian_structure();
    let mut jv = vec![0.0; jac.len()];
    problem.jacobian_values(x, &mut jv);
    for (&(r, col), v) in jac.iter().zip(&jv) {
        g[col] += v * y[r];
    }
    for i in 0..n {
        g[i] += -z_lower[i] + z_upper[i];
    }
    let mut c = vec![0.0; m];
    problem.constraints(x, &mut c);
    let mut feas = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut compl = 0.0f64;
    for i in 0..n {
        if lo[i].is_finite() {
            feas = feas.max(lo[i] - x[i]);
            compl = compl.max((z_lower[i] * (x[i] - lo[i])).abs());
        }
        if hi[i].is_finite() {
            feas = feas.max(x[i] - hi[i]);
            compl = compl.max((z_upper[i] * (hi[i] - x[i])).abs());
        }
    }
    KktResiduals { stationarity: g.iter().fold(0.0, |a, v| a.max(v.abs())), feasibility: feas, complementarity: compl }
}

#[cfg(test)]
pub(crate) mod test_problems {
    use super::NlpProblem;

    /// `min x²` subject to `x ≥ 1`.
    pub struct BoundedSquare;

    impl NlpProblem for BoundedSquare {
        fn num_variables(&self) -> usize {
            1
        }
        fn num_constraints(&self) -> usize {
            0
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![1.0], vec![f64::INFINITY])
        }
        fn objective(&self, x: &[f64]) -> f64 {
            x[0] * x[0]
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            g[0] = 2.0 * x[0];
        }
        fn constraints(&self, _x: &[f64], _c: &mut [f64]) {}
        fn jacobian_structure(&self) -> Vec<(usize, usize)> {
            vec![]
        }
        fn jacobian_values(&self, _x: &[f64], _v: &mut [f64]) {}
        fn hessian_structure(&self) -> Vec<(usize, usize)> {
            vec![(0, 0)]
        }
        fn hessian_values(&self, _x: &[f64], s: f64, _y: &[f64], v: &mut [f64]) {
            v[0] = 2.0 * s;
        }
    }

    /// Bounded Rosenbrock with an equality: `min (1−x)² + 100(y−x²)²`
    /// subject to `x + y = c`, `x ≤ ub`.
    pub struct ConstrainedRosenbrock {
        pub sum: f64,
        pub x_max: f64,
    }

    impl NlpProblem for ConstrainedRosenbrock {
        fn num_variables(&self) -> usize {
            2
        }
        fn num_constraints(&self) -> usize {
            1
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![f64::NEG_INFINITY, f64::NEG_INFINITY], vec![self.x_max, f64::INFINITY])
        }
        fn objective(&self, v: &[f64]) -> f64 {
            (1.0 - v[0]).powi(2) + 100.0 * (v[1] - v[0] * v[0]).powi(2)
        }
        fn gradient(&self, v: &[f64], g: &mut [f64]) {
            let r = v[1] - v[0] * v[0];
            g[0] = -2.0 * (1.0 - v[0]) - 400.0 * v[0] * r;
            g[1] = 200.0 * r;
        }
        fn constraints(&self, v: &[f64], c: &mut [f64]) {
            c[0] = v[0] + v[1] - self.sum;
        }
        fn jacobian_structure(&self) -> Vec<(usize, usize)> {
            vec![(0, 0), (0, 1)]
        }
        fn jacobian_values(&self, _v: &[f64], j: &mut [f64]) {
            j[0] = 1.0;
            j[1] = 1.0;
        }
        fn hessian_structure(&self) -> Vec<(usize, usize)> {
            vec![(0, 0), (1, 0), (1, 1)]
        }
        fn hessian_values(&self, v: &[f64], s: f64, _y: &[f64], h: &mut [f64]) {
            h[0] = s * (2.0 - 400.0 * (v[1] - 3.0 * v[0] * v[0]));
            h[1] = s * (-400.0 * v[0]);
            h[2] = s * 200.0;
        }
    }
}
