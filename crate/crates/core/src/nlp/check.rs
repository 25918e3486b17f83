//! Central-difference checks of user-supplied derivatives.

use serde::{Deserialize, Serialize};

use super::NlpProblem;

/// Largest relative errors `|analytic − fd| / max(1, |fd|)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub gradient: f64,
    pub jacobian: f64,
    pub hessian: f64,
}

impl DerivativeReport {
    pub fn max(&self) -> f64 {
        self.gradient.max(self.jacobian).max(self.hessian)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Compares gradient, Jacobian and Lagrangian Hessian (with multipliers `y`)
/// against central differences at `x`.
pub fn check_derivatives<P: NlpProblem + ?Sized>(problem: &P, x: &[f64], y: &[f64]) -> DerivativeReport {
    let n = problem.num_variables();
    let m = problem.num_constraints();
    let jac = problem.jacobian_structure();
    let hess = problem.hessian_structure();

    let mut grad = vec![0.0; n];
    problem.gradient(x, &mut grad);
    let mut jv = vec![0.0; jac.len()];
    problem.jacobian_values(x, &mut jv);
    let mut hv = vec![0.0; hess.len()];
    problem.hessian_values(x, 1.0, y, &mut hv);

    // dense column lookups
    let mut jac_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (&(r, c), v) in jac.iter().zip(&jv) {
        jac_cols[c].push((r, *v));
    }
    let mut hess_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (&(r, c), v) in hess.iter().zip(&hv) {
        hess_cols[c].push((r, *v));
        if r != c {
            hess_cols[r].push((c, *v));
        }
    }

    let lag_grad = |x: &[f64]| {
        let mut g = vec![0.0; n];
        problem.gradient(x, &mut g);
        let mut v = vec![0.0; jac.len()];
        problem.jacobian_values(x, &mut v);
        for (&(r, c), val) in jac.iter().zip(&v) {
            g[c] += y[r] * val;
        }
        g
    };

    let mut report = DerivativeReport::default();
    let mut xp = x.to_vec();
    let mut cp = vec![0.0; m];
    let mut cm = vec![0.0; m];
    for i in 0..n {
        let h = 1e-6 * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let fp = problem.objective(&xp);
        problem.constraints(&xp, &mut cp);
        let gp = lag_grad(&xp);
        xp[i] = x[i] - h;
        let fm = problem.objective(&xp);
        problem.constraints(&xp, &mut cm);
        let gm = lag_grad(&xp);
        xp[i] = x[i];

        report.gradient = report.gradient.max(rel(grad[i], (fp - fm) / (2.0 * h)));
        let mut col = vec![0.0; m];
        for &(r, v) in &jac_cols[i] {
            col[r] += v;
        }
        for r in 0..m {
            report.jacobian = report.jacobian.max(rel(col[r], (cp[r] - cm[r]) / (2.0 * h)));
        }
        let mut hcol = vec![0.0; n];
        for &(r, v) in &hess_cols[i] {
            hcol[r] += v;
        }
        for r in 0..n {
            report.hessian = report.hessian.max(rel(hcol[r], (gp[r] - gm[r]) / (2.0 * h)));
        }
    }
    report
}
