//! Checks shared by the property suites and the acceptance harness.
#![allow(dead_code)]

use nalgebra::DMatrix;
use reorient::collocation::lgr;
use reorient::dynamics::{rates, state_jacobian, ControlVec, StateVec};
use reorient::pmp::{costate_rates, hamiltonian_raw, jet, singular_control_general, Costate};
use reorient::structure::{bbsoc_solve, BbsocOptions, BbsocSolution};
use reorient::{builtin_maneuver, Maneuver, SpacecraftModel, State, TorqueMode};

pub fn options() -> BbsocOptions {
    let mut o = BbsocOptions::default();
    o.nlp.check_derivatives = false;
    o
}

pub fn maneuver(name: &str, mode: Option<TorqueMode>) -> Maneuver {
    let mut m = builtin_maneuver(name).expect("built-in maneuver");
    if let Some(mode) = mode {
        m.model = m.model.with_torque_mode(mode);
    }
    m
}

pub fn solve(name: &str, mode: Option<TorqueMode>) -> (Maneuver, BbsocSolution) {
    let m = maneuver(name, mode);
    let s = bbsoc_solve(&m, &options()).unwrap_or_else(|f| panic!("{name}: {f}"));
    (m, s)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Largest relative gap between the costate rates and `−∂H/∂y` by central
/// differences.
pub fn costate_fd_error(a: f64, y: &StateVec, lam: &StateVec, u: &ControlVec) -> f64 {
    let rates = costate_rates(a, y, lam);
    let h = 1e-6;
    (0..5)
        .map(|k| {
            let (mut yp, mut ym) = (*y, *y);
            yp[k] += h;
            ym[k] -= h;
            let fd = -(hamiltonian_raw(a, &yp, u, lam) - hamiltonian_raw(a, &ym, u, lam)) / (2.0 * h);
            rel(rates[k], fd)
        })
        .fold(0.0, f64::max)
}

/// Largest relative gap between the state Jacobian (and the identity
/// control Jacobian) and central differences of the rates.
pub fn jacobian_fd_error(a: f64, y: &StateVec, u: &ControlVec) -> f64 {
    let jac = state_jacobian(a, y);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for k in 0..5 {
        let (mut yp, mut ym) = (*y, *y);
        yp[k] += h;
        ym[k] -= h;
        let (fp, fm) = (rates(a, &yp, u), rates(a, &ym, u));
        for i in 0..5 {
            worst = worst.max(rel(jac[i][k], (fp[i] - fm[i]) / (2.0 * h)));
        }
    }
    for j in 0..3 {
        let (mut up, mut um) = (*u, *u);
        up[j] += h;
        um[j] -= h;
        let (fp, fm) = (rates(a, y, &up), rates(a, y, &um));
        for i in 0..5 {
            let exact = if i == j { 1.0 } else { 0.0 };
            worst = worst.max(rel(exact, (fp[i] - fm[i]) / (2.0 * h)));
        }
    }
    worst
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v)
}

fn poly_derivative(c: &[f64], x: f64) -> f64 {
    c.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, v)| acc * x + k as f64 * v)
}

/// Quadrature error of the `n`-point Radau rule on the polynomial with
/// coefficients `c` (degree at most `2n − 2` is integrated exactly).
pub fn quadrature_error(n: usize, c: &[f64]) -> f64 {
    let r = lgr::rule(n);
    let q: f64 = r.points.iter().zip(&r.weights).map(|(&x, w)| w * poly(c, x)).sum();
    let exact: f64 = c.iter().enumerate().map(|(k, v)| if k % 2 == 0 { 2.0 * v / (k as f64 + 1.0) } else { 0.0 }).sum();
    (q - exact).abs() / c.iter().map(|v| v.abs()).sum::<f64>().max(1.0)
}

/// Differentiation error of the `n`-point rule on a polynomial of degree at
/// most `n` given by `c`, at the collocation points.
pub fn differentiation_error(n: usize, c: &[f64]) -> f64 {
    let r = lgr::rule(n);
    let values: Vec<f64> = r.support().iter().map(|&x| poly(c, x)).collect();
    let scale = c.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    (0..n)
        .map(|i| {
            let d: f64 = (0..=n).map(|k| r.d(i, k) * values[k]).sum();
            (d - poly_derivative(c, r.points[i])).abs() / scale
        })
        .fold(0.0, f64::max)
}

/// `[g₁, ġ₁, g̈₁, g⃛₁]` as a linear map of `(λ₁, λ₂, λ₄, λ₅)`; `λ₃` does
/// not enter in two-torque mode.
fn singular_conditions(a: f64, y: &StateVec, u: &ControlVec) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(4, 4);
    for (col, k) in [0, 1, 3, 4].into_iter().enumerate() {
        let mut e = [0.0; 5];
        e[k] = 1.0;
        for (row, v) in jet::switching_derivatives(a, y, &e, u, 0, 3).iter().enumerate() {
            m[(row, col)] = *v;
        }
    }
    m
}

/// Places `(y, λ)` on a singular arc of `u₁`, where `g₁` and its first
/// three derivatives vanish: `x₂` is solved for so that the conditions
/// admit a nonzero costate, which is then their null vector. Returns
/// `|d⁴g₁/dt⁴|` under the singular control, relative to the magnitude of its
/// terms, or `None` when no such point is bracketed or the law is
/// degenerate there.
pub fn singular_fourth_derivative(a: f64, y: &StateVec, u2: f64) -> Option<f64> {
    let mut u: ControlVec = [0.0, u2, 0.0];
    let det = |x2: f64| {
        let mut z = *y;
        z[4] = x2;
        singular_conditions(a, &z, &u).determinant()
    };
    let grid: Vec<f64> = (0..=120).map(|i| -3.0 + 0.05 * i as f64).collect();
    let (mut lo, mut hi) = grid.windows(2).map(|w| (w[0], w[1])).find(|&(l, h)| det(l) * det(h) < 0.0)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if det(lo) * det(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut y = *y;
    y[4] = 0.5 * (lo + hi);
    let svd = singular_conditions(a, &y, &u).svd(false, true);
    let vt = svd.v_t.expect("right singular vectors");
    let (idx, _) = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("four values");
    let v: Vec<f64> = (0..4).map(|k| vt[(idx, k)]).collect();
    let lam: StateVec = [v[0], v[1], 0.0, v[2], v[3]];
    let model = SpacecraftModel::with_default_bounds(a, TorqueMode::TwoTorque).ok()?;
    let lam_dot = costate_rates(a, &y, &lam);
    let law = singular_control_general(&model, &State::from_array(y), &Costate::from_array(lam), &lam_dot, 0, &u).ok()?;
    u[0] = law;
    let d = jet::switching_derivatives(a, &y, &lam, &u, 0, 4);
    let mut v = u;
    v[0] = 0.0;
    let scale = jet::switching_derivatives(a, &y, &lam, &v, 0, 4)[4].abs().max(1.0);
    Some(d[4].abs() / scale)
}
