//! Truncated Taylor series of the state/costate flow.
//!
//! The dynamics and costate equations are polynomial, so their Taylor
//! coefficients follow from Cauchy products. With the controls held
//! constant this yields exact time derivatives of any switching function,
//! independent of the closed-form expressions in the parent module.

use crate::dynamics::{ControlVec, StateVec};

type Series = Vec<f64>;

fn mul(a: &[f64], b: &[f64]) -> Series {
    let n = a.len().min(b.len());
    (0..n).map(|k| (0..=k).map(|i| a[i] * b[k - i]).sum()).collect()
}

fn lin(terms: &[(f64, &Series)], len: usize) -> Series {
    let mut out = vec![0.0; len];
    for (c, s) in terms {
        for (o, v) in out.iter_mut().zip(s.iter()) {
            *o += c * v;
        }
    }
    out
}

fn constant(v: f64, len: usize) -> Series {
    let mut s = vec![0.0; len];
    s[0] = v;
    s
}

/// Right-hand side of the joint state/costate system on truncated series.
fn flow(a: f64, u: &ControlVec, z: &[Series; 10]) -> [Series; 10] {
    let len = z[0].len();
    let [w1, w2, w3, x1, x2, l1, l2, _l3, l4, l5] = z;
    let one = constant(1.0, len);
    let x1x2 = mul(x1, x2);
    let x1sq = mul(x1, x1);
    let x2sq = mul(x2, x2);
    let p = lin(&[(0.5, &one), (0.5, &x1sq), (-0.5, &x2sq)], len);
    let q = lin(&[(0.5, &one), (0.5, &x2sq), (-0.5, &x1sq)], len);
    let w3w2 = mul(w3, w2);
    let w3w1 = mul(w3, w1);

    let f1 = lin(&[(a, &w3w2), (u[0], &one)], len);
    let f2 = lin(&[(-a, &w3w1), (u[1], &one)], len);
    let f3 = constant(u[2], len);
    let f4 = lin(&[(1.0, &mul(w3, x2)), (1.0, &mul(w2, &x1x2)), (1.0, &mul(w1, &p))], len);
    let f5 = lin(&[(-1.0, &mul(w3, x1)), (1.0, &mul(w1, &x1x2)), (1.0, &mul(w2, &q))], len);

    let g1 = lin(&[(a, &mul(w3, l2)), (-1.0, &mul(l4, &p)), (-1.0, &mul(l5, &x1x2))], len);
    let g2 = lin(&[(-a, &mul(w3, l1)), (-1.0, &mul(l4, &x1x2)), (-1.0, &mul(l5, &q))], len);
    let g3 = lin(&[(-a, &mul(w2, l1)), (a, &mul(w1, l2)), (-1.0, &mul(l4, x2)), (1.0, &mul(l5, x1))], len);
    let s4a = lin(&[(1.0, &mul(w2, x2)), (1.0, &mul(w1, x1))], len);
    let s4b = lin(&[(1.0, w3), (-1.0, &mul(w1, x2)), (1.0, &mul(w2, x1))], len);
    let g4 = lin(&[(-1.0, &mul(l4, &s4a)), (1.0, &mul(l5, &s4b))], len);
    let s5a = lin(&[(1.0, w3), (1.0, &mul(w2, x1)), (-1.0, &mul(w1, x2))], len);
    let g5 = lin(&[(-1.0, &mul(l4, &s5a)), (-1.0, &mul(l5, &s4a))], len);
    [f1, f2, f3, f4, f5, g1, g2, g3, g4, g5]
}

/// Taylor coefficients (up to `order`) of the joint state/costate solution
/// through `(y, λ)` under constant control `u`.
pub fn taylor_coefficients(a: f64, y: &StateVec, lam: &StateVec, u: &ControlVec, order: usize) -> [Series; 10] {
    let mut z: [Series; 10] = std::array::from_fn(|i| vec![if i < 5 { y[i] } else { lam[i - 5] }]);
    for k in 0..order {
        let f = flow(a, u, &z);
        for (zi, fi) in z.iter_mut().zip(f.iter()) {
            zi.push(fi[k] / (k as f64 + 1.0));
        }
    }
    z
}

/// Exact `d^k g_j / dt^k` for `k = 0..=order` under constant control.
/// `j` is zero-based.
pub fn switching_derivatives(a: f64, y: &StateVec, lam: &StateVec, u: &ControlVec, j: usize, order: usize) -> Vec<f64> {
    let z = taylor_coefficients(a, y, lam, u, order);
    let mut factorial = 1.0;
    z[5 + j]
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if k > 0 {
                factorial *= k as f64;
            }
            c * factorial
        })
        .collect()
}
