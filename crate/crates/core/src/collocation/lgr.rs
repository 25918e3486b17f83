//! Legendre–Gauss–Radau nodes, weights, differentiation matrices and
//! barycentric interpolation on the support set `{τ₀, …, τ_{n−1}, +1}`.

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 1;
pub const MAX_POINTS: usize = 12;
/// Largest rule kept in the cache; the error estimator uses `n + 1`.
const CACHE_POINTS: usize = MAX_POINTS + 4;

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        let d2 = d0 + (2.0 * kf + 1.0) * p1;
        (p0, p1) = (p1, p2);
        (d0, d1) = (d1, d2);
    }
    (p1, d1)
}

/// One Radau rule with everything the transcription needs.
#[derive(Debug, Clone, PartialEq)]
pub struct LgrRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// Row-major `n × (n+1)` differentiation matrix.
    pub diff: Vec<f64>,
    /// Barycentric weights of the `n + 1` support points.
    pub bary: Vec<f64>,
}

impl LgrRule {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// `D[i][k]`.
    #[inline]
    pub fn d(&self, i: usize, k: usize) -> f64 {
        self.diff[i * (self.n() + 1) + k]
    }

    /// Support points: the collocation points followed by `+1`.
    pub fn support(&self) -> Vec<f64> {
        let mut s = self.points.clone();
        s.push(1.0);
        s
    }

    /// Values of the `n + 1` Lagrange basis polynomials at `tau`.
    pub fn basis(&self, tau: f64) -> Vec<f64> {
        let support = self.support();
        barycentric_basis(&support, &self.bary, tau)
    }

    /// Interpolates support-point values `v` at `tau`.
    pub fn interpolate(&self, v: &[f64], tau: f64) -> f64 {
        self.basis(tau).iter().zip(v).map(|(b, x)| b * x).sum()
    }
}

fn build_rule(n: usize) -> LgrRule {
    let points = radau_points(n);
    let nf = n as f64;
    let weights: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if i == 0 {
                2.0 / (nf * nf)
            } else {
                let p = legendre(n - 1, t).0;
                (1.0 - t) / (nf * nf * p * p)
            }
        })
        .collect();
    let mut support = points.clone();
    support.push(1.0);
    let bary = barycentric_weights(&support);
    let diff = differentiation_matrix(&points);
    LgrRule { points, weights, diff, bary }
}

fn radau_points(n: usize) -> Vec<f64> {
    let mut pts = vec![-1.0];
    for k in 1..n {
        let mut x = -(2.0 * std::f64::consts::PI * k as f64 / (2 * n - 1) as f64).cos();
        for _ in 0..100 {
            let (pa, da) = legendre(n - 1, x);
            let (pb, db) = legendre(n, x);
            // deflate the known root at −1
            let q = (pa + pb) / (1.0 + x);
            let dq = ((da + db) - q) / (1.0 + x);
            let step = q / dq;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        pts.push(x);
    }
    pts.sort_by(f64::total_cmp);
    pts
}

pub fn barycentric_weights(support: &[f64]) -> Vec<f64> {
    (0..support.len())
        .map(|k| {
            let prod: f64 = (0..support.len()).filter(|&m| m != k).map(|m| support[k] - support[m]).product();
            1.0 / prod
        })
        .collect()
}

pub fn barycentric_basis(support: &[f64], bary: &[f64], tau: f64) -> Vec<f64> {
    if let Some(k) = support.iter().position(|&s| s == tau) {
        let mut out = vec![0.0; support.len()];
        out[k] = 1.0;
        return out;
    }
    let terms: Vec<f64> = support.iter().zip(bary).map(|(s, b)| b / (tau - s)).collect();
    let total: f64 = terms.iter().sum();
    terms.into_iter().map(|t| t / total).collect()
}

/// Radau points and weights for `1 ≤ n ≤ 12`.
pub fn lgr_points_weights(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(MIN_POINTS..=MAX_POINTS).contains(&n) {
        return Err(Error::RuleOutOfRange(n));
    }
    let r = rule(n);
    Ok((r.points.clone(), r.weights.clone()))
}

/// Differentiation matrix (`n × (n+1)`, row-major) for collocation points
/// `points`, with `+1` appended to the support set.
pub fn differentiation_matrix(points: &[f64]) -> Vec<f64> {
    let mut support = points.to_vec();
    support.push(1.0);
    let w = barycentric_weights(&support);
    let n = points.len();
    let mut d = vec![0.0; n * (n + 1)];
    for i in 0..n {
        let mut diag = 0.0;
        for k in 0..=n {
            if k != i {
                let v = (w[k] / w[i]) / (support[i] - support[k]);
                d[i * (n + 1) + k] = v;
                diag -= v;
            }
        }
        d[i * (n + 1) + i] = diag;
    }
    d
}

/// Cached rule for `1 ≤ n ≤ 16`.
pub fn rule(n: usize) -> &'static LgrRule {
    static CACHE: OnceLock<Vec<LgrRule>> = OnceLock::new();
    let rules = CACHE.get_or_init(|| (1..=CACHE_POINTS).map(build_rule).collect());
    assert!((1..=CACHE_POINTS).contains(&n), "LGR rule size {n} not cached");
    &rules[n - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn small_rules() {
        let (p, w) = lgr_points_weights(1).unwrap();
        assert_eq!(p, vec![-1.0]);
        assert_abs_diff_eq!(w[0], 2.0, epsilon = 1e-15);
        let (p, w) = lgr_points_weights(2).unwrap();
        assert_abs_diff_eq!(p[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 1.5, epsilon = 1e-15);
    }

    #[test]
    fn out_of_range() {
        assert_eq!(lgr_points_weights(0), Err(Error::RuleOutOfRange(0)));
        assert_eq!(lgr_points_weights(13), Err(Error::RuleOutOfRange(13)));
    }

    #[test]
    fn degree_eight_with_five_points() {
        let (p, w) = lgr_points_weights(5).unwrap();
        let q: f64 = p.iter().zip(&w).map(|(t, w)| w * t.powi(8)).sum();
        assert_abs_diff_eq!(q, 2.0 / 9.0, epsilon = 1e-14);
    }

    #[test]
    fn differentiation_examples() {
        let r = rule(2);
        let s = r.support();
        for i in 0..2 {
            let c: f64 = (0..3).map(|k| r.d(i, k)).sum();
            assert_abs_diff_eq!(c, 0.0, epsilon = 1e-14);
            let lin: f64 = (0..3).map(|k| r.d(i, k) * s[k]).sum();
            assert_abs_diff_eq!(lin, 1.0, epsilon = 1e-14);
        }
        let r = rule(4);
        let s = r.support();
        for i in 0..4 {
            let d: f64 = (0..5).map(|k| r.d(i, k) * s[k].powi(3)).sum();
            assert_abs_diff_eq!(d, 3.0 * s[i] * s[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let r = rule(6);
        let v: Vec<f64> = r.support().iter().map(|t| t.powi(6) - 2.0 * t).collect();
        let t = 0.123;
        assert_abs_diff_eq!(r.interpolate(&v, t), t.powi(6) - 2.0 * t, epsilon = 1e-13);
    }
}
