//! ph mesh refinement.
//!
//! The error of an interval is measured by integrating the dynamics along
//! the state and control interpolants with a Radau rule one point richer than
//! the interval's own and comparing against the state interpolant. Intervals
//! over tolerance whose state interpolant has geometrically decaying
//! Legendre coefficients get a higher degree; the rest are bisected with the
//! degree reset to the minimum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::collocation::lgr::{barycentric_basis, barycentric_weights, legendre, rule};
use crate::collocation::{CollocationProblem, DiscreteSolution, Domain, Interval, Mesh, MAX_INTERVAL_POINTS, MIN_INTERVAL_POINTS};
use crate::dynamics::{rates, StateVec, CONTROL_DIM, STATE_DIM};

/// Default relative accuracy target.
pub const DEFAULT_MESH_TOLERANCE: f64 = 1e-5;
/// Default cap on refinement rounds.
pub const DEFAULT_MAX_ROUNDS: usize = 10;
/// Largest coefficient decay ratio still treated as smooth.
pub const SMOOTH_DECAY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementPolicy {
    pub tolerance: f64,
    pub max_rounds: usize,
    pub smooth_decay: f64,
}

impl Default for RefinementPolicy {
    fn default() -> Self {
        Self { tolerance: DEFAULT_MESH_TOLERANCE, max_rounds: DEFAULT_MAX_ROUNDS, smooth_decay: SMOOTH_DECAY }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalError {
    pub domain: usize,
    /// Index of the interval inside its domain.
    pub index: usize,
    pub points: usize,
    /// Relative error of the state interpolant.
    pub error: f64,
    /// Per-degree decay ratio of the state interpolant's trailing Legendre
    /// coefficients; small means smooth.
    pub decay: f64,
}

/// Per-interval errors in mesh order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub intervals: Vec<IntervalError>,
    pub max: f64,
}

impl ErrorEstimate {
    pub fn meets(&self, tolerance: f64) -> bool {
        self.max <= tolerance
    }
}

/// Relative error of every interval of a solved problem.
pub fn estimate_error(problem: &CollocationProblem, solution: &DiscreteSolution) -> ErrorEstimate {
    let a = problem.maneuver().model.a();
    let bounds: [(f64, f64); CONTROL_DIM] = std::array::from_fn(|j| problem.maneuver().model.control_bounds(j));
    let mut per_domain = vec![0usize; problem.domain_count()];
    let mut out = Vec::with_capacity(problem.intervals().len());
    for iv in problem.intervals() {
        let n = iv.points;
        let own = rule(n);
        let nodes: Vec<StateVec> = (0..=n).map(|s| solution.states[iv.offset + s]).collect();
        let ts = solution.durations[iv.domain] * 0.5 * iv.width;

        let control_bary = barycentric_weights(&own.points);
        let m = n + 1;
        let dense = rule(m);
        let mut f = DMatrix::<f64>::zeros(m, STATE_DIM);
        let mut interp = Vec::with_capacity(m + 1);
        for (i, &tau) in dense.points.iter().enumerate() {
            let basis = own.basis(tau);
            let y: StateVec = std::array::from_fn(|c| (0..=n).map(|s| basis[s] * nodes[s][c]).sum());
            let cb = barycentric_basis(&own.points, &control_bary, tau);
            let u = std::array::from_fn(|j| {
                let v: f64 = (0..n).map(|r| cb[r] * solution.controls[iv.offset + r][j]).sum();
                v.clamp(bounds[j].0, bounds[j].1)
            });
            let rate = rates(a, &y, &u);
            for c in 0..STATE_DIM {
                f[(i, c)] = ts * rate[c];
            }
            interp.push(y);
        }
        interp.push(nodes[n]);

        // The dense rule's differentiation matrix restricted to the points
        // after −1 is invertible, which gives the Radau integration matrix.
        let dmat = DMatrix::from_fn(m, m, |i, k| dense.d(i, k + 1));
        let lu = dmat.lu();
        let scale = 1.0 + nodes.iter().flat_map(|y| y.iter()).fold(0.0f64, |acc, v| acc.max(v.abs()));
        let mut err = 0.0f64;
        for c in 0..STATE_DIM {
            let rhs = DVector::from_fn(m, |i, _| f[(i, c)]);
            let Some(integral) = lu.solve(&rhs) else {
                err = f64::INFINITY;
                break;
            };
            for k in 0..m {
                let integrated = nodes[0][c] + integral[k];
                err = err.max((integrated - interp[k + 1][c]).abs());
            }
        }
        out.push(IntervalError {
            domain: iv.domain,
            index: per_domain[iv.domain],
            points: n,
            error: err / scale,
            decay: coefficient_decay(&own.support(), &nodes, scale),
        });
        per_domain[iv.domain] += 1;
    }
    let max = out.iter().fold(0.0f64, |acc, e| acc.max(e.error));
    ErrorEstimate { intervals: out, max }
}

/// `(|a_n| / |a_{n−2}|)^{1/2}` of the Legendre expansion of the interpolant,
/// taken over the component with the slowest decay. Components whose
/// trailing coefficients sit at round-off level are ignored.
fn coefficient_decay(support: &[f64], nodes: &[StateVec], scale: f64) -> f64 {
    let n = support.len() - 1;
    if n < 2 {
        return 1.0;
    }
    let vander = DMatrix::from_fn(n + 1, n + 1, |i, k| legendre(k, support[i]).0);
    let lu = vander.lu();
    let mut worst = 0.0f64;
    for c in 0..STATE_DIM {
        let v = DVector::from_fn(n + 1, |i, _| nodes[i][c]);
        let Some(coef) = lu.solve(&v) else { return 1.0 };
        let hi = coef[n].abs().max(coef[n - 1].abs());
        let lo = coef[n - 2].abs().max(coef[n - 1].abs());
        if hi <= 1e-13 * scale {
            continue;
        }
        worst = worst.max(if lo > 0.0 { (hi / lo).sqrt() } else { 1.0 });
    }
    worst
}

/// Refines every interval whose error exceeds `tolerance`. Domain
/// boundaries never move. Returns the mesh unchanged when all intervals pass.
pub fn refine(mesh: &Mesh, estimate: &ErrorEstimate, policy: &RefinementPolicy) -> Mesh {
    let mut domains: Vec<Domain> = mesh.domains.iter().map(|_| Domain { intervals: Vec::new() }).collect();
    let lookup = |d: usize, k: usize| estimate.intervals.iter().find(|e| e.domain == d && e.index == k);
    for (d, dom) in mesh.domains.iter().enumerate() {
        for (k, iv) in dom.intervals.iter().enumerate() {
            let out = &mut domains[d].intervals;
            let Some(e) = lookup(d, k).filter(|e| e.error > policy.tolerance) else {
                out.push(*iv);
                continue;
            };
            let n = iv.points;
            let smooth = e.decay <= policy.smooth_decay;
            let raise = degree_increase(e.error, policy.tolerance, n);
            if smooth && n + raise <= MAX_INTERVAL_POINTS {
                out.push(Interval { points: n + raise, ..*iv });
            } else {
                let mid = 0.5 * (iv.start + iv.end);
                out.push(Interval { start: iv.start, end: mid, points: MIN_INTERVAL_POINTS });
                out.push(Interval { start: mid, end: iv.end, points: MIN_INTERVAL_POINTS });
            }
        }
    }
    Mesh { domains }
}

/// Raises every interval by `by` points; intervals that would pass the
/// degree cap are bisected at the minimum degree instead.
pub fn raise_degree(mesh: &Mesh, by: usize) -> Mesh {
    let domains = mesh
        .domains
        .iter()
        .map(|dom| {
            let mut intervals = Vec::with_capacity(dom.intervals.len());
            for iv in &dom.intervals {
                if iv.points + by <= MAX_INTERVAL_POINTS {
                    intervals.push(Interval { points: iv.points + by, ..*iv });
                } else {
                    let mid = 0.5 * (iv.start + iv.end);
                    intervals.push(Interval { start: iv.start, end: mid, points: MIN_INTERVAL_POINTS });
                    intervals.push(Interval { start: mid, end: iv.end, points: MIN_INTERVAL_POINTS });
                }
            }
            Domain { intervals }
        })
        .collect();
    Mesh { domains }
}

/// Degree increase predicted to bring `error` down to `tolerance`, assuming
/// the error falls by a factor `n` per added point.
pub fn degree_increase(error: f64, tolerance: f64, n: usize) -> usize {
    let p = ((error / tolerance).ln() / (n as f64).ln()).ceil();
    if p.is_finite() {
        (p as usize).max(1)
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(points: usize) -> Mesh {
        Mesh { domains: vec![Domain { intervals: vec![Interval { start: 0.0, end: 1.0, points }] }] }
    }

    fn estimate(error: f64, decay: f64, points: usize) -> ErrorEstimate {
        ErrorEstimate { intervals: vec![IntervalError { domain: 0, index: 0, points, error, decay }], max: error }
    }

    #[test]
    fn passing_mesh_is_unchanged() {
        let mesh = Mesh::uniform(4, 3).unwrap();
        let est = ErrorEstimate {
            intervals: (0..4).map(|k| IntervalError { domain: 0, index: k, points: 3, error: 1e-7, decay: 0.5 }).collect(),
            max: 1e-7,
        };
        assert_eq!(refine(&mesh, &est, &RefinementPolicy::default()), mesh);
    }

    #[test]
    fn smooth_interval_is_p_refined() {
        let out = refine(&single(3), &estimate(1e-4, 0.01, 3), &RefinementPolicy::default());
        assert_eq!(out.domains[0].intervals.len(), 1);
        assert!(out.domains[0].intervals[0].points > 3);
    }

    #[test]
    fn rough_interval_is_split() {
        let out = refine(&single(7), &estimate(1e-2, 0.6, 7), &RefinementPolicy::default());
        let ivs = &out.domains[0].intervals;
        assert_eq!(ivs.len(), 2);
        assert!(ivs.iter().all(|i| i.points == MIN_INTERVAL_POINTS));
        assert_eq!(ivs[0].end, 0.5);
        out.validate().unwrap();
    }

    #[test]
    fn degree_cap_forces_split() {
        let out = refine(&single(12), &estimate(1e-3, 0.01, 12), &RefinementPolicy::default());
        assert_eq!(out.domains[0].intervals.len(), 2);
    }

    #[test]
    fn raise_degree_respects_cap() {
        let out = raise_degree(&single(11), 2);
        assert_eq!(out.domains[0].intervals.len(), 2);
        let out = raise_degree(&single(3), 2);
        assert_eq!(out.domains[0].intervals[0].points, 5);
    }

    #[test]
    fn degree_increase_matches_decay_model() {
        assert_eq!(degree_increase(1e-3, 1e-5, 10), 2);
        assert_eq!(degree_increase(2e-5, 1e-5, 3), 1);
    }
}
