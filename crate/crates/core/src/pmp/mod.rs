//! First-order optimality machinery for the minimum-time problem.
//!
//! The Hamiltonian is `H = λᵀ f(Y, u)` (the running cost of a minimum-time
//! problem is absorbed by the terminal-time transversality `H(t_f) = −1`).
//! Controls enter linearly with coefficients `g_j = λ_j`, the switching
//! functions.
//!
//! # Singular laws
//!
//! In the five-state model the costates paired with `(x₁, x₂)` are
//! `(λ₄, λ₅)`, and differentiating `g₁` gives
//!
//! ```text
//! d²g₁/dt² = ω₃(1 + a)λ̇₂ + ω₂(λ₄x₂ − λ₅x₁) + aλ₂u₃        (λ₁ = 0)
//! ```
//!
//! so the kinematic term of the singular denominator is `(λ₄x₂ − λ₅x₁)`.
//! The `u₁` law equals `−A/B` for `d⁴g₁/dt⁴ = A + B u₁` at points where
//! `g₁ = ġ₁ = g̈₁ = g⃛₁ = 0`; the tests check this against the Taylor jets
//! in [`jet`]. The `u₂` law is the image of the `u₁` law under the symmetry
//! `(1 ↔ 2, ω₃ → −ω₃)` of the equations of motion.
//!
//! Both closed forms assume `u₃ = 0` (constant spin). When a nonzero `u₃` is
//! supplied the quotient is formed from the exact jet derivatives instead.

pub mod jet;

use serde::{Deserialize, Serialize};

use crate::dynamics::{rates, state_jacobian, ControlVec, Maneuver, SpacecraftModel, State, StateVec};
use crate::error::{Error, Result};
use crate::structure::{ArcKind, ControlStructure};
use crate::trajectory::Trajectory;

/// Denominators below this magnitude make the singular quotient meaningless.
pub const SINGULAR_DENOMINATOR_TOL: f64 = 1e-8;

/// Relative zero threshold for switching functions.
pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Costate {
    pub lam1: f64,
    pub lam2: f64,
    pub lam3: f64,
    pub lam4: f64,
    pub lam5: f64,
}

impl Costate {
    pub fn new(lam1: f64, lam2: f64, lam3: f64, lam4: f64, lam5: f64) -> Self {
        Self { lam1, lam2, lam3, lam4, lam5 }
    }

    pub fn to_array(self) -> StateVec {
        [self.lam1, self.lam2, self.lam3, self.lam4, self.lam5]
    }

    pub fn from_array(l: StateVec) -> Self {
        Self::new(l[0], l[1], l[2], l[3], l[4])
    }
}

#[inline]
pub fn hamiltonian_raw(a: f64, y: &StateVec, u: &ControlVec, lam: &StateVec) -> f64 {
    let f = rates(a, y, u);
    f.iter().zip(lam).map(|(fi, li)| fi * li).sum()
}

/// `λ̇ = −(∂H/∂Y)ᵀ` on raw arrays.
#[inline]
pub fn costate_rates(a: f64, y: &StateVec, lam: &StateVec) -> StateVec {
    let [w1, w2, w3, x1, x2] = *y;
    let [l1, l2, _l3, l4, l5] = *lam;
    let p = 0.5 * (1.0 + x1 * x1 - x2 * x2);
    let q = 0.5 * (1.0 + x2 * x2 - x1 * x1);
    [
        l2 * a * w3 - l4 * p - l5 * x1 * x2,
        -l1 * a * w3 - l4 * x1 * x2 - l5 * q,
        -l1 * a * w2 + l2 * a * w1 - l4 * x2 + l5 * x1,
        -l4 * (w2 * x2 + w1 * x1) + l5 * (w3 - w1 * x2 + w2 * x1),
        -l4 * (w3 + w2 * x1 - w1 * x2) - l5 * (w1 * x1 + w2 * x2),
    ]
}

pub fn hamiltonian(model: &SpacecraftModel, y: &State, u: &crate::dynamics::Control, lam: &Costate) -> f64 {
    hamiltonian_raw(model.a(), &y.to_array(), &u.to_array(), &lam.to_array())
}

pub fn costate_derivative(model: &SpacecraftModel, y: &State, lam: &Costate) -> StateVec {
    costate_rates(model.a(), &y.to_array(), &lam.to_array())
}

/// `∂H/∂Y` assembled from the dynamics Jacobian; used to cross-check
/// [`costate_rates`].
pub fn hamiltonian_state_gradient(a: f64, y: &StateVec, lam: &StateVec) -> StateVec {
    let jac = state_jacobian(a, y);
    let mut g = [0.0; 5];
    for (k, row) in jac.iter().enumerate() {
        for i in 0..5 {
            g[i] += lam[k] * row[i];
        }
    }
    g
}

pub fn switching_functions(lam: &Costate) -> [f64; 3] {
    [lam.lam1, lam.lam2, lam.lam3]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BangDecision {
    Min,
    Max,
    SingularCandidate,
}

impl BangDecision {
    /// Control value for a bang decision; `None` for singular candidates.
    pub fn value(self, model: &SpacecraftModel) -> Option<f64> {
        match self {
            BangDecision::Min => Some(model.u_min()),
            BangDecision::Max => Some(model.u_max()),
            BangDecision::SingularCandidate => None,
        }
    }
}

/// Minimum-principle selection from the sign of a switching function.
pub fn bang_control(g: f64, zero_threshold: f64) -> BangDecision {
    if g.abs() <= zero_threshold {
        BangDecision::SingularCandidate
    } else if g > 0.0 {
        BangDecision::Min
    } else {
        BangDecision::Max
    }
}

/// Which special case of the singular analysis applies at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SingularCase {
    /// `a ≠ 0`, `ω₃ ≠ 0`: second-order arc, closed-form law.
    General,
    /// `ω₃ = 0`: the law collapses to `u₁ = 0` on `ω₁ = x₁ = 0`.
    Nonspinning,
    /// `a = 0`: every derivative of `g₁` vanishes; no law exists.
    InfiniteOrder,
}

pub fn singular_case(model: &SpacecraftModel, y: &StateVec) -> SingularCase {
    if model.a() == 0.0 {
        SingularCase::InfiniteOrder
    } else if y[2].abs() < 1e-12 {
        SingularCase::Nonspinning
    } else {
        SingularCase::General
    }
}

fn general_law_parts(a: f64, y: &StateVec, lam: &StateVec, lam_dot: &StateVec, j: usize, other: &ControlVec) -> (f64, f64) {
    let [w1, w2, w3, x1, x2] = *y;
    let kin = lam[3] * x2 - lam[4] * x1;
    if j == 0 {
        let u2 = other[1];
        let ld = lam_dot[1];
        let num = ld * (2.0 * a * w3.powi(3) * (a + 1.0).powi(2) - 2.0 * a * w3 * w1 * w1 + 2.0 * a * w3 * w2 * w2 + 2.0 * w1 * u2)
            - w2 * lam[1] * (4.0 * a * a * w3 * w3 * w1 - 3.0 * a * w3 * u2);
        let den = ld * w2 - w3 * (1.0 + 2.0 * a) * kin;
        (num, den)
    } else {
        let u1 = other[0];
        let ld = lam_dot[0];
        let num = ld * (-2.0 * a * w3.powi(3) * (a + 1.0).powi(2) + 2.0 * a * w3 * w2 * w2 - 2.0 * a * w3 * w1 * w1 + 2.0 * w2 * u1)
            - w1 * lam[0] * (4.0 * a * a * w3 * w3 * w2 + 3.0 * a * w3 * u1);
        let den = ld * w1 - w3 * (1.0 + 2.0 * a) * kin;
        (num, den)
    }
}

/// Singular value of control `j` (zero-based, `0` or `1`) when the other
/// controls ride their bang values `other` (entry `j` is ignored).
///
/// `lam_dot` must be the exact costate rate from [`costate_derivative`].
pub fn singular_control_general(
    model: &SpacecraftModel,
    y: &State,
    lam: &Costate,
    lam_dot: &StateVec,
    j: usize,
    other: &ControlVec,
) -> Result<f64> {
    assert!(j < 2, "only u1 or u2 can be singular");
    let ya = y.to_array();
    if model.a() == 0.0 || ya[2] == 0.0 {
        return Err(Error::SingularLawNotApplicable);
    }
    let la = lam.to_array();
    if other[2] == 0.0 {
        let (num, den) = general_law_parts(model.a(), &ya, &la, lam_dot, j, other);
        if den.abs() < SINGULAR_DENOMINATOR_TOL {
            return Err(Error::SingularLawDegenerate(den.abs()));
        }
        Ok(-num / den)
    } else {
        let (a_coef, b_coef) = fourth_derivative_affine(model.a(), &ya, &la, j, other);
        if b_coef.abs() < SINGULAR_DENOMINATOR_TOL {
            return Err(Error::SingularLawDegenerate(b_coef.abs()));
        }
        Ok(-a_coef / b_coef)
    }
}

/// `d⁴g_j/dt⁴ = A + B u_j` from the Taylor jets, returned as `(A, B)`.
pub fn fourth_derivative_affine(a: f64, y: &StateVec, lam: &StateVec, j: usize, other: &ControlVec) -> (f64, f64) {
    let mut u = *other;
    u[j] = 0.0;
    let d0 = jet::switching_derivatives(a, y, lam, &u, j, 4)[4];
    u[j] = 1.0;
    let d1 = jet::switching_derivatives(a, y, lam, &u, j, 4)[4];
    (d0, d1 - d0)
}

/// Singular value of `u₁` for a nonspinning body.
pub fn singular_control_nonspinning() -> f64 {
    0.0
}

/// `max(|ω₁|, |x₁|)`, which must vanish along a nonspinning singular arc.
pub fn nonspinning_arc_condition(y: &StateVec) -> f64 {
    y[0].abs().max(y[3].abs())
}

/// The reduced switching-function derivatives of the nonspinning case for a
/// singular `u₁`, in closed form: `[ġ₁, g̈₁, g⃛₁, g⁗₁]`.
pub fn nonspinning_switching_derivatives(y: &StateVec, lam: &StateVec, lam_dot: &StateVec, u1: f64) -> [f64; 4] {
    let [w1, w2, _w3, x1, x2] = *y;
    let p = 0.5 * (1.0 + x1 * x1 - x2 * x2);
    [-lam[3] * p - lam[4] * x1 * x2, w2 * (lam[3] * x2 - lam[4] * x1), w1 * w2 * lam_dot[1], u1 * w2 * lam_dot[1]]
}

/// Generalized Legendre–Clebsch quantity for singular control `j`
/// (zero-based); nonnegative values are consistent with optimality.
pub fn legendre_clebsch(model: &SpacecraftModel, y: &State, lam: &Costate, lam_dot: &StateVec, j: usize) -> f64 {
    let ya = y.to_array();
    let la = lam.to_array();
    match singular_case(model, &ya) {
        SingularCase::Nonspinning => {
            if j == 0 {
                ya[1] * lam_dot[1]
            } else {
                ya[0] * lam_dot[0]
            }
        }
        _ => general_law_parts(model.a(), &ya, &la, lam_dot, j, &[0.0; 3]).1,
    }
}

/// Sampled first-order optimality residuals of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmpResiduals {
    /// `max |H(t) + 1|`.
    pub hamiltonian_error: f64,
    /// `max |H(t) − H(t_f)|`.
    pub hamiltonian_variation: f64,
    /// `max ‖λ̇ + (∂H/∂Y)ᵀ‖∞`, with `λ̇` from finite differences of the samples.
    pub costate_defect: f64,
    /// `max |λ_k(t_f)|` over free terminal components.
    pub transversality_error: f64,
    /// Fraction of samples whose control contradicts the sign of `g_j`.
    pub switching_consistency: f64,
    /// Minimum Legendre–Clebsch quantity on singular arcs, if any.
    pub legendre_clebsch_min: Option<f64>,
}

/// Evaluates [`PmpResiduals`] over the samples of `trajectory`. Controls
/// that are pinned by the torque mode are skipped; singular arcs (from
/// `structure`) are excluded from the sign check and feed the
/// Legendre–Clebsch minimum instead.
pub fn pmp_residuals(maneuver: &Maneuver, trajectory: &Trajectory, structure: Option<&ControlStructure>) -> Result<PmpResiduals> {
    if !trajectory.has_costates() {
        return Err(Error::MissingCostates);
    }
    let model = &maneuver.model;
    let a = model.a();
    let pts = &trajectory.points;
    let lam = |i: usize| pts[i].costate.expect("checked above");

    let hs: Vec<f64> = pts.iter().map(|p| hamiltonian_raw(a, &p.state, &p.control, &p.costate.unwrap())).collect();
    let h_final = *hs.last().unwrap();
    let hamiltonian_error = hs.iter().map(|h| (h + 1.0).abs()).fold(0.0, f64::max);
    let hamiltonian_variation = hs.iter().map(|h| (h - h_final).abs()).fold(0.0, f64::max);

    let mut costate_defect = 0.0f64;
    if pts.len() >= 3 {
        for i in 1..pts.len() - 1 {
            let (t0, t1, t2) = (pts[i - 1].t, pts[i].t, pts[i + 1].t);
            if t1 - t0 <= 1e-12 || t2 - t1 <= 1e-12 {
                continue;
            }
            // three-point derivative on a nonuniform grid
            let (h0, h1) = (t1 - t0, t2 - t1);
            let rate = costate_rates(a, &pts[i].state, &lam(i));
            for k in 0..5 {
                let d = -h1 / (h0 * (h0 + h1)) * lam(i - 1)[k] + (h1 - h0) / (h0 * h1) * lam(i)[k] + h0 / (h1 * (h0 + h1)) * lam(i + 1)[k];
                costate_defect = costate_defect.max((d - rate[k]).abs());
            }
        }
    }

    let lam_f = lam(pts.len() - 1);
    let transversality_error =
        maneuver.bc.terminal.iter().enumerate().filter(|(_, t)| t.is_free()).map(|(k, _)| lam_f[k].abs()).fold(0.0, f64::max);

    let active = model.torque_mode().active_controls();
    let g_scale = pts.iter().flat_map(|p| active.iter().map(move |&j| p.costate.unwrap()[j].abs())).fold(0.0, f64::max);
    let threshold = DEFAULT_ZERO_THRESHOLD * g_scale.max(f64::MIN_POSITIVE);
    let bang_tol = 1e-3 * (model.u_max() - model.u_min());
    let singular_at = |j: usize, t: f64| structure.is_some_and(|s| s.kind_at(j, t) == Some(ArcKind::Singular));

    let mut violations = 0usize;
    let mut lc_min: Option<f64> = None;
    for (i, p) in pts.iter().enumerate() {
        let l = lam(i);
        let mut bad = false;
        for &j in active {
            if singular_at(j, p.t) {
                let lam_dot = costate_rates(a, &p.state, &l);
                let lc = legendre_clebsch(model, &State::from_array(p.state), &Costate::from_array(l), &lam_dot, j);
                lc_min = Some(lc_min.map_or(lc, |m: f64| m.min(lc)));
                continue;
            }
            let u = p.control[j];
            match bang_control(l[j], threshold) {
                BangDecision::Min if u > model.u_min() + bang_tol => bad = true,
                BangDecision::Max if u < model.u_max() - bang_tol => bad = true,
                _ => {}
            }
        }
        if bad {
            violations += 1;
        }
    }

    Ok(PmpResiduals {
        hamiltonian_error,
        hamiltonian_variation,
        costate_defect,
        transversality_error,
        switching_consistency: violations as f64 / pts.len() as f64,
        legendre_clebsch_min: lc_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{builtin_maneuver, Control, TorqueMode};
    use crate::trajectory::TrajectoryPoint;

    fn model(a: f64) -> SpacecraftModel {
        SpacecraftModel::with_default_bounds(a, TorqueMode::ThreeTorque).unwrap()
    }

    #[test]
    fn hamiltonian_examples() {
        let h = hamiltonian(&model(0.5), &State::default(), &Control::new(0.3, 0.0, 0.0), &Costate::new(1.0, 0.0, 0.0, 0.0, 0.0));
        assert!((h - 0.3).abs() < 1e-15);
        let h = hamiltonian(&model(0.5), &State::new(1.0, 0.0, 0.0, 0.0, 0.0), &Control::default(), &Costate::new(0.0, 0.0, 0.0, 1.0, 0.0));
        assert!((h - 0.5).abs() < 1e-15);
    }

    #[test]
    fn costate_rate_examples() {
        let r = costate_derivative(&model(0.5), &State::default(), &Costate::new(0.0, 0.0, 0.0, 1.0, 1.0));
        assert_eq!(r, [-0.5, -0.5, 0.0, 0.0, 0.0]);
        let r = costate_derivative(&model(0.5), &State::new(0.3, 0.1, -0.4, 0.2, 0.9), &Costate::default());
        assert_eq!(r, [0.0; 5]);
    }

    #[test]
    fn switching_function_is_first_three_costates() {
        assert_eq!(switching_functions(&Costate::new(0.2, -0.1, 0.0, 5.0, 6.0)), [0.2, -0.1, 0.0]);
        assert_eq!(switching_functions(&Costate::default()), [0.0; 3]);
    }

    #[test]
    fn bang_sign_convention() {
        assert_eq!(bang_control(0.3, 1e-6), BangDecision::Min);
        assert_eq!(bang_control(-0.2, 1e-6), BangDecision::Max);
        assert_eq!(bang_control(0.0, 1e-6), BangDecision::SingularCandidate);
        assert_eq!(BangDecision::Min.value(&model(0.5)), Some(-1.0));
    }

    #[test]
    fn zero_numerator_gives_zero_singular_control() {
        // λ₂ = λ̇₂ = 0 kills the numerator; the kinematic term keeps the denominator alive.
        let y = State::new(0.2, 0.3, -0.5, 0.4, -0.3);
        let lam = Costate::new(0.0, 0.0, 0.0, 0.7, 0.2);
        let lam_dot = [0.0, 0.0, 0.0, 0.0, 0.0];
        let u = singular_control_general(&model(0.5), &y, &lam, &lam_dot, 0, &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(u, 0.0);
    }

    #[test]
    fn degenerate_denominator_is_reported() {
        let y = State::new(0.2, 0.0, -0.5, 0.0, 0.0);
        let lam = Costate::new(0.0, 0.1, 0.0, 0.0, 0.0);
        let r = singular_control_general(&model(0.5), &y, &lam, &[0.0; 5], 0, &[0.0, 1.0, 0.0]);
        assert!(matches!(r, Err(Error::SingularLawDegenerate(_))));
        let r = singular_control_general(&model(0.0), &y, &lam, &[0.0; 5], 0, &[0.0, 1.0, 0.0]);
        assert!(matches!(r, Err(Error::SingularLawNotApplicable)));
    }

    #[test]
    fn nonspinning_legendre_clebsch_sign() {
        let m = SpacecraftModel::with_default_bounds(0.5, TorqueMode::TwoTorque).unwrap();
        let y = State::new(0.0, -1.0, 0.0, 0.0, 0.3);
        let lc = legendre_clebsch(&m, &y, &Costate::default(), &[0.0, -0.5, 0.0, 0.0, 0.0], 0);
        assert!((lc - 0.5).abs() < 1e-15);
        let y = State::new(0.0, 1.0, 0.0, 0.0, 0.3);
        let lc = legendre_clebsch(&m, &y, &Costate::default(), &[0.0, -0.5, 0.0, 0.0, 0.0], 0);
        assert!((lc + 0.5).abs() < 1e-15);
        assert_eq!(singular_control_nonspinning(), 0.0);
    }

    #[test]
    fn zero_costate_trajectory_residuals() {
        let man = builtin_maneuver("RTR").unwrap();
        let points = (0..11)
            .map(|i| TrajectoryPoint { t: i as f64 * 0.1, state: [0.0, 0.0, -0.5, 0.0, 0.0], control: [0.0; 3], costate: Some([0.0; 5]) })
            .collect();
        let r = pmp_residuals(&man, &Trajectory::new(points, vec![]), None).unwrap();
        assert_eq!(r.costate_defect, 0.0);
        assert_eq!(r.hamiltonian_error, 1.0);
    }

    #[test]
    fn residuals_need_costates() {
        let man = builtin_maneuver("RTR").unwrap();
        let points = vec![TrajectoryPoint { t: 0.0, state: [0.0; 5], control: [0.0; 3], costate: None }];
        assert!(matches!(pmp_residuals(&man, &Trajectory::new(points, vec![]), None), Err(Error::MissingCostates)));
    }
}
