//! Axisymmetric rigid-spacecraft plant.
//!
//! The state is `(ω₁, ω₂, ω₃, x₁, x₂)`: body angular velocity and the
//! stereographic-like coordinates of the inertial `n₃` axis seen from the
//! body. Controls are torques normalized by the principal inertia,
//! `u_j = τ_j / I_j`, and `a = (I₂ − I₃)/I₁` is the only inertia parameter.
//!
//! The hot-path functions ([`rates`], [`state_jacobian`],
//! [`weighted_state_hessian`]) work on plain arrays and skip validation;
//! the typed wrappers check finiteness.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const STATE_DIM: usize = 5;
pub const CONTROL_DIM: usize = 3;

pub type StateVec = [f64; STATE_DIM];
pub type ControlVec = [f64; CONTROL_DIM];
pub type StateDerivative = [f64; STATE_DIM];
/// `∂f/∂y`, row = rate, column = state.
pub type StateJacobian = [[f64; STATE_DIM]; STATE_DIM];
/// `∂f/∂u`, row = rate, column = control.
pub type ControlJacobian = [[f64; CONTROL_DIM]; STATE_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TorqueMode {
    /// `u₃` is available; `ω₃` may vary.
    #[serde(alias = "three")]
    ThreeTorque,
    /// `u₃ ≡ 0`; `ω₃` keeps its initial value.
    #[serde(alias = "two")]
    TwoTorque,
}

impl TorqueMode {
    /// Indices of the controls that are decision variables in this mode.
    pub fn active_controls(self) -> &'static [usize] {
        match self {
            TorqueMode::ThreeTorque => &[0, 1, 2],
            TorqueMode::TwoTorque => &[0, 1],
        }
    }

    pub fn is_active(self, j: usize) -> bool {
        self.active_controls().contains(&j)
    }
}

impl FromStr for TorqueMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "three" | "3" | "threetorque" | "three-torque" => Ok(TorqueMode::ThreeTorque),
            "two" | "2" | "twotorque" | "two-torque" => Ok(TorqueMode::TwoTorque),
            other => Err(Error::InvalidModel(format!("unknown torque mode `{other}`"))),
        }
    }
}

impl fmt::Display for TorqueMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TorqueMode::ThreeTorque => f.write_str("three"),
            TorqueMode::TwoTorque => f.write_str("two"),
        }
    }
}

/// Inertia ratio, control bounds and torque configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpacecraftModel {
    a: f64,
    u_min: f64,
    u_max: f64,
    torque_mode: TorqueMode,
}

pub const DEFAULT_U_MIN: f64 = -1.0;
pub const DEFAULT_U_MAX: f64 = 1.0;

impl SpacecraftModel {
    pub fn new(a: f64, u_min: f64, u_max: f64, torque_mode: TorqueMode) -> Result<Self> {
        if !(a.is_finite() && u_min.is_finite() && u_max.is_finite()) {
            return Err(Error::NonFinite("spacecraft model"));
        }
        if a.abs() > 1.0 {
            return Err(Error::InvalidModel(format!("|a| = {} exceeds 1, which no rigid body can realize", a.abs())));
        }
        if u_min >= u_max {
            return Err(Error::InvalidModel(format!("control bounds must satisfy u_min < u_max (got {u_min} >= {u_max})")));
        }
        Ok(Self { a, u_min, u_max, torque_mode })
    }

    /// Model with the default bounds `[-1, 1]`.
    pub fn with_default_bounds(a: f64, torque_mode: TorqueMode) -> Result<Self> {
        Self::new(a, DEFAULT_U_MIN, DEFAULT_U_MAX, torque_mode)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn u_min(&self) -> f64 {
        self.u_min
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn torque_mode(&self) -> TorqueMode {
        self.torque_mode
    }

    pub fn with_bounds(self, u_min: f64, u_max: f64) -> Result<Self> {
        Self::new(self.a, u_min, u_max, self.torque_mode)
    }

    pub fn with_torque_mode(self, torque_mode: TorqueMode) -> Self {
        Self { torque_mode, ..self }
    }

    /// Bounds of control `j`; inactive controls are pinned at zero.
    pub fn control_bounds(&self, j: usize) -> (f64, f64) {
        if self.torque_mode.is_active(j) {
            (self.u_min, self.u_max)
        } else {
            (0.0, 0.0)
        }
    }
}

impl<'de> Deserialize<'de> for SpacecraftModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            a: f64,
            #[serde(default = "default_u_min")]
            u_min: f64,
            #[serde(default = "default_u_max")]
            u_max: f64,
            #[serde(default = "default_mode")]
            torque_mode: TorqueMode,
        }
        fn default_u_min() -> f64 {
            DEFAULT_U_MIN
        }
        fn default_u_max() -> f64 {
            DEFAULT_U_MAX
        }
        fn default_mode() -> TorqueMode {
            TorqueMode::ThreeTorque
        }
        let raw = Raw::deserialize(deserializer)?;
        SpacecraftModel::new(raw.a, raw.u_min, raw.u_max, raw.torque_mode).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub omega1: f64,
    pub omega2: f64,
    pub omega3: f64,
    pub x1: f64,
    pub x2: f64,
}

impl State {
    pub fn new(omega1: f64, omega2: f64, omega3: f64, x1: f64, x2: f64) -> Self {
        Self { omega1, omega2, omega3, x1, x2 }
    }

    pub fn to_array(self) -> StateVec {
        [self.omega1, self.omega2, self.omega3, self.x1, self.x2]
    }

    pub fn from_array(y: StateVec) -> Self {
        Self::new(y[0], y[1], y[2], y[3], y[4])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
}

impl Control {
    pub fn new(u1: f64, u2: f64, u3: f64) -> Self {
        Self { u1, u2, u3 }
    }

    pub fn to_array(self) -> ControlVec {
        [self.u1, self.u2, self.u3]
    }

    pub fn from_array(u: ControlVec) -> Self {
        Self::new(u[0], u[1], u[2])
    }
}

/// Terminal condition of one state component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terminal {
    Fixed(f64),
    Free,
}

impl Terminal {
    pub fn value(self) -> Option<f64> {
        match self {
            Terminal::Fixed(v) => Some(v),
            Terminal::Free => None,
        }
    }

    pub fn is_free(self) -> bool {
        matches!(self, Terminal::Free)
    }
}

// A terminal entry is written as a number or as the string "free".
impl Serialize for Terminal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Terminal::Fixed(v) => serializer.serialize_f64(*v),
            Terminal::Free => serializer.serialize_str("free"),
        }
    }
}

impl<'de> Deserialize<'de> for Terminal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(Terminal::Fixed(v)),
            Raw::Int(v) => Ok(Terminal::Fixed(v as f64)),
            Raw::Text(s) if s.eq_ignore_ascii_case("free") => Ok(Terminal::Free),
            Raw::Text(s) => s
                .parse::<f64>()
                .map(Terminal::Fixed)
                .map_err(|_| serde::de::Error::custom(format!("terminal entry `{s}` is neither a number nor \"free\""))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub initial_state: State,
    pub terminal: [Terminal; STATE_DIM],
}

impl BoundaryConditions {
    pub fn new(initial_state: State, terminal: [Terminal; STATE_DIM]) -> Result<Self> {
        let bc = Self { initial_state, terminal };
        bc.validate()?;
        Ok(bc)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.initial_state.is_finite() {
            return Err(Error::NonFinite("initial state"));
        }
        if self.terminal.iter().all(|t| t.is_free()) {
            return Err(Error::InvalidBoundaryConditions("at least one terminal component must be fixed".into()));
        }
        if self.terminal.iter().any(|t| matches!(t, Terminal::Fixed(v) if !v.is_finite())) {
            return Err(Error::NonFinite("terminal state"));
        }
        Ok(())
    }

    pub fn fixed_terminal(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.terminal.iter().enumerate().filter_map(|(k, t)| t.value().map(|v| (k, v)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Maneuver {
    pub name: String,
    pub model: SpacecraftModel,
    pub bc: BoundaryConditions,
}

impl Maneuver {
    /// Checks consistency between the torque mode and the boundary data.
    pub fn validate(&self) -> Result<()> {
        self.bc.validate()?;
        if self.model.torque_mode() == TorqueMode::TwoTorque {
            if let Terminal::Fixed(w3f) = self.bc.terminal[2] {
                if (w3f - self.bc.initial_state.omega3).abs() > 1e-12 {
                    return Err(Error::InvalidBoundaryConditions(format!(
                        "two-torque mode keeps omega3 constant, but omega3(0) = {} and omega3(tf) = {}",
                        self.bc.initial_state.omega3, w3f
                    )));
                }
            }
        }
        Ok(())
    }
}

pub const BUILTIN_MANEUVERS: [&str; 4] = ["RTR", "NRTR", "NRTR_NONSPIN", "RTNR_INERTIAL"];

/// The four reference maneuvers.
pub fn builtin_maneuver(name: &str) -> Result<Maneuver> {
    use Terminal::{Fixed, Free};
    let key = name.trim().to_ascii_uppercase().replace('-', "_");
    let rest_at = |w3: f64| [Fixed(0.0), Fixed(0.0), Fixed(w3), Fixed(0.0), Fixed(0.0)];
    let (a, mode, y0, terminal) = match key.as_str() {
        "RTR" => (0.5, TorqueMode::ThreeTorque, State::new(0.0, 0.0, -0.5, 1.5, -0.5), rest_at(-0.5)),
        "NRTR" => (0.5, TorqueMode::ThreeTorque, State::new(-0.45, -1.1, -0.5, 1.5, -0.5), rest_at(-0.5)),
        "NRTR_NONSPIN" => (0.5, TorqueMode::TwoTorque, State::new(-0.45, -1.1, 0.0, 0.1, -0.1), rest_at(0.0)),
        "RTNR_INERTIAL" => {
            (0.0, TorqueMode::TwoTorque, State::new(0.0, 0.0, -0.3, 0.0, 0.0), [Fixed(1.0), Fixed(2.0), Fixed(-0.3), Free, Free])
        }
        _ => return Err(Error::UnknownManeuver(name.to_string())),
    };
    Ok(Maneuver { name: key, model: SpacecraftModel::with_default_bounds(a, mode)?, bc: BoundaryConditions::new(y0, terminal)? })
}

/// Equations of motion on raw arrays.
#[inline]
pub fn rates(a: f64, y: &StateVec, u: &ControlVec) -> StateDerivative {
    let [w1, w2, w3, x1, x2] = *y;
    [
        a * w3 * w2 + u[0],
        -a * w3 * w1 + u[1],
        u[2],
        w3 * x2 + w2 * x1 * x2 + 0.5 * w1 * (1.0 + x1 * x1 - x2 * x2),
        -w3 * x1 + w1 * x1 * x2 + 0.5 * w2 * (1.0 + x2 * x2 - x1 * x1),
    ]
}

/// `∂f/∂y` on raw arrays (row = rate, column = state).
#[inline]
pub fn state_jacobian(a: f64, y: &StateVec) -> [[f64; STATE_DIM]; STATE_DIM] {
    let [w1, w2, w3, x1, x2] = *y;
    let p = 0.5 * (1.0 + x1 * x1 - x2 * x2);
    let q = 0.5 * (1.0 + x2 * x2 - x1 * x1);
    [
        [0.0, a * w3, a * w2, 0.0, 0.0],
        [-a * w3, 0.0, -a * w1, 0.0, 0.0],
        [0.0; 5],
        [p, x1 * x2, x2, w2 * x2 + w1 * x1, w3 + w2 * x1 - w1 * x2],
        [x1 * x2, q, -x1, -w3 + w1 * x2 - w2 * x1, w1 * x1 + w2 * x2],
    ]
}

/// `Σ_k μ_k ∇²_y f_k`. The controls enter linearly, so this is the whole
/// second-order information of the dynamics.
#[inline]
pub fn weighted_state_hessian(a: f64, y: &StateVec, mu: &[f64; STATE_DIM]) -> [[f64; STATE_DIM]; STATE_DIM] {
    let [w1, w2, _w3, x1, x2] = *y;
    let (m1, m2, m4, m5) = (mu[0], mu[1], mu[3], mu[4]);
    let mut h = [[0.0; STATE_DIM]; STATE_DIM];
    let mut set = |i: usize, j: usize, v: f64| {
        h[i][j] += v;
        if i != j {
            h[j][i] += v;
        }
    };
    // ω̇₁ = aω₃ω₂ + u₁, ω̇₂ = −aω₃ω₁ + u₂
    set(1, 2, a * m1);
    set(0, 2, -a * m2);
    // ẋ₁
    set(2, 4, m4);
    set(1, 3, m4 * x2);
    set(1, 4, m4 * x1);
    set(3, 4, m4 * w2);
    set(0, 3, m4 * x1);
    set(0, 4, -m4 * x2);
    set(3, 3, m4 * w1);
    set(4, 4, -m4 * w1);
    // ẋ₂
    set(2, 3, -m5);
    set(0, 3, m5 * x2);
    set(0, 4, m5 * x1);
    set(3, 4, m5 * w1);
    set(1, 4, m5 * x2);
    set(1, 3, -m5 * x1);
    set(4, 4, m5 * w2);
    set(3, 3, -m5 * w2);
    h
}

/// Time derivative of the state under control `u`.
pub fn state_derivative(model: &SpacecraftModel, y: &State, u: &Control) -> Result<StateDerivative> {
    if !y.is_finite() || !u.to_array().iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("state_derivative input"));
    }
    if model.torque_mode() == TorqueMode::TwoTorque && u.u3 != 0.0 {
        return Err(Error::InvalidModel("u3 must be zero in two-torque mode".into()));
    }
    Ok(rates(model.a(), &y.to_array(), &u.to_array()))
}

/// Analytic partials `(∂f/∂y, ∂f/∂u)`.
pub fn dynamics_jacobians(model: &SpacecraftModel, y: &State, u: &Control) -> Result<(StateJacobian, ControlJacobian)> {
    if !y.is_finite() || !u.to_array().iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("dynamics_jacobians input"));
    }
    let mut fu = [[0.0; CONTROL_DIM]; STATE_DIM];
    for (j, row) in fu.iter_mut().take(CONTROL_DIM).enumerate() {
        row[j] = 1.0;
    }
    Ok((state_jacobian(model.a(), &y.to_array()), fu))
}

/// `(σ, β, γ)` are the direction cosines of `n₃` in the body basis.
pub fn direction_cosines_to_x(sigma: f64, beta: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(sigma.is_finite() && beta.is_finite() && gamma.is_finite()) {
        return Err(Error::NonFinite("direction cosines"));
    }
    let norm_err = sigma * sigma + beta * beta + gamma * gamma - 1.0;
    if norm_err.abs() > 1e-9 {
        return Err(Error::NotUnitNorm(norm_err));
    }
    let denom = 1.0 + gamma;
    if denom.abs() < 1e-12 {
        return Err(Error::KinematicSingularity);
    }
    Ok((beta / denom, sigma / denom))
}

/// Inverse of [`direction_cosines_to_x`]: returns `(σ, β, γ)`.
pub fn x_to_direction_cosines(x1: f64, x2: f64) -> (f64, f64, f64) {
    let r2 = x1 * x1 + x2 * x2;
    let gamma = (1.0 - r2) / (1.0 + r2);
    (x2 * (1.0 + gamma), x1 * (1.0 + gamma), gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn model(a: f64) -> SpacecraftModel {
        SpacecraftModel::with_default_bounds(a, TorqueMode::ThreeTorque).unwrap()
    }

    #[test]
    fn rejects_unphysical_inertia_ratio() {
        assert!(SpacecraftModel::with_default_bounds(1.2, TorqueMode::ThreeTorque).is_err());
        assert!(SpacecraftModel::with_default_bounds(-1.0, TorqueMode::ThreeTorque).is_ok());
        assert!(SpacecraftModel::new(0.5, 1.0, 1.0, TorqueMode::ThreeTorque).is_err());
    }

    #[test]
    fn spinning_tilted_state_drifts_kinematically() {
        let d = state_derivative(&model(0.5), &State::new(0.0, 0.0, -0.5, 1.5, -0.5), &Control::default()).unwrap();
        let expected = [0.0, 0.0, 0.0, 0.25, 0.75];
        for k in 0..5 {
            assert_abs_diff_eq!(d[k], expected[k], epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_asymmetry_decouples_rates() {
        let d = state_derivative(&model(0.0), &State::new(1.0, 2.0, -0.3, 0.0, 0.0), &Control::new(0.0, 1.0, 0.0)).unwrap();
        let expected = [0.0, 1.0, 0.0, 0.5, 1.0];
        for k in 0..5 {
            assert_abs_diff_eq!(d[k], expected[k], epsilon = 1e-15);
        }
    }

    #[test]
    fn rest_state_passes_control_through() {
        let d = state_derivative(&model(0.5), &State::default(), &Control::new(0.7, 0.0, 0.0)).unwrap();
        assert_eq!(d, [0.7, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn non_finite_input_is_a_domain_error() {
        let r = state_derivative(&model(0.5), &State::new(f64::NAN, 0.0, 0.0, 0.0, 0.0), &Control::default());
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn two_torque_rejects_third_control() {
        let m = SpacecraftModel::with_default_bounds(0.5, TorqueMode::TwoTorque).unwrap();
        assert!(state_derivative(&m, &State::default(), &Control::new(0.0, 0.0, 0.1)).is_err());
    }

    #[test]
    fn jacobian_structural_entries() {
        let (fy, fu) = dynamics_jacobians(&model(0.0), &State::new(0.3, -0.2, 0.7, 0.1, 0.4), &Control::default()).unwrap();
        assert_eq!(fy[0][1], 0.0);
        assert_eq!(fu[2], [0.0, 0.0, 1.0]);
        assert_eq!(fy[2], [0.0; 5]);
    }

    #[test]
    fn direction_cosine_examples() {
        assert_eq!(direction_cosines_to_x(0.0, 0.0, 1.0).unwrap(), (0.0, 0.0));
        assert_eq!(direction_cosines_to_x(1.0, 0.0, 0.0).unwrap(), (0.0, 1.0));
        let (x1, x2) = direction_cosines_to_x(0.6, 0.8, 0.0).unwrap();
        assert_abs_diff_eq!(x1, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(x2, 0.6, epsilon = 1e-15);
        assert!(matches!(direction_cosines_to_x(0.0, 0.0, -1.0), Err(Error::KinematicSingularity)));
        assert!(matches!(direction_cosines_to_x(0.5, 0.0, 0.0), Err(Error::NotUnitNorm(_))));
    }

    #[test]
    fn builtin_boundary_blocks() {
        let rtr = builtin_maneuver("RTR").unwrap();
        assert_eq!(rtr.model.a(), 0.5);
        assert_eq!(rtr.bc.initial_state.omega3, -0.5);
        assert_eq!(rtr.bc.initial_state.x1, 1.5);
        assert!(rtr.bc.terminal.iter().all(|t| !t.is_free()));

        let ns = builtin_maneuver("NRTR_NONSPIN").unwrap();
        assert_eq!(ns.bc.initial_state.omega3, 0.0);
        assert_eq!(ns.bc.terminal[2], Terminal::Fixed(0.0));
        assert_eq!(ns.bc.initial_state.x1, 0.1);
        assert_eq!(ns.model.torque_mode(), TorqueMode::TwoTorque);

        let rtnr = builtin_maneuver("rtnr_inertial").unwrap();
        assert_eq!(rtnr.model.a(), 0.0);
        assert!(rtnr.bc.terminal[3].is_free() && rtnr.bc.terminal[4].is_free());

        assert!(matches!(builtin_maneuver("LOOP"), Err(Error::UnknownManeuver(_))));
    }

    #[test]
    fn all_free_terminal_is_rejected() {
        let r = BoundaryConditions::new(State::default(), [Terminal::Free; 5]);
        assert!(r.is_err());
    }
}
