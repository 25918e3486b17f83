use thiserror::Error;

use crate::nlp::NlpStatus;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("kinematic parameterization is singular (gamma = -1, n3 anti-aligned with b3)")]
    KinematicSingularity,

    #[error("direction cosines are not unit norm (|n|^2 - 1 = {0:e})")]
    NotUnitNorm(f64),

    #[error("unknown maneuver `{0}`")]
    UnknownManeuver(String),

    #[error("invalid boundary conditions: {0}")]
    InvalidBoundaryConditions(String),

    #[error("singular control law is degenerate (|denominator| = {0:e})")]
    SingularLawDegenerate(f64),

    #[error("singular law requires a != 0 and omega3 != 0")]
    SingularLawNotApplicable,

    #[error("trajectory carries no costate estimates")]
    MissingCostates,

    #[error("quadrature rule size {0} outside 1..=12")]
    RuleOutOfRange(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("structure does not match mesh: {0}")]
    StructureMismatch(String),

    #[error("solution carries no constraint multipliers")]
    MissingMultipliers,

    #[error("NLP solve ended with status {0:?}")]
    Nlp(NlpStatus),

    #[error("structure detection failed: {0}")]
    Detection(String),

    #[error("mesh refinement stagnated after {0} rounds")]
    RefinementStagnation(usize),

    #[error("regularization did not reach delta tolerance within {0} iterations")]
    RegularizationExhausted(usize),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("shooting failed: {0}")]
    Shooting(String),

    #[error("shooting Jacobian is rank deficient (sigma_min/sigma_max = {0:e}); the structure may be wrong")]
    ShootingRankDeficient(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
