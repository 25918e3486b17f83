//! Independent verification: adaptive integration, indirect shooting and
//! comparison of direct and indirect solutions.

mod compare;
mod dopri;
mod integrate;
mod shooting;
mod verify;

pub use compare::{cross_validate, Discrepancy};
pub use dopri::{dopri5, dopri5_fixed, DenseStep, Dopri5Output, EventFn, EventHit, IntegratorConfig};
pub use integrate::{integrate, ControlPolicy, FnPolicy, SourcePolicy};
pub use shooting::{
    fd_jacobian, newton_solve, replay_bang_bang, shoot, NewtonOptions, NewtonResult, ShootingGuess, ShootingOptions, ShootingProblem,
    ShootingSolution, ShootingSpec, SwitchEvent,
};
pub use verify::{verify, IndirectCheck, VerificationOptions, VerificationReport};
