//! Control-structure detection and the outer solve loop.

mod arcs;
mod detect;

pub use arcs::{ArcKind, ArcSpec, ControlStructure, BREAKPOINT_MERGE_FRACTION};
pub use detect::{detect_structure, DetectionOptions};
mod solve;
pub use solve::{
    apply_structure, bbsoc_solve, regularize_singular, solve_collocation, structure_durations, structured_mesh, BbsocOptions,
    BbsocSolution, MeshRound, RegularizationRecord, RegularizationSchedule, SolveReport, Stage, StageFailure, SwitchRecord,
};
