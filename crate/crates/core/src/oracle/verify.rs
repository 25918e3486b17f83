//! End-to-end verification of a direct solution.

use serde::{Deserialize, Serialize};

use super::compare::{cross_validate, Discrepancy};
use super::dopri::IntegratorConfig;
use super::integrate::{integrate, SourcePolicy};
use super::shooting::{replay_bang_bang, shoot, ShootingGuess, ShootingOptions, ShootingSpec};
use crate::dynamics::{Maneuver, STATE_DIM};
use crate::error::Result;
use crate::structure::BbsocSolution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationOptions {
    pub shooting: ShootingOptions,
    /// Tolerances of the open-loop re-integration.
    pub integrator: IntegratorConfig,
    /// Largest accepted terminal-state gap of the re-integration.
    pub reintegration_tolerance: f64,
    pub residual_tolerance: f64,
    pub t_final_tolerance: f64,
    pub state_tolerance: f64,
    /// Largest accepted `|g_j|` at replayed switch events.
    pub event_tolerance: f64,
}

impl Default for VerificationOptions {
    fn default() -> Self {
        Self {
            shooting: ShootingOptions::default(),
            integrator: IntegratorConfig { rtol: 1e-11, atol: 1e-12, ..IntegratorConfig::default() },
            reintegration_tolerance: 1e-4,
            residual_tolerance: 1e-9,
            t_final_tolerance: 1e-5,
            state_tolerance: 1e-4,
            event_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndirectCheck {
    pub residual_norm: f64,
    pub iterations: usize,
    pub t_final: f64,
    pub switch_times: Vec<f64>,
    pub discrepancy: Discrepancy,
    /// `max |H(t) − H(t_f)|` along the shooting solution.
    pub hamiltonian_variation: f64,
    /// Largest `|g_j|` at the switch events of a bang-bang replay.
    pub max_event_switching: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Max-norm gap between the re-integrated and collocated terminal states.
    pub reintegration_error: f64,
    pub indirect: Option<IndirectCheck>,
    /// Why the indirect check did not run or did not converge.
    pub indirect_note: Option<String>,
    pub failures: Vec<String>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Re-integrates the direct control open loop and, for bang-bang
/// structures, solves the shooting problem seeded from the direct solution
/// and compares the two.
pub fn verify(maneuver: &Maneuver, solution: &BbsocSolution, options: &VerificationOptions) -> Result<VerificationReport> {
    let mut failures = Vec::new();
    let tf = solution.trajectory.t_final();
    let y0 = maneuver.bc.initial_state.to_array();
    let replay = integrate(&maneuver.model, &y0, &SourcePolicy(&solution.direct), (0.0, tf), &options.integrator)?;
    let end = replay.terminal().expect("replay has points").state;
    let collocated = solution.trajectory.terminal().expect("solution has points").state;
    let reintegration_error = (0..STATE_DIM).fold(0.0f64, |m, k| m.max((end[k] - collocated[k]).abs()));
    if !(reintegration_error <= options.reintegration_tolerance) {
        failures.push(format!("re-integrated terminal state differs by {reintegration_error:.3e}"));
    }

    let mut indirect = None;
    let mut indirect_note = None;
    if solution.structure.has_singular() {
        indirect_note = Some("structure has singular arcs; indirect check limited to bang-bang structures".into());
    } else {
        let spec = ShootingSpec { maneuver: maneuver.clone(), structure: solution.structure.clone() };
        let outcome =
            ShootingGuess::from_direct(&solution.trajectory, &solution.structure).and_then(|guess| shoot(&spec, &guess, &options.shooting));
        match outcome {
            Ok(sol) => {
                let discrepancy = cross_validate(&solution.trajectory, &sol.trajectory);
                let h_end = sol.trajectory.terminal().and_then(|p| p.hamiltonian(&maneuver.model)).unwrap_or(f64::NAN);
                let hamiltonian_variation = sol
                    .trajectory
                    .points
                    .iter()
                    .filter_map(|p| p.hamiltonian(&maneuver.model))
                    .fold(0.0f64, |m, h| m.max((h - h_end).abs()));
                let max_event_switching = replay_bang_bang(maneuver, &sol.costate0, sol.t_final, &options.shooting.integrator)
                    .ok()
                    .map(|(_, events)| events.iter().fold(0.0f64, |m, e| m.max(e.g.abs())));
                if !(sol.residual_norm <= options.residual_tolerance) {
                    failures.push(format!("shooting residual {:.3e}", sol.residual_norm));
                }
                if !(discrepancy.t_final.abs() <= options.t_final_tolerance) {
                    failures.push(format!("final times differ by {:.3e}", discrepancy.t_final));
                }
                if !(discrepancy.max_state <= options.state_tolerance) {
                    failures.push(format!("states differ by {:.3e}", discrepancy.max_state));
                }
                if let Some(g) = max_event_switching.filter(|&g| !(g <= options.event_tolerance)) {
                    failures.push(format!("switching function {g:.3e} at a replayed event"));
                }
                indirect = Some(IndirectCheck {
                    residual_norm: sol.residual_norm,
                    iterations: sol.iterations,
                    t_final: sol.t_final,
                    switch_times: sol.switch_times,
                    discrepancy,
                    hamiltonian_variation,
                    max_event_switching,
                });
            }
            Err(e) => {
                failures.push(format!("shooting failed: {e}"));
                indirect_note = Some(e.to_string());
            }
        }
    }
    Ok(VerificationReport { reintegration_error, indirect, indirect_note, failures })
}
