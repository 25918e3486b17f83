//! Direct versus indirect solution comparison.

use serde::{Deserialize, Serialize};

use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    /// Largest state difference over the direct samples inside both spans.
    pub max_state: f64,
    /// `t_f(indirect) − t_f(direct)`.
    pub t_final: f64,
    /// Pairwise switch-time differences (indirect minus direct); empty when
    /// the switch counts differ.
    pub switch_times: Vec<f64>,
    pub switch_count_match: bool,
}

impl Discrepancy {
    pub fn max_switch(&self) -> f64 {
        self.switch_times.iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// Compares two solutions of the same maneuver on the direct solution's
/// sample times.
pub fn cross_validate(direct: &Trajectory, indirect: &Trajectory) -> Discrepancy {
    let horizon = direct.t_final().min(indirect.t_final());
    let max_state = direct
        .points
        .iter()
        .filter(|p| p.t <= horizon)
        .map(|p| {
            let other = indirect.state_at(p.t);
            p.state.iter().zip(other.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        })
        .fold(0.0, f64::max);
    let switch_count_match = direct.switch_times.len() == indirect.switch_times.len();
    let switch_times =
        if switch_count_match { indirect.switch_times.iter().zip(&direct.switch_times).map(|(i, d)| i - d).collect() } else { Vec::new() };
    Discrepancy { max_state, t_final: indirect.t_final() - direct.t_final(), switch_times, switch_count_match }
}
