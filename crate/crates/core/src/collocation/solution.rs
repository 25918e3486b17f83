//! Discrete solutions, costate recovery and the continuous interpolant.

use serde::{Deserialize, Serialize};

use super::lgr::{barycentric_basis, barycentric_weights, rule};
use super::transcription::{domain_starts, CollocationProblem};
use crate::dynamics::{ControlVec, SpacecraftModel, StateVec, CONTROL_DIM, STATE_DIM};
use crate::error::{Error, Result};
use crate::nlp::{KktResiduals, NlpResult, NlpStatus, WarmStart};
use crate::trajectory::{Trajectory, TrajectoryPoint, TrajectorySource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlpSummary {
    pub status: NlpStatus,
    pub iterations: usize,
    pub kkt: KktResiduals,
}

/// Values on the collocation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution {
    pub durations: Vec<f64>,
    /// State at every node.
    pub states: Vec<StateVec>,
    /// Control at every collocation point.
    pub controls: Vec<ControlVec>,
    pub objective: f64,
    /// Value of the regularization term inside `objective`.
    pub regularization: f64,
    /// Defect multipliers, five per collocation point.
    pub multipliers: Option<Vec<f64>>,
    /// Raw decision vector.
    pub x: Vec<f64>,
    pub warm_start: Option<WarmStart>,
    pub nlp: NlpSummary,
}

impl DiscreteSolution {
    pub fn from_nlp(problem: &CollocationProblem, result: &NlpResult) -> Self {
        let x = &result.x;
        Self {
            durations: problem.durations(x),
            states: (0..problem.state_nodes()).map(|g| problem.state(x, g)).collect(),
            controls: (0..problem.collocation_points()).map(|p| problem.control(x, p)).collect(),
            objective: result.objective,
            regularization: problem.regularization_value(x),
            multipliers: Some(result.y.clone()),
            x: x.clone(),
            warm_start: Some(result.warm_start()),
            nlp: NlpSummary { status: result.status, iterations: result.iterations, kkt: result.kkt },
        }
    }

    pub fn t_final(&self) -> f64 {
        self.durations.iter().sum()
    }

    /// Interior domain boundaries.
    pub fn switch_times(&self) -> Vec<f64> {
        domain_starts(&self.durations).into_iter().skip(1).collect()
    }
}

/// Costates at every state node: `λ = −Λ_r / w_r` at collocation points and
/// `λ(t_f) = −Σ_r D_{r,n} Λ_r` over the last interval, where `Λ_r` are the
/// defect multipliers of the Lagrangian `J + Λᵀc`.
pub fn estimate_costates(problem: &CollocationProblem, solution: &DiscreteSolution) -> Result<Vec<StateVec>> {
    let y = solution.multipliers.as_ref().ok_or(Error::MissingMultipliers)?;
    if y.len() != STATE_DIM * problem.collocation_points() {
        return Err(Error::MissingMultipliers);
    }
    let mut lam = Vec::with_capacity(problem.state_nodes());
    for iv in problem.intervals() {
        let lgr = rule(iv.points);
        for r in 0..iv.points {
            let p = iv.offset + r;
            lam.push(std::array::from_fn(|c| -y[STATE_DIM * p + c] / lgr.weights[r]));
        }
    }
    let last = problem.intervals().last().expect("mesh has intervals");
    let lgr = rule(last.points);
    let terminal: StateVec =
        std::array::from_fn(|c| -(0..last.points).map(|r| lgr.d(r, last.points) * y[STATE_DIM * (last.offset + r) + c]).sum::<f64>());
    lam.push(terminal);
    Ok(lam)
}

/// The raw grid values as samples: one per collocation point with its own
/// control, plus the final node carrying the last control.
pub fn grid_trajectory(problem: &CollocationProblem, solution: &DiscreteSolution, costates: Option<&[StateVec]>) -> Trajectory {
    let times = problem.node_times(&solution.x);
    let points = (0..solution.states.len())
        .map(|g| TrajectoryPoint {
            t: times[g],
            state: solution.states[g],
            control: solution.controls[g.min(solution.controls.len() - 1)],
            costate: costates.map(|l| l[g]),
        })
        .collect();
    Trajectory::new(points, solution.switch_times())
}

#[derive(Debug, Clone, PartialEq)]
struct Piece {
    t0: f64,
    t1: f64,
    points: usize,
    offset: usize,
}

/// Piecewise-polynomial reconstruction of a direct solution: states and
/// costates by interpolation through the interval's support points,
/// controls by interpolation through its collocation points.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectTrajectory {
    pieces: Vec<Piece>,
    states: Vec<StateVec>,
    controls: Vec<ControlVec>,
    costates: Option<Vec<StateVec>>,
    switch_times: Vec<f64>,
    bounds: [(f64, f64); CONTROL_DIM],
}

impl DirectTrajectory {
    pub fn new(problem: &CollocationProblem, solution: &DiscreteSolution, costates: Option<Vec<StateVec>>) -> Self {
        let starts = domain_starts(&solution.durations);
        let pieces = problem
            .intervals()
            .iter()
            .map(|iv| {
                let dur = solution.durations[iv.domain];
                let t0 = starts[iv.domain] + dur * iv.start;
                Piece { t0, t1: t0 + dur * iv.width, points: iv.points, offset: iv.offset }
            })
            .collect();
        let model: &SpacecraftModel = &problem.maneuver().model;
        Self {
            pieces,
            states: solution.states.clone(),
            controls: solution.controls.clone(),
            costates,
            switch_times: solution.switch_times(),
            bounds: std::array::from_fn(|j| model.control_bounds(j)),
        }
    }

    pub fn has_costates(&self) -> bool {
        self.costates.is_some()
    }

    fn piece_at(&self, t: f64) -> usize {
        let k = self.pieces.partition_point(|p| p.t0 <= t);
        k.saturating_sub(1)
    }
}

impl TrajectorySource for DirectTrajectory {
    fn t_final(&self) -> f64 {
        self.pieces.last().map_or(0.0, |p| p.t1)
    }

    fn sample(&self, t: f64) -> TrajectoryPoint {
        let pc = &self.pieces[self.piece_at(t)];
        let tau = (2.0 * (t - pc.t0) / (pc.t1 - pc.t0) - 1.0).clamp(-1.0, 1.0);
        let lgr = rule(pc.points);
        let basis = lgr.basis(tau);
        let n = pc.points;
        let state: StateVec = std::array::from_fn(|c| (0..=n).map(|s| basis[s] * self.states[pc.offset + s][c]).sum());
        let costate = self.costates.as_ref().map(|lam| std::array::from_fn(|c| (0..=n).map(|s| basis[s] * lam[pc.offset + s][c]).sum()));
        let cb = if n == 1 { vec![1.0] } else { barycentric_basis(&lgr.points, &barycentric_weights(&lgr.points), tau) };
        let control: ControlVec = std::array::from_fn(|j| {
            let v: f64 = (0..n).map(|r| cb[r] * self.controls[pc.offset + r][j]).sum();
            v.clamp(self.bounds[j].0, self.bounds[j].1)
        });
        TrajectoryPoint { t, state, control, costate }
    }

    fn switch_times(&self) -> Vec<f64> {
        self.switch_times.clone()
    }
}
