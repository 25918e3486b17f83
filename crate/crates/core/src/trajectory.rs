//! Time-stamped samples of state, control and (optionally) costate.

use serde::{Deserialize, Serialize};

use crate::dynamics::{rates, ControlVec, SpacecraftModel, StateVec};
use crate::pmp::hamiltonian_raw;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state: StateVec,
    pub control: ControlVec,
    pub costate: Option<StateVec>,
}

impl TrajectoryPoint {
    /// Switching functions `g_j = λ_j`.
    pub fn switching(&self) -> Option<[f64; 3]> {
        self.costate.map(|l| [l[0], l[1], l[2]])
    }

    pub fn hamiltonian(&self, model: &SpacecraftModel) -> Option<f64> {
        self.costate.map(|l| hamiltonian_raw(model.a(), &self.state, &self.control, &l))
    }
}

/// Something that can be evaluated at any time in `[0, t_f]`.
pub trait TrajectorySource {
    fn t_final(&self) -> f64;
    fn sample(&self, t: f64) -> TrajectoryPoint;
    /// Times at which the control is discontinuous.
    fn switch_times(&self) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub switch_times: Vec<f64>,
}

impl Trajectory {
    pub fn new(points: Vec<TrajectoryPoint>, switch_times: Vec<f64>) -> Self {
        Self { points, switch_times }
    }

    /// `n` uniform samples on `[0, t_f]` plus one row per switch time, sorted.
    pub fn sampled<S: TrajectorySource + ?Sized>(source: &S, n: usize) -> Self {
        let tf = source.t_final();
        let switches = source.switch_times();
        let mut times: Vec<f64> = (0..n).map(|i| if n == 1 { 0.0 } else { tf * i as f64 / (n - 1) as f64 }).collect();
        times.extend(switches.iter().copied());
        times.sort_by(|a, b| a.total_cmp(b));
        let points = times.into_iter().map(|t| source.sample(t)).collect();
        Self { points, switch_times: switches }
    }

    pub fn t_final(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.t)
    }

    pub fn has_costates(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.costate.is_some())
    }

    pub fn terminal(&self) -> Option<&TrajectoryPoint> {
        self.points.last()
    }

    /// State at `t` by linear interpolation between samples.
    pub fn state_at(&self, t: f64) -> StateVec {
        let pts = &self.points;
        if t <= pts[0].t {
            return pts[0].state;
        }
        if t >= pts[pts.len() - 1].t {
            return pts[pts.len() - 1].state;
        }
        let k = pts.partition_point(|p| p.t <= t).max(1);
        let (p0, p1) = (&pts[k - 1], &pts[k]);
        let span = p1.t - p0.t;
        if span <= 0.0 {
            return p1.state;
        }
        let s = (t - p0.t) / span;
        let mut y = [0.0; 5];
        for i in 0..5 {
            y[i] = p0.state[i] + s * (p1.state[i] - p0.state[i]);
        }
        y
    }

    /// Residual of the state ODE at every sample, a cheap sanity check for
    /// trajectories assembled from raw data.
    pub fn max_state_rate(&self, model: &SpacecraftModel) -> f64 {
        self.points.iter().map(|p| rates(model.a(), &p.state, &p.control).iter().fold(0.0f64, |m, v| m.max(v.abs()))).fold(0.0, f64::max)
    }
}

impl TrajectorySource for Trajectory {
    fn t_final(&self) -> f64 {
        Trajectory::t_final(self)
    }

    fn sample(&self, t: f64) -> TrajectoryPoint {
        let pts = &self.points;
        let k = pts.partition_point(|p| p.t < t).min(pts.len() - 1);
        let mut p = pts[k];
        p.t = t;
        p.state = self.state_at(t);
        p
    }

    fn switch_times(&self) -> Vec<f64> {
        self.switch_times.clone()
    }
}
