//! Open-loop replay of a control policy through the plant.

use super::dopri::{dopri5, IntegratorConfig};
use crate::dynamics::{rates, ControlVec, SpacecraftModel, StateVec};
use crate::error::{Error, Result};
use crate::trajectory::{Trajectory, TrajectoryPoint, TrajectorySource};

/// Control as a function of time and state. The integrator never steps
/// across a breakpoint, and inside a piece the policy is only queried
/// strictly between its ends.
pub trait ControlPolicy {
    fn control(&self, t: f64, y: &StateVec) -> ControlVec;

    /// Times at which the control may jump.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Replays the control of any trajectory source.
pub struct SourcePolicy<'a, S: TrajectorySource + ?Sized>(pub &'a S);

impl<S: TrajectorySource + ?Sized> ControlPolicy for SourcePolicy<'_, S> {
    fn control(&self, t: f64, _y: &StateVec) -> ControlVec {
        self.0.sample(t).control
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.0.switch_times()
    }
}

/// A closure as a smooth policy.
pub struct FnPolicy<F>(pub F);

impl<F: Fn(f64, &StateVec) -> ControlVec> ControlPolicy for FnPolicy<F> {
    fn control(&self, t: f64, y: &StateVec) -> ControlVec {
        (self.0)(t, y)
    }
}

/// Integrates the state equations under `policy` over `span`, one
/// integration per piece between breakpoints. The result holds every
/// accepted step; controls are clamped to the model bounds.
pub fn integrate(
    model: &SpacecraftModel,
    y0: &StateVec,
    policy: &dyn ControlPolicy,
    span: (f64, f64),
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    let (t0, t1) = span;
    if t1 < t0 {
        return Err(Error::Integration { t: t0, reason: "backward span".into() });
    }
    let mut cuts: Vec<f64> = policy.breakpoints().into_iter().filter(|&b| b > t0 && b < t1).collect();
    cuts.sort_by(f64::total_cmp);
    let mut edges = vec![t0];
    edges.extend(cuts.iter().copied());
    edges.push(t1);

    let a = model.a();
    let bounds: [(f64, f64); 3] = std::array::from_fn(|j| model.control_bounds(j));
    let control = |t: f64, y: &StateVec, lo: f64, hi: f64| -> ControlVec {
        let pad = 1e-12 * (hi - lo).max(1e-300);
        let u = policy.control(t.clamp(lo + pad, hi - pad), y);
        std::array::from_fn(|j| u[j].clamp(bounds[j].0, bounds[j].1))
    };

    let mut points = vec![TrajectoryPoint { t: t0, state: *y0, control: control(t0, y0, t0, edges[1]), costate: None }];
    let mut y = *y0;
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let out = dopri5(|t, y: &StateVec| rates(a, y, &control(t, y, lo, hi)), lo, y, hi, config, &[], false)?;
        for step in &out.steps {
            let t = step.t1();
            let s = step.eval(t);
            points.push(TrajectoryPoint { t, state: s, control: control(t, &s, lo, hi), costate: None });
        }
        y = out.y_end;
    }
    Ok(Trajectory::new(points, cuts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::TorqueMode;

    #[test]
    fn constant_torque_spins_up_linearly() {
        let model = SpacecraftModel::with_default_bounds(0.0, TorqueMode::ThreeTorque).unwrap();
        let policy = FnPolicy(|_: f64, _: &StateVec| [0.0, 1.0, 0.0]);
        let tr = integrate(&model, &[0.0; 5], &policy, (0.0, 2.0), &IntegratorConfig::default()).unwrap();
        assert!((tr.terminal().unwrap().state[1] - 2.0).abs() < 1e-12);
    }
}
