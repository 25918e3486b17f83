//! Indirect shooting on the minimum-principle boundary-value problem.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dopri::{dopri5, Dopri5Output, EventFn, IntegratorConfig};
use crate::dynamics::{rates, ControlVec, Maneuver, State, StateVec, Terminal, TorqueMode, CONTROL_DIM, STATE_DIM};
use crate::error::{Error, Result};
use crate::pmp::{costate_rates, hamiltonian_raw, jet, singular_case, singular_control_general, Costate, SingularCase};
use crate::structure::{ArcKind, ControlStructure};
use crate::trajectory::{Trajectory, TrajectoryPoint};

/// A square or overdetermined system `r(z) = 0`.
pub trait ShootingProblem {
    fn unknowns(&self) -> usize;
    fn residual(&self, z: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Convergence threshold on `max |r_i|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative central-difference step.
    pub fd_step: f64,
    /// Smallest accepted `σ_min / σ_max` of the Jacobian.
    pub rank_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 40, fd_step: 1e-6, rank_tol: 1e-11 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonResult {
    pub z: Vec<f64>,
    pub residual: Vec<f64>,
    /// `max |r_i|` at `z`.
    pub norm: f64,
    pub iterations: usize,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn two_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Jacobian of `r` at `z` by central differences.
pub fn fd_jacobian(problem: &dyn ShootingProblem, z: &[f64], m: usize, rel_step: f64) -> Result<DMatrix<f64>> {
    let n = z.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut zp = z.to_vec();
    for k in 0..n {
        let h = rel_step * z[k].abs().max(1.0);
        zp[k] = z[k] + h;
        let rp = problem.residual(&zp)?;
        zp[k] = z[k] - h;
        let rm = problem.residual(&zp)?;
        zp[k] = z[k];
        for i in 0..m {
            jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Damped Gauss–Newton (plain Newton when square) with finite-difference
/// Jacobians. A step is halved until the residual 2-norm drops; failing to
/// drop it at all is reported as a plateau.
pub fn newton_solve(problem: &dyn ShootingProblem, z0: &[f64], options: &NewtonOptions) -> Result<NewtonResult> {
    assert_eq!(z0.len(), problem.unknowns());
    let mut z = z0.to_vec();
    let mut r = problem.residual(&z)?;
    let m = r.len();
    if m < z.len() {
        return Err(Error::Shooting(format!("{m} residuals for {} unknowns", z.len())));
    }
    for iter in 0..=options.max_iter {
        let norm = max_abs(&r);
        if norm <= options.tol {
            return Ok(NewtonResult { z, residual: r, norm, iterations: iter });
        }
        if iter == options.max_iter {
            break;
        }
        let jac = fd_jacobian(problem, &z, m, options.fd_step)?;
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smax > 0.0) || smin / smax < options.rank_tol {
            return Err(Error::ShootingRankDeficient(if smax > 0.0 { smin / smax } else { 0.0 }));
        }
        let rhs = DVector::from_iterator(m, r.iter().map(|v| -v));
        let dz = svd.solve(&rhs, 0.0).map_err(|e| Error::Shooting(e.to_string()))?;

        let current = two_norm(&r);
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = z.iter().zip(dz.iter()).map(|(a, d)| a + alpha * d).collect();
            if let Ok(rt) = problem.residual(&trial) {
                if two_norm(&rt) < current {
                    z = trial;
                    r = rt;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-8 {
                return Err(Error::Shooting(format!("residual plateau at {norm:.3e} after {iter} iterations")));
            }
        }
    }
    Err(Error::Shooting(format!("no convergence in {} iterations (residual {:.3e})", options.max_iter, max_abs(&r))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingOptions {
    pub newton: NewtonOptions,
    pub integrator: IntegratorConfig,
    /// Uniform samples of the returned trajectory (plus one per switch).
    pub samples: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            newton: NewtonOptions::default(),
            integrator: IntegratorConfig { rtol: 1e-12, atol: 1e-13, ..IntegratorConfig::default() },
            samples: 1000,
        }
    }
}

/// Maneuver plus the arc sequence to enforce.
#[derive(Debug, Clone)]
pub struct ShootingSpec {
    pub maneuver: Maneuver,
    pub structure: ControlStructure,
}

/// Starting point: initial costate, switch times and final time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingGuess {
    pub costate0: StateVec,
    pub switch_times: Vec<f64>,
    pub t_final: f64,
}

impl ShootingGuess {
    /// Seeds from a direct solution carrying costates and the structure it
    /// was solved with.
    pub fn from_direct(trajectory: &Trajectory, structure: &ControlStructure) -> Result<Self> {
        let first = trajectory.points.first().ok_or_else(|| Error::Shooting("empty trajectory".into()))?;
        let costate0 = first.costate.ok_or(Error::MissingCostates)?;
        Ok(Self { costate0, switch_times: structure.switch_times(), t_final: trajectory.t_final() })
    }
}

#[derive(Debug, Clone)]
pub struct ShootingSolution {
    pub costate0: StateVec,
    pub switch_times: Vec<f64>,
    pub t_final: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Samples with costates, controls from the arc laws.
    pub trajectory: Trajectory,
}

type Joint = [f64; 2 * STATE_DIM];
type JointEvent<'a> = Box<dyn Fn(f64, &Joint) -> f64 + 'a>;

fn split(z: &Joint) -> (StateVec, StateVec) {
    (std::array::from_fn(|i| z[i]), std::array::from_fn(|i| z[STATE_DIM + i]))
}

/// Control of one domain: fixed bang values plus singular components.
#[derive(Debug, Clone, Copy)]
struct DomainLaw {
    kinds: [Option<ArcKind>; CONTROL_DIM],
    bang: ControlVec,
}

struct Bvp<'a> {
    spec: &'a ShootingSpec,
    laws: Vec<DomainLaw>,
    /// Costate components that are unknowns.
    free_costates: Vec<usize>,
    config: IntegratorConfig,
}

struct Propagation {
    edges: Vec<f64>,
    pieces: Vec<Dopri5Output<{ 2 * STATE_DIM }>>,
}

impl<'a> Bvp<'a> {
    fn new(spec: &'a ShootingSpec, config: IntegratorConfig) -> Result<Self> {
        let model = &spec.maneuver.model;
        let domains = spec.structure.domain_count();
        let mut laws = Vec::with_capacity(domains);
        for d in 0..domains {
            let mut kinds = [None; CONTROL_DIM];
            let mut bang = [0.0; CONTROL_DIM];
            for j in 0..CONTROL_DIM {
                if !model.torque_mode().is_active(j) {
                    continue;
                }
                let kind = spec.structure.domain_kind(j, d);
                let (lo, hi) = model.control_bounds(j);
                match kind {
                    Some(ArcKind::BangMin) => bang[j] = lo,
                    Some(ArcKind::BangMax) => bang[j] = hi,
                    Some(ArcKind::Singular) if j == 2 => {
                        return Err(Error::Shooting("u3 has no singular law".into()));
                    }
                    Some(ArcKind::Singular) if model.a() == 0.0 => return Err(Error::SingularLawNotApplicable),
                    Some(ArcKind::Singular) => {}
                    None => return Err(Error::Shooting(format!("u{} has no arc in domain {d}", j + 1))),
                }
                kinds[j] = kind;
            }
            laws.push(DomainLaw { kinds, bang });
        }
        let free_costates = (0..STATE_DIM).filter(|&k| !(k == 2 && model.torque_mode() == TorqueMode::TwoTorque)).collect();
        Ok(Self { spec, laws, free_costates, config })
    }

    fn switch_count(&self) -> usize {
        self.laws.len() - 1
    }

    fn unpack(&self, z: &[f64]) -> (StateVec, Vec<f64>, f64) {
        let nl = self.free_costates.len();
        let mut lam = [0.0; STATE_DIM];
        for (i, &k) in self.free_costates.iter().enumerate() {
            lam[k] = z[i];
        }
        let ns = self.switch_count();
        (lam, z[nl..nl + ns].to_vec(), z[nl + ns])
    }

    fn pack(&self, lam: &StateVec, times: &[f64], tf: f64) -> Vec<f64> {
        let mut z: Vec<f64> = self.free_costates.iter().map(|&k| lam[k]).collect();
        z.extend_from_slice(times);
        z.push(tf);
        z
    }

    fn control(&self, d: usize, y: &StateVec, lam: &StateVec) -> Result<ControlVec> {
        let law = &self.laws[d];
        let model = &self.spec.maneuver.model;
        let mut u = law.bang;
        for j in 0..2 {
            if law.kinds[j] != Some(ArcKind::Singular) {
                continue;
            }
            u[j] = match singular_case(model, y) {
                SingularCase::Nonspinning => 0.0,
                SingularCase::InfiniteOrder => return Err(Error::SingularLawNotApplicable),
                SingularCase::General => {
                    let lam_dot = costate_rates(model.a(), y, lam);
                    singular_control_general(model, &State::from_array(*y), &Costate::from_array(*lam), &lam_dot, j, &u)?
                }
            };
            let (lo, hi) = model.control_bounds(j);
            u[j] = u[j].clamp(lo, hi);
        }
        Ok(u)
    }

    fn propagate(&self, lam0: &StateVec, times: &[f64], tf: f64) -> Result<Propagation> {
        let mut edges = vec![0.0];
        edges.extend_from_slice(times);
        edges.push(tf);
        if edges.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::Shooting("switch times out of order".into()));
        }
        let a = self.spec.maneuver.model.a();
        let y0 = self.spec.maneuver.bc.initial_state.to_array();
        let mut z: Joint = std::array::from_fn(|i| if i < STATE_DIM { y0[i] } else { lam0[i - STATE_DIM] });
        let mut pieces = Vec::with_capacity(self.laws.len());
        for d in 0..self.laws.len() {
            let rhs = |_: f64, z: &Joint| -> Joint {
                let (y, lam) = split(z);
                let u = self.control(d, &y, &lam).unwrap_or([f64::NAN; CONTROL_DIM]);
                let f = rates(a, &y, &u);
                let g = costate_rates(a, &y, &lam);
                std::array::from_fn(|i| if i < STATE_DIM { f[i] } else { g[i - STATE_DIM] })
            };
            let out = dopri5(rhs, edges[d], z, edges[d + 1], &self.config, &[], false)?;
            z = out.y_end;
            pieces.push(out);
        }
        Ok(Propagation { edges, pieces })
    }

    fn residuals(&self, lam0: &StateVec, times: &[f64], tf: f64) -> Result<Vec<f64>> {
        let prop = self.propagate(lam0, times, tf)?;
        let model = &self.spec.maneuver.model;
        let a = model.a();
        let mut r = Vec::new();
        for d in 1..self.laws.len() {
            let (y, lam) = split(&prop.pieces[d - 1].y_end);
            let (before, after) = (&self.laws[d - 1], &self.laws[d]);
            for j in 0..CONTROL_DIM {
                if before.kinds[j] == after.kinds[j] {
                    continue;
                }
                match after.kinds[j] {
                    Some(ArcKind::Singular) => {
                        // entering a second-order arc: g and its first three
                        // derivatives vanish together
                        let u = self.control(d, &y, &lam)?;
                        r.extend(jet::switching_derivatives(a, &y, &lam, &u, j, 3));
                    }
                    _ if before.kinds[j] == Some(ArcKind::Singular) => {}
                    _ => r.push(lam[j]),
                }
            }
        }
        let (yf, lamf) = split(&prop.pieces.last().expect("at least one domain").y_end);
        for (k, term) in self.spec.maneuver.bc.terminal.iter().enumerate() {
            let redundant = k == 2 && model.torque_mode() == TorqueMode::TwoTorque;
            match term {
                Terminal::Fixed(v) if !redundant => r.push(yf[k] - v),
                Terminal::Free if !redundant => r.push(lamf[k]),
                _ => {}
            }
        }
        let uf = self.control(self.laws.len() - 1, &yf, &lamf)?;
        r.push(hamiltonian_raw(a, &yf, &uf, &lamf) + 1.0);
        Ok(r)
    }

    fn trajectory(&self, prop: &Propagation, samples: usize) -> Result<Trajectory> {
        let tf = *prop.edges.last().expect("edges");
        let switches: Vec<f64> = prop.edges[1..prop.edges.len() - 1].to_vec();
        let mut times: Vec<f64> = (0..samples).map(|i| tf * i as f64 / (samples.max(2) - 1) as f64).collect();
        times.extend(switches.iter().copied());
        times.sort_by(f64::total_cmp);
        let mut points = Vec::with_capacity(times.len());
        for t in times {
            // the later domain owns its start, the last one also owns t_f
            let d = prop.edges[1..prop.edges.len() - 1].partition_point(|&e| e <= t);
            let z = if prop.pieces[d].steps.is_empty() { prop.pieces[d].y_end } else { prop.pieces[d].eval(t) };
            let (y, lam) = split(&z);
            points.push(TrajectoryPoint { t, state: y, control: self.control(d, &y, &lam)?, costate: Some(lam) });
        }
        Ok(Trajectory::new(points, switches))
    }
}

impl ShootingProblem for Bvp<'_> {
    fn unknowns(&self) -> usize {
        self.free_costates.len() + self.switch_count() + 1
    }

    fn residual(&self, z: &[f64]) -> Result<Vec<f64>> {
        let (lam, times, tf) = self.unpack(z);
        self.residuals(&lam, &times, tf)
    }
}

/// Solves the boundary-value problem of `spec` from `guess`: bang arcs take
/// their bound, singular arcs follow the singular law, and Newton adjusts
/// the initial costate, switch times and final time until the terminal
/// conditions, switching conditions and `H(t_f) = −1` hold.
pub fn shoot(spec: &ShootingSpec, guess: &ShootingGuess, options: &ShootingOptions) -> Result<ShootingSolution> {
    let bvp = Bvp::new(spec, options.integrator)?;
    if guess.switch_times.len() != bvp.switch_count() {
        return Err(Error::Shooting(format!("guess has {} switch times, structure has {}", guess.switch_times.len(), bvp.switch_count())));
    }
    let z0 = bvp.pack(&guess.costate0, &guess.switch_times, guess.t_final);
    let result = newton_solve(&bvp, &z0, &options.newton)?;
    let (costate0, switch_times, t_final) = bvp.unpack(&result.z);
    let prop = bvp.propagate(&costate0, &switch_times, t_final)?;
    let trajectory = bvp.trajectory(&prop, options.samples)?;
    Ok(ShootingSolution { costate0, switch_times, t_final, residual_norm: result.norm, iterations: result.iterations, trajectory })
}

/// A located zero of a switching function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub t: f64,
    /// Zero-based control index.
    pub control: usize,
    /// `g_j` at the located time.
    pub g: f64,
}

/// Integrates state and costate from the maneuver's initial state and
/// `costate0` to `t_final` with every active control chosen by the sign of
/// its switching function, locating each zero crossing as an event.
pub fn replay_bang_bang(
    maneuver: &Maneuver,
    costate0: &StateVec,
    t_final: f64,
    config: &IntegratorConfig,
) -> Result<(Trajectory, Vec<SwitchEvent>)> {
    let model = &maneuver.model;
    let a = model.a();
    let active = model.torque_mode().active_controls();
    let y0 = maneuver.bc.initial_state.to_array();
    let mut z: Joint = std::array::from_fn(|i| if i < STATE_DIM { y0[i] } else { costate0[i - STATE_DIM] });
    // +1: control on its lower bound, expecting g > 0
    let mut side: [f64; CONTROL_DIM] = std::array::from_fn(|j| if costate0[j] > 0.0 { 1.0 } else { -1.0 });
    let mut t = 0.0;
    let mut events = Vec::new();
    let mut points = Vec::new();
    let bang = |side: &[f64; CONTROL_DIM]| -> ControlVec {
        std::array::from_fn(|j| {
            if !active.contains(&j) {
                return 0.0;
            }
            let (lo, hi) = model.control_bounds(j);
            if side[j] > 0.0 {
                lo
            } else {
                hi
            }
        })
    };
    while t < t_final {
        let u = bang(&side);
        let rhs = |_: f64, z: &Joint| -> Joint {
            let (y, lam) = split(z);
            let f = rates(a, &y, &u);
            let g = costate_rates(a, &y, &lam);
            std::array::from_fn(|i| if i < STATE_DIM { f[i] } else { g[i - STATE_DIM] })
        };
        let fns: Vec<JointEvent> =
            active.iter().map(|&j| Box::new(move |_: f64, z: &Joint| side[j] * z[STATE_DIM + j]) as JointEvent).collect();
        let refs: Vec<EventFn<'_, { 2 * STATE_DIM }>> = fns.iter().map(|b| b.as_ref() as EventFn<'_, { 2 * STATE_DIM }>).collect();
        let out = dopri5(rhs, t, z, t_final, config, &refs, true)?;
        if points.is_empty() {
            let (y, lam) = split(&z);
            points.push(TrajectoryPoint { t, state: y, control: u, costate: Some(lam) });
        }
        for step in &out.steps {
            let te = step.t1().min(out.t_end);
            let (y, lam) = split(&step.eval(te));
            points.push(TrajectoryPoint { t: te, state: y, control: u, costate: Some(lam) });
        }
        t = out.t_end;
        z = out.y_end;
        if let Some(hit) = out.events.first().filter(|_| out.stopped) {
            let j = active[hit.index];
            side[j] = -side[j];
            events.push(SwitchEvent { t: hit.t, control: j, g: hit.y[STATE_DIM + j] });
        } else {
            break;
        }
    }
    let switches = events.iter().map(|e| e.t).collect();
    Ok((Trajectory::new(points, switches), events))
}
