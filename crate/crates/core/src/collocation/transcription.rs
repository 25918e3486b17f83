//! Multi-domain Radau transcription.
//!
//! Decision variables are the domain durations `Δ_d` (their sum is `t_f`),
//! the free state values at the state nodes and the free control values at
//! the collocation points. State nodes are shared between neighbouring
//! intervals and domains, so continuity holds by construction. The initial
//! state and the fixed terminal components are constants.
//!
//! On interval `k` of domain `d`, with `n` points and width `h_k` (a fraction
//! of the domain), the defect at point `r` is
//!
//! ```text
//! Σ_s D_rs Y_s − (Δ_d h_k / 2) f(Y_r, U_r) = 0.
//! ```

use serde::{Deserialize, Serialize};

use super::lgr::{rule, LgrRule};
use super::Mesh;
use crate::dynamics::{rates, state_jacobian, weighted_state_hessian, ControlVec, Maneuver, StateVec, Terminal, CONTROL_DIM, STATE_DIM};
use crate::error::{Error, Result};
use crate::nlp::NlpProblem;
use crate::structure::{ArcKind, ControlStructure};
use crate::trajectory::TrajectorySource;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ControlMode {
    Free,
    Fixed(f64),
}

/// Penalty added on the singular controls of singular domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizationFunctional {
    /// `ε ∫ u² dt` by Radau quadrature.
    #[default]
    ControlEnergy,
    /// `ε Σ (u_{p+1} − u_p)²` over consecutive collocation points.
    ControlVariation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularization {
    pub epsilon: f64,
    pub functional: RegularizationFunctional,
}

/// Where a state or control value lives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot {
    Var(usize),
    Fixed(f64),
}

impl Slot {
    #[inline]
    fn value(self, x: &[f64]) -> f64 {
        match self {
            Slot::Var(i) => x[i],
            Slot::Fixed(v) => v,
        }
    }

    #[inline]
    fn var(self) -> Option<usize> {
        match self {
            Slot::Var(i) => Some(i),
            Slot::Fixed(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalLayout {
    pub domain: usize,
    /// Fractions of the domain.
    pub start: f64,
    pub width: f64,
    pub points: usize,
    /// First state node; equals the first collocation point index.
    pub offset: usize,
}

#[derive(Debug, Clone)]
pub struct CollocationProblem {
    maneuver: Maneuver,
    mesh: Mesh,
    modes: Vec<[ControlMode; CONTROL_DIM]>,
    regularized: Vec<[bool; CONTROL_DIM]>,
    regularization: Option<Regularization>,
    min_duration: f64,
    /// `(target, weight)` of a quadratic penalty on the horizon.
    anchor: Option<(f64, f64)>,
    intervals: Vec<IntervalLayout>,
    /// Interval and in-interval index of each collocation point.
    point_owner: Vec<(usize, usize)>,
    nodes: Vec<[Slot; STATE_DIM]>,
    controls: Vec<[Slot; CONTROL_DIM]>,
    n_vars: usize,
    jac_structure: Vec<(usize, usize)>,
    hess_structure: Vec<(usize, usize)>,
}

/// Transcribes `maneuver` on `mesh`. With a structure, the mesh must have one
/// domain per structure domain; bang controls are pinned and singular
/// controls carry the regularization penalty.
pub fn transcribe(
    maneuver: &Maneuver,
    mesh: &Mesh,
    structure: Option<&ControlStructure>,
    regularization: Option<Regularization>,
) -> Result<CollocationProblem> {
    maneuver.validate()?;
    mesh.validate()?;
    let model = &maneuver.model;
    if let Terminal::Fixed(v) = maneuver.bc.terminal[2] {
        let w0 = maneuver.bc.initial_state.to_array()[2];
        if !model.torque_mode().is_active(2) && (v - w0).abs() > 1e-12 {
            return Err(Error::InvalidBoundaryConditions(format!("terminal spin {v} unreachable without u3 from {w0}")));
        }
    }
    let domains = mesh.domains.len();
    let mut modes = vec![[ControlMode::Free; CONTROL_DIM]; domains];
    let mut regularized = vec![[false; CONTROL_DIM]; domains];
    if let Some(s) = structure {
        if s.domain_count() != domains {
            return Err(Error::StructureMismatch(format!("structure has {} domains, mesh has {domains}", s.domain_count())));
        }
    }
    for d in 0..domains {
        for j in 0..CONTROL_DIM {
            if !model.torque_mode().is_active(j) {
                modes[d][j] = ControlMode::Fixed(0.0);
                continue;
            }
            match structure.and_then(|s| s.domain_kind(j, d)) {
                Some(ArcKind::BangMin) => modes[d][j] = ControlMode::Fixed(model.u_min()),
                Some(ArcKind::BangMax) => modes[d][j] = ControlMode::Fixed(model.u_max()),
                Some(ArcKind::Singular) => regularized[d][j] = true,
                None => {}
            }
        }
    }
    Ok(CollocationProblem::build(maneuver.clone(), mesh.clone(), modes, regularized, regularization))
}

impl CollocationProblem {
    fn build(
        maneuver: Maneuver,
        mesh: Mesh,
        modes: Vec<[ControlMode; CONTROL_DIM]>,
        regularized: Vec<[bool; CONTROL_DIM]>,
        regularization: Option<Regularization>,
    ) -> Self {
        let domains = mesh.domains.len();
        let mut intervals = Vec::new();
        let mut point_owner = Vec::new();
        let mut offset = 0;
        for (d, dom) in mesh.domains.iter().enumerate() {
            for iv in &dom.intervals {
                for r in 0..iv.points {
                    point_owner.push((intervals.len(), r));
                }
                intervals.push(IntervalLayout { domain: d, start: iv.start, width: iv.width(), points: iv.points, offset });
                offset += iv.points;
            }
        }
        let n_points = offset;
        let mut next = domains;
        let y0 = maneuver.bc.initial_state.to_array();
        // Without u3 the spin is constant, so a fixed terminal spin would only
        // duplicate the dynamics and leave the multipliers undetermined.
        let redundant: [bool; STATE_DIM] = std::array::from_fn(|c| c == 2 && !maneuver.model.torque_mode().is_active(2));
        let mut nodes = Vec::with_capacity(n_points + 1);
        for g in 0..=n_points {
            let mut slots = [Slot::Fixed(0.0); STATE_DIM];
            for c in 0..STATE_DIM {
                slots[c] = if g == 0 {
                    Slot::Fixed(y0[c])
                } else if let (true, Terminal::Fixed(v), false) = (g == n_points, maneuver.bc.terminal[c], redundant[c]) {
                    Slot::Fixed(v)
                } else {
                    next += 1;
                    Slot::Var(next - 1)
                };
            }
            nodes.push(slots);
        }
        let mut controls = Vec::with_capacity(n_points);
        for &(k, _) in &point_owner {
            let d = intervals[k].domain;
            let mut slots = [Slot::Fixed(0.0); CONTROL_DIM];
            for j in 0..CONTROL_DIM {
                slots[j] = match modes[d][j] {
                    ControlMode::Fixed(v) => Slot::Fixed(v),
                    ControlMode::Free => {
                        next += 1;
                        Slot::Var(next - 1)
                    }
                };
            }
            controls.push(slots);
        }
        let mut p = Self {
            maneuver,
            mesh,
            modes,
            regularized,
            regularization,
            min_duration: 1e-4,
            anchor: None,
            intervals,
            point_owner,
            nodes,
            controls,
            n_vars: next,
            jac_structure: Vec::new(),
            hess_structure: Vec::new(),
        };
        p.cache_structure();
        p
    }

    fn cache_structure(&mut self) {
        let zeros = vec![0.0; self.n_vars];
        let mut jac = Vec::new();
        self.visit_jacobian(&zeros, &mut |r, c, _| jac.push((r, c)));
        let mut hess = Vec::new();
        let ym = vec![0.0; self.num_constraints()];
        self.visit_hessian(&zeros, 1.0, &ym, &mut |r, c, _| hess.push((r, c)));
        self.jac_structure = jac;
        self.hess_structure = hess;
    }

    /// Homotopy start: the horizon is held near `t_final` by a quadratic
    /// penalty and every free control pays a small energy cost, so the
    /// problem is strictly convex in the controls.
    pub fn feasibility_phase(&self, t_final: f64) -> Self {
        let mut p = self.clone();
        for (d, flags) in p.regularized.iter_mut().enumerate() {
            for j in 0..CONTROL_DIM {
                flags[j] = matches!(self.modes[d][j], ControlMode::Free);
            }
        }
        p.regularization = Some(Regularization { epsilon: 1e-2, functional: RegularizationFunctional::ControlEnergy });
        p.anchor = Some((t_final, 100.0 / t_final));
        p.cache_structure();
        p
    }

    /// Lower bound on every domain duration.
    pub fn with_min_duration(mut self, min_duration: f64) -> Self {
        assert!(min_duration > 0.0);
        self.min_duration = min_duration;
        self
    }

    pub fn maneuver(&self) -> &Maneuver {
        &self.maneuver
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn intervals(&self) -> &[IntervalLayout] {
        &self.intervals
    }

    pub fn domain_count(&self) -> usize {
        self.mesh.domains.len()
    }

    pub fn control_modes(&self) -> &[[ControlMode; CONTROL_DIM]] {
        &self.modes
    }

    pub fn regularized(&self) -> &[[bool; CONTROL_DIM]] {
        &self.regularized
    }

    pub fn regularization(&self) -> Option<Regularization> {
        self.regularization
    }

    pub fn collocation_points(&self) -> usize {
        self.controls.len()
    }

    pub fn state_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Decision-variable slot of every state component at every node.
    pub fn node_slots(&self) -> &[[Slot; STATE_DIM]] {
        &self.nodes
    }

    pub fn control_slots(&self) -> &[[Slot; CONTROL_DIM]] {
        &self.controls
    }

    /// Same problem on a mesh with the same domains.
    pub fn remeshed(&self, mesh: &Mesh) -> Result<Self> {
        mesh.validate()?;
        if mesh.domains.len() != self.domain_count() {
            return Err(Error::InvalidMesh(format!(
                "refined mesh has {} domains, problem has {}",
                mesh.domains.len(),
                self.domain_count()
            )));
        }
        let mut p = Self::build(self.maneuver.clone(), mesh.clone(), self.modes.clone(), self.regularized.clone(), self.regularization)
            .with_min_duration(self.min_duration);
        p.anchor = self.anchor;
        p.cache_structure();
        Ok(p)
    }

    /// Same problem with a different regularization weight.
    pub fn with_regularization(&self, regularization: Option<Regularization>) -> Self {
        Self::build(self.maneuver.clone(), self.mesh.clone(), self.modes.clone(), self.regularized.clone(), regularization)
            .with_min_duration(self.min_duration)
    }

    pub fn durations(&self, x: &[f64]) -> Vec<f64> {
        x[..self.domain_count()].to_vec()
    }

    pub fn t_final(&self, x: &[f64]) -> f64 {
        self.durations(x).iter().sum()
    }

    pub fn state(&self, x: &[f64], node: usize) -> StateVec {
        std::array::from_fn(|c| self.nodes[node][c].value(x))
    }

    pub fn control(&self, x: &[f64], point: usize) -> ControlVec {
        std::array::from_fn(|j| self.controls[point][j].value(x))
    }

    /// Time of every state node.
    pub fn node_times(&self, x: &[f64]) -> Vec<f64> {
        let dur = self.durations(x);
        let starts = domain_starts(&dur);
        let mut t = Vec::with_capacity(self.nodes.len());
        for iv in &self.intervals {
            let lgr = rule(iv.points);
            for &tau in &lgr.points {
                t.push(starts[iv.domain] + dur[iv.domain] * (iv.start + 0.5 * (tau + 1.0) * iv.width));
            }
        }
        t.push(dur.iter().sum());
        t
    }

    fn interval_rule(&self, k: usize) -> &'static LgrRule {
        rule(self.intervals[k].points)
    }

    /// Straight-line guess between the boundary states, zero controls
    /// (clipped into the bounds) and equal domain durations.
    pub fn straight_line_guess(&self, t_final: f64) -> Vec<f64> {
        let y0 = self.maneuver.bc.initial_state.to_array();
        let yf: StateVec = std::array::from_fn(|c| self.maneuver.bc.terminal[c].value().unwrap_or(y0[c]));
        let domains = self.domain_count();
        let mut x = vec![t_final / domains as f64; self.n_vars];
        let times = self.node_times(&x);
        for (g, slots) in self.nodes.iter().enumerate() {
            let s = times[g] / t_final;
            for c in 0..STATE_DIM {
                if let Slot::Var(i) = slots[c] {
                    x[i] = y0[c] + s * (yf[c] - y0[c]);
                }
            }
        }
        let model = &self.maneuver.model;
        for slots in &self.controls {
            for (j, slot) in slots.iter().enumerate() {
                if let Slot::Var(i) = slot {
                    let (lo, hi) = model.control_bounds(j);
                    x[*i] = 0.0f64.clamp(lo, hi);
                }
            }
        }
        x
    }

    /// Guess sampled from a trajectory, with the given domain durations.
    pub fn guess_from<S: TrajectorySource + ?Sized>(&self, source: &S, durations: &[f64]) -> Vec<f64> {
        assert_eq!(durations.len(), self.domain_count());
        let mut x = vec![0.0; self.n_vars];
        x[..durations.len()].copy_from_slice(durations);
        let times = self.node_times(&x);
        let model = &self.maneuver.model;
        // nodes at domain boundaries are sampled from the later side
        for (g, slots) in self.nodes.iter().enumerate() {
            let p = source.sample(times[g]);
            for c in 0..STATE_DIM {
                if let Slot::Var(i) = slots[c] {
                    x[i] = p.state[c];
                }
            }
            if g < self.controls.len() {
                for j in 0..CONTROL_DIM {
                    if let Slot::Var(i) = self.controls[g][j] {
                        let (lo, hi) = model.control_bounds(j);
                        x[i] = p.control[j].clamp(lo, hi);
                    }
                }
            }
        }
        x
    }

    /// Value of the regularization term alone.
    pub fn regularization_value(&self, x: &[f64]) -> f64 {
        let Some(reg) = self.regularization else { return 0.0 };
        let mut v = 0.0;
        match reg.functional {
            RegularizationFunctional::ControlEnergy => {
                for (p, &(k, r)) in self.point_owner.iter().enumerate() {
                    let iv = &self.intervals[k];
                    let w = self.interval_rule(k).weights[r];
                    for j in 0..CONTROL_DIM {
                        if self.regularized[iv.domain][j] {
                            let u = self.controls[p][j].value(x);
                            v += 0.5 * x[iv.domain] * iv.width * w * u * u;
                        }
                    }
                }
            }
            RegularizationFunctional::ControlVariation => {
                for (p, q) in self.consecutive_points() {
                    let d = self.intervals[self.point_owner[p].0].domain;
                    for j in 0..CONTROL_DIM {
                        if self.regularized[d][j] {
                            let du = self.controls[q][j].value(x) - self.controls[p][j].value(x);
                            v += du * du;
                        }
                    }
                }
            }
        }
        reg.epsilon * v
    }

    /// Pairs of consecutive collocation points in the same domain.
    fn consecutive_points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.point_owner.len()).filter_map(move |q| {
            let p = q - 1;
            (self.intervals[self.point_owner[p].0].domain == self.intervals[self.point_owner[q].0].domain).then_some((p, q))
        })
    }

    fn visit_jacobian(&self, x: &[f64], emit: &mut dyn FnMut(usize, usize, f64)) {
        let a = self.maneuver.model.a();
        for (k, iv) in self.intervals.iter().enumerate() {
            let lgr = self.interval_rule(k);
            let n = iv.points;
            let hw = 0.5 * iv.width;
            let ts = x[iv.domain] * hw;
            for r in 0..n {
                let g = iv.offset + r;
                let y = self.state(x, g);
                let u = self.control(x, g);
                let f = rates(a, &y, &u);
                let jac = state_jacobian(a, &y);
                for c in 0..STATE_DIM {
                    let row = STATE_DIM * g + c;
                    for s in 0..=n {
                        if s != r {
                            if let Some(i) = self.nodes[iv.offset + s][c].var() {
                                emit(row, i, lgr.d(r, s));
                            }
                        }
                    }
                    for c2 in 0..STATE_DIM {
                        if let Some(i) = self.nodes[g][c2].var() {
                            let diag = if c2 == c { lgr.d(r, r) } else { 0.0 };
                            emit(row, i, diag - ts * jac[c][c2]);
                        }
                    }
                    if c < CONTROL_DIM {
                        if let Some(i) = self.controls[g][c].var() {
                            emit(row, i, -ts);
                        }
                    }
                    emit(row, iv.domain, -hw * f[c]);
                }
            }
        }
    }

    fn visit_hessian(&self, x: &[f64], sigma: f64, ym: &[f64], emit: &mut dyn FnMut(usize, usize, f64)) {
        let a = self.maneuver.model.a();
        let mut put = |i: usize, j: usize, v: f64| if i >= j { emit(i, j, v) } else { emit(j, i, v) };
        let energy = self.regularization.filter(|r| r.functional == RegularizationFunctional::ControlEnergy && r.epsilon > 0.0);
        if let Some((_, w)) = self.anchor {
            for d1 in 0..self.domain_count() {
                for d2 in 0..=d1 {
                    put(d1, d2, 2.0 * sigma * w);
                }
            }
        }
        for (p, &(k, r)) in self.point_owner.iter().enumerate() {
            let iv = &self.intervals[k];
            let hw = 0.5 * iv.width;
            let dvar = iv.domain;
            let ts = x[dvar] * hw;
            let y = self.state(x, p);
            let yp: [f64; STATE_DIM] = std::array::from_fn(|c| ym[STATE_DIM * p + c]);
            let h = weighted_state_hessian(a, &y, &yp);
            let jac = state_jacobian(a, &y);
            for c1 in 0..STATE_DIM {
                let Some(i1) = self.nodes[p][c1].var() else { continue };
                for c2 in 0..=c1 {
                    if let Some(i2) = self.nodes[p][c2].var() {
                        put(i1, i2, -ts * h[c1][c2]);
                    }
                }
                let jty: f64 = (0..STATE_DIM).map(|c| yp[c] * jac[c][c1]).sum();
                put(i1, dvar, -hw * jty);
            }
            for j in 0..CONTROL_DIM {
                let Some(i) = self.controls[p][j].var() else { continue };
                put(i, dvar, -hw * yp[j]);
                if let Some(reg) = energy {
                    if self.regularized[dvar][j] {
                        let w = self.interval_rule(k).weights[r];
                        put(i, i, sigma * reg.epsilon * x[dvar] * iv.width * w);
                        put(i, dvar, sigma * reg.epsilon * iv.width * w * x[i]);
                    }
                }
            }
        }
        if let Some(reg) = self.regularization.filter(|r| r.functional == RegularizationFunctional::ControlVariation && r.epsilon > 0.0) {
            let e = 2.0 * sigma * reg.epsilon;
            for (p, q) in self.consecutive_points() {
                let d = self.intervals[self.point_owner[p].0].domain;
                for j in 0..CONTROL_DIM {
                    if let (true, Some(ip), Some(iq)) = (self.regularized[d][j], self.controls[p][j].var(), self.controls[q][j].var()) {
                        put(ip, ip, e);
                        put(iq, iq, e);
                        put(iq, ip, -e);
                    }
                }
            }
        }
    }
}

pub(crate) fn domain_starts(durations: &[f64]) -> Vec<f64> {
    let mut s = Vec::with_capacity(durations.len());
    let mut t = 0.0;
    for d in durations {
        s.push(t);
        t += d;
    }
    s
}

impl NlpProblem for CollocationProblem {
    fn num_variables(&self) -> usize {
        self.n_vars
    }

    fn num_constraints(&self) -> usize {
        STATE_DIM * self.controls.len()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::NEG_INFINITY; self.n_vars];
        let mut hi = vec![f64::INFINITY; self.n_vars];
        for d in 0..self.domain_count() {
            lo[d] = self.min_duration;
        }
        let model = &self.maneuver.model;
        for slots in &self.controls {
            for slot in slots.iter() {
                if let Slot::Var(i) = slot {
                    (lo[*i], hi[*i]) = (model.u_min(), model.u_max());
                }
            }
        }
        (lo, hi)
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let anchor = self.anchor.map_or(0.0, |(t, w)| w * (self.t_final(x) - t).powi(2));
        self.t_final(x) + self.regularization_value(x) + anchor
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        let slope = self.anchor.map_or(0.0, |(t, w)| 2.0 * w * (self.t_final(x) - t));
        for g in grad.iter_mut().take(self.domain_count()) {
            *g = 1.0 + slope;
        }
        let Some(reg) = self.regularization else { return };
        match reg.functional {
            RegularizationFunctional::ControlEnergy => {
                for (p, &(k, r)) in self.point_owner.iter().enumerate() {
                    let iv = &self.intervals[k];
                    let w = self.interval_rule(k).weights[r];
                    for j in 0..CONTROL_DIM {
                        if self.regularized[iv.domain][j] {
                            if let Slot::Var(i) = self.controls[p][j] {
                                let u = x[i];
                                grad[iv.domain] += reg.epsilon * 0.5 * iv.width * w * u * u;
                                grad[i] += reg.epsilon * x[iv.domain] * iv.width * w * u;
                            }
                        }
                    }
                }
            }
            RegularizationFunctional::ControlVariation => {
                for (p, q) in self.consecutive_points() {
                    let d = self.intervals[self.point_owner[p].0].domain;
                    for j in 0..CONTROL_DIM {
                        if let (true, Slot::Var(ip), Slot::Var(iq)) = (self.regularized[d][j], self.controls[p][j], self.controls[q][j]) {
                            let du = x[iq] - x[ip];
                            grad[iq] += 2.0 * reg.epsilon * du;
                            grad[ip] -= 2.0 * reg.epsilon * du;
                        }
                    }
                }
            }
        }
    }

    fn constraints(&self, x: &[f64], c: &mut [f64]) {
        let a = self.maneuver.model.a();
        for (k, iv) in self.intervals.iter().enumerate() {
            let lgr = self.interval_rule(k);
            let n = iv.points;
            let ts = x[iv.domain] * 0.5 * iv.width;
            let ys: Vec<StateVec> = (0..=n).map(|s| self.state(x, iv.offset + s)).collect();
            for r in 0..n {
                let g = iv.offset + r;
                let f = rates(a, &ys[r], &self.control(x, g));
                for comp in 0..STATE_DIM {
                    let dy: f64 = (0..=n).map(|s| lgr.d(r, s) * ys[s][comp]).sum();
                    c[STATE_DIM * g + comp] = dy - ts * f[comp];
                }
            }
        }
    }

    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        self.jac_structure.clone()
    }

    fn jacobian_values(&self, x: &[f64], values: &mut [f64]) {
        let mut k = 0;
        self.visit_jacobian(x, &mut |_, _, v| {
            values[k] = v;
            k += 1;
        });
    }

    fn hessian_structure(&self) -> Vec<(usize, usize)> {
        self.hess_structure.clone()
    }

    fn hessian_values(&self, x: &[f64], obj_factor: f64, y: &[f64], values: &mut [f64]) {
        let mut k = 0;
        self.visit_hessian(x, obj_factor, y, &mut |_, _, v| {
            values[k] = v;
            k += 1;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::builtin_maneuver;
    use crate::nlp::check_derivatives;

    #[test]
    fn initial_mesh_layout() {
        let man = builtin_maneuver("RTR").unwrap();
        let p = transcribe(&man, &Mesh::uniform(20, 3).unwrap(), None, None).unwrap();
        assert_eq!(p.state_nodes(), 61);
        assert_eq!(p.num_constraints(), 5 * 60);
        // t_f + 59 free state nodes + 60 × 3 controls
        assert_eq!(p.num_variables(), 1 + 5 * 59 + 180);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let man = builtin_maneuver("NRTR").unwrap();
        let s = ControlStructure::from_sequences(
            2.0,
            &[
                vec![(ArcKind::BangMax, 0.3), (ArcKind::Singular, 1.0)],
                vec![(ArcKind::BangMin, 0.6), (ArcKind::BangMax, 1.0)],
                vec![(ArcKind::Singular, 1.0)],
            ],
        )
        .unwrap();
        let mesh = Mesh::multi_domain(3, 2, 4).unwrap();
        for functional in [RegularizationFunctional::ControlEnergy, RegularizationFunctional::ControlVariation] {
            let p = transcribe(&man, &mesh, Some(&s), Some(Regularization { epsilon: 0.3, functional })).unwrap();
            let mut x = p.straight_line_guess(2.0);
            for (i, v) in x.iter_mut().enumerate().skip(3) {
                *v += 0.1 * (i as f64).sin();
            }
            let y: Vec<f64> = (0..p.num_constraints()).map(|i| (0.7 * i as f64).cos()).collect();
            let rep = check_derivatives(&p, &x, &y);
            assert!(rep.max() < 1e-6, "{rep:?}");
        }
    }

    #[test]
    fn zero_epsilon_leaves_constraints_unchanged() {
        let man = builtin_maneuver("NRTR_NONSPIN").unwrap();
        let s = ControlStructure::from_sequences(
            2.0,
            &[vec![(ArcKind::BangMax, 0.5), (ArcKind::Singular, 1.0)], vec![(ArcKind::BangMin, 1.0)], vec![]],
        )
        .unwrap();
        let mesh = Mesh::multi_domain(2, 3, 4).unwrap();
        let plain = transcribe(&man, &mesh, Some(&s), None).unwrap();
        let zero = transcribe(&man, &mesh, Some(&s), Some(Regularization { epsilon: 0.0, functional: Default::default() })).unwrap();
        let x = plain.straight_line_guess(2.5);
        let (mut c1, mut c2) = (vec![0.0; plain.num_constraints()], vec![0.0; zero.num_constraints()]);
        plain.constraints(&x, &mut c1);
        zero.constraints(&x, &mut c2);
        assert_eq!(c1, c2);
        assert_eq!(plain.jacobian_structure(), zero.jacobian_structure());
        assert_eq!(plain.objective(&x), zero.objective(&x));
    }
}
