use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::arcs::{ArcKind, ControlStructure};
use super::detect::{detect_structure, DetectionOptions};
use crate::collocation::{
    estimate_costates, grid_trajectory, transcribe, CollocationProblem, DirectTrajectory, DiscreteSolution, Domain, Mesh, Regularization,
    RegularizationFunctional,
};
use crate::dynamics::Maneuver;
use crate::error::{Error, Result};
use crate::mesh::{estimate_error, raise_degree, refine, RefinementPolicy};
use crate::nlp::{solve_warm, NlpOptions, WarmStart};
use crate::pmp::{pmp_residuals, PmpResiduals};
use crate::trajectory::Trajectory;

/// ε sequence of the singular-arc regularization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationSchedule {
    pub epsilon0: f64,
    pub reduction: f64,
    pub delta_tolerance: f64,
    pub max_iterations: usize,
    pub functional: RegularizationFunctional,
}

impl Default for RegularizationSchedule {
    fn default() -> Self {
        Self {
            epsilon0: 1e-1,
            reduction: 1e2,
            delta_tolerance: 1e-8,
            max_iterations: 6,
            functional: RegularizationFunctional::ControlEnergy,
        }
    }
}

/// Outcome of the regularization loop. `epsilon` is `None` when no arc is
/// singular.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationRecord {
    pub epsilon: Option<f64>,
    pub delta: f64,
    pub p: usize,
}

impl RegularizationRecord {
    pub fn none() -> Self {
        Self { epsilon: None, delta: 0.0, p: 0 }
    }
}

/// One domain per structure segment, each with a share of `intervals`
/// proportional to its length (at least one).
pub fn structured_mesh(structure: &ControlStructure, intervals: usize, points: usize) -> Result<Mesh> {
    let mut edges = vec![0.0];
    edges.extend(&structure.breakpoints);
    edges.push(1.0);
    let domains = edges.windows(2).map(|w| Domain::uniform(((w[1] - w[0]) * intervals as f64).round().max(1.0) as usize, points)).collect();
    let mesh = Mesh { domains };
    mesh.validate()?;
    Ok(mesh)
}

/// Transcription with one domain per structure segment. Durations are
/// bounded below by `min_duration`.
pub fn apply_structure(
    maneuver: &Maneuver,
    structure: &ControlStructure,
    mesh: &Mesh,
    regularization: Option<Regularization>,
    min_duration: f64,
) -> Result<CollocationProblem> {
    let reg = if structure.has_singular() { regularization } else { None };
    Ok(transcribe(maneuver, mesh, Some(structure), reg)?.with_min_duration(min_duration))
}

/// Durations of the structure's domains.
pub fn structure_durations(structure: &ControlStructure) -> Vec<f64> {
    let mut edges = vec![0.0];
    edges.extend(structure.switch_times());
    edges.push(structure.t_final);
    edges.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Solves and packs the result; non-converged solves are errors.
pub fn solve_collocation(
    problem: &CollocationProblem,
    x0: &[f64],
    warm: Option<&WarmStart>,
    options: &NlpOptions,
) -> Result<DiscreteSolution> {
    let result = solve_warm(problem, x0, warm, options);
    if !result.status.is_success() {
        return Err(Error::Nlp(result.status));
    }
    Ok(DiscreteSolution::from_nlp(problem, &result))
}

/// Runs the ε schedule from `x0`: solve, measure δ, and stop once δ falls
/// under the tolerance, reducing ε and warm-starting otherwise. On failure
/// after at least one success, the error carries no solution; callers keep
/// the last one they saw through `on_solution`.
pub fn regularize_singular(
    problem: &CollocationProblem,
    x0: &[f64],
    warm: Option<&WarmStart>,
    schedule: &RegularizationSchedule,
    options: &NlpOptions,
    mut on_solution: impl FnMut(&CollocationProblem, &DiscreteSolution, RegularizationRecord),
) -> Result<(CollocationProblem, DiscreteSolution, RegularizationRecord)> {
    let mut epsilon = schedule.epsilon0;
    let mut x = x0.to_vec();
    let mut warm = warm.cloned();
    let mut last: Option<f64> = None;
    for p in 1..=schedule.max_iterations {
        let prob = problem.with_regularization(Some(Regularization { epsilon, functional: schedule.functional }));
        let sol = solve_collocation(&prob, &x, warm.as_ref(), options)?;
        let delta = sol.regularization.max(0.0);
        // δ is reported as the running minimum so a re-solve that lands on
        // a slightly different representative cannot make it grow
        let delta = last.map_or(delta, |d| d.min(delta));
        last = Some(delta);
        let record = RegularizationRecord { epsilon: Some(epsilon), delta, p };
        on_solution(&prob, &sol, record);
        if delta <= schedule.delta_tolerance {
            return Ok((prob, sol, record));
        }
        x = sol.x.clone();
        warm = sol.warm_start.clone();
        epsilon /= schedule.reduction;
    }
    Err(Error::RegularizationExhausted(schedule.max_iterations))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BbsocOptions {
    pub mesh_intervals: usize,
    pub mesh_points: usize,
    /// Horizon used to build the first guess.
    pub t_final_guess: f64,
    /// Smallest domain duration as a fraction of the horizon guess.
    pub min_arc_fraction: f64,
    pub refinement: RefinementPolicy,
    pub nlp: NlpOptions,
    pub detection: DetectionOptions,
    pub schedule: RegularizationSchedule,
    /// Largest `|H + 1|` at the nodes accepted from a structured solve.
    pub hamiltonian_tolerance: f64,
    /// Samples of the returned trajectory (plus one per switch).
    pub samples: usize,
}

impl Default for BbsocOptions {
    fn default() -> Self {
        Self {
            mesh_intervals: 20,
            mesh_points: 3,
            t_final_guess: 3.0,
            min_arc_fraction: 1e-3,
            refinement: RefinementPolicy::default(),
            // switch times sit in very flat directions of the objective, so an
            // early stop at the acceptable level can leave them far from the
            // optimum; only the full tolerance ends a solve
            nlp: NlpOptions { acceptable_iter: NlpOptions::default().max_iter, ..NlpOptions::default() },
            detection: DetectionOptions::default(),
            schedule: RegularizationSchedule::default(),
            hamiltonian_tolerance: 1e-6,
            samples: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    InitialSolve,
    InitialRefinement,
    Detection,
    StructuredSolve,
    StructuredRefinement,
    Regularization,
    Verification,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::InitialSolve => "initial solve",
            Stage::InitialRefinement => "initial mesh refinement",
            Stage::Detection => "structure detection",
            Stage::StructuredSolve => "structured solve",
            Stage::StructuredRefinement => "structured mesh refinement",
            Stage::Regularization => "singular regularization",
            Stage::Verification => "PMP verification",
        })
    }
}

/// One solve on one mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshRound {
    pub stage: Stage,
    pub domains: usize,
    pub intervals: usize,
    pub points: usize,
    pub max_error: f64,
    pub t_final: f64,
    pub nlp_iterations: usize,
}

/// A switch of one control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchRecord {
    pub time: f64,
    /// One-based control index.
    pub control: usize,
    pub from: ArcKind,
    pub to: ArcKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub maneuver: String,
    pub t_final: f64,
    /// Domain boundaries, increasing.
    pub switch_times: Vec<f64>,
    pub switches: Vec<SwitchRecord>,
    pub structure: Option<ControlStructure>,
    pub regularization: RegularizationRecord,
    pub pmp: Option<PmpResiduals>,
    pub mesh_history: Vec<MeshRound>,
    pub nlp_iterations: usize,
    pub wall_time_s: f64,
    /// Non-fatal findings, e.g. refinement that stopped above tolerance.
    pub warnings: Vec<String>,
    /// `None` on success, otherwise the stage that failed.
    pub failed_stage: Option<Stage>,
}

impl SolveReport {
    fn empty(maneuver: &str) -> Self {
        Self {
            maneuver: maneuver.to_string(),
            t_final: f64::NAN,
            switch_times: Vec::new(),
            switches: Vec::new(),
            structure: None,
            regularization: RegularizationRecord::none(),
            pmp: None,
            mesh_history: Vec::new(),
            nlp_iterations: 0,
            wall_time_s: 0.0,
            warnings: Vec::new(),
            failed_stage: None,
        }
    }
}

/// Everything a successful run produces.
#[derive(Debug, Clone)]
pub struct BbsocSolution {
    /// Dense samples with costates.
    pub trajectory: Trajectory,
    pub report: SolveReport,
    pub structure: ControlStructure,
    pub problem: CollocationProblem,
    pub solution: DiscreteSolution,
    pub direct: DirectTrajectory,
}

/// A failed run: the stage, the cause, and the best result reached before it.
#[derive(Debug, Clone)]
pub struct StageFailure {
    pub stage: Stage,
    pub error: Error,
    pub report: SolveReport,
    pub partial: Option<Trajectory>,
}

impl std::fmt::Display for StageFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageFailure {}

struct Best {
    problem: CollocationProblem,
    solution: DiscreteSolution,
}

impl Best {
    fn trajectory(&self, samples: usize) -> Trajectory {
        let lam = estimate_costates(&self.problem, &self.solution).ok();
        Trajectory::sampled(&DirectTrajectory::new(&self.problem, &self.solution, lam), samples)
    }
}

struct Run<'a> {
    options: &'a BbsocOptions,
    report: SolveReport,
    best: Option<Best>,
    started: Instant,
}

impl Run<'_> {
    fn record(&mut self, stage: Stage, problem: &CollocationProblem, solution: &DiscreteSolution, max_error: f64) {
        self.report.mesh_history.push(MeshRound {
            stage,
            domains: problem.domain_count(),
            intervals: problem.mesh().interval_count(),
            points: problem.collocation_points(),
            max_error,
            t_final: solution.t_final(),
            nlp_iterations: solution.nlp.iterations,
        });
        self.report.nlp_iterations += solution.nlp.iterations;
        self.best = Some(Best { problem: problem.clone(), solution: solution.clone() });
    }

    fn fail(mut self, stage: Stage, error: Error) -> StageFailure {
        self.report.failed_stage = Some(stage);
        self.report.wall_time_s = self.started.elapsed().as_secs_f64();
        let partial = self.best.as_ref().map(|b| b.trajectory(self.options.samples));
        if let Some(b) = &self.best {
            self.report.t_final = b.solution.t_final();
            self.report.switch_times = b.solution.switch_times();
        }
        StageFailure { stage, error, report: self.report, partial }
    }

    /// Solve, estimate, refine, repeat. Returns the last solve; running out
    /// of rounds is recorded as a warning. With `check_hamiltonian`, a mesh
    /// that meets the state tolerance is still raised in degree while the
    /// Hamiltonian at the nodes strays from −1 by more than its tolerance.
    fn refine_loop(
        &mut self,
        stage: Stage,
        mut problem: CollocationProblem,
        mut solution: DiscreteSolution,
        check_hamiltonian: bool,
    ) -> (CollocationProblem, DiscreteSolution) {
        let policy = self.options.refinement;
        for round in 0..=policy.max_rounds {
            let estimate = estimate_error(&problem, &solution);
            self.record(stage, &problem, &solution, estimate.max);
            let mesh = if !estimate.meets(policy.tolerance) {
                refine(problem.mesh(), &estimate, &policy)
            } else if check_hamiltonian && node_hamiltonian_error(&problem, &solution) > self.options.hamiltonian_tolerance {
                raise_degree(problem.mesh(), 2)
            } else {
                return (problem, solution);
            };
            if round == policy.max_rounds {
                break;
            }
            let next = problem.remeshed(&mesh);
            let Ok(next) = next else { break };
            let source = DirectTrajectory::new(&problem, &solution, None);
            let x0 = next.guess_from(&source, &solution.durations);
            match solve_collocation(&next, &x0, None, &self.options.nlp) {
                Ok(s) => {
                    problem = next;
                    solution = s;
                }
                Err(e) => {
                    self.report.warnings.push(format!("{stage}: re-solve on refined mesh failed ({e}); keeping the previous mesh"));
                    return (problem, solution);
                }
            }
        }
        let err = self.report.mesh_history.last().map_or(f64::NAN, |r| r.max_error);
        self.report.warnings.push(format!(
            "{stage}: {}; state error {err:.3e} (tolerance {:.1e}), Hamiltonian error {:.3e}",
            Error::RefinementStagnation(policy.max_rounds),
            policy.tolerance,
            node_hamiltonian_error(&problem, &solution),
        ));
        (problem, solution)
    }
}

/// `max |H + 1|` over the mesh nodes; infinite when the costates cannot be
/// recovered.
fn node_hamiltonian_error(problem: &CollocationProblem, solution: &DiscreteSolution) -> f64 {
    let Ok(costates) = estimate_costates(problem, solution) else { return f64::INFINITY };
    let model = &problem.maneuver().model;
    grid_trajectory(problem, solution, Some(&costates))
        .points
        .iter()
        .filter_map(|p| p.hamiltonian(model))
        .map(|h| (h + 1.0).abs())
        .fold(0.0, f64::max)
}

/// The full method: unstructured solve and refinement, structure
/// detection, structured solve with switch-time optimization and mesh
/// refinement, singular-arc regularization, and PMP verification.
#[allow(clippy::result_large_err)]
pub fn bbsoc_solve(maneuver: &Maneuver, options: &BbsocOptions) -> std::result::Result<BbsocSolution, StageFailure> {
    let mut run = Run { options, report: SolveReport::empty(&maneuver.name), best: None, started: Instant::now() };
    let tf0 = options.t_final_guess;
    let min_duration = options.min_arc_fraction * tf0;

    // initial unstructured solve, started from a feasibility homotopy
    let seed = match Mesh::uniform(options.mesh_intervals, options.mesh_points) {
        Ok(m) => m,
        Err(e) => return Err(run.fail(Stage::InitialSolve, e)),
    };
    let problem = match transcribe(maneuver, &seed, None, None) {
        Ok(p) => p.with_min_duration(min_duration),
        Err(e) => return Err(run.fail(Stage::InitialSolve, e)),
    };
    let initial = match initial_solve(&problem, tf0, &options.nlp) {
        Ok(s) => s,
        Err(e) => return Err(run.fail(Stage::InitialSolve, e)),
    };
    let (problem, initial) = run.refine_loop(Stage::InitialRefinement, problem, initial, false);

    // structure
    let costates = match estimate_costates(&problem, &initial) {
        Ok(l) => l,
        Err(e) => return Err(run.fail(Stage::Detection, e)),
    };
    let grid = grid_trajectory(&problem, &initial, Some(&costates));
    let structure = match detect_structure(&grid, &maneuver.model, &options.detection) {
        Ok(s) => s,
        Err(e) => return Err(run.fail(Stage::Detection, e)),
    };

    // structured solve with switch times as variables
    let mesh = match structured_mesh(&structure, options.mesh_intervals, options.mesh_points) {
        Ok(m) => m,
        Err(e) => return Err(run.fail(Stage::StructuredSolve, e)),
    };
    let schedule = options.schedule;
    let first_reg = Regularization { epsilon: schedule.epsilon0, functional: schedule.functional };
    let structured = match apply_structure(maneuver, &structure, &mesh, Some(first_reg), min_duration) {
        Ok(p) => p,
        Err(e) => return Err(run.fail(Stage::StructuredSolve, e)),
    };
    let source = DirectTrajectory::new(&problem, &initial, None);
    let x0 = structured.guess_from(&source, &structure_durations(&structure));
    let solved = match solve_collocation(&structured, &x0, None, &options.nlp) {
        Ok(s) => s,
        Err(e) => return Err(run.fail(Stage::StructuredSolve, e)),
    };
    let (mut problem, mut solution) = run.refine_loop(Stage::StructuredRefinement, structured, solved, !structure.has_singular());

    // regularization on the refined mesh
    if structure.has_singular() {
        let mut seen: Vec<(CollocationProblem, DiscreteSolution, RegularizationRecord)> = Vec::new();
        let outcome =
            regularize_singular(&problem, &solution.x.clone(), solution.warm_start.as_ref(), &schedule, &options.nlp, |p, s, r| {
                seen.push((p.clone(), s.clone(), r))
            });
        for (p, s, _) in &seen {
            run.record(Stage::Regularization, p, s, f64::NAN);
        }
        match outcome {
            Ok((p, s, record)) => {
                run.report.regularization = record;
                problem = p;
                solution = s;
            }
            Err(e) => {
                if let Some((_, _, r)) = seen.last() {
                    run.report.regularization = *r;
                }
                return Err(run.fail(Stage::Regularization, e));
            }
        }
        // the regularized solution gets the same accuracy checks
        let (p, s) = run.refine_loop(Stage::StructuredRefinement, problem, solution, true);
        problem = p;
        solution = s;
    }

    // verification
    let costates = match estimate_costates(&problem, &solution) {
        Ok(l) => l,
        Err(e) => return Err(run.fail(Stage::Verification, e)),
    };
    let direct = DirectTrajectory::new(&problem, &solution, Some(costates));
    let trajectory = Trajectory::sampled(&direct, options.samples);
    let final_structure = structure.with_times(&solution.switch_times(), solution.t_final());
    let pmp = match pmp_residuals(maneuver, &trajectory, Some(&final_structure)) {
        Ok(r) => r,
        Err(e) => return Err(run.fail(Stage::Verification, e)),
    };

    let mut report = run.report;
    report.t_final = solution.t_final();
    report.switch_times = solution.switch_times();
    report.switches = switch_records(&final_structure);
    report.structure = Some(final_structure.clone());
    report.pmp = Some(pmp);
    report.wall_time_s = run.started.elapsed().as_secs_f64();
    Ok(BbsocSolution { trajectory, report, structure: final_structure, problem, solution, direct })
}

/// Feasibility homotopy then the minimum-time problem. A failed homotopy
/// is retried with a doubled horizon.
fn initial_solve(problem: &CollocationProblem, t_final: f64, options: &NlpOptions) -> Result<DiscreteSolution> {
    let mut horizon = t_final;
    let mut last_err = Error::Nlp(crate::nlp::NlpStatus::MaxIterations);
    for _ in 0..3 {
        let phase = problem.feasibility_phase(horizon);
        let start = solve_collocation(&phase, &phase.straight_line_guess(horizon), None, options);
        match start.and_then(|s| solve_collocation(problem, &s.x, None, options)) {
            Ok(s) => return Ok(s),
            Err(e) => last_err = e,
        }
        horizon *= 2.0;
    }
    Err(last_err)
}

fn switch_records(structure: &ControlStructure) -> Vec<SwitchRecord> {
    let mut out = Vec::new();
    for list in &structure.arcs {
        for w in list.windows(2) {
            out.push(SwitchRecord { time: w[0].end * structure.t_final, control: w[0].control + 1, from: w[0].kind, to: w[1].kind });
        }
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.control.cmp(&b.control)));
    out
}
