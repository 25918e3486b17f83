mod common;

use reorient::collocation::{transcribe, CollocationProblem, DiscreteSolution, Mesh};
use reorient::dynamics::BoundaryConditions;
use reorient::mesh::{estimate_error, refine, RefinementPolicy};
use reorient::nlp::{solve, KktResiduals, NlpOptions, NlpResult, NlpStatus};
use reorient::oracle::{integrate, IntegratorConfig, SourcePolicy};
use reorient::structure::Stage;
use reorient::{Maneuver, SpacecraftModel, State, Terminal, TorqueMode, Trajectory, TrajectoryPoint};

const EPS_MESH: f64 = 1e-5;

fn solution_from(problem: &CollocationProblem, x: Vec<f64>) -> DiscreteSolution {
    let result = NlpResult {
        x,
        y: Vec::new(),
        z_lower: Vec::new(),
        z_upper: Vec::new(),
        objective: 0.0,
        status: NlpStatus::Converged,
        kkt: KktResiduals::default(),
        iterations: 0,
        mu: 0.0,
        log: Vec::new(),
    };
    DiscreteSolution::from_nlp(problem, &result)
}

fn fixed(y: [f64; 5]) -> [Terminal; 5] {
    y.map(Terminal::Fixed)
}

#[test]
fn constant_solution_has_zero_error() {
    let y = [0.0, 0.0, 0.0, 0.3, -0.2];
    let m = Maneuver {
        name: "HOLD".into(),
        model: SpacecraftModel::with_default_bounds(0.5, TorqueMode::ThreeTorque).unwrap(),
        bc: BoundaryConditions::new(State::from_array(y), fixed(y)).unwrap(),
    };
    let p = transcribe(&m, &Mesh::uniform(4, 3).unwrap(), None, None).unwrap();
    let est = estimate_error(&p, &solution_from(&p, p.straight_line_guess(2.0)));
    assert!(est.max <= 1e-15, "{}", est.max);
    assert!(est.intervals.iter().all(|e| e.error >= 0.0));
}

#[test]
fn polynomial_solution_is_resolved_exactly() {
    let c = 0.7;
    let tf = 2.0;
    let m = Maneuver {
        name: "SPIN".into(),
        model: SpacecraftModel::with_default_bounds(0.0, TorqueMode::ThreeTorque).unwrap(),
        bc: BoundaryConditions::new(State::default(), fixed([0.0, 0.0, c * tf, 0.0, 0.0])).unwrap(),
    };
    let exact = Trajectory::new(
        (0..=200)
            .map(|i| {
                let t = tf * i as f64 / 200.0;
                TrajectoryPoint { t, state: [0.0, 0.0, c * t, 0.0, 0.0], control: [0.0, 0.0, c], costate: None }
            })
            .collect(),
        vec![],
    );
    for n in 3..=6 {
        let p = transcribe(&m, &Mesh::uniform(3, n).unwrap(), None, None).unwrap();
        let est = estimate_error(&p, &solution_from(&p, p.guess_from(&exact, &[tf])));
        assert!(est.max <= 1e-12, "n = {n}: {}", est.max);
    }
}

fn rtr_initial_solve(mesh: &Mesh) -> (CollocationProblem, DiscreteSolution) {
    let m = common::maneuver("RTR", None);
    let p = transcribe(&m, mesh, None, None).unwrap().with_min_duration(3e-3);
    let opts = NlpOptions { check_derivatives: false, ..NlpOptions::default() };
    let warm = solve(&p.feasibility_phase(3.0), &p.straight_line_guess(3.0), &opts);
    let r = solve(&p, &warm.x, &opts);
    assert!(r.status.is_success(), "{:?}", r.status);
    let s = DiscreteSolution::from_nlp(&p, &r);
    (p, s)
}

#[test]
fn coarse_rtr_mesh_needs_refinement() {
    let (p, s) = rtr_initial_solve(&Mesh::uniform(1, 3).unwrap());
    assert!(estimate_error(&p, &s).max > EPS_MESH);
}

#[test]
fn interval_with_a_switch_is_split() {
    let mesh = Mesh::uniform(20, 3).unwrap();
    let (p, s) = rtr_initial_solve(&mesh);
    let est = estimate_error(&p, &s);
    let policy = RefinementPolicy::default();
    // second switch of the reference solution, well inside an interval
    let frac = 0.6114 / s.t_final();
    let k = mesh.domains[0].intervals.iter().position(|iv| iv.start <= frac && frac < iv.end).unwrap();
    let e = est.intervals.iter().find(|e| e.index == k).unwrap();
    assert!(e.error > policy.tolerance);
    assert!(e.decay > policy.smooth_decay, "decay {}", e.decay);
    let refined = refine(&mesh, &est, &policy);
    let iv = mesh.domains[0].intervals[k];
    let parts: Vec<_> = refined.domains[0].intervals.iter().filter(|r| r.start >= iv.start && r.end <= iv.end).collect();
    assert_eq!(parts.len(), 2);
    assert!(parts.iter().all(|r| r.points == 3));
}

/// Consecutive mesh rounds of the same stage form one refinement sequence.
fn sequences(history: &[reorient::structure::MeshRound]) -> Vec<Vec<&reorient::structure::MeshRound>> {
    let mut out: Vec<Vec<&reorient::structure::MeshRound>> = Vec::new();
    for r in history {
        match out.last_mut() {
            Some(seq) if seq[0].stage == r.stage => seq.push(r),
            _ => out.push(vec![r]),
        }
    }
    out.into_iter().filter(|s| s[0].stage != Stage::Regularization).collect()
}

#[test]
fn refinement_terminates_within_ten_rounds() {
    for name in reorient::dynamics::BUILTIN_MANEUVERS {
        let (_, s) = common::solve(name, None);
        for seq in sequences(&s.report.mesh_history) {
            assert!(seq.len() - 1 <= 10, "{name}: {} rounds", seq.len() - 1);
        }
        let last = s.report.mesh_history.iter().rev().find(|r| r.stage != Stage::Regularization).unwrap();
        assert!(last.max_error <= EPS_MESH, "{name}: {}", last.max_error);
    }
}

#[test]
fn global_error_is_non_increasing() {
    let mut bad = Vec::new();
    for name in reorient::dynamics::BUILTIN_MANEUVERS {
        let (_, s) = common::solve(name, None);
        for seq in sequences(&s.report.mesh_history) {
            for w in seq.windows(2) {
                if w[1].max_error > w[0].max_error {
                    bad.push(format!("{name} {}: {:.3e} -> {:.3e}", w[0].stage, w[0].max_error, w[1].max_error));
                }
            }
        }
    }
    assert!(bad.is_empty(), "error increased: {bad:?}");
}

#[test]
fn reintegration_matches_collocated_terminal_state() {
    let cfg = IntegratorConfig { rtol: 1e-11, atol: 1e-12, ..IntegratorConfig::default() };
    for name in reorient::dynamics::BUILTIN_MANEUVERS {
        let (m, s) = common::solve(name, None);
        let tf = s.trajectory.t_final();
        let replay = integrate(&m.model, &m.bc.initial_state.to_array(), &SourcePolicy(&s.direct), (0.0, tf), &cfg).unwrap();
        let a = replay.terminal().unwrap().state;
        let b = s.trajectory.terminal().unwrap().state;
        let gap = (0..5).fold(0.0f64, |g, k| g.max((a[k] - b[k]).abs()));
        assert!(gap <= 10.0 * EPS_MESH, "{name}: {gap}");
    }
}
