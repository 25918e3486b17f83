mod common;

use reorient::dynamics::StateVec;
use reorient::oracle::*;
use reorient::structure::{ArcKind, ControlStructure};
use reorient::{Error, Result, SpacecraftModel, TorqueMode, Trajectory};

const RTR_SWITCHES: [f64; 5] = [0.1224, 0.6114, 1.2091, 1.4088, 1.8676];

fn tight() -> IntegratorConfig {
    IntegratorConfig { rtol: 1e-12, atol: 1e-13, ..IntegratorConfig::default() }
}

#[test]
fn fifth_order_convergence_on_linear_decay() {
    let lambda = -1.3;
    let f = |_: f64, y: &[f64; 1]| [lambda * y[0]];
    let exact = (lambda * 2.0f64).exp();
    let errors: Vec<f64> = [40usize, 80, 160].iter().map(|&n| (dopri5_fixed(f, 0.0, [1.0], 2.0, n)[0] - exact).abs()).collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 5.0).abs() <= 0.3, "observed order {order}");
    }
}

#[test]
fn adaptive_steps_meet_tolerance() {
    let out = dopri5(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], 5.0, &tight(), &[], false).unwrap();
    assert!((out.y_end[0] - (-5.0f64).exp()).abs() < 1e-11);
    let mid = out.eval(2.5)[0];
    assert!((mid - (-2.5f64).exp()).abs() < 1e-9);
}

#[test]
fn spin_up_from_rest() {
    let model = SpacecraftModel::with_default_bounds(0.0, TorqueMode::ThreeTorque).unwrap();
    let tr = integrate(&model, &[0.0; 5], &FnPolicy(|_, _: &StateVec| [0.0, 1.0, 0.0]), (0.0, 2.0), &tight()).unwrap();
    assert!((tr.terminal().unwrap().state[1] - 2.0).abs() < 1e-12);
}

#[test]
fn torque_free_precession_conserves_transverse_rate() {
    let model = SpacecraftModel::with_default_bounds(0.5, TorqueMode::ThreeTorque).unwrap();
    let y0 = [0.3, -0.7, 1.1, 0.2, -0.4];
    let tr = integrate(&model, &y0, &FnPolicy(|_, _: &StateVec| [0.0; 3]), (0.0, 10.0), &tight()).unwrap();
    let r0 = y0[0] * y0[0] + y0[1] * y0[1];
    for p in &tr.points {
        assert!((p.state[0].powi(2) + p.state[1].powi(2) - r0).abs() < 1e-10);
        assert!((p.state[2] - y0[2]).abs() < 1e-14);
    }
}

#[test]
fn integrator_rejects_bad_tolerances() {
    let bad = IntegratorConfig { rtol: 1e-2, ..IntegratorConfig::default() };
    assert!(dopri5(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 1.0, &bad, &[], false).is_err());
}

/// Minimum-time double integrator from `(x, v) = (1, 0)` to the origin with
/// `|u| ≤ 1`: `u = −1` then `+1`, switching at `t = 1`, arriving at `t = 2`.
struct DoubleIntegrator;

impl DoubleIntegrator {
    fn flow(u: f64) -> impl Fn(f64, &[f64; 4]) -> [f64; 4] {
        // (x, v, λx, λv)
        move |_, z| [z[1], u, 0.0, -z[2]]
    }
}

impl ShootingProblem for DoubleIntegrator {
    fn unknowns(&self) -> usize {
        4
    }

    fn residual(&self, z: &[f64]) -> Result<Vec<f64>> {
        let (lx, lv, ts, tf) = (z[0], z[1], z[2], z[3]);
        if !(0.0 <= ts && ts <= tf) {
            return Err(Error::Shooting("unordered times".into()));
        }
        let cfg = tight();
        let a = dopri5(Self::flow(-1.0), 0.0, [1.0, 0.0, lx, lv], ts, &cfg, &[], false)?;
        let g_switch = a.y_end[3];
        let b = dopri5(Self::flow(1.0), ts, a.y_end, tf, &cfg, &[], false)?;
        let [x, v, lxf, lvf] = b.y_end;
        let h = lxf * v + lvf * 1.0;
        Ok(vec![x, v, g_switch, h + 1.0])
    }
}

#[test]
fn double_integrator_matches_closed_form() {
    let out = newton_solve(&DoubleIntegrator, &[0.8, 0.6, 0.9, 2.2], &NewtonOptions::default()).unwrap();
    assert!(out.norm <= 1e-9);
    assert!((out.z[2] - 1.0).abs() <= 1e-9, "switch {}", out.z[2]);
    assert!((out.z[3] - 2.0).abs() <= 1e-9, "t_f {}", out.z[3]);
    // λ_v(t) = λ_v(0) − λ_x t vanishes at t = 1 and H = −1 gives λ_x = 1
    assert!((out.z[0] - 1.0).abs() <= 1e-8 && (out.z[1] - 1.0).abs() <= 1e-8);
}

fn rtr_shooting() -> (reorient::Maneuver, reorient::structure::BbsocSolution, ShootingSolution) {
    let (m, s) = common::solve("RTR", None);
    let spec = ShootingSpec { maneuver: m.clone(), structure: s.structure.clone() };
    let guess = ShootingGuess::from_direct(&s.trajectory, &s.structure).unwrap();
    let sol = shoot(&spec, &guess, &ShootingOptions::default()).unwrap();
    (m, s, sol)
}

#[test]
fn rtr_direct_control_replays_to_target() {
    let (m, s) = common::solve("RTR", None);
    let tf = s.trajectory.t_final();
    let tr = integrate(&m.model, &m.bc.initial_state.to_array(), &SourcePolicy(&s.direct), (0.0, tf), &tight()).unwrap();
    let end = tr.terminal().unwrap().state;
    let target = [0.0, 0.0, -0.5, 0.0, 0.0];
    for k in 0..5 {
        assert!((end[k] - target[k]).abs() <= 1e-4, "component {k}: {}", end[k]);
    }
}

#[test]
fn rtr_shooting_final_time_matches_reference() {
    let (_, _, sol) = rtr_shooting();
    assert!(sol.residual_norm <= 1e-9);
    assert!((sol.t_final - 2.5126).abs() <= 1e-5, "t_f = {}", sol.t_final);
}

#[test]
fn rtr_shooting_switch_times_match_reference() {
    let (_, _, sol) = rtr_shooting();
    assert_eq!(sol.switch_times.len(), 5);
    for (t, r) in sol.switch_times.iter().zip(RTR_SWITCHES) {
        assert!((t - r).abs() <= 1e-4, "{t} vs {r}");
    }
}

#[test]
fn hamiltonian_is_constant_along_shooting_solution() {
    let (m, _, sol) = rtr_shooting();
    let h: Vec<f64> = sol.trajectory.points.iter().map(|p| p.hamiltonian(&m.model).unwrap()).collect();
    let h0 = h[0];
    assert!(h.iter().all(|v| (v - h0).abs() <= 1e-8));
    assert!((h0 + 1.0).abs() <= 1e-8);
}

#[test]
fn replayed_switches_sit_on_switching_function_zeros() {
    let (m, _, sol) = rtr_shooting();
    let (tr, events) = replay_bang_bang(&m, &sol.costate0, sol.t_final, &tight()).unwrap();
    assert_eq!(events.len(), 5);
    for (e, t) in events.iter().zip(&sol.switch_times) {
        assert!(e.g.abs() <= 1e-10, "g = {}", e.g);
        assert!((e.t - t).abs() <= 1e-8);
    }
    let end = tr.terminal().unwrap().state;
    assert!(end.iter().zip([0.0, 0.0, -0.5, 0.0, 0.0]).all(|(a, b)| (a - b).abs() <= 1e-8));
}

#[test]
fn wrong_structure_is_flagged() {
    let (m, s) = common::solve("RTR", None);
    let mut wrong: ControlStructure = s.structure.clone();
    let arc = &mut wrong.arcs[0][0];
    arc.kind = if arc.kind == ArcKind::BangMin { ArcKind::BangMax } else { ArcKind::BangMin };
    let spec = ShootingSpec { maneuver: m, structure: wrong.clone() };
    let guess = ShootingGuess::from_direct(&s.trajectory, &wrong).unwrap();
    match shoot(&spec, &guess, &ShootingOptions::default()) {
        Err(Error::ShootingRankDeficient(_)) | Err(Error::Shooting(_)) => {}
        Err(e) => panic!("unexpected error {e}"),
        Ok(sol) => panic!("converged with residual {}", sol.residual_norm),
    }
}

#[test]
fn cross_validation_of_rtr_and_nrtr() {
    for name in ["RTR", "NRTR"] {
        let (m, s) = common::solve(name, None);
        let spec = ShootingSpec { maneuver: m, structure: s.structure.clone() };
        let guess = ShootingGuess::from_direct(&s.trajectory, &s.structure).unwrap();
        let sol = shoot(&spec, &guess, &ShootingOptions::default()).unwrap();
        let d = cross_validate(&s.trajectory, &sol.trajectory);
        assert!(d.max_state <= 1e-4, "{name}: {}", d.max_state);
        assert!(d.t_final.abs() <= 1e-5, "{name}: {}", d.t_final);
        assert!(d.switch_count_match && d.max_switch() <= 1e-4);
    }
}

#[test]
fn identical_trajectories_give_zero_discrepancy() {
    let (_, s) = common::solve("NRTR", None);
    let d = cross_validate(&s.trajectory, &s.trajectory);
    assert_eq!(d.max_state, 0.0);
    assert_eq!(d.t_final, 0.0);
    assert!(d.switch_times.iter().all(|&v| v == 0.0));
}

#[test]
fn verification_passes_on_every_maneuver() {
    for name in reorient::dynamics::BUILTIN_MANEUVERS {
        let (m, s) = common::solve(name, None);
        let v = verify(&m, &s, &VerificationOptions::default()).unwrap();
        assert!(v.passed(), "{name}: {:?}", v.failures);
        assert!(v.reintegration_error <= 1e-4);
        assert_eq!(v.indirect.is_some(), !s.structure.has_singular());
    }
}

#[test]
fn shooting_rejects_infinite_order_arcs() {
    let (m, s) = common::solve("RTNR_INERTIAL", None);
    let spec = ShootingSpec { maneuver: m, structure: s.structure.clone() };
    let guess = ShootingGuess::from_direct(&s.trajectory, &s.structure).unwrap();
    assert!(matches!(shoot(&spec, &guess, &ShootingOptions::default()), Err(Error::SingularLawNotApplicable)));
}

#[test]
fn guess_needs_costates() {
    let (_, s) = common::solve("RTR", None);
    let bare = Trajectory::new(s.trajectory.points.iter().map(|p| reorient::TrajectoryPoint { costate: None, ..*p }).collect(), vec![]);
    assert!(matches!(ShootingGuess::from_direct(&bare, &s.structure), Err(Error::MissingCostates)));
}
