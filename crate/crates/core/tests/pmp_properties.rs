mod common;

use proptest::prelude::*;
use reorient::collocation::lgr;
use reorient::dynamics::StateVec;
use reorient::pmp::{costate_rates, hamiltonian_raw, jet};

fn state() -> impl Strategy<Value = StateVec> {
    prop::array::uniform5(-2.0..2.0f64)
}

fn control() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-1.0..1.0f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn costate_equation_is_minus_state_gradient(a in 0.0..1.0f64, y in state(), lam in state(), u in control()) {
        prop_assert!(common::costate_fd_error(a, &y, &lam, &u) <= 1e-6);
    }

    #[test]
    fn dynamics_jacobian_matches_differences(a in 0.0..1.0f64, y in state(), u in control()) {
        prop_assert!(common::jacobian_fd_error(a, &y, &u) <= 1e-6);
    }

    #[test]
    fn radau_quadrature_is_exact_to_degree_2n_minus_2(n in 1usize..=12, c in prop::collection::vec(-1.0..1.0f64, 23)) {
        let c = &c[..2 * n - 1];
        prop_assert!(common::quadrature_error(n, c) <= 1e-13);
    }

    #[test]
    fn differentiation_is_exact_to_degree_n(n in 1usize..=12, c in prop::collection::vec(-1.0..1.0f64, 13)) {
        prop_assert!(common::differentiation_error(n, &c[..=n]) <= 1e-11);
    }

    #[test]
    fn radau_weights_are_positive_and_sum_to_two(n in 1usize..=12) {
        let r = lgr::rule(n);
        prop_assert!(r.weights.iter().all(|&w| w > 0.0));
        prop_assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        prop_assert_eq!(r.points[0], -1.0);
        prop_assert!(r.points.windows(2).all(|w| w[0] < w[1]) && r.points[n - 1] < 1.0);
    }

    #[test]
    fn singular_law_annihilates_fourth_derivative(
        a in 0.1..0.9f64,
        w in prop::array::uniform2(-1.5..1.5f64),
        w3 in prop_oneof![-1.0..-0.1f64, 0.1..1.0f64],
        x in prop::array::uniform2(-1.5..1.5f64),
        u2 in prop_oneof![Just(-1.0), Just(1.0)],
    ) {
        let y = [w[0], w[1], w3, x[0], x[1]];
        let d4 = common::singular_fourth_derivative(a, &y, u2);
        prop_assume!(d4.is_some());
        let d4 = d4.unwrap();
        prop_assert!(d4 <= 1e-4, "d4g1 = {d4}");
    }

    #[test]
    fn switching_function_rate_is_costate_rate(a in 0.0..1.0f64, y in state(), lam in state(), u in control()) {
        let l = costate_rates(a, &y, &lam);
        for (j, lj) in l.iter().enumerate() {
            let d = jet::switching_derivatives(a, &y, &lam, &u, j, 1);
            prop_assert!((d[1] - lj).abs() <= 1e-12 * lj.abs().max(1.0));
        }
    }

    #[test]
    fn hamiltonian_is_linear_in_each_control(a in 0.0..1.0f64, y in state(), lam in state(), u in control(), j in 0usize..3) {
        let mut up = u;
        up[j] += 1.0;
        let gap = hamiltonian_raw(a, &y, &up, &lam) - hamiltonian_raw(a, &y, &u, &lam);
        prop_assert!((gap - lam[j]).abs() <= 1e-12 * lam[j].abs().max(1.0));
    }
}

#[test]
fn singular_construction_hits_the_manifold() {
    let mut found = 0;
    for (i, w3) in [0.3, -0.5, 0.8].into_iter().enumerate() {
        let y = [0.2 + 0.1 * i as f64, -0.4, w3, 0.5, -0.3];
        if let Some(d4) = common::singular_fourth_derivative(0.5, &y, 1.0) {
            assert!(d4 <= 1e-4);
            found += 1;
        }
    }
    assert!(found >= 2);
}
