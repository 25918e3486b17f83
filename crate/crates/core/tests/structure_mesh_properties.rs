use proptest::prelude::*;
use reorient::collocation::{Mesh, MAX_INTERVAL_POINTS, MIN_INTERVAL_POINTS};
use reorient::mesh::{raise_degree, refine, ErrorEstimate, IntervalError, RefinementPolicy};
use reorient::structure::{ArcKind, ControlStructure};

fn kind() -> impl Strategy<Value = ArcKind> {
    prop_oneof![Just(ArcKind::BangMin), Just(ArcKind::BangMax), Just(ArcKind::Singular)]
}

/// Up to four arcs per control with increasing ends, the last at 1.
fn sequence() -> impl Strategy<Value = Vec<(ArcKind, f64)>> {
    (prop::collection::vec(kind(), 1..=4), prop::collection::vec(0.01..0.99f64, 3)).prop_map(|(kinds, mut cuts)| {
        cuts.sort_by(f64::total_cmp);
        let n = kinds.len();
        kinds.into_iter().enumerate().map(|(i, k)| (k, if i + 1 == n { 1.0 } else { cuts[i] })).collect()
    })
}

fn mesh() -> impl Strategy<Value = Mesh> {
    prop::collection::vec(prop::collection::vec(MIN_INTERVAL_POINTS..=MAX_INTERVAL_POINTS, 1..6), 1..4).prop_map(|domains| {
        let mut m = Mesh::multi_domain(domains.len(), 1, MIN_INTERVAL_POINTS).unwrap();
        for (d, pts) in domains.iter().enumerate() {
            let k = pts.len() as f64;
            m.domains[d].intervals = pts
                .iter()
                .enumerate()
                .map(|(i, &p)| reorient::collocation::Interval { start: i as f64 / k, end: (i + 1) as f64 / k, points: p })
                .collect();
        }
        m
    })
}

fn estimate_for(mesh: &Mesh, errors: &[f64], decays: &[f64]) -> ErrorEstimate {
    let mut intervals = Vec::new();
    let mut i = 0;
    for (d, dom) in mesh.domains.iter().enumerate() {
        for (k, iv) in dom.intervals.iter().enumerate() {
            intervals.push(IntervalError {
                domain: d,
                index: k,
                points: iv.points,
                error: errors[i % errors.len()],
                decay: decays[i % decays.len()],
            });
            i += 1;
        }
    }
    let max = intervals.iter().map(|e| e.error).fold(0.0, f64::max);
    ErrorEstimate { intervals, max }
}

proptest! {
    #[test]
    fn structures_tile_the_horizon(t_final in 0.5..5.0f64, a in sequence(), b in sequence(), c in sequence()) {
        let s = ControlStructure::from_sequences(t_final, &[a, b, c]).unwrap();
        prop_assert!(s.validate().is_ok());
        prop_assert_eq!(s.domain_count(), s.breakpoints.len() + 1);
        for list in &s.arcs {
            prop_assert!(list.windows(2).all(|w| w[0].kind != w[1].kind));
        }
        for d in 0..s.domain_count() {
            for j in 0..3 {
                prop_assert!(s.domain_kind(j, d).is_some());
            }
        }
        let times = s.switch_times();
        prop_assert!(times.windows(2).all(|w| w[0] < w[1]));
        let same = s.with_times(&times, t_final);
        prop_assert_eq!(same.switch_times().len(), times.len());
        for (x, y) in same.switch_times().iter().zip(&times) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn refinement_keeps_domains_and_bounds(
        m in mesh(),
        errors in prop::collection::vec(0.0..1e-3f64, 1..8),
        decays in prop::collection::vec(0.0..1.0f64, 1..8),
    ) {
        let policy = RefinementPolicy::default();
        let est = estimate_for(&m, &errors, &decays);
        let r = refine(&m, &est, &policy);
        prop_assert!(r.validate().is_ok());
        prop_assert_eq!(r.domains.len(), m.domains.len());
        for (d, (old, new)) in m.domains.iter().zip(&r.domains).enumerate() {
            prop_assert_eq!(new.intervals.first().unwrap().start, 0.0);
            prop_assert_eq!(new.intervals.last().unwrap().end, 1.0);
            for (k, iv) in old.intervals.iter().enumerate() {
                let e = est.intervals.iter().find(|e| e.domain == d && e.index == k).unwrap();
                let inside: Vec<_> = new.intervals.iter().filter(|n| n.start >= iv.start && n.end <= iv.end).collect();
                if e.error <= policy.tolerance {
                    prop_assert_eq!(inside.len(), 1);
                    prop_assert_eq!(*inside[0], *iv);
                } else {
                    prop_assert!(inside.len() == 2 || inside[0].points > iv.points);
                }
            }
        }
        prop_assert!(r.domains.iter().flat_map(|d| &d.intervals).all(|iv| (MIN_INTERVAL_POINTS..=MAX_INTERVAL_POINTS).contains(&iv.points)));
    }

    #[test]
    fn passing_estimate_leaves_mesh_unchanged(m in mesh()) {
        let est = estimate_for(&m, &[1e-7], &[0.5]);
        prop_assert_eq!(refine(&m, &est, &RefinementPolicy::default()), m);
    }

    #[test]
    fn raising_degree_raises_or_bisects(m in mesh(), by in 1usize..4) {
        let r = raise_degree(&m, by);
        prop_assert!(r.validate().is_ok());
        for (old, new) in m.domains.iter().zip(&r.domains) {
            for iv in &old.intervals {
                let inside: Vec<_> = new.intervals.iter().filter(|n| n.start >= iv.start && n.end <= iv.end).collect();
                if iv.points + by <= MAX_INTERVAL_POINTS {
                    prop_assert_eq!(inside.len(), 1);
                    prop_assert_eq!(inside[0].points, iv.points + by);
                } else {
                    prop_assert_eq!(inside.len(), 2);
                    prop_assert!(inside.iter().all(|n| n.points == MIN_INTERVAL_POINTS));
                }
            }
        }
    }
}
