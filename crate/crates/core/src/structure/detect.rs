use serde::{Deserialize, Serialize};

use super::arcs::{ArcKind, ControlStructure};
use crate::dynamics::{SpacecraftModel, State, CONTROL_DIM};
use crate::error::{Error, Result};
use crate::pmp::{costate_rates, singular_case, singular_control_general, Costate, SingularCase};
use crate::trajectory::Trajectory;

/// Thresholds of [`detect_structure`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionOptions {
    /// Distance to a bound, as a fraction of the control range, that counts
    /// as saturated.
    pub bang_fraction: f64,
    /// `|g_j|` below this fraction of the largest switching-function
    /// magnitude (over all controls) makes a sample a singular candidate.
    pub singular_fraction: f64,
    /// Candidates farther than this fraction of the range from the singular
    /// law are under-resolved bang samples.
    pub law_fraction: f64,
    /// Shortest run of samples accepted as a singular arc.
    pub min_singular_samples: usize,
    /// Candidate runs up to this fraction of the horizon along which `g_j`
    /// crosses zero linearly are switches rather than singular arcs.
    pub crossing_fraction: f64,
}

impl Default for DetectionOptions {
    fn default() -> Self {
        Self { bang_fraction: 1e-3, singular_fraction: 1e-3, law_fraction: 0.125, min_singular_samples: 3, crossing_fraction: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Min,
    Max,
    Singular,
}

impl Label {
    fn kind(self) -> ArcKind {
        match self {
            Label::Min => ArcKind::BangMin,
            Label::Max => ArcKind::BangMax,
            Label::Singular => ArcKind::Singular,
        }
    }
}

/// Reads the arc structure off a solution carrying costates.
///
/// Samples whose switching function is clearly nonzero take the bound its
/// sign selects. Samples with a vanishing switching function are singular
/// unless the control sits on a bound or far from the singular law. Short
/// singular runs and isolated samples are absorbed into their neighbours,
/// and bang-bang boundaries are placed at the zero crossings of `g_j`.
pub fn detect_structure(trajectory: &Trajectory, model: &SpacecraftModel, options: &DetectionOptions) -> Result<ControlStructure> {
    if !trajectory.has_costates() {
        return Err(Error::MissingCostates);
    }
    let pts = &trajectory.points;
    if pts.len() < 2 {
        return Err(Error::Detection("too few samples".into()));
    }
    let tf = trajectory.t_final();
    let g = |i: usize, j: usize| pts[i].costate.expect("checked")[j];
    let active = model.torque_mode().active_controls();
    let g_scale = active.iter().flat_map(|&j| (0..pts.len()).map(move |i| (i, j))).fold(0.0f64, |m, (i, j)| m.max(g(i, j).abs()));
    if g_scale == 0.0 {
        return Err(Error::Detection("switching functions vanish identically".into()));
    }
    let zero = options.singular_fraction * g_scale;

    let mut sequences: Vec<Vec<(ArcKind, f64)>> = vec![Vec::new(); CONTROL_DIM];
    for &j in active {
        let (lo, hi) = model.control_bounds(j);
        let range = hi - lo;
        let mut labels = Vec::with_capacity(pts.len());
        let mut previous_wrong = false;
        for (i, p) in pts.iter().enumerate() {
            let u = p.control[j];
            let gi = g(i, j);
            let by_sign = if gi > 0.0 { Label::Min } else { Label::Max };
            if gi.abs() <= zero {
                previous_wrong = false;
            }
            let label = if gi.abs() > zero {
                let wrong = (by_sign == Label::Min && u > hi - options.bang_fraction * range)
                    || (by_sign == Label::Max && u < lo + options.bang_fraction * range);
                // one sample on the wrong bound is a transition; two in a
                // row mean the solution and its costates disagree
                if wrong && previous_wrong {
                    return Err(Error::Detection(format!("u{} = {u} at t = {} contradicts g{} = {gi:e}", j + 1, p.t, j + 1)));
                }
                previous_wrong = wrong;
                by_sign
            } else if u <= lo + options.bang_fraction * range {
                Label::Min
            } else if u >= hi - options.bang_fraction * range {
                Label::Max
            } else {
                match singular_law(model, p.state, p.costate.expect("checked"), p.control, j) {
                    Some(law) if (u - law).abs() > options.law_fraction * range => {
                        if u < law {
                            Label::Min
                        } else {
                            Label::Max
                        }
                    }
                    _ => Label::Singular,
                }
            };
            labels.push(label);
        }
        absorb_isolated(&mut labels);
        let times: Vec<f64> = pts.iter().map(|p| p.t).collect();
        let gj: Vec<f64> = (0..pts.len()).map(|i| g(i, j)).collect();
        let uj: Vec<f64> = pts.iter().map(|p| p.control[j]).collect();
        demote_singular_runs(&mut labels, &times, &gj, &uj, (lo, hi), options, tf);
        absorb_isolated(&mut labels);

        let mut seq = Vec::new();
        let mut i = 0;
        while i < labels.len() {
            let mut k = i;
            while k + 1 < labels.len() && labels[k + 1] == labels[i] {
                k += 1;
            }
            if k + 1 == labels.len() {
                seq.push((labels[i].kind(), 1.0));
                break;
            }
            let next = labels[k + 1];
            let t = if labels[i] != Label::Singular && next != Label::Singular {
                zero_crossing(pts[k].t, g(k, j), pts[k + 1].t, g(k + 1, j))
            } else {
                0.5 * (pts[k].t + pts[k + 1].t)
            };
            seq.push((labels[i].kind(), t / tf));
            i = k + 1;
        }
        sequences[j] = seq;
    }
    ControlStructure::from_sequences(tf, &sequences)
}

fn singular_law(model: &SpacecraftModel, y: [f64; 5], lam: [f64; 5], u: [f64; 3], j: usize) -> Option<f64> {
    if j > 1 {
        return None;
    }
    match singular_case(model, &y) {
        SingularCase::InfiniteOrder => None,
        SingularCase::Nonspinning => Some(0.0),
        SingularCase::General => {
            let lam_dot = costate_rates(model.a(), &y, &lam);
            singular_control_general(model, &State::from_array(y), &Costate::from_array(lam), &lam_dot, j, &u).ok()
        }
    }
}

/// Linear zero of `g` between two samples, or their midpoint when `g` does
/// not change sign.
fn zero_crossing(t0: f64, g0: f64, t1: f64, g1: f64) -> f64 {
    if g0 * g1 < 0.0 {
        t0 + (t1 - t0) * g0 / (g0 - g1)
    } else {
        0.5 * (t0 + t1)
    }
}

/// Relabels single samples that differ from two agreeing neighbours.
fn absorb_isolated(labels: &mut [Label]) {
    for i in 1..labels.len().saturating_sub(1) {
        if labels[i - 1] == labels[i + 1] && labels[i] != labels[i - 1] {
            labels[i] = labels[i - 1];
        }
    }
}

/// Relabels singular runs by the sign of `g` when they are too short, when
/// `g` crosses zero along them with a clear slope (an under-resolved
/// switch), or when `g` keeps one sign while the control stays near the
/// bound that sign selects (a short bang arc with a weak switching function).
fn demote_singular_runs(labels: &mut [Label], t: &[f64], g: &[f64], u: &[f64], (lo, hi): (f64, f64), options: &DetectionOptions, tf: f64) {
    let mut i = 0;
    while i < labels.len() {
        if labels[i] != Label::Singular {
            i += 1;
            continue;
        }
        let mut k = i;
        while k < labels.len() && labels[k] == Label::Singular {
            k += 1;
        }
        let short = k - i < options.min_singular_samples;
        let crossing =
            t[k - 1] - t[i] <= options.crossing_fraction * tf && g[i] * g[k - 1] < 0.0 && linear_fit_quality(&t[i..k], &g[i..k]) >= 0.9;
        // a weak but one-signed g with the control hugging the bound it
        // selects is a short bang arc
        let run_len = (k - i) as f64;
        let mean_u = u[i..k].iter().sum::<f64>() / run_len;
        let one_signed = g[i..k].iter().all(|&v| v > 0.0) && mean_u - lo <= options.law_fraction * (hi - lo)
            || g[i..k].iter().all(|&v| v < 0.0) && hi - mean_u <= options.law_fraction * (hi - lo);
        if short || crossing || one_signed {
            for m in i..k {
                labels[m] = if g[m] > 0.0 { Label::Min } else { Label::Max };
            }
        }
        i = k;
    }
}

/// Coefficient of determination of the least-squares line through the
/// samples.
fn linear_fit_quality(t: &[f64], g: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let gm = g.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|x| (x - tm).powi(2)).sum();
    let sgg: f64 = g.iter().map(|y| (y - gm).powi(2)).sum();
    let stg: f64 = t.iter().zip(g).map(|(x, y)| (x - tm) * (y - gm)).sum();
    if stt == 0.0 || sgg == 0.0 {
        return 0.0;
    }
    stg * stg / (stt * sgg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::TorqueMode;
    use crate::trajectory::TrajectoryPoint;

    fn traj(samples: &[(f64, f64, f64)]) -> Trajectory {
        let points = samples
            .iter()
            .map(|&(t, u, g)| TrajectoryPoint {
                t,
                state: [0.1, 0.2, 0.3, 0.0, 0.0],
                control: [u, 1.0, 0.0],
                costate: Some([g, -1.0, 0.0, 0.0, 0.0]),
            })
            .collect();
        Trajectory::new(points, Vec::new())
    }

    #[test]
    fn constant_saturated_control_has_one_arc() {
        let model = SpacecraftModel::with_default_bounds(0.5, TorqueMode::TwoTorque).unwrap();
        let s: Vec<_> = (0..=10).map(|i| (i as f64 * 0.1, 1.0, -0.5)).collect();
        let st = detect_structure(&traj(&s), &model, &DetectionOptions::default()).unwrap();
        assert!(st.breakpoints.is_empty());
        assert_eq!(st.arcs[0].len(), 1);
        assert_eq!(st.arcs[0][0].kind, ArcKind::BangMax);
        assert!(st.arcs[2].is_empty());
    }

    #[test]
    fn switch_is_placed_at_zero_crossing() {
        let model = SpacecraftModel::with_default_bounds(0.5, TorqueMode::TwoTorque).unwrap();
        let s: Vec<_> = (0..=10)
            .map(|i| {
                let t = i as f64 * 0.1;
                let g = t - 0.42;
                (t, if g > 0.0 { -1.0 } else { 1.0 }, g)
            })
            .collect();
        let st = detect_structure(&traj(&s), &model, &DetectionOptions::default()).unwrap();
        assert_eq!(st.breakpoints.len(), 1);
        assert!((st.switch_times()[0] - 0.42).abs() < 1e-12);
        assert_eq!(st.arcs[0][1].kind, ArcKind::BangMin);
    }

    #[test]
    fn isolated_sample_is_absorbed() {
        let model = SpacecraftModel::with_default_bounds(0.0, TorqueMode::TwoTorque).unwrap();
        let mut s: Vec<_> = (0..=10).map(|i| (i as f64 * 0.1, 1.0, -0.5)).collect();
        s[5] = (0.5, 0.3, 1e-9);
        let st = detect_structure(&traj(&s), &model, &DetectionOptions::default()).unwrap();
        assert_eq!(st.arcs[0].len(), 1);
    }

    #[test]
    fn vanishing_switching_function_gives_singular_arc() {
        let model = SpacecraftModel::with_default_bounds(0.0, TorqueMode::TwoTorque).unwrap();
        let s: Vec<_> = (0..=10)
            .map(|i| {
                let t = i as f64 * 0.1;
                if t < 0.45 {
                    (t, 1.0, -0.5 * (0.45 - t))
                } else {
                    (t, 0.2 * t, 1e-9)
                }
            })
            .collect();
        let st = detect_structure(&traj(&s), &model, &DetectionOptions::default()).unwrap();
        assert_eq!(st.arcs[0].iter().map(|a| a.kind).collect::<Vec<_>>(), vec![ArcKind::BangMax, ArcKind::Singular]);
        assert!((st.switch_times()[0] - 0.45).abs() < 1e-12);
    }

    #[test]
    fn weak_one_signed_run_near_bound_is_bang() {
        let model = SpacecraftModel::with_default_bounds(0.0, TorqueMode::TwoTorque).unwrap();
        let s: Vec<_> = (0..=20)
            .map(|i| {
                let t = i as f64 * 0.05;
                if (0.3..0.6).contains(&t) {
                    (t, -0.95, 1e-6)
                } else {
                    (t, 1.0, -0.5)
                }
            })
            .collect();
        let st = detect_structure(&traj(&s), &model, &DetectionOptions::default()).unwrap();
        let kinds: Vec<_> = st.arcs[0].iter().map(|a| a.kind).collect();
        assert_eq!(kinds, vec![ArcKind::BangMax, ArcKind::BangMin, ArcKind::BangMax]);
    }

    #[test]
    fn contradicting_sample_is_reported() {
        let model = SpacecraftModel::with_default_bounds(0.5, TorqueMode::TwoTorque).unwrap();
        let mut s: Vec<_> = (0..=10).map(|i| (i as f64 * 0.1, 1.0, -0.5)).collect();
        s[4] = (0.4, 1.0, 0.5);
        s[5] = (0.5, 1.0, 0.5);
        assert!(matches!(detect_structure(&traj(&s), &model, &DetectionOptions::default()), Err(Error::Detection(_))));
    }
}
