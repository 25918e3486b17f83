//! Dormand–Prince 5(4) with the classic continuous extension and event
//! location on the dense output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Width of the bracket an event time is narrowed to.
    pub event_tol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, event_tol: 1e-14, max_steps: 200_000 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rtol", self.rtol), ("atol", self.atol), ("event_tol", self.event_tol)] {
            if !(v > 0.0 && v <= 1e-3) {
                return Err(Error::InvalidConfig(format!("{name} = {v:e} outside (0, 1e-3]")));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Interpolant of one accepted step.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let r = &self.r;
        std::array::from_fn(|i| r[0][i] + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * r[4][i]))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventHit<const N: usize> {
    /// Index into the event list.
    pub index: usize,
    pub t: f64,
    pub y: [f64; N],
}

#[derive(Debug, Clone)]
pub struct Dopri5Output<const N: usize> {
    pub steps: Vec<DenseStep<N>>,
    pub events: Vec<EventHit<N>>,
    pub t_end: f64,
    pub y_end: [f64; N],
    pub rejected: usize,
    /// `true` when a terminal event ended the run before `t1`.
    pub stopped: bool,
}

impl<const N: usize> Dopri5Output<N> {
    /// Dense solution at `t` inside the integrated span.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let k = self.steps.partition_point(|s| s.t1() < t).min(self.steps.len() - 1);
        self.steps[k].eval(t)
    }

    pub fn step_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.t1())
    }
}

/// Scalar event function. An event is a fall from positive to zero or
/// below; a function that starts at or below zero fires only after it has
/// risen above zero, so a restart exactly at an event does not fire again.
pub type EventFn<'a, const N: usize> = &'a dyn Fn(f64, &[f64; N]) -> f64;

fn stages<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    h: f64,
    k1: [f64; N],
) -> ([[f64; N]; 7], [f64; N]) {
    let mut k = [[0.0; N]; 7];
    k[0] = k1;
    let mut y_next = *y;
    for s in 1..7 {
        let ys: [f64; N] = std::array::from_fn(|i| y[i] + h * (0..s).map(|r| A[s][r] * k[r][i]).sum::<f64>());
        k[s] = f(t + C[s] * h, &ys);
        if s == 6 {
            y_next = ys;
        }
    }
    (k, y_next)
}

/// Integrates `y' = f(t, y)` from `t0` to `t1`. With `stop_at_event`, the
/// run ends at the first located event.
pub fn dopri5<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t1: f64,
    config: &IntegratorConfig,
    events: &[EventFn<'_, N>],
    stop_at_event: bool,
) -> Result<Dopri5Output<N>> {
    config.validate()?;
    let span = t1 - t0;
    let mut out = Dopri5Output { steps: Vec::new(), events: Vec::new(), t_end: t0, y_end: y0, rejected: 0, stopped: false };
    if span <= 0.0 {
        if span < 0.0 {
            return Err(Error::Integration { t: t0, reason: "backward span".into() });
        }
        return Ok(out);
    }
    if !y0.iter().all(|v| v.is_finite()) {
        return Err(Error::Integration { t: t0, reason: "non-finite initial state".into() });
    }
    let scale = |a: &[f64; N], b: &[f64; N], i: usize| config.atol + config.rtol * a[i].abs().max(b[i].abs());

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = initial_step(&f, t, &y, &k1, config).min(span);
    let mut g_prev: Vec<f64> = events.iter().map(|g| g(t, &y)).collect();
    let min_step = 1e-14 * span.max(t0.abs()).max(1.0);

    for _ in 0..config.max_steps {
        if t1 - t <= min_step {
            break;
        }
        h = h.min(t1 - t);
        let (k, y_new) = stages(&f, t, &y, h, k1);
        let err = {
            let sum: f64 = (0..N)
                .map(|i| {
                    let e = h * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>();
                    (e / scale(&y, &y_new, i)).powi(2)
                })
                .sum();
            (sum / N.max(1) as f64).sqrt()
        };
        if !err.is_finite() {
            h *= MIN_FACTOR;
            out.rejected += 1;
            if h < min_step {
                return Err(Error::Integration { t, reason: "non-finite derivative".into() });
            }
            continue;
        }
        if err > 1.0 {
            h *= (SAFETY * err.powf(-0.2)).max(MIN_FACTOR);
            out.rejected += 1;
            if h < min_step {
                return Err(Error::Integration { t, reason: "step size underflow".into() });
            }
            continue;
        }

        let diff: [f64; N] = std::array::from_fn(|i| y_new[i] - y[i]);
        let bspl: [f64; N] = std::array::from_fn(|i| h * k[0][i] - diff[i]);
        let step = DenseStep {
            t0: t,
            h,
            r: [
                y,
                diff,
                bspl,
                std::array::from_fn(|i| diff[i] - h * k[6][i] - bspl[i]),
                std::array::from_fn(|i| h * (0..7).map(|s| D[s] * k[s][i]).sum::<f64>()),
            ],
        };
        let t_new = t + h;

        let mut first: Option<EventHit<N>> = None;
        for (e, g) in events.iter().enumerate() {
            let g1 = g(t_new, &y_new);
            if g_prev[e] > 0.0 && g1 <= 0.0 {
                let te = locate(|s| g(s, &step.eval(s)), t, g_prev[e], t_new, g1, config.event_tol);
                let hit = EventHit { index: e, t: te, y: step.eval(te) };
                out.events.push(hit);
                if first.is_none_or(|f| te < f.t) {
                    first = Some(hit);
                }
            }
            g_prev[e] = g1;
        }
        out.steps.push(step);
        if stop_at_event {
            if let Some(hit) = first {
                out.events.retain(|e| e.t <= hit.t);
                out.t_end = hit.t;
                out.y_end = hit.y;
                out.stopped = true;
                return Ok(out);
            }
        }

        t = t_new;
        y = y_new;
        k1 = k[6];
        h *= (SAFETY * err.max(1e-10).powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR);
    }
    if t1 - t > min_step {
        return Err(Error::Integration { t, reason: format!("step limit {} reached", config.max_steps) });
    }
    out.t_end = t;
    out.y_end = y;
    Ok(out)
}

/// Starting step from the local derivative scales.
fn initial_step<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    config: &IntegratorConfig,
) -> f64 {
    let sc: [f64; N] = std::array::from_fn(|i| config.atol + config.rtol * y[i].abs());
    let norm = |v: &[f64; N]| ((0..N).map(|i| (v[i] / sc[i]).powi(2)).sum::<f64>() / N.max(1) as f64).sqrt();
    let d0 = norm(y);
    let d1 = norm(k1);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: [f64; N] = std::array::from_fn(|i| y[i] + h0 * k1[i]);
    let k2 = f(t + h0, &y1);
    let dk: [f64; N] = std::array::from_fn(|i| k2[i] - k1[i]);
    let d2 = norm(&dk) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1)
}

/// Root of `g` in `[a, b]` (with `g(a)`, `g(b)` of opposite sign) by the
/// Illinois variant of regula falsi.
fn locate(g: impl Fn(f64) -> f64, mut a: f64, mut ga: f64, mut b: f64, mut gb: f64, tol: f64) -> f64 {
    if gb == 0.0 {
        return b;
    }
    let mut kept = 0i8;
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let mut c = b - gb * (b - a) / (gb - ga);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let gc = g(c);
        if gc == 0.0 {
            return c;
        }
        if gc * gb < 0.0 {
            a = c;
            ga = gc;
            if kept == 1 {
                gb *= 0.5;
            }
            kept = 1;
        } else {
            b = c;
            gb = gc;
            if kept == -1 {
                ga *= 0.5;
            }
            kept = -1;
        }
    }
    0.5 * (a + b)
}

/// `steps` equal steps of the fifth-order formula; used to measure the
/// observed order.
pub fn dopri5_fixed<const N: usize>(f: impl Fn(f64, &[f64; N]) -> [f64; N], t0: f64, y0: [f64; N], t1: f64, steps: usize) -> [f64; N] {
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    let mut t = t0;
    for _ in 0..steps {
        let k1 = f(t, &y);
        y = stages(&f, t, &y, h, k1).1;
        t += h;
    }
    y
}
