use super::check::check_derivatives;
use super::ldl::{KktPattern, LdlFactor};
use super::{kkt_residuals, IterationLog, NlpOptions, NlpProblem, NlpResult, NlpStatus, WarmStart};

const KAPPA_EPS: f64 = 10.0;
const KAPPA_SIGMA: f64 = 1e10;
const SHORT_STEP: f64 = 0.05;
const ARMIJO: f64 = 1e-4;
const S_MAX: f64 = 100.0;
const DELTA_W_MAX: f64 = 1e40;

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn norm_1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn solve<P: NlpProblem + ?Sized>(problem: &P, x0: &[f64], options: &NlpOptions) -> NlpResult {
    solve_warm(problem, x0, None, options)
}

struct Bounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Bounds {
    fn has_lo(&self, i: usize) -> bool {
        self.lo[i].is_finite()
    }
    fn has_hi(&self, i: usize) -> bool {
        self.hi[i].is_finite()
    }
    fn slacks(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let sl = (0..x.len()).map(|i| if self.has_lo(i) { x[i] - self.lo[i] } else { 1.0 }).collect();
        let su = (0..x.len()).map(|i| if self.has_hi(i) { self.hi[i] - x[i] } else { 1.0 }).collect();
        (sl, su)
    }
    /// Largest step in `(0, 1]` keeping slacks above `(1 − τ)` of their value.
    fn max_step(&self, x: &[f64], dx: &[f64], tau: f64) -> f64 {
        let mut alpha = 1.0f64;
        for i in 0..x.len() {
            if self.has_lo(i) && dx[i] < 0.0 {
                alpha = alpha.min(-tau * (x[i] - self.lo[i]) / dx[i]);
            }
            if self.has_hi(i) && dx[i] > 0.0 {
                alpha = alpha.min(tau * (self.hi[i] - x[i]) / dx[i]);
            }
        }
        alpha
    }
    fn barrier(&self, x: &[f64], mu: f64) -> f64 {
        let mut b = 0.0;
        for i in 0..x.len() {
            if self.has_lo(i) {
                b -= mu * (x[i] - self.lo[i]).ln();
            }
            if self.has_hi(i) {
                b -= mu * (self.hi[i] - x[i]).ln();
            }
        }
        b
    }
}

fn push_interior(x0: &[f64], b: &Bounds, push: f64) -> Vec<f64> {
    x0.iter()
        .enumerate()
        .map(|(i, &x)| {
            let (l, u) = (b.lo[i], b.hi[i]);
            let pl = if l.is_finite() {
                let p = push * l.abs().max(1.0);
                if u.is_finite() {
                    p.min(push * (u - l))
                } else {
                    p
                }
            } else {
                0.0
            };
            let pu = if u.is_finite() {
                let p = push * u.abs().max(1.0);
                if l.is_finite() {
                    p.min(push * (u - l))
                } else {
                    p
                }
            } else {
                0.0
            };
            let mut v = x;
            if l.is_finite() {
                v = v.max(l + pl);
            }
            if u.is_finite() {
                v = v.min(u - pu);
            }
            v
        })
        .collect()
}

struct Evaluated {
    f: f64,
    g: Vec<f64>,
    c: Vec<f64>,
    jv: Vec<f64>,
}

struct Solver<'a, P: NlpProblem + ?Sized> {
    problem: &'a P,
    n: usize,
    m: usize,
    bounds: Bounds,
    jac: Vec<(usize, usize)>,
    pattern: KktPattern,
    hv: Vec<f64>,
    values: Vec<f64>,
    delta_w_last: f64,
}

struct Factored {
    factor: LdlFactor,
    delta_w: f64,
    delta_c: f64,
}

impl<'a, P: NlpProblem + ?Sized> Solver<'a, P> {
    fn evaluate(&self, x: &[f64]) -> Option<Evaluated> {
        let f = self.problem.objective(x);
        let mut g = vec![0.0; self.n];
        self.problem.gradient(x, &mut g);
        let mut c = vec![0.0; self.m];
        self.problem.constraints(x, &mut c);
        let mut jv = vec![0.0; self.jac.len()];
        self.problem.jacobian_values(x, &mut jv);
        let finite = f.is_finite() && g.iter().chain(&c).chain(&jv).all(|v| v.is_finite());
        finite.then_some(Evaluated { f, g, c, jv })
    }

    fn jt_times(&self, jv: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (&(r, c), v) in self.jac.iter().zip(jv) {
            out[c] += v * y[r];
        }
        out
    }

    /// Factorizes with the smallest diagonal shift giving inertia `(n, m)`.
    fn factor(&mut self, jv: &[f64], sigma: &[f64], min_delta_w: f64) -> Option<Factored> {
        let mut delta_w = min_delta_w;
        let mut delta_c = 0.0;
        let mut attempt = 0;
        loop {
            let diag: Vec<f64> = sigma.iter().map(|s| s + delta_w).collect();
            self.pattern.assemble(&self.hv, jv, &diag, delta_c, &mut self.values);
            match self.pattern.factor(&self.values) {
                Ok(f) if f.has_correct_inertia() => {
                    if delta_w > 0.0 {
                        self.delta_w_last = delta_w;
                    }
                    return Some(Factored { factor: f, delta_w, delta_c });
                }
                Ok(_) => {}
                Err(k) if k >= self.n && delta_c == 0.0 => {
                    // dependent constraint rows
                    delta_c = 1e-8;
                    continue;
                }
                Err(_) => {}
            }
            attempt += 1;
            if attempt == 4 && delta_c == 0.0 {
                // a shift this large not fixing the inertia points at
                // rank-deficient constraints rather than curvature
                delta_c = 1e-8;
                attempt = 0;
                delta_w = min_delta_w;
                continue;
            }
            if attempt == 1 {
                let base = if self.delta_w_last == 0.0 { 1e-4 } else { (self.delta_w_last / 3.0).max(1e-20) };
                delta_w = base.max(min_delta_w * 10.0);
            } else {
                delta_w *= if self.delta_w_last == 0.0 { 100.0 } else { 8.0 };
            }
            if delta_w > DELTA_W_MAX {
                return None;
            }
        }
    }

    /// Solves with iterative refinement against the unshifted constraint
    /// block.
    fn solve_kkt(&self, fac: &Factored, rhs: &[f64]) -> Vec<f64> {
        let mut sol = fac.factor.solve(rhs);
        let scale = 1.0 + norm_inf(rhs);
        for _ in 0..5 {
            let mut r = self.pattern.multiply(&self.values, &sol);
            for i in 0..self.m {
                r[self.n + i] += fac.delta_c * sol[self.n + i];
            }
            let res: Vec<f64> = rhs.iter().zip(&r).map(|(b, a)| b - a).collect();
            if norm_inf(&res) <= 1e-14 * scale {
                break;
            }
            let corr = fac.factor.solve(&res);
            for (s, c) in sol.iter_mut().zip(&corr) {
                *s += c;
            }
        }
        sol
    }
}

/// Solves from `x0`, optionally reusing multipliers from an earlier solve.
pub fn solve_warm<P: NlpProblem + ?Sized>(problem: &P, x0: &[f64], warm: Option<&WarmStart>, opts: &NlpOptions) -> NlpResult {
    let n = problem.num_variables();
    let m = problem.num_constraints();
    assert_eq!(x0.len(), n, "initial point has wrong length");
    let (lo, hi) = problem.bounds();
    for i in 0..n {
        assert!(lo[i] < hi[i], "variable {i} has empty or degenerate bounds");
    }
    let bounds = Bounds { lo, hi };
    let hess = problem.hessian_structure();
    let jac = problem.jacobian_structure();
    let pattern = KktPattern::new(n, m, &hess, &jac);
    let mut s = Solver { problem, n, m, bounds, hv: vec![0.0; hess.len()], jac, pattern, values: Vec::new(), delta_w_last: 0.0 };

    let mut x = push_interior(x0, &s.bounds, opts.bound_push);
    let mut mu = warm.map_or(opts.mu_init, |w| w.mu.max(opts.tol / 10.0));
    let mu_min = opts.tol / 10.0;

    if opts.check_derivatives {
        let y_probe: Vec<f64> = (0..m).map(|i| 0.1 * ((i + 1) as f64).sin()).collect();
        let rep = check_derivatives(problem, &x, &y_probe);
        assert!(rep.max() <= 1e-5, "supplied derivatives disagree with finite differences: {rep:?}");
    }

    let (sl0, su0) = s.bounds.slacks(&x);
    let (mut zl, mut zu): (Vec<f64>, Vec<f64>) = match warm {
        Some(w) => (
            (0..n).map(|i| if s.bounds.has_lo(i) { w.z_lower[i].max(mu / (KAPPA_SIGMA * sl0[i])).max(1e-12) } else { 0.0 }).collect(),
            (0..n).map(|i| if s.bounds.has_hi(i) { w.z_upper[i].max(mu / (KAPPA_SIGMA * su0[i])).max(1e-12) } else { 0.0 }).collect(),
        ),
        None => (
            (0..n).map(|i| if s.bounds.has_lo(i) { 1.0 } else { 0.0 }).collect(),
            (0..n).map(|i| if s.bounds.has_hi(i) { 1.0 } else { 0.0 }).collect(),
        ),
    };

    let Some(mut ev) = s.evaluate(&x) else {
        return finish(problem, x, vec![0.0; m], zl, zu, f64::NAN, NlpStatus::NonFiniteEvaluation, 0, mu, Vec::new());
    };

    let mut y = match warm {
        Some(w) => w.y.clone(),
        None => least_squares_multipliers(&mut s, &ev, &zl, &zu),
    };

    let mut nu = 1.0f64;
    let mut log = Vec::new();
    let mut acceptable_count = 0usize;
    let mut extra_reg = 0.0f64;
    let mut retries = 0usize;

    for iter in 0..=opts.max_iter {
        let (sl, su) = s.bounds.slacks(&x);
        let jty = s.jt_times(&ev.jv, &y);
        let grad_lag: Vec<f64> = (0..n).map(|i| ev.g[i] + jty[i] - zl[i] + zu[i]).collect();
        let stat = norm_inf(&grad_lag);
        let feas = norm_inf(&ev.c);
        let compl_at = |mu: f64| {
            let mut e = 0.0f64;
            for i in 0..n {
                if s.bounds.has_lo(i) {
                    e = e.max((zl[i] * sl[i] - mu).abs());
                }
                if s.bounds.has_hi(i) {
                    e = e.max((zu[i] * su[i] - mu).abs());
                }
            }
            e
        };
        let nb = (0..n).filter(|&i| s.bounds.has_lo(i)).count() + (0..n).filter(|&i| s.bounds.has_hi(i)).count();
        let s_d = ((norm_1(&y) + norm_1(&zl) + norm_1(&zu)) / ((m + nb).max(1) as f64)).max(S_MAX) / S_MAX;
        let s_c = ((norm_1(&zl) + norm_1(&zu)) / (nb.max(1) as f64)).max(S_MAX) / S_MAX;
        let compl0 = compl_at(0.0);
        let scaled_err = (stat / s_d).max(feas).max(compl0 / s_c);
        let unscaled_err = stat.max(feas).max(compl0);

        if unscaled_err <= opts.tol {
            return finish(problem, x, y, zl, zu, ev.f, NlpStatus::Converged, iter, mu, log);
        }
        if scaled_err <= opts.tol || unscaled_err <= opts.acceptable_tol {
            acceptable_count += 1;
            if acceptable_count >= opts.acceptable_iter {
                return finish(problem, x, y, zl, zu, ev.f, NlpStatus::Acceptable, iter, mu, log);
            }
        } else {
            acceptable_count = 0;
        }
        if iter == opts.max_iter {
            let status = if acceptable_count > 0 { NlpStatus::Acceptable } else { NlpStatus::MaxIterations };
            return finish(problem, x, y, zl, zu, ev.f, status, iter, mu, log);
        }

        // barrier parameter
        loop {
            let e_mu = (stat / s_d).max(feas).max(compl_at(mu) / s_c);
            if e_mu <= KAPPA_EPS * mu && mu > mu_min {
                mu = mu_min.max((0.2 * mu).min(mu.powf(1.5)));
            } else {
                break;
            }
        }
        let tau = 0.99f64.max(1.0 - mu);

        // Newton system
        problem.hessian_values(&x, 1.0, &y, &mut s.hv);
        let sigma: Vec<f64> = (0..n)
            .map(|i| {
                let mut v = 0.0;
                if s.bounds.has_lo(i) {
                    v += zl[i] / sl[i];
                }
                if s.bounds.has_hi(i) {
                    v += zu[i] / su[i];
                }
                v
            })
            .collect();
        let grad_barrier: Vec<f64> = (0..n)
            .map(|i| {
                let mut v = ev.g[i];
                if s.bounds.has_lo(i) {
                    v -= mu / sl[i];
                }
                if s.bounds.has_hi(i) {
                    v += mu / su[i];
                }
                v
            })
            .collect();
        let mut rhs: Vec<f64> = (0..n).map(|i| -(grad_barrier[i] + jty[i])).collect();
        rhs.extend(ev.c.iter().map(|c| -c));

        let jv_now = ev.jv.clone();
        let Some(fac) = s.factor(&jv_now, &sigma, extra_reg) else {
            return finish(problem, x, y, zl, zu, ev.f, NlpStatus::LinearSolverFailure, iter, mu, log);
        };
        let sol = s.solve_kkt(&fac, &rhs);
        let dx = &sol[..n];
        let dy = &sol[n..];
        let dzl: Vec<f64> = (0..n).map(|i| if s.bounds.has_lo(i) { mu / sl[i] - zl[i] - zl[i] / sl[i] * dx[i] } else { 0.0 }).collect();
        let dzu: Vec<f64> = (0..n).map(|i| if s.bounds.has_hi(i) { mu / su[i] - zu[i] + zu[i] / su[i] * dx[i] } else { 0.0 }).collect();

        let alpha_max = s.bounds.max_step(&x, dx, tau);
        let mut alpha_z = 1.0f64;
        for i in 0..n {
            if dzl[i] < 0.0 {
                alpha_z = alpha_z.min(-tau * zl[i] / dzl[i]);
            }
            if dzu[i] < 0.0 {
                alpha_z = alpha_z.min(-tau * zu[i] / dzu[i]);
            }
        }

        // merit function and penalty parameter
        let c1 = norm_1(&ev.c);
        let gdx = dot(&grad_barrier, dx);
        if c1 > 0.0 {
            let mut padded = dx.to_vec();
            padded.extend(std::iter::repeat_n(0.0, m));
            let kd = s.pattern.multiply(&s.values, &padded);
            let quad = dot(&kd[..n], dx);
            let nu_trial = (gdx + 0.5 * quad.max(0.0)) / (0.9 * c1);
            let y_new_max = norm_inf(&y.iter().zip(dy).map(|(a, b)| a + b).collect::<Vec<_>>());
            if nu < nu_trial.max(y_new_max) {
                nu = nu_trial.max(y_new_max) + 1.0;
            }
        }
        let merit = |f: f64, x: &[f64], c: &[f64]| f + s.bounds.barrier(x, mu) + nu * norm_1(c);
        let phi0 = merit(ev.f, &x, &ev.c);
        let dphi = gdx - nu * c1;

        let tiny_step = (0..n).all(|i| dx[i].abs() / (1.0 + x[i].abs()) < 10.0 * f64::EPSILON);
        let mut accepted: Option<(Vec<f64>, Evaluated, f64)> = None;
        if tiny_step {
            let xt: Vec<f64> = (0..n).map(|i| x[i] + alpha_max * dx[i]).collect();
            if let Some(e) = s.evaluate(&xt) {
                accepted = Some((xt, e, alpha_max));
            }
        } else {
            let mut alpha = alpha_max;
            let mut first = true;
            while alpha > 1e-14 {
                let xt: Vec<f64> = (0..n).map(|i| x[i] + alpha * dx[i]).collect();
                if let Some(e) = s.evaluate(&xt) {
                    let phi = merit(e.f, &xt, &e.c);
                    if phi <= phi0 + ARMIJO * alpha * dphi + 10.0 * f64::EPSILON * phi0.abs() {
                        accepted = Some((xt, e, alpha));
                        break;
                    }
                    if first && m > 0 && norm_1(&e.c) >= c1 {
                        // second-order correction
                        let mut rhs_soc: Vec<f64> = rhs[..n].to_vec();
                        rhs_soc.extend((0..m).map(|i| -(alpha * ev.c[i] + e.c[i])));
                        let soc = s.solve_kkt(&fac, &rhs_soc);
                        let a_soc = s.bounds.max_step(&x, &soc[..n], tau);
                        let xs: Vec<f64> = (0..n).map(|i| x[i] + a_soc * soc[i]).collect();
                        if let Some(es) = s.evaluate(&xs) {
                            let phi_s = merit(es.f, &xs, &es.c);
                            if phi_s <= phi0 + ARMIJO * alpha * dphi {
                                accepted = Some((xs, es, alpha));
                                break;
                            }
                        }
                    }
                }
                first = false;
                alpha *= 0.5;
            }
        }
        let Some((x_new, ev_new, alpha)) = accepted else {
            // retry with a stronger Hessian shift, which turns the step
            // towards steepest descent
            if retries < 6 {
                retries += 1;
                extra_reg = (fac.delta_w * 10.0).max(1e-4);
                continue;
            }
            return finish(problem, x, y, zl, zu, ev.f, NlpStatus::LineSearchFailure, iter, mu, log);
        };
        if alpha < SHORT_STEP * alpha_max && retries < 2 {
            // a heavily cut step means the quadratic model is poor; try a
            // more strongly convexified one before accepting
            retries += 1;
            extra_reg = (fac.delta_w * 10.0).max(1e-4);
            continue;
        }
        retries = 0;
        extra_reg = 0.0;

        x = x_new;
        ev = ev_new;
        for i in 0..m {
            y[i] += alpha * dy[i];
        }
        let (sl, su) = s.bounds.slacks(&x);
        for i in 0..n {
            if s.bounds.has_lo(i) {
                zl[i] += alpha_z * dzl[i];
                zl[i] = zl[i].clamp(mu / (KAPPA_SIGMA * sl[i]), KAPPA_SIGMA * mu / sl[i]);
            }
            if s.bounds.has_hi(i) {
                zu[i] += alpha_z * dzu[i];
                zu[i] = zu[i].clamp(mu / (KAPPA_SIGMA * su[i]), KAPPA_SIGMA * mu / su[i]);
            }
        }
        if opts.keep_log {
            log.push(IterationLog {
                iter,
                objective: ev.f,
                feasibility: feas,
                stationarity: stat,
                mu,
                step: alpha,
                regularization: fac.delta_w,
            });
        }
        if nu > 1e14 {
            return finish(problem, x, y, zl, zu, ev.f, NlpStatus::Infeasible, iter, mu, log);
        }
    }
    unreachable!("loop returns at max_iter")
}

fn least_squares_multipliers<P: NlpProblem + ?Sized>(s: &mut Solver<'_, P>, ev: &Evaluated, zl: &[f64], zu: &[f64]) -> Vec<f64> {
    if s.m == 0 {
        return Vec::new();
    }
    let hv = vec![0.0; s.hv.len()];
    let ones = vec![1.0; s.n];
    s.pattern.assemble(&hv, &ev.jv, &ones, 0.0, &mut s.values);
    let Ok(f) = s.pattern.factor(&s.values) else {
        return vec![0.0; s.m];
    };
    let mut rhs: Vec<f64> = (0..s.n).map(|i| -(ev.g[i] - zl[i] + zu[i])).collect();
    rhs.extend(std::iter::repeat_n(0.0, s.m));
    let sol = f.solve(&rhs);
    let y = sol[s.n..].to_vec();
    if norm_inf(&y) > 1e3 || y.iter().any(|v| !v.is_finite()) {
        vec![0.0; s.m]
    } else {
        y
    }
}

#[allow(clippy::too_many_arguments)]
fn finish<P: NlpProblem + ?Sized>(
    problem: &P,
    x: Vec<f64>,
    y: Vec<f64>,
    z_lower: Vec<f64>,
    z_upper: Vec<f64>,
    objective: f64,
    status: NlpStatus,
    iterations: usize,
    mu: f64,
    log: Vec<IterationLog>,
) -> NlpResult {
    let kkt = kkt_residuals(problem, &x, &y, &z_lower, &z_upper);
    NlpResult { x, y, z_lower, z_upper, objective, status, kkt, iterations, mu, log }
}
