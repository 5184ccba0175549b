//! Generic damped-Newton log-barrier path follower with an active-set
//! polish step.
//!
//! The solver minimizes a smooth convex objective `f0` subject to smooth
//! convex constraints `f_i(x) <= b_i` by following the central path of
//! `phi_t(x) = t * f0(x) - sum_i log(b_i - f_i(x))` for an increasing
//! barrier weight `t`. At a centered point the implied multipliers are
//! `lambda_i = 1 / (t * s_i)` with slack `s_i = b_i - f_i(x)`, so the
//! complementarity residual decays like `1/t`.
//!
//! Because driving `1/t` below a tight tolerance makes the barrier Hessian
//! badly conditioned, a crossover step finishes the job: the active set is
//! read off the multipliers and Newton's method is applied directly to the
//! equality-constrained KKT system, which converges quadratically to
//! machine precision. The polished point is only accepted if it improves
//! the KKT residual and keeps inactive constraints feasible.

use nalgebra::{DMatrix, DVector};

use super::SolverConfig;
use crate::{Error, Result};

/// A smooth convex program `min f0(x)  s.t.  f_i(x) <= b_i`.
pub(crate) trait BarrierProblem {
    fn num_vars(&self) -> usize;
    fn num_constraints(&self) -> usize;

    fn objective(&self, x: &DVector<f64>) -> f64;
    fn objective_grad(&self, x: &DVector<f64>, out: &mut DVector<f64>);
    /// Add the objective Hessian, scaled by `coeff`, into `out`.
    fn add_objective_hess(&self, x: &DVector<f64>, coeff: f64, out: &mut DMatrix<f64>);

    fn constraint(&self, i: usize, x: &DVector<f64>) -> f64;
    fn constraint_bound(&self, i: usize) -> f64;
    fn constraint_grad(&self, i: usize, x: &DVector<f64>, out: &mut DVector<f64>);
    /// Add the constraint Hessian, scaled by `coeff`, into `out`.
    fn add_constraint_hess(&self, i: usize, x: &DVector<f64>, coeff: f64, out: &mut DMatrix<f64>);

    /// Open-domain membership beyond the explicit constraints (e.g. a
    /// positive-diagonal requirement on a triangular factor).
    fn in_domain(&self, x: &DVector<f64>) -> bool;
}

pub(crate) struct BarrierOutcome {
    pub x: DVector<f64>,
    /// Total Newton steps spent (path following plus polish).
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
}

fn slacks(p: &dyn BarrierProblem, x: &DVector<f64>) -> Vec<f64> {
    (0..p.num_constraints())
        .map(|i| p.constraint_bound(i) - p.constraint(i, x))
        .collect()
}

/// max(stationarity_inf, positive infeasibility, complementarity).
pub(crate) fn kkt_residual(
    p: &dyn BarrierProblem,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
) -> f64 {
    let nv = p.num_vars();
    let mut stat = DVector::zeros(nv);
    p.objective_grad(x, &mut stat);
    let mut gi = DVector::zeros(nv);
    let mut feas = 0.0f64;
    let mut comp = 0.0f64;
    for i in 0..p.num_constraints() {
        let s = p.constraint_bound(i) - p.constraint(i, x);
        feas = feas.max(-s);
        comp = comp.max((lambda[i] * s).abs());
        if lambda[i] != 0.0 {
            p.constraint_grad(i, x, &mut gi);
            stat.axpy(lambda[i], &gi, 1.0);
        }
    }
    stat.amax().max(feas.max(0.0)).max(comp)
}

/// Value of the barrier function `t * f0 - sum log s_i`, or +inf outside
/// the domain.
fn barrier_value(p: &dyn BarrierProblem, t: f64, x: &DVector<f64>) -> f64 {
    if !p.in_domain(x) {
        return f64::INFINITY;
    }
    let mut v = t * p.objective(x);
    for s in slacks(p, x) {
        if s <= 0.0 {
            return f64::INFINITY;
        }
        v -= s.ln();
    }
    v
}

/// Solve a positive (semi)definite Newton system, falling back to a tiny
/// ridge when the Cholesky factorization fails.
fn newton_solve(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = h.clone().cholesky() {
        return Some(chol.solve(&(-g)));
    }
    let nv = h.nrows();
    let ridge = 1e-12 * (h.trace().abs() / nv as f64).max(1.0);
    let mut hr = h.clone();
    for k in 0..nv {
        hr[(k, k)] += ridge;
    }
    hr.lu().solve(&(-g))
}

/// Follow the central path from the strictly feasible point `x0`.
pub(crate) fn solve_barrier(
    p: &dyn BarrierProblem,
    x0: DVector<f64>,
    cfg: &SolverConfig,
) -> Result<BarrierOutcome> {
    let nv = p.num_vars();
    let m = p.num_constraints();
    if !p.in_domain(&x0) || slacks(p, &x0).iter().any(|&s| s <= 0.0) {
        return Err(Error::Infeasible("initial point is not strictly feasible".into()));
    }

    let mut x = x0;
    let mut t = 1.0f64;
    let mut total_iters = 0usize;
    let mut lambda = DVector::zeros(m);
    let mut best_kkt = f64::INFINITY;
    let mut best = (x.clone(), lambda.clone());

    // The complementarity residual at a centered point is exactly 1/t, so
    // the path must be followed until 1/t clears the tolerance; the
    // crossover below then removes the remaining barrier bias.
    let t_goal = 2.0 / cfg.tol_kkt;

    'path: loop {
        // Center at the current t with damped Newton steps.
        let mut prev_decrement = f64::INFINITY;
        for _ in 0..60 {
            if total_iters >= cfg.max_newton_iters {
                break 'path;
            }
            let s = slacks(p, &x);
            let mut grad = DVector::zeros(nv);
            p.objective_grad(&x, &mut grad);
            grad *= t;
            let mut hess = DMatrix::zeros(nv, nv);
            p.add_objective_hess(&x, t, &mut hess);
            let mut gi = DVector::zeros(nv);
            for (i, &si) in s.iter().enumerate() {
                p.constraint_grad(i, &x, &mut gi);
                grad.axpy(1.0 / si, &gi, 1.0);
                hess.ger(1.0 / (si * si), &gi, &gi, 1.0);
                p.add_constraint_hess(i, &x, 1.0 / si, &mut hess);
            }
            let Some(step) = newton_solve(&hess, &grad) else {
                break 'path;
            };
            let decrement = -grad.dot(&step);
            if decrement <= 1e-12 {
                break;
            }
            // Stalled at the floating-point noise floor of the gradient.
            if decrement < 1e-8 && decrement >= 0.9 * prev_decrement {
                break;
            }
            prev_decrement = decrement;

            let mut accepted = false;
            if decrement > 0.1 {
                // Damped phase: backtracking with an Armijo condition.
                let phi0 = barrier_value(p, t, &x);
                let mut alpha = 1.0f64;
                for _ in 0..60 {
                    let cand = &x + &step * alpha;
                    if barrier_value(p, t, &cand) <= phi0 - 0.25 * alpha * decrement {
                        x = cand;
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
            } else {
                // Quadratic phase: for large t the barrier value changes by
                // less than its floating-point resolution, so a function
                // test would spuriously reject; take the Newton step at the
                // largest strictly feasible damping instead.
                let mut alpha = 1.0f64;
                for _ in 0..60 {
                    let cand = &x + &step * alpha;
                    if barrier_value(p, t, &cand).is_finite() {
                        x = cand;
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
            }
            total_iters += 1;
            if !accepted {
                break;
            }
        }

        let s = slacks(p, &x);
        for i in 0..m {
            lambda[i] = 1.0 / (t * s[i]);
        }
        let kkt = kkt_residual(p, &x, &lambda);
        if kkt < best_kkt {
            best_kkt = kkt;
            best = (x.clone(), lambda.clone());
        }
        if kkt <= cfg.tol_kkt {
            break;
        }
        if t >= t_goal || total_iters >= cfg.max_newton_iters {
            break;
        }
        t /= cfg.barrier_shrink;
    }

    let (mut x, lambda) = best;
    let mut kkt = best_kkt;

    if let Some((px, _, pk, steps)) = polish(p, &x, &lambda, kkt) {
        x = px;
        kkt = pk;
        total_iters += steps;
    }

    Ok(BarrierOutcome {
        converged: kkt <= cfg.tol_kkt,
        x,
        iterations: total_iters,
        kkt_residual: kkt,
    })
}

/// Crossover: Newton on the KKT equalities of the active set. Returns the
/// improved `(x, lambda, kkt, steps)` or `None` when no improvement holds.
fn polish(
    p: &dyn BarrierProblem,
    x0: &DVector<f64>,
    lambda0: &DVector<f64>,
    kkt0: f64,
) -> Option<(DVector<f64>, DVector<f64>, f64, usize)> {
    let nv = p.num_vars();
    let m = p.num_constraints();

    // Active constraints have slack shrinking like 1/t on the path while
    // inactive slacks stay bounded away from zero, so a loose cut on the
    // multiplier-to-slack balance separates them cleanly.
    let lam_max = lambda0.amax();
    let active: Vec<usize> = (0..m).filter(|&i| lambda0[i] > 1e-4 * lam_max.max(1e-30)).collect();
    let na = active.len();
    if na == 0 {
        return None;
    }

    let mut x = x0.clone();
    let mut lam_a = DVector::from_fn(na, |k, _| lambda0[active[k]]);
    let mut steps = 0usize;

    for _ in 0..30 {
        // Residual of the KKT equalities.
        let mut r_top = DVector::zeros(nv);
        p.objective_grad(&x, &mut r_top);
        let mut gi = DVector::zeros(nv);
        let mut d = DMatrix::zeros(nv, na);
        for (k, &i) in active.iter().enumerate() {
            p.constraint_grad(i, &x, &mut gi);
            r_top.axpy(lam_a[k], &gi, 1.0);
            d.column_mut(k).copy_from(&gi);
        }
        let r_bot = DVector::from_fn(na, |k, _| {
            p.constraint(active[k], &x) - p.constraint_bound(active[k])
        });
        if r_top.amax().max(r_bot.amax()) <= 1e-15 {
            break;
        }

        // KKT Jacobian [[H, D], [D^T, 0]].
        let mut h = DMatrix::zeros(nv, nv);
        p.add_objective_hess(&x, 1.0, &mut h);
        for (k, &i) in active.iter().enumerate() {
            p.add_constraint_hess(i, &x, lam_a[k], &mut h);
        }
        let dim = nv + na;
        let mut kmat = DMatrix::zeros(dim, dim);
        kmat.view_mut((0, 0), (nv, nv)).copy_from(&h);
        kmat.view_mut((0, nv), (nv, na)).copy_from(&d);
        kmat.view_mut((nv, 0), (na, nv)).copy_from(&d.transpose());
        let mut rhs = DVector::zeros(dim);
        rhs.rows_mut(0, nv).copy_from(&(-&r_top));
        rhs.rows_mut(nv, na).copy_from(&(-&r_bot));

        let delta = match kmat.clone().lu().solve(&rhs) {
            Some(dv) => dv,
            // Rank-deficient multipliers (redundant active constraints):
            // take the minimum-norm correction instead.
            None => kmat.svd(true, true).solve(&rhs, 1e-13).ok()?,
        };

        // Damp to stay in the objective's domain.
        let dx = delta.rows(0, nv).into_owned();
        let dl = delta.rows(nv, na).into_owned();
        let mut alpha = 1.0f64;
        for _ in 0..60 {
            if p.in_domain(&(&x + &dx * alpha)) {
                break;
            }
            alpha *= 0.5;
        }
        x += &dx * alpha;
        lam_a += &dl * alpha;
        steps += 1;
        if delta.amax() * alpha <= 1e-16 {
            break;
        }
    }

    // Validate: nonnegative multipliers and feasible inactive constraints.
    if lam_a.iter().any(|&l| l < -1e-12) {
        return None;
    }
    let mut lambda = DVector::zeros(m);
    for (k, &i) in active.iter().enumerate() {
        lambda[i] = lam_a[k].max(0.0);
    }
    for i in 0..m {
        let s = p.constraint_bound(i) - p.constraint(i, &x);
        if s < -1e-10 {
            return None;
        }
    }
    let kkt = kkt_residual(p, &x, &lambda);
    if kkt < kkt0 && p.in_domain(&x) {
        Some((x, lambda, kkt, steps))
    } else {
        None
    }
}
