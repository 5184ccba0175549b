//! Maximum-volume inscribed ellipsoids.
//!
//! Three solvers share one interior-point core ([`barrier`]):
//!
//! - [`chebyshev_ball`]: the largest inscribed ball of an H-polytope,
//!   posed as a linear program in the center and radius;
//! - [`max_volume_ellipsoid`]: the full problem, maximizing `log det` of a
//!   lower-triangular shape factor under the second-order-cone constraints
//!   `<a_i, c> + |L^t a_i| <= b_i`;
//! - [`analytic_simplex_john`]: the exact answer for simplices, obtained
//!   by mapping the inscribed ball of the regular simplex through the
//!   affine change of coordinates (maximal ellipsoids are affinely
//!   covariant, and for a regular simplex the maximal ellipsoid is the
//!   inscribed ball).
//!
//! Inputs must be bounded with nonempty interior; boundedness is certified
//! up front by checking that every signed coordinate direction lies in the
//! cone of the constraint normals (a nonnegative least-squares membership
//! test), and interiority by the Chebyshev radius.

mod barrier;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geom::{affine_map_between, regular_simplex, Ellipsoid, HPolytope, Simplex};
use crate::linalg::{nnls, sqrtm_spd};
use crate::{Error, Result};

use barrier::{solve_barrier, BarrierProblem};

/// Residual below which a coordinate direction counts as a member of the
/// normal cone in the boundedness probe.
const CONE_MEMBERSHIP_TOL: f64 = 1e-9;

/// Relative shrink applied to the Chebyshev ball to start the
/// maximum-volume solve strictly inside the polytope.
const INIT_SHRINK: f64 = 1e-3;

// ---------------------------------------------------------------------------
// Configuration and reporting
// ---------------------------------------------------------------------------

/// Interior-point solver parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Convergence threshold on the KKT residual
    /// (max of stationarity, infeasibility, complementarity).
    pub tol_kkt: f64,
    /// Budget of Newton steps across the whole path.
    pub max_newton_iters: usize,
    /// Factor by which the barrier weight shrinks per outer stage
    /// (strictly inside (0, 1)).
    pub barrier_shrink: f64,
    /// Chebyshev radii at or below this value are treated as an empty
    /// interior rather than regularized.
    pub degeneracy_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_kkt: 1e-9,
            max_newton_iters: 200,
            barrier_shrink: 0.2,
            degeneracy_floor: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_kkt > 0.0) {
            return Err(Error::InvalidInput("tol_kkt must be positive".into()));
        }
        if self.max_newton_iters == 0 {
            return Err(Error::InvalidInput("max_newton_iters must be positive".into()));
        }
        if !(self.barrier_shrink > 0.0 && self.barrier_shrink < 1.0) {
            return Err(Error::InvalidInput("barrier_shrink must lie in (0, 1)".into()));
        }
        if !(self.degeneracy_floor > 0.0) {
            return Err(Error::InvalidInput("degeneracy_floor must be positive".into()));
        }
        Ok(())
    }
}

/// Terminal state of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Converged,
    MaxIters,
    Infeasible,
    Unbounded,
}

/// Outcome summary of a maximum-volume solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    /// Newton steps spent (path following plus polish).
    pub iterations: usize,
    /// Final KKT residual (stationarity, infeasibility, complementarity).
    #[serde(rename = "kkt")]
    pub final_kkt_residual: f64,
    /// `log det(shape) + log vol(unit ball)` of the returned ellipsoid.
    pub log_volume: f64,
    pub status: SolverStatus,
}

// ---------------------------------------------------------------------------
// Boundedness
// ---------------------------------------------------------------------------

/// A polytope `{x : <a_i, x> <= b_i}` is bounded iff its recession cone is
/// trivial, i.e. iff the cone generated by the normals is all of `R^n`,
/// which holds iff every `+-e_k` is a nonnegative combination of normals.
fn ensure_bounded(p: &HPolytope) -> Result<()> {
    let n = p.dim();
    let m = p.num_facets();
    if m < n + 1 {
        return Err(Error::Unbounded(format!(
            "{m} halfspaces cannot bound a region in R^{n}"
        )));
    }
    let a = DMatrix::from_fn(n, m, |r, c| p.normal(c)[r]);
    for k in 0..n {
        for sign in [1.0, -1.0] {
            let target = DVector::from_fn(n, |i, _| if i == k { sign } else { 0.0 });
            let x = nnls(&a, &target, 3 * (m + n));
            if (&a * &x - &target).norm() > CONE_MEMBERSHIP_TOL {
                return Err(Error::Unbounded(format!(
                    "direction {}e_{k} escapes the constraint cone",
                    if sign > 0.0 { '+' } else { '-' }
                )));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Chebyshev ball (largest inscribed ball)
// ---------------------------------------------------------------------------

/// LP in the variables `(c, rho)`: maximize `rho` subject to
/// `<a_i, c> + rho <= b_i`.
struct BallProblem<'a> {
    p: &'a HPolytope,
}

impl BarrierProblem for BallProblem<'_> {
    fn num_vars(&self) -> usize {
        self.p.dim() + 1
    }
    fn num_constraints(&self) -> usize {
        self.p.num_facets()
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        -x[self.p.dim()]
    }
    fn objective_grad(&self, _x: &DVector<f64>, out: &mut DVector<f64>) {
        out.fill(0.0);
        out[self.p.dim()] = -1.0;
    }
    fn add_objective_hess(&self, _x: &DVector<f64>, _coeff: f64, _out: &mut DMatrix<f64>) {}
    fn constraint(&self, i: usize, x: &DVector<f64>) -> f64 {
        let n = self.p.dim();
        self.p.normal(i).dot(&x.rows(0, n).into_owned()) + x[n]
    }
    fn constraint_bound(&self, i: usize) -> f64 {
        self.p.offset(i)
    }
    fn constraint_grad(&self, i: usize, _x: &DVector<f64>, out: &mut DVector<f64>) {
        let n = self.p.dim();
        for k in 0..n {
            out[k] = self.p.normal(i)[k];
        }
        out[n] = 1.0;
    }
    fn add_constraint_hess(
        &self,
        _i: usize,
        _x: &DVector<f64>,
        _coeff: f64,
        _out: &mut DMatrix<f64>,
    ) {
    }
    fn in_domain(&self, _x: &DVector<f64>) -> bool {
        true
    }
}

fn chebyshev_center(p: &HPolytope, cfg: &SolverConfig) -> Result<(DVector<f64>, f64)> {
    let n = p.dim();
    // (c, rho) = (0, min b - 1) is strictly feasible for any input.
    let mut x0 = DVector::zeros(n + 1);
    x0[n] = p.offsets().iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let out = solve_barrier(&BallProblem { p }, x0, cfg)?;
    let r = out.x[n];
    if r <= cfg.degeneracy_floor {
        return Err(Error::Infeasible(format!(
            "empty interior: largest inscribed radius {r:.3e}"
        )));
    }
    if !out.converged {
        return Err(Error::Conditioning(format!(
            "inscribed-ball solve stalled at KKT residual {:.3e}",
            out.kkt_residual
        )));
    }
    Ok((out.x.rows(0, n).into_owned(), r))
}

/// Largest inscribed ball of a bounded H-polytope with nonempty interior.
pub fn chebyshev_ball(p: &HPolytope) -> Result<Ellipsoid> {
    ensure_bounded(p)?;
    let (c, r) = chebyshev_center(p, &SolverConfig::default())?;
    Ellipsoid::ball(c, r)
}

// ---------------------------------------------------------------------------
// Maximum-volume ellipsoid
// ---------------------------------------------------------------------------

/// Variables: the center `c` (n entries) followed by a lower-triangular
/// factor `L` with positive diagonal, packed row-major. The constraint for
/// a unit normal `a` is `<a, c> + |L^t a| <= b`, and the objective is
/// `-sum_k log L[k][k] = -log det L`.
struct FullShapeProblem<'a> {
    p: &'a HPolytope,
    /// (row, col) of each packed lower-triangle slot.
    slots: Vec<(usize, usize)>,
}

impl<'a> FullShapeProblem<'a> {
    fn new(p: &'a HPolytope) -> Self {
        let n = p.dim();
        let mut slots = Vec::with_capacity(n * (n + 1) / 2);
        for j in 0..n {
            for k in 0..=j {
                slots.push((j, k));
            }
        }
        FullShapeProblem { p, slots }
    }

    fn n(&self) -> usize {
        self.p.dim()
    }

    /// Column `k` of the packed diagonal slot within the variable vector.
    fn diag_slot(&self, k: usize) -> usize {
        self.n() + k * (k + 1) / 2 + k
    }

    /// `w = L^t a` and its norm for constraint `i`.
    fn cone_terms(&self, i: usize, x: &DVector<f64>) -> (DVector<f64>, f64) {
        let n = self.n();
        let a = self.p.normal(i);
        let mut w = DVector::zeros(n);
        for (slot, &(j, k)) in self.slots.iter().enumerate() {
            w[k] += x[n + slot] * a[j];
        }
        let r = w.norm();
        (w, r)
    }

    fn factor(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        let mut l = DMatrix::zeros(n, n);
        for (slot, &(j, k)) in self.slots.iter().enumerate() {
            l[(j, k)] = x[n + slot];
        }
        l
    }
}

impl BarrierProblem for FullShapeProblem<'_> {
    fn num_vars(&self) -> usize {
        self.n() + self.slots.len()
    }
    fn num_constraints(&self) -> usize {
        self.p.num_facets()
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        -(0..self.n()).map(|k| x[self.diag_slot(k)].ln()).sum::<f64>()
    }
    fn objective_grad(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        out.fill(0.0);
        for k in 0..self.n() {
            let d = self.diag_slot(k);
            out[d] = -1.0 / x[d];
        }
    }
    fn add_objective_hess(&self, x: &DVector<f64>, coeff: f64, out: &mut DMatrix<f64>) {
        for k in 0..self.n() {
            let d = self.diag_slot(k);
            out[(d, d)] += coeff / (x[d] * x[d]);
        }
    }
    fn constraint(&self, i: usize, x: &DVector<f64>) -> f64 {
        let n = self.n();
        let (_, r) = self.cone_terms(i, x);
        self.p.normal(i).dot(&x.rows(0, n).into_owned()) + r
    }
    fn constraint_bound(&self, i: usize) -> f64 {
        self.p.offset(i)
    }
    fn constraint_grad(&self, i: usize, x: &DVector<f64>, out: &mut DVector<f64>) {
        let n = self.n();
        let a = self.p.normal(i);
        let (w, r) = self.cone_terms(i, x);
        for k in 0..n {
            out[k] = a[k];
        }
        for (slot, &(j, k)) in self.slots.iter().enumerate() {
            out[n + slot] = a[j] * w[k] / r;
        }
    }
    fn add_constraint_hess(&self, i: usize, x: &DVector<f64>, coeff: f64, out: &mut DMatrix<f64>) {
        // Hessian of a (x) = |L^t a| in the packed L slots:
        //   d2r/(dL[j][k] dL[j'][k']) = a_j a_j' delta_kk' / r
        //                             - (a_j w_k)(a_j' w_k') / r^3.
        let n = self.n();
        let a = self.p.normal(i);
        let (w, r) = self.cone_terms(i, x);
        let inv_r = coeff / r;
        let inv_r3 = coeff / (r * r * r);
        for (s1, &(j1, k1)) in self.slots.iter().enumerate() {
            for (s2, &(j2, k2)) in self.slots.iter().enumerate() {
                let mut h = -(a[j1] * w[k1]) * (a[j2] * w[k2]) * inv_r3;
                if k1 == k2 {
                    h += a[j1] * a[j2] * inv_r;
                }
                out[(n + s1, n + s2)] += h;
            }
        }
    }
    fn in_domain(&self, x: &DVector<f64>) -> bool {
        (0..self.n()).all(|k| x[self.diag_slot(k)] > 0.0)
    }
}

/// Maximum-volume inscribed ellipsoid of a bounded H-polytope with
/// nonempty interior.
///
/// On success the status is [`SolverStatus::Converged`] and the KKT
/// residual is at most `cfg.tol_kkt`; if the Newton budget runs out the
/// best iterate is returned with status [`SolverStatus::MaxIters`].
pub fn max_volume_ellipsoid(
    p: &HPolytope,
    cfg: &SolverConfig,
) -> Result<(Ellipsoid, SolverReport)> {
    cfg.validate()?;
    ensure_bounded(p)?;
    let n = p.dim();
    let (c0, r0) = chebyshev_center(p, cfg)?;

    let problem = FullShapeProblem::new(p);
    let mut x0 = DVector::zeros(problem.num_vars());
    for k in 0..n {
        x0[k] = c0[k];
    }
    for k in 0..n {
        x0[problem.diag_slot(k)] = r0 * (1.0 - INIT_SHRINK);
    }

    let out = solve_barrier(&problem, x0, cfg)?;
    let l = problem.factor(&out.x);
    let shape = sqrtm_spd(&(&l * l.transpose()));
    let ellipsoid = Ellipsoid::new(out.x.rows(0, n).into_owned(), shape)?;
    let report = SolverReport {
        iterations: out.iterations,
        final_kkt_residual: out.kkt_residual,
        log_volume: ellipsoid.log_volume(),
        status: if out.converged {
            SolverStatus::Converged
        } else {
            SolverStatus::MaxIters
        },
    };
    Ok((ellipsoid, report))
}

// ---------------------------------------------------------------------------
// Analytic simplex oracle
// ---------------------------------------------------------------------------

/// Exact maximum-volume inscribed ellipsoid of a simplex: the affine image
/// of the regular simplex's inscribed unit ball under the vertex-to-vertex
/// change of coordinates.
pub fn analytic_simplex_john(s: &Simplex) -> Result<Ellipsoid> {
    let map = affine_map_between(&regular_simplex(s.dim())?, s)?;
    map.apply_ellipsoid(&Ellipsoid::unit_ball(s.dim()))
}

/// True iff the relative eigenvalue spread of the shape matrix,
/// `(lambda_max - lambda_min) / lambda_max`, is at most `tol`.
pub fn is_ball(e: &Ellipsoid, tol: f64) -> bool {
    let axes = e.semi_axes();
    let min = axes[0];
    let max = axes[axes.len() - 1];
    (max - min) / max <= tol
}
