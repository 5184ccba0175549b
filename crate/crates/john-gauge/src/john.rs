//! Decompositions of the identity from ellipsoid contact points.
//!
//! A maximal inscribed ellipsoid that has been normalized to the unit ball
//! touches its body at unit vectors `u_i` which admit positive weights
//! `c_i` with
//!
//! - condition a): `sum_i c_i u_i (x) u_i = I_n` (resolution of the
//!   identity), and
//! - condition b): `sum_i c_i u_i = 0` (the contact points are balanced).
//!
//! This module recovers such certificates numerically (normalize, detect
//! tangent facets, solve for nonnegative weights), measures how well a
//! candidate certificate satisfies both conditions, and houses the small
//! Gram-matrix systems used when the body is a simplex, including the
//! ball-iff-regular classifier.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geom::{Ellipsoid, HPolytope, Simplex};
use crate::linalg::nnls;
use crate::mvie::{analytic_simplex_john, is_ball};
use crate::{Error, Result};

/// Contact points must be unit within this tolerance.
pub const CONTACT_UNIT_TOL: f64 = 1e-10;

/// A facet counts as tangent to the unit ball when its offset exceeds 1 by
/// at most this much (matched to the solver KKT tolerance with an
/// order-of-magnitude margin).
pub const TANGENCY_TOL: f64 = 1e-7;

/// Residual gate for weight recovery: beyond this the contacts are not a
/// valid configuration.
pub const WEIGHT_RESIDUAL_TOL: f64 = 1e-7;

// ---------------------------------------------------------------------------
// Certificate
// ---------------------------------------------------------------------------

/// Contact points and weights witnessing conditions a) and b), together
/// with the measured residuals of both conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCertificate", into = "RawCertificate")]
pub struct JohnCertificate {
    dim: usize,
    contacts: Vec<DVector<f64>>,
    weights: Vec<f64>,
    residual_a: f64,
    residual_b: f64,
}

#[derive(Serialize, Deserialize)]
struct RawCertificate {
    dim: usize,
    contacts: Vec<Vec<f64>>,
    weights: Vec<f64>,
    residual_a: f64,
    residual_b: f64,
}

impl From<JohnCertificate> for RawCertificate {
    fn from(c: JohnCertificate) -> Self {
        RawCertificate {
            dim: c.dim,
            contacts: c.contacts.iter().map(|v| v.as_slice().to_vec()).collect(),
            weights: c.weights,
            residual_a: c.residual_a,
            residual_b: c.residual_b,
        }
    }
}

impl TryFrom<RawCertificate> for JohnCertificate {
    type Error = Error;
    fn try_from(raw: RawCertificate) -> Result<Self> {
        if raw.contacts.iter().any(|v| v.len() != raw.dim) {
            return Err(Error::InvalidInput("contact length mismatch".into()));
        }
        JohnCertificate::new(
            raw.dim,
            raw.contacts.into_iter().map(DVector::from_vec).collect(),
            raw.weights,
        )
    }
}

impl JohnCertificate {
    /// Build a certificate, validating shape and measuring the residuals
    /// of conditions a) and b).
    pub fn new(dim: usize, contacts: Vec<DVector<f64>>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        let m = contacts.len();
        if m < dim + 1 {
            return Err(Error::InvalidInput(format!(
                "{m} contact points cannot decompose the identity in R^{dim} (need at least {})",
                dim + 1
            )));
        }
        if weights.len() != m {
            return Err(Error::InvalidInput("weights/contacts length mismatch".into()));
        }
        if weights.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::InvalidInput("weights must be strictly positive".into()));
        }
        for u in &contacts {
            if u.len() != dim {
                return Err(Error::InvalidInput("contact length mismatch".into()));
            }
            if (u.norm() - 1.0).abs() > CONTACT_UNIT_TOL {
                return Err(Error::InvalidInput(format!(
                    "contact point has norm {} (unit within {CONTACT_UNIT_TOL} required)",
                    u.norm()
                )));
            }
        }
        let (residual_a, residual_b) = condition_residuals(&contacts, &weights);
        Ok(JohnCertificate { dim, contacts, weights, residual_a, residual_b })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contacts(&self) -> &[DVector<f64>] {
        &self.contacts
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn residual_a(&self) -> f64 {
        self.residual_a
    }

    pub fn residual_b(&self) -> f64 {
        self.residual_b
    }
}

/// `(|sum c u (x) u - I|_F, |sum c u|)`.
pub(crate) fn condition_residuals(contacts: &[DVector<f64>], weights: &[f64]) -> (f64, f64) {
    let n = contacts[0].len();
    let mut sum_outer = DMatrix::<f64>::zeros(n, n);
    let mut sum_vec = DVector::<f64>::zeros(n);
    for (u, &c) in contacts.iter().zip(weights) {
        sum_outer.ger(c, u, u, 1.0);
        sum_vec.axpy(c, u, 1.0);
    }
    ((sum_outer - DMatrix::<f64>::identity(n, n)).norm(), sum_vec.norm())
}

// ---------------------------------------------------------------------------
// Normalization and contact detection
// ---------------------------------------------------------------------------

/// Change coordinates so that `e` becomes the unit ball: the image of
/// `{x : <a,x> <= b}` under `x = shape*y + center` is
/// `{y : <shape*a, y> <= b - <a, center>}`, re-normalized to unit rows.
/// Tangent facets end up at offset exactly 1.
pub fn normalize_to_unit_john(p: &HPolytope, e: &Ellipsoid) -> Result<HPolytope> {
    if p.dim() != e.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let mut rows = Vec::with_capacity(p.num_facets());
    let mut offsets = Vec::with_capacity(p.num_facets());
    for i in 0..p.num_facets() {
        rows.push(e.shape() * p.normal(i));
        offsets.push(p.offset(i) - p.normal(i).dot(e.center()));
    }
    let image = HPolytope::from_general(rows, offsets)?;
    // The ellipsoid must sit inside the body: every normalized offset is
    // then at least 1 (equality at tangency).
    for i in 0..image.num_facets() {
        if image.offset(i) < 1.0 - TANGENCY_TOL {
            return Err(Error::InvalidInput(format!(
                "ellipsoid pokes outside facet {i}: normalized offset {}",
                image.offset(i)
            )));
        }
    }
    Ok(image)
}

/// Unit-sphere contact points of a unit-ball-normalized body: the normals
/// of all facets with offset within [`TANGENCY_TOL`] of 1. At least `n+1`
/// tangent facets must exist for a certificate to be possible.
pub fn contact_points(p: &HPolytope) -> Result<Vec<DVector<f64>>> {
    let n = p.dim();
    let mut contacts = Vec::new();
    for i in 0..p.num_facets() {
        let b = p.offset(i);
        if b < 1.0 - TANGENCY_TOL {
            return Err(Error::InvalidInput(format!(
                "facet {i} cuts the unit ball (offset {b})"
            )));
        }
        if b - 1.0 <= TANGENCY_TOL {
            contacts.push(p.normal(i).clone());
        }
    }
    if contacts.len() < n + 1 {
        return Err(Error::Verification(format!(
            "only {} tangent facets; a decomposition needs at least {} \
             (normalization or solver failure upstream)",
            contacts.len(),
            n + 1
        )));
    }
    Ok(contacts)
}

// ---------------------------------------------------------------------------
// Weight recovery and verification
// ---------------------------------------------------------------------------

/// Recover nonnegative weights for conditions a) and b) by nonnegative
/// least squares on the stacked system
/// `{sum_i c_i u_i (x) u_i = I_n, sum_i c_i u_i = 0}`.
///
/// The upper-triangle rows of condition a) carry a factor sqrt(2) off the
/// diagonal so the least-squares objective equals the Frobenius norm of
/// the symmetric deviation. Errors when no nonnegative solution fits
/// within [`WEIGHT_RESIDUAL_TOL`].
pub fn solve_weights(contacts: &[DVector<f64>]) -> Result<Vec<f64>> {
    let m = contacts.len();
    if m == 0 {
        return Err(Error::InvalidInput("no contact points".into()));
    }
    let n = contacts[0].len();
    if m < n + 1 {
        return Err(Error::InvalidInput(format!(
            "{m} contacts cannot span a decomposition in R^{n}"
        )));
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let rows = n * (n + 1) / 2 + n;
    let mut a = DMatrix::zeros(rows, m);
    let mut b = DVector::zeros(rows);
    let mut row = 0;
    for p in 0..n {
        for q in p..n {
            let scale = if p == q { 1.0 } else { sqrt2 };
            for (col, u) in contacts.iter().enumerate() {
                a[(row, col)] = scale * u[p] * u[q];
            }
            b[row] = if p == q { 1.0 } else { 0.0 };
            row += 1;
        }
    }
    for p in 0..n {
        for (col, u) in contacts.iter().enumerate() {
            a[(row, col)] = u[p];
        }
        row += 1;
    }
    debug_assert_eq!(row, rows);

    let c = nnls(&a, &b, 3 * (rows + m));
    let weights: Vec<f64> = c.iter().cloned().collect();
    let (ra, rb) = condition_residuals(contacts, &weights);
    if ra.max(rb) > WEIGHT_RESIDUAL_TOL {
        return Err(Error::Verification(format!(
            "contacts admit no nonnegative decomposition: residuals {ra:.3e} / {rb:.3e}"
        )));
    }
    Ok(weights)
}

/// Measure a candidate decomposition: the Frobenius residual of condition
/// a), the norm residual of condition b), and the worst reconstruction
/// error over `trials` random unit vectors `x` of both
/// `|x - sum_i c_i <x, u_i> u_i|` and `| |x|^2 - sum_i c_i <x, u_i>^2 |`.
pub fn verify_decomposition(
    contacts: &[DVector<f64>],
    weights: &[f64],
    trials: usize,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    if contacts.len() != weights.len() || contacts.is_empty() {
        return Err(Error::InvalidInput("contacts/weights length mismatch".into()));
    }
    let n = contacts[0].len();
    let (ra, rb) = condition_residuals(contacts, weights);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x = random_unit_vector(n, &mut rng);
        let mut recon = DVector::zeros(n);
        let mut quad = 0.0;
        for (u, &c) in contacts.iter().zip(weights) {
            let t = x.dot(u);
            recon.axpy(c * t, u, 1.0);
            quad += c * t * t;
        }
        worst = worst.max((&x - recon).norm()).max((1.0 - quad).abs());
    }
    Ok((ra, rb, worst))
}

fn random_unit_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let x: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let len = x.norm();
        if len > 1e-6 {
            return x / len;
        }
    }
}

/// The exact certificate of the regular simplex: its insphere tangent
/// points (equal to the outward facet normals) with all weights
/// `n/(n+1)`.
pub fn regular_certificate(n: usize) -> Result<JohnCertificate> {
    let hp = crate::geom::regular_simplex(n)?.to_halfspaces()?;
    let weights = vec![n as f64 / (n as f64 + 1.0); n + 1];
    JohnCertificate::new(n, hp.normals().to_vec(), weights)
}

// ---------------------------------------------------------------------------
// Gram machinery
// ---------------------------------------------------------------------------

/// Pairwise inner products `<u_i, u_j>` of a contact system.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .entries
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Gram matrix of a sequence of (unit) vectors.
pub fn gram_matrix(contacts: &[DVector<f64>]) -> GramMatrix {
    let m = contacts.len();
    GramMatrix {
        entries: DMatrix::from_fn(m, m, |i, j| contacts[i].dot(&contacts[j])),
    }
}

/// The Gram matrix of the regular simplex normal system: 1 on the
/// diagonal, `-1/n` everywhere else.
pub fn regular_gram(n: usize) -> GramMatrix {
    let off = -1.0 / n as f64;
    GramMatrix {
        entries: DMatrix::from_fn(n + 1, n + 1, |i, j| if i == j { 1.0 } else { off }),
    }
}

/// Solve `D alpha = beta` for the regular simplex Gram matrix `D`, which
/// is singular with kernel spanned by `(1, ..., 1)`. On the complementary
/// zero-sum subspace `D` acts as `((n+1)/n) I`, so the minimum-norm
/// solution is `alpha = (n/(n+1)) beta`; the product is verified before
/// returning.
pub fn solve_alpha(d: &GramMatrix, beta: &DVector<f64>) -> Result<DVector<f64>> {
    let m = d.size();
    if beta.len() != m {
        return Err(Error::InvalidInput("beta length mismatch".into()));
    }
    let sum: f64 = beta.iter().sum();
    if sum.abs() > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "beta components sum to {sum}; the rank-deficient system needs a zero-sum right side"
        )));
    }
    let n = (m - 1) as f64;
    let alpha = beta * (n / (n + 1.0));
    let residual = (d.entries() * &alpha - beta).norm();
    if residual > 1e-10 {
        return Err(Error::Verification(format!(
            "Gram system residual {residual:.3e}: matrix is not the regular pattern"
        )));
    }
    Ok(alpha)
}

// ---------------------------------------------------------------------------
// Certificate pipeline and classifier
// ---------------------------------------------------------------------------

/// Full pipeline from a polytope and its maximal inscribed ellipsoid to a
/// certificate: normalize to the unit ball, read off tangent facets,
/// recover nonnegative weights.
pub fn certificate_from_ellipsoid(p: &HPolytope, e: &Ellipsoid) -> Result<JohnCertificate> {
    let normalized = normalize_to_unit_john(p, e)?;
    let contacts = contact_points(&normalized)?;
    let weights = solve_weights(&contacts)?;
    JohnCertificate::new(p.dim(), contacts, weights)
}

/// The ball-iff-regular classifier: compares the eigenvalue-spread verdict
/// on the exact simplex ellipsoid against the edge-length-spread verdict
/// on the simplex itself.
pub fn john_ball_iff_regular(
    s: &Simplex,
    tol_ball: f64,
    tol_reg: f64,
) -> Result<(bool, bool, bool)> {
    let ball_verdict = is_ball(&analytic_simplex_john(s)?, tol_ball);
    let regular_verdict = s.is_regular(tol_reg);
    Ok((ball_verdict, regular_verdict, ball_verdict == regular_verdict))
}
