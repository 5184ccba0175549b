//! Simplex and H-polytope geometry.
//!
//! Conventions used throughout:
//!
//! - Facet `i` of a simplex is the facet opposite vertex `i`; its outward
//!   unit normal is `normals[i]` after [`Simplex::to_halfspaces`].
//! - Barycentric coordinates are signed-volume ratios with a consistent
//!   orientation, normalized to sum to one. The classical ratio form is
//!   recovered by clearing the normalization.
//! - The 0-dimensional facet volume (the `n = 1` case) is 1 by convention,
//!   which keeps projected-area ratios well defined in one dimension.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::sqrtm_spd;
use crate::{Error, Result};

/// Scale-aware degeneracy threshold: a simplex is accepted when
/// `|det(edge matrix)| > DEGENERACY_REL * max_edge^n`.
pub const DEGENERACY_REL: f64 = 1e-10;

/// Normals of an [`HPolytope`] must be unit within this tolerance.
pub const UNIT_NORMAL_TOL: f64 = 1e-12;

/// Barycentric weights must sum to one within this tolerance.
pub const BARY_SUM_TOL: f64 = 1e-12;

const RANDOM_SIMPLEX_MAX_REJECTS: usize = 10_000;

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

// ---------------------------------------------------------------------------
// Simplex
// ---------------------------------------------------------------------------

/// An `n`-dimensional simplex: `n + 1` affinely independent vertices in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSimplex", into = "RawSimplex")]
pub struct Simplex {
    dim: usize,
    vertices: Vec<DVector<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawSimplex {
    dim: usize,
    vertices: Vec<Vec<f64>>,
}

impl From<Simplex> for RawSimplex {
    fn from(s: Simplex) -> Self {
        RawSimplex {
            dim: s.dim,
            vertices: s.vertices.iter().map(|v| v.as_slice().to_vec()).collect(),
        }
    }
}

impl TryFrom<RawSimplex> for Simplex {
    type Error = Error;
    fn try_from(raw: RawSimplex) -> Result<Self> {
        if raw.vertices.iter().any(|v| v.len() != raw.dim) {
            return Err(Error::InvalidInput(format!(
                "simplex vertices must have length dim = {}",
                raw.dim
            )));
        }
        Simplex::new(raw.vertices.into_iter().map(DVector::from_vec).collect())
    }
}

impl Simplex {
    /// Build a simplex from `n + 1` vertices of length `n`, rejecting
    /// degenerate vertex sets.
    pub fn new(vertices: Vec<DVector<f64>>) -> Result<Self> {
        let n = match vertices.first() {
            Some(v) if !v.is_empty() => v.len(),
            _ => return Err(Error::InvalidInput("simplex needs vertices in R^n, n >= 1".into())),
        };
        if vertices.len() != n + 1 {
            return Err(Error::InvalidInput(format!(
                "simplex in R^{n} needs {} vertices, got {}",
                n + 1,
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| v.len() != n) {
            return Err(Error::InvalidInput("vertex length mismatch".into()));
        }
        if vertices.iter().flat_map(|v| v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("vertex coordinates must be finite".into()));
        }
        let s = Simplex { dim: n, vertices };
        let max_edge = s
            .edge_lengths()
            .into_iter()
            .fold(0.0f64, f64::max);
        if s.edge_matrix().determinant().abs() <= DEGENERACY_REL * max_edge.powi(n as i32) {
            return Err(Error::Degenerate(
                "edge determinant below the scale-aware threshold".into(),
            ));
        }
        Ok(s)
    }

    /// Convenience constructor from coordinate slices.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        Simplex::new(rows.iter().map(|r| DVector::from_row_slice(r)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &DVector<f64> {
        &self.vertices[i]
    }

    pub fn centroid(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.dim);
        for v in &self.vertices {
            c += v;
        }
        c / (self.dim as f64 + 1.0)
    }

    /// Matrix of edge vectors `v_i - v_0`, `i = 1..=n`, as columns.
    fn edge_matrix(&self) -> DMatrix<f64> {
        let n = self.dim;
        DMatrix::from_fn(n, n, |r, c| self.vertices[c + 1][r] - self.vertices[0][r])
    }

    /// Euclidean volume `|det(edge matrix)| / n!`.
    pub fn volume(&self) -> f64 {
        self.edge_matrix().determinant().abs() / factorial(self.dim)
    }

    /// All `n(n+1)/2` edge lengths, pairs `(i, j)` with `i < j` in
    /// lexicographic order.
    pub fn edge_lengths(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim * (self.dim + 1) / 2);
        for i in 0..self.vertices.len() {
            for j in (i + 1)..self.vertices.len() {
                out.push((&self.vertices[i] - &self.vertices[j]).norm());
            }
        }
        out
    }

    /// A simplex is regular when the relative spread of its edge lengths,
    /// `(max - min) / max`, is at most `tol`.
    pub fn is_regular(&self, tol: f64) -> bool {
        self.edge_spread() <= tol
    }

    /// Relative edge-length spread `(max - min) / max`.
    pub fn edge_spread(&self) -> f64 {
        let lengths = self.edge_lengths();
        let max = lengths.iter().cloned().fold(f64::MIN, f64::max);
        let min = lengths.iter().cloned().fold(f64::MAX, f64::min);
        (max - min) / max
    }

    /// Halfspace representation with `n + 1` unit outward normals; normal
    /// `i` belongs to the facet opposite vertex `i`.
    pub fn to_halfspaces(&self) -> Result<HPolytope> {
        let n = self.dim;
        // Rows of the inverse of [vertices as columns; ones] are the affine
        // functionals dual to the vertices: lambda_i(v_j) = delta_ij.
        let mut b = DMatrix::zeros(n + 1, n + 1);
        for (j, v) in self.vertices.iter().enumerate() {
            for i in 0..n {
                b[(i, j)] = v[i];
            }
            b[(n, j)] = 1.0;
        }
        let inv = b
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("vertex matrix not invertible".into()))?;
        let mut normals = Vec::with_capacity(n + 1);
        let mut offsets = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let g = DVector::from_fn(n, |k, _| inv[(i, k)]);
            let h = inv[(i, n)];
            let len = g.norm();
            if len <= 0.0 {
                return Err(Error::Degenerate("zero facet gradient".into()));
            }
            // lambda_i > 0 inside, so the outward normal is -g.
            normals.push(-&g / len);
            offsets.push(h / len);
        }
        HPolytope::new(normals, offsets)
    }

    /// `(n-1)`-dimensional volume of the facet opposite vertex `i`.
    pub fn facet_area(&self, i: usize) -> Result<f64> {
        if i > self.dim {
            return Err(Error::IndexOutOfRange(format!(
                "facet {i} of a {}-simplex",
                self.dim
            )));
        }
        if self.dim == 1 {
            // 0-dimensional volume convention.
            return Ok(1.0);
        }
        let pts: Vec<&DVector<f64>> = self
            .vertices
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i)
            .map(|(_, v)| v)
            .collect();
        Ok(simplex_volume_embedded(&pts))
    }

    /// Cosine of the dihedral angle between the hyperplanes of facets `i`
    /// and `j`, computed along two independent routes that are checked
    /// against each other:
    ///
    /// 1. from the outward normals, as `-<u_i, u_j>`;
    /// 2. as the signed ratio of the projected facet area: facet `j` is
    ///    orthogonally projected onto the hyperplane of facet `i` and its
    ///    `(n-1)`-volume compared against the original, signed by which side
    ///    of the shared ridge the image lands on.
    pub fn dihedral_cos(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(Error::InvalidInput("dihedral angle needs two distinct facets".into()));
        }
        if i > self.dim || j > self.dim {
            return Err(Error::IndexOutOfRange(format!("facet pair ({i}, {j})")));
        }
        let (via_normals, via_areas) = self.dihedral_cos_routes(i, j)?;
        if (via_normals - via_areas).abs() > 1e-9 {
            return Err(Error::Verification(format!(
                "dihedral routes disagree: {via_normals} vs {via_areas}"
            )));
        }
        Ok(via_normals)
    }

    /// Both dihedral-cosine routes (normals, projected areas).
    pub fn dihedral_cos_routes(&self, i: usize, j: usize) -> Result<(f64, f64)> {
        let hp = self.to_halfspaces()?;
        let via_normals = -hp.normal(i).dot(hp.normal(j));
        if self.dim == 1 {
            // Point facets project to themselves; both routes are 1.
            return Ok((via_normals, 1.0));
        }

        let u_i = hp.normal(i);
        let b_i = hp.offset(i);
        let project = |x: &DVector<f64>| x - u_i * (u_i.dot(x) - b_i);

        // Facet j = all vertices but v_j; the ridge (shared with facet i)
        // is all vertices but v_i, v_j.
        let ridge: Vec<&DVector<f64>> = (0..=self.dim)
            .filter(|&k| k != i && k != j)
            .map(|k| &self.vertices[k])
            .collect();
        let q = project(&self.vertices[i]);

        let mut projected: Vec<&DVector<f64>> = ridge.clone();
        projected.push(&q);
        let s_ji = simplex_volume_embedded(&projected);
        let s_j = self.facet_area(j)?;

        // Side of the ridge, within the facet-i hyperplane, on which the
        // projected apex falls relative to v_j: same side means an acute
        // dihedral, opposite side an obtuse one.
        let sign = {
            let base = ridge[0];
            let ridge_dirs: Vec<DVector<f64>> =
                ridge.iter().skip(1).map(|r| *r - base).collect();
            let d_q = reject_from_span(&(&q - base), &ridge_dirs);
            let d_j = reject_from_span(&(&self.vertices[j] - base), &ridge_dirs);
            if d_q.dot(&d_j) >= 0.0 {
                1.0
            } else {
                -1.0
            }
        };
        Ok((via_normals, sign * s_ji / s_j))
    }

    /// Barycentric coordinates of `point`: the signed-volume ratios,
    /// normalized to sum to one.
    pub fn barycentric(&self, point: &DVector<f64>) -> Result<BarycentricCoords> {
        let n = self.dim;
        if point.len() != n {
            return Err(Error::InvalidInput("point dimension mismatch".into()));
        }
        let mut b = DMatrix::zeros(n + 1, n + 1);
        for (j, v) in self.vertices.iter().enumerate() {
            for i in 0..n {
                b[(i, j)] = v[i];
            }
            b[(n, j)] = 1.0;
        }
        let mut rhs = DVector::zeros(n + 1);
        for i in 0..n {
            rhs[i] = point[i];
        }
        rhs[n] = 1.0;
        let w = b
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("barycentric system singular".into()))?;
        let sum: f64 = w.iter().sum();
        BarycentricCoords::new(w.iter().map(|x| x / sum).collect())
    }

    /// The point `sum_i w_i v_i`.
    pub fn from_barycentric(&self, coords: &BarycentricCoords) -> Result<DVector<f64>> {
        if coords.weights().len() != self.dim + 1 {
            return Err(Error::InvalidInput("weight count mismatch".into()));
        }
        let mut p = DVector::zeros(self.dim);
        for (w, v) in coords.weights().iter().zip(&self.vertices) {
            p += v * *w;
        }
        Ok(p)
    }

    /// Center of the inscribed ball: the facet-area weighted vertex mean.
    pub fn incenter(&self) -> Result<DVector<f64>> {
        let mut total = 0.0;
        let mut c = DVector::zeros(self.dim);
        for (i, v) in self.vertices.iter().enumerate() {
            let s = self.facet_area(i)?;
            total += s;
            c += v * s;
        }
        Ok(c / total)
    }

    /// Radius of the inscribed ball, `n * volume / surface`.
    pub fn inradius(&self) -> Result<f64> {
        let mut surface = 0.0;
        for i in 0..=self.dim {
            surface += self.facet_area(i)?;
        }
        Ok(self.dim as f64 * self.volume() / surface)
    }

    /// Tangent points of the inscribed ball: the orthogonal projection of
    /// the incenter onto each facet hyperplane (point `i` on facet `i`).
    pub fn insphere_tangent_points(&self) -> Result<Vec<DVector<f64>>> {
        let hp = self.to_halfspaces()?;
        let c = self.incenter()?;
        Ok((0..=self.dim)
            .map(|i| {
                let u = hp.normal(i);
                &c - u * (u.dot(&c) - hp.offset(i))
            })
            .collect())
    }
}

/// `(k-1)`-dimensional volume of the simplex spanned by `pts` embedded in a
/// higher-dimensional space, via the Gram determinant of its edges.
fn simplex_volume_embedded(pts: &[&DVector<f64>]) -> f64 {
    let k = pts.len() - 1;
    if k == 0 {
        return 1.0;
    }
    let edges: Vec<DVector<f64>> = pts.iter().skip(1).map(|p| *p - pts[0]).collect();
    let gram = DMatrix::from_fn(k, k, |r, c| edges[r].dot(&edges[c]));
    gram.determinant().max(0.0).sqrt() / factorial(k)
}

/// Component of `v` orthogonal to the span of `basis` (classical
/// Gram-Schmidt rejection, run twice for stability).
fn reject_from_span(v: &DVector<f64>, basis: &[DVector<f64>]) -> DVector<f64> {
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(basis.len());
    for b in basis {
        let mut w = b.clone();
        for _ in 0..2 {
            for o in &ortho {
                let c = o.dot(&w);
                w -= o * c;
            }
        }
        let len = w.norm();
        if len > 1e-14 {
            ortho.push(w / len);
        }
    }
    let mut r = v.clone();
    for _ in 0..2 {
        for o in &ortho {
            let c = o.dot(&r);
            r -= o * c;
        }
    }
    r
}

/// Regular simplex centered at the origin whose inscribed ball is the unit
/// ball.
///
/// The `n + 1` scaled standard basis points of `R^{n+1}` are centered onto
/// the coordinate-sum-zero hyperplane, expressed in an orthonormal basis of
/// that hyperplane, and scaled so the inradius is exactly 1. The facet
/// normal Gram matrix then has the constant off-diagonal `-1/n` by
/// construction; the circumradius is `n`.
pub fn regular_simplex(n: usize) -> Result<Simplex> {
    if n == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    let g = 1.0 / (n as f64 + 1.0);
    // Centered basis points p_i = e_i - g * ones, living in the sum-zero
    // hyperplane of R^{n+1}.
    let points: Vec<DVector<f64>> = (0..=n)
        .map(|i| DVector::from_fn(n + 1, |k, _| if k == i { 1.0 - g } else { -g }))
        .collect();
    // Orthonormal basis of the hyperplane from the first n points
    // (Gram-Schmidt, run twice).
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    for p in points.iter().take(n) {
        let mut w = p.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w -= b * c;
            }
        }
        basis.push(&w / w.norm());
    }
    let scale = (n as f64 * (n as f64 + 1.0)).sqrt();
    let vertices: Vec<DVector<f64>> = points
        .iter()
        .map(|p| DVector::from_fn(n, |k, _| scale * basis[k].dot(p)))
        .collect();
    Simplex::new(vertices)
}

/// Random simplex with vertices i.i.d. uniform on `[-1, 1]^n`, rejection
/// sampled until the edge-vector determinant magnitude reaches `min_det`.
/// Deterministic for a fixed seed.
pub fn random_simplex(n: usize, seed: u64, min_det: f64) -> Result<Simplex> {
    if n == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    if !(min_det > 0.0) {
        return Err(Error::InvalidInput("min_det must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_SIMPLEX_MAX_REJECTS {
        let vertices: Vec<DVector<f64>> = (0..=n)
            .map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..=1.0)))
            .collect();
        let candidate = Simplex { dim: n, vertices };
        if candidate.edge_matrix().determinant().abs() >= min_det {
            if let Ok(s) = Simplex::new(candidate.vertices) {
                return Ok(s);
            }
        }
    }
    Err(Error::Conditioning(format!(
        "no simplex with |det| >= {min_det} in [-1,1]^{n} after {RANDOM_SIMPLEX_MAX_REJECTS} draws"
    )))
}

// ---------------------------------------------------------------------------
// HPolytope
// ---------------------------------------------------------------------------

/// Halfspace representation `{x : <a_i, x> <= b_i}` with unit normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHPolytope", into = "RawHPolytope")]
pub struct HPolytope {
    dim: usize,
    normals: Vec<DVector<f64>>,
    offsets: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawHPolytope {
    dim: usize,
    normals: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

impl From<HPolytope> for RawHPolytope {
    fn from(p: HPolytope) -> Self {
        RawHPolytope {
            dim: p.dim,
            normals: p.normals.iter().map(|v| v.as_slice().to_vec()).collect(),
            offsets: p.offsets,
        }
    }
}

impl TryFrom<RawHPolytope> for HPolytope {
    type Error = Error;
    fn try_from(raw: RawHPolytope) -> Result<Self> {
        if raw.normals.iter().any(|v| v.len() != raw.dim) {
            return Err(Error::InvalidInput("normal length mismatch".into()));
        }
        HPolytope::new(
            raw.normals.into_iter().map(DVector::from_vec).collect(),
            raw.offsets,
        )
    }
}

impl HPolytope {
    /// Build from unit normals (validated within [`UNIT_NORMAL_TOL`]) and
    /// offsets.
    pub fn new(normals: Vec<DVector<f64>>, offsets: Vec<f64>) -> Result<Self> {
        let dim = match normals.first() {
            Some(v) if !v.is_empty() => v.len(),
            _ => return Err(Error::InvalidInput("polytope needs normals in R^n, n >= 1".into())),
        };
        if normals.len() != offsets.len() {
            return Err(Error::InvalidInput("normals/offsets length mismatch".into()));
        }
        for a in &normals {
            if a.len() != dim {
                return Err(Error::InvalidInput("normal length mismatch".into()));
            }
            if (a.norm() - 1.0).abs() > UNIT_NORMAL_TOL {
                return Err(Error::InvalidInput(format!(
                    "normal has norm {} (must be unit within {UNIT_NORMAL_TOL})",
                    a.norm()
                )));
            }
        }
        if offsets.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("offsets must be finite".into()));
        }
        Ok(HPolytope { dim, normals, offsets })
    }

    /// Build from general (non-unit) rows, normalizing each constraint.
    pub fn from_general(rows: Vec<DVector<f64>>, offsets: Vec<f64>) -> Result<Self> {
        let mut normals = Vec::with_capacity(rows.len());
        let mut scaled = Vec::with_capacity(rows.len());
        for (a, b) in rows.into_iter().zip(offsets) {
            let len = a.norm();
            if len <= 1e-300 {
                return Err(Error::InvalidInput("zero normal row".into()));
            }
            normals.push(a / len);
            scaled.push(b / len);
        }
        HPolytope::new(normals, scaled)
    }

    /// Axis-aligned cube `[-r, r]^n` (2n facets).
    pub fn cube(n: usize, r: f64) -> Result<Self> {
        if n == 0 || !(r > 0.0) {
            return Err(Error::InvalidInput("cube needs n >= 1 and r > 0".into()));
        }
        let mut normals = Vec::with_capacity(2 * n);
        let mut offsets = Vec::with_capacity(2 * n);
        for k in 0..n {
            for sign in [1.0, -1.0] {
                normals.push(DVector::from_fn(n, |i, _| if i == k { sign } else { 0.0 }));
                offsets.push(r);
            }
        }
        HPolytope::new(normals, offsets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_facets(&self) -> usize {
        self.normals.len()
    }

    pub fn normal(&self, i: usize) -> &DVector<f64> {
        &self.normals[i]
    }

    pub fn normals(&self) -> &[DVector<f64>] {
        &self.normals
    }

    pub fn offset(&self, i: usize) -> f64 {
        self.offsets[i]
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Constraint slack `b_i - <a_i, x>` (negative outside).
    pub fn slack(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.offsets[i] - self.normals[i].dot(x)
    }

    /// Smallest slack over all constraints.
    pub fn min_slack(&self, x: &DVector<f64>) -> f64 {
        (0..self.num_facets())
            .map(|i| self.slack(i, x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Recover the vertex lying on every facet except those in `skip`
    /// (callable when exactly `n` facets remain).
    pub fn vertex_excluding(&self, skip: usize) -> Result<DVector<f64>> {
        let n = self.dim;
        let rows: Vec<usize> = (0..self.num_facets()).filter(|&k| k != skip).collect();
        if rows.len() != n {
            return Err(Error::InvalidInput(format!(
                "vertex recovery needs exactly {n} facets, got {}",
                rows.len()
            )));
        }
        let a = DMatrix::from_fn(n, n, |r, c| self.normals[rows[r]][c]);
        let b = DVector::from_fn(n, |r, _| self.offsets[rows[r]]);
        a.lu()
            .solve(&b)
            .ok_or_else(|| Error::Degenerate("facet system singular".into()))
    }

    /// Recover a simplex from an `n + 1` facet representation, preserving
    /// the facet-opposite-vertex ordering used by
    /// [`Simplex::to_halfspaces`].
    pub fn recover_simplex(&self) -> Result<Simplex> {
        if self.num_facets() != self.dim + 1 {
            return Err(Error::InvalidInput(format!(
                "simplex recovery needs {} facets, got {}",
                self.dim + 1,
                self.num_facets()
            )));
        }
        let vertices: Result<Vec<DVector<f64>>> =
            (0..=self.dim).map(|i| self.vertex_excluding(i)).collect();
        Simplex::new(vertices?)
    }
}

// ---------------------------------------------------------------------------
// Ellipsoid
// ---------------------------------------------------------------------------

/// Ellipsoid `{center + shape * y : |y| <= 1}` with a symmetric positive
/// definite shape matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEllipsoid", into = "RawEllipsoid")]
pub struct Ellipsoid {
    center: DVector<f64>,
    shape: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawEllipsoid {
    center: Vec<f64>,
    shape: Vec<Vec<f64>>,
}

impl From<Ellipsoid> for RawEllipsoid {
    fn from(e: Ellipsoid) -> Self {
        let n = e.center.len();
        RawEllipsoid {
            center: e.center.as_slice().to_vec(),
            shape: (0..n)
                .map(|r| (0..n).map(|c| e.shape[(r, c)]).collect())
                .collect(),
        }
    }
}

impl TryFrom<RawEllipsoid> for Ellipsoid {
    type Error = Error;
    fn try_from(raw: RawEllipsoid) -> Result<Self> {
        let n = raw.center.len();
        if raw.shape.len() != n || raw.shape.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("shape must be n x n".into()));
        }
        let shape = DMatrix::from_fn(n, n, |r, c| raw.shape[r][c]);
        Ellipsoid::new(DVector::from_vec(raw.center), shape)
    }
}

impl Ellipsoid {
    /// Build an ellipsoid; the shape matrix is symmetrized and must be
    /// positive definite.
    pub fn new(center: DVector<f64>, shape: DMatrix<f64>) -> Result<Self> {
        let n = center.len();
        if shape.nrows() != n || shape.ncols() != n || n == 0 {
            return Err(Error::InvalidInput("shape must be n x n, n >= 1".into()));
        }
        let sym = (&shape + shape.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidInput(
                "shape matrix must be positive definite".into(),
            ));
        }
        Ok(Ellipsoid { center, shape: sym })
    }

    /// The unit ball in `R^n`.
    pub fn unit_ball(n: usize) -> Self {
        Ellipsoid {
            center: DVector::zeros(n),
            shape: DMatrix::identity(n, n),
        }
    }

    /// A ball of radius `r` (shape `r * I`).
    pub fn ball(center: DVector<f64>, r: f64) -> Result<Self> {
        let n = center.len();
        Ellipsoid::new(center, DMatrix::identity(n, n) * r)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    /// Eigenvalues of the shape matrix (the semi-axis lengths), ascending.
    pub fn semi_axes(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .shape
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `log(volume)`: log-det of the shape plus the log unit-ball volume.
    pub fn log_volume(&self) -> f64 {
        self.shape.determinant().abs().ln() + crate::linalg::unit_ball_log_volume(self.dim())
    }

    pub fn volume(&self) -> f64 {
        self.log_volume().exp()
    }

    /// `|shape^{-1} (x - center)|`: less than 1 inside, 1 on the boundary.
    pub fn gauge(&self, x: &DVector<f64>) -> Result<f64> {
        let y = self
            .shape
            .clone()
            .lu()
            .solve(&(x - &self.center))
            .ok_or_else(|| Error::Degenerate("singular shape".into()))?;
        Ok(y.norm())
    }

    /// The point of the ellipsoid extremal in direction `a` (for a unit
    /// normal, the tangency point with `{x : <a, x> = <a,c> + |shape a|}`).
    pub fn support_point(&self, a: &DVector<f64>) -> DVector<f64> {
        let ea = &self.shape * a;
        &self.center + &self.shape * (&ea / ea.norm())
    }
}

// ---------------------------------------------------------------------------
// Barycentric coordinates
// ---------------------------------------------------------------------------

/// Normalized barycentric weights (summing to one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BarycentricCoords {
    weights: Vec<f64>,
}

impl From<BarycentricCoords> for Vec<f64> {
    fn from(b: BarycentricCoords) -> Self {
        b.weights
    }
}

impl TryFrom<Vec<f64>> for BarycentricCoords {
    type Error = Error;
    fn try_from(weights: Vec<f64>) -> Result<Self> {
        BarycentricCoords::new(weights)
    }
}

impl BarycentricCoords {
    /// Weights must sum to one within [`BARY_SUM_TOL`].
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > BARY_SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "barycentric weights sum to {sum}, expected 1"
            )));
        }
        Ok(BarycentricCoords { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// A point is inside the simplex iff all weights are nonnegative.
    pub fn is_inside(&self, tol: f64) -> bool {
        self.weights.iter().all(|&w| w >= -tol)
    }
}

// ---------------------------------------------------------------------------
// Affine maps
// ---------------------------------------------------------------------------

/// Invertible affine map `x -> linear * x + shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    linear: DMatrix<f64>,
    shift: DVector<f64>,
}

impl AffineMap {
    pub fn new(linear: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        let n = shift.len();
        if linear.nrows() != n || linear.ncols() != n || n == 0 {
            return Err(Error::InvalidInput("affine map must be square".into()));
        }
        let col_max = (0..n).map(|c| linear.column(c).norm()).fold(0.0f64, f64::max);
        if linear.determinant().abs() <= 1e-12 * col_max.powi(n as i32) {
            return Err(Error::Degenerate("affine map not invertible".into()));
        }
        Ok(AffineMap { linear, shift })
    }

    pub fn identity(n: usize) -> Self {
        AffineMap {
            linear: DMatrix::identity(n, n),
            shift: DVector::zeros(n),
        }
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }

    pub fn inverse(&self) -> Result<AffineMap> {
        let inv = self
            .linear
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("affine map not invertible".into()))?;
        let shift = -&inv * &self.shift;
        Ok(AffineMap { linear: inv, shift })
    }

    pub fn apply_point(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.linear * x + &self.shift
    }

    /// Image of an ellipsoid: the center maps affinely and the new shape is
    /// the symmetric positive definite factor (principal square root) of
    /// `T E (T E)^t`.
    pub fn apply_ellipsoid(&self, e: &Ellipsoid) -> Result<Ellipsoid> {
        let te = &self.linear * e.shape();
        let m = &te * te.transpose();
        Ellipsoid::new(self.apply_point(e.center()), sqrtm_spd(&m))
    }

    /// Image of an H-polytope: constraints transported through the inverse
    /// map and re-normalized to unit normals.
    pub fn apply_polytope(&self, p: &HPolytope) -> Result<HPolytope> {
        let inv = self.inverse()?;
        let mut rows = Vec::with_capacity(p.num_facets());
        let mut offsets = Vec::with_capacity(p.num_facets());
        for i in 0..p.num_facets() {
            // <a, T^{-1}(x - t)> <= b  =>  <T^{-t} a, x> <= b + <T^{-t} a, t>
            let a = inv.linear.transpose() * p.normal(i);
            let b = p.offset(i) + a.dot(&self.shift);
            rows.push(a);
            offsets.push(b);
        }
        HPolytope::from_general(rows, offsets)
    }

    pub fn apply_simplex(&self, s: &Simplex) -> Result<Simplex> {
        Simplex::new(s.vertices().iter().map(|v| self.apply_point(v)).collect())
    }
}

/// The unique affine map sending vertex `i` of `src` to vertex `i` of `dst`.
pub fn affine_map_between(src: &Simplex, dst: &Simplex) -> Result<AffineMap> {
    if src.dim() != dst.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let e_src = src.edge_matrix();
    let e_dst = dst.edge_matrix();
    let inv = e_src
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("source simplex degenerate".into()))?;
    let linear = e_dst * inv;
    let shift = dst.vertex(0) - &linear * src.vertex(0);
    AffineMap::new(linear, shift)
}
