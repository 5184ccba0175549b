//! Integral checks on lifted decompositions.
//!
//! A simplex certificate in `R^n` (contacts `u_i`, weights `c_i`,
//! `m = n+1`) lifts to a decomposition of the identity in `R^{n+1}`:
//!
//! ```text
//! v_i = sqrt(n/(n+1)) * (-u_i, 1/sqrt(n)),   d_i = ((n+1)/n) * c_i,
//! sum_i d_i v_i (x) v_i = I_{n+1},           sum_i d_i = n + 1.
//! ```
//!
//! For one-sided exponential densities `f(t) = e^{-t} (t >= 0)` the
//! product `F(x) = prod f(<v_i, x>)^{d_i}` is supported on a cone whose
//! height-`r` section is the body `(r/sqrt(n)) K`, `K = {y : <u_i, y> <= 1}`,
//! giving the section integral `e^{-sqrt(n+1) r} (r/sqrt(n))^n vol(K)` and
//! the total `vol(K) n! / sqrt(n^n (n+1)^{n+1})`. The product of the
//! one-dimensional integrals is 1, so the total is at most 1, with
//! equality exactly at the sharp volume bound
//! `vol(K) = sqrt(n^n (n+1)^{n+1}) / n!` — the volume of the regular
//! simplex circumscribing the unit ball. Equality also forces the lifted
//! vectors to be orthonormal, which pins the contact Gram entries to
//! `-1/n`.
//!
//! Two rigidity facts shape the test surface here. First, an identity
//! decomposition with exactly `n + 2` unit vectors in `R^{n+1}` is forced
//! to be an orthonormal basis outright (`V D V^T = I` with square `V`
//! gives `V^T V = D^{-1}`, and unit columns pin every `d_i` to 1), so a
//! simplex certificate always lifts to an orthonormal frame — simplices
//! in inscribed-ball-normalized position are rotated regular simplices.
//! Strictly-below-the-bound integrals therefore require decompositions
//! with more vectors, such as the cube's `2n` contact points. Second,
//! a simplex is regular exactly when its raw facet normals have pairwise
//! inner products `-1/n`, so lifting the normals alone (no isotropy
//! required) and testing orthogonality classifies regularity; see
//! [`lift_facet_normals`].
//!
//! The Monte Carlo estimator integrates `F` by sampling the height from
//! the exact Gamma profile and the section uniformly; for valid inputs the
//! importance weight is constant, so the estimate reproduces the closed
//! form with only floating-point scatter. A Gaussian density model is
//! available as a negative control: the Gaussian product integral is
//! `det(sum d_i v_i (x) v_i)^{-1/2} = 1` for every identity
//! decomposition, so it cannot distinguish orthonormal frames from other
//! valid configurations the way the exponential density does.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{HPolytope, Simplex};
use crate::john::JohnCertificate;
use crate::linalg::{derive_seed, ln_factorial};
use crate::{Error, Result};

/// Lifted vectors must be unit within this tolerance.
pub const LIFT_UNIT_TOL: f64 = 1e-12;

/// Frobenius tolerance on the lifted identity decomposition.
pub const LIFT_ISOTROPY_TOL: f64 = 1e-10;

/// Certificates feeding [`lift`] must have residuals at most this large.
pub const LIFT_RESIDUAL_GATE: f64 = 1e-8;

/// Samples per deterministic chunk; fixed so that the estimate is
/// bit-identical for a given seed regardless of how chunks are scheduled.
const CHUNK: usize = 1 << 16;

/// Relative floor on the reported standard error, covering the
/// floating-point scatter of summation when the sampler's importance
/// weight is (near-)constant and the statistical variance collapses.
const STD_ERROR_REL_FLOOR: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Lifted system
// ---------------------------------------------------------------------------

/// A decomposition of the identity in the lifted space: unit vectors `v_i`
/// and positive weights `d_i` with `sum d_i v_i (x) v_i = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct BLSystem {
    dim: usize,
    vectors: Vec<DVector<f64>>,
    weights: Vec<f64>,
}

impl BLSystem {
    /// Build a fully validated system: unit vectors within
    /// [`LIFT_UNIT_TOL`] and isotropy within [`LIFT_ISOTROPY_TOL`].
    pub fn new(vectors: Vec<DVector<f64>>, weights: Vec<f64>) -> Result<Self> {
        let sys = BLSystem::from_raw(vectors, weights)?;
        let residual = sys.isotropy_residual();
        if residual > LIFT_ISOTROPY_TOL {
            return Err(Error::Verification(format!(
                "lifted system is not an identity decomposition: residual {residual:.3e}"
            )));
        }
        Ok(sys)
    }

    /// Build with only the structural checks (unit vectors, positive
    /// weights), leaving the isotropy residual to the caller — used for
    /// perturbed systems in negative controls.
    pub fn from_raw(vectors: Vec<DVector<f64>>, weights: Vec<f64>) -> Result<Self> {
        let dim = match vectors.first() {
            Some(v) if v.len() >= 2 => v.len(),
            _ => return Err(Error::InvalidInput("lifted vectors live in R^{n+1}, n >= 1".into())),
        };
        if vectors.len() != weights.len() {
            return Err(Error::InvalidInput("vectors/weights length mismatch".into()));
        }
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::InvalidInput("lifted vector length mismatch".into()));
            }
            if (v.norm() - 1.0).abs() > LIFT_UNIT_TOL {
                return Err(Error::InvalidInput(format!(
                    "lifted vector has norm {} (unit within {LIFT_UNIT_TOL} required)",
                    v.norm()
                )));
            }
        }
        if weights.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::InvalidInput("lift weights must be positive".into()));
        }
        Ok(BLSystem { dim, vectors, weights })
    }

    /// Ambient dimension `n + 1`.
    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    /// Source dimension `n`.
    pub fn base_dim(&self) -> usize {
        self.dim - 1
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `|sum d_i v_i (x) v_i - I|_F`.
    pub fn isotropy_residual(&self) -> f64 {
        let mut sum = DMatrix::<f64>::zeros(self.dim, self.dim);
        for (v, &d) in self.vectors.iter().zip(&self.weights) {
            sum.ger(d, v, v, 1.0);
        }
        (sum - DMatrix::<f64>::identity(self.dim, self.dim)).norm()
    }

    /// Recover the source directions `u_i = -sqrt((n+1)/n) * v_i[..n]`.
    pub fn base_directions(&self) -> Vec<DVector<f64>> {
        let n = self.base_dim();
        let scale = -((n as f64 + 1.0) / n as f64).sqrt();
        self.vectors
            .iter()
            .map(|v| v.rows(0, n).into_owned() * scale)
            .collect()
    }

    /// The unit section body `K = {y : <u_i, y> <= 1}` of the support
    /// cone, recovered as a simplex (requires `m = n + 1` vectors).
    pub fn section_body(&self) -> Result<Simplex> {
        let m = self.vectors.len();
        if m != self.base_dim() + 1 {
            return Err(Error::InvalidInput(format!(
                "section recovery needs n+1 vectors, got {m} in base dimension {}",
                self.base_dim()
            )));
        }
        HPolytope::from_general(self.base_directions(), vec![1.0; m])?.recover_simplex()
    }
}

/// The lift formulas alone, without any residual gating: handy for
/// constructing deliberately broken systems in tests and diagnostics.
pub fn lift_vectors(
    contacts: &[DVector<f64>],
    weights: &[f64],
) -> (Vec<DVector<f64>>, Vec<f64>) {
    let n = contacts[0].len();
    let nf = n as f64;
    let scale = (nf / (nf + 1.0)).sqrt();
    let top = 1.0 / nf.sqrt();
    let vectors = contacts
        .iter()
        .map(|u| {
            DVector::from_fn(n + 1, |k, _| {
                if k < n {
                    -scale * u[k]
                } else {
                    scale * top
                }
            })
        })
        .collect();
    let lifted_weights = weights.iter().map(|c| c * (nf + 1.0) / nf).collect();
    (vectors, lifted_weights)
}

/// Lift a simplex certificate (`m = n+1`, residuals within
/// [`LIFT_RESIDUAL_GATE`]) to the `(n+1)`-dimensional decomposition.
pub fn lift(cert: &JohnCertificate) -> Result<BLSystem> {
    let n = cert.dim();
    if cert.contacts().len() != n + 1 {
        return Err(Error::InvalidInput(format!(
            "lift needs a simplex certificate with {} contacts, got {}",
            n + 1,
            cert.contacts().len()
        )));
    }
    if cert.residual_a() > LIFT_RESIDUAL_GATE || cert.residual_b() > LIFT_RESIDUAL_GATE {
        return Err(Error::Verification(format!(
            "certificate residuals {:.3e} / {:.3e} exceed the lift gate {LIFT_RESIDUAL_GATE}",
            cert.residual_a(),
            cert.residual_b()
        )));
    }
    let (vectors, weights) = lift_vectors(cert.contacts(), cert.weights());
    BLSystem::new(vectors, weights)
}

/// Lift a simplex's own unit facet normals with the nominal weights
/// `c_i = n/(n+1)`, skipping the isotropy gate.
///
/// The lifted frame is orthonormal exactly when the simplex is regular:
/// pairwise `<v_i, v_j> = (n/(n+1)) (<u_i, u_j> + 1/n)` vanishes iff the
/// normal Gram is `-1/n`, and fixed normal directions determine a simplex
/// up to scaling and translation. For irregular simplices the system
/// fails the isotropy identity, which is what makes it useful as a
/// regularity probe via [`equality_orthonormality_check`].
pub fn lift_facet_normals(s: &Simplex) -> Result<BLSystem> {
    let hp = s.to_halfspaces()?;
    let n = s.dim() as f64;
    let contacts: Vec<DVector<f64>> = hp.normals().to_vec();
    let weights = vec![n / (n + 1.0); contacts.len()];
    let (vectors, lifted) = lift_vectors(&contacts, &weights);
    BLSystem::from_raw(vectors, lifted)
}

// ---------------------------------------------------------------------------
// Integrand and closed forms
// ---------------------------------------------------------------------------

/// `F(x) = prod_i f(<v_i, x>)^{d_i}` for the one-sided exponential
/// density: zero if any `<v_i, x>` is negative, else
/// `exp(-sum_i d_i <v_i, x>)`.
pub fn bl_integrand(sys: &BLSystem, x: &DVector<f64>) -> f64 {
    let mut exponent = 0.0;
    for (v, &d) in sys.vectors().iter().zip(sys.weights()) {
        let t = v.dot(x);
        if t < 0.0 {
            return 0.0;
        }
        exponent += d * t;
    }
    (-exponent).exp()
}

/// `vol_k * n! / sqrt(n^n (n+1)^{n+1})`: the exact value of the lifted
/// integral for a body of volume `vol_k`; equals 1 at the sharp bound.
pub fn closed_form_integral(vol_k: f64, n: usize) -> f64 {
    vol_k / volume_bound(n)
}

/// Integral of `F` over the height-`r` section of the support cone:
/// `e^{-sqrt(n+1) r} (r/sqrt(n))^n vol_k`.
pub fn slab_section_value(r: f64, vol_k: f64, n: usize) -> f64 {
    let nf = n as f64;
    (-((nf + 1.0).sqrt()) * r).exp() * (r / nf.sqrt()).powi(n as i32) * vol_k
}

/// The sharp simplex volume bound `sqrt(n^n (n+1)^{n+1}) / n!`, evaluated
/// in the log domain so large `n` cannot overflow; attained exactly by the
/// regular simplex circumscribing the unit ball.
pub fn volume_bound(n: usize) -> f64 {
    let nf = n as f64;
    (0.5 * (nf * nf.ln() + (nf + 1.0) * (nf + 1.0).ln()) - ln_factorial(n)).exp()
}

/// Truncation point `40 / sqrt(n+1)` beyond which the slab integrand's
/// tail is below machine precision relative to the total.
pub fn slab_truncation_radius(n: usize) -> f64 {
    40.0 / (n as f64 + 1.0).sqrt()
}

// ---------------------------------------------------------------------------
// Estimates
// ---------------------------------------------------------------------------

/// How an [`IntegralEstimate`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    MonteCarlo,
    ProductQuadrature,
}

/// A numerical value for the lifted integral with its uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub method: EstimateMethod,
}

/// Monte Carlo estimate of the lifted exponential integral via the slab
/// decomposition (see [`ExponentialDensity`]); `vol_k` is the volume of
/// the section body `K` of `sys`.
pub fn estimate_integral(
    sys: &BLSystem,
    vol_k: f64,
    samples: usize,
    seed: u64,
) -> Result<IntegralEstimate> {
    ExponentialDensity.estimate(sys, vol_k, samples, seed)
}

/// Deterministic 1-D Gauss-Legendre integration of the slab sections over
/// `[0, 40/sqrt(n+1)]`; the reported error is the analytic tail bound of
/// the truncation.
pub fn slab_quadrature_integral(vol_k: f64, n: usize) -> IntegralEstimate {
    let radius = slab_truncation_radius(n);
    let panels = 32;
    let order = 24;
    let value = crate::linalg::integrate_gl(
        |r| slab_section_value(r, vol_k, n),
        0.0,
        radius,
        panels,
        order,
    );
    // Tail of int_R^inf e^{-a r} r^n dr <= e^{-a R} R^n / (a - n/R) for
    // R > n/a; at R = 40/a this is a machine-precision sliver.
    let a = (n as f64 + 1.0).sqrt();
    let tail = slab_section_value(radius, vol_k, n) / (a - n as f64 / radius);
    IntegralEstimate {
        value,
        std_error: tail.abs(),
        samples: panels * order,
        method: EstimateMethod::ProductQuadrature,
    }
}

/// Equality diagnostics of the sharp bound: whether the lifted vectors are
/// pairwise orthogonal within `tol`, the largest off-diagonal inner
/// product magnitude, and the common source Gram value implied by the mean
/// off-diagonal entry through `<v_i,v_j> = (n/(n+1)) (<u_i,u_j> + 1/n)` —
/// exactly `-1/n` in the orthonormal case.
pub fn equality_orthonormality_check(sys: &BLSystem, tol: f64) -> (bool, f64, f64) {
    let m = sys.vectors().len();
    let n = sys.base_dim() as f64;
    let mut max_offdiag = 0.0f64;
    let mut mean_offdiag = 0.0f64;
    let mut pairs = 0usize;
    for i in 0..m {
        for j in (i + 1)..m {
            let dot = sys.vectors()[i].dot(&sys.vectors()[j]);
            max_offdiag = max_offdiag.max(dot.abs());
            mean_offdiag += dot;
            pairs += 1;
        }
    }
    if pairs > 0 {
        mean_offdiag /= pairs as f64;
    }
    let implied_uu = ((n + 1.0) / n) * mean_offdiag - 1.0 / n;
    (max_offdiag <= tol, max_offdiag, implied_uu)
}

// ---------------------------------------------------------------------------
// Density models
// ---------------------------------------------------------------------------

/// A density family for the lifted product integral, selectable by name.
pub trait DensityModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    /// Exact value of the lifted integral for a section body of volume
    /// `vol_k` in base dimension `n`.
    fn closed_form(&self, vol_k: f64, n: usize) -> f64;
    /// Monte Carlo estimate with deterministic chunked sampling.
    fn estimate(
        &self,
        sys: &BLSystem,
        vol_k: f64,
        samples: usize,
        seed: u64,
    ) -> Result<IntegralEstimate>;
}

fn check_sample_budget(samples: usize) -> Result<()> {
    if samples < 10_000 {
        return Err(Error::InvalidInput(format!(
            "at least 10000 samples required, got {samples}"
        )));
    }
    Ok(())
}

/// Combine per-chunk `(sum, sum_sq, count)` accumulators — computed in
/// parallel but folded in chunk order — into a mean and standard error.
fn combine_chunks(
    moments: Vec<(f64, f64)>,
    samples: usize,
    method: EstimateMethod,
) -> IntegralEstimate {
    let (sum, sum_sq) = moments
        .into_iter()
        .fold((0.0, 0.0), |(s, q), (cs, cq)| (s + cs, q + cq));
    let nf = samples as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    let std_error = (var / nf).sqrt().max(STD_ERROR_REL_FLOOR * mean.abs());
    IntegralEstimate { value: mean, std_error, samples, method }
}

fn chunk_sizes(samples: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(samples / CHUNK + 1);
    let mut left = samples;
    while left > 0 {
        let take = left.min(CHUNK);
        sizes.push(take);
        left -= take;
    }
    sizes
}

/// One-sided exponential density `f(t) = e^{-t}` on `t >= 0`, the family
/// whose product integral attains the sharp bound exactly at orthonormal
/// systems.
///
/// Sampling follows the slab decomposition exactly: the height is drawn
/// from the Gamma profile `g(h) ∝ e^{-sqrt(n+1) h} h^n` and the section
/// point uniformly from `(h/sqrt(n)) K` via symmetric Dirichlet
/// barycentric coordinates over the vertices of `K`. The importance
/// weight `F(x) vol(section) / g(h)` is constant in exact arithmetic, so
/// the statistical variance is dominated by floating-point scatter.
pub struct ExponentialDensity;

impl DensityModel for ExponentialDensity {
    fn name(&self) -> &'static str {
        "exponential"
    }
    fn description(&self) -> &'static str {
        "one-sided exponential density e^{-t}; sharp product bound attained only at regular sources"
    }
    fn closed_form(&self, vol_k: f64, n: usize) -> f64 {
        closed_form_integral(vol_k, n)
    }
    fn estimate(
        &self,
        sys: &BLSystem,
        vol_k: f64,
        samples: usize,
        seed: u64,
    ) -> Result<IntegralEstimate> {
        check_sample_budget(samples)?;
        if !(vol_k > 0.0) {
            return Err(Error::InvalidInput("vol_k must be positive".into()));
        }
        let n = sys.base_dim();
        let nf = n as f64;
        let rate = (nf + 1.0).sqrt();
        let section = sys.section_body()?;
        let vertices: Vec<DVector<f64>> = section.vertices().to_vec();
        let gamma = Gamma::new(nf + 1.0, 1.0 / rate)
            .map_err(|e| Error::InvalidInput(format!("gamma sampler: {e}")))?;
        // log of the height density g(h) = rate^{n+1} h^n e^{-rate h} / n!.
        let ln_g_const = (nf + 1.0) * rate.ln() - ln_factorial(n);
        let ln_vol = vol_k.ln();

        let moments: Vec<(f64, f64)> = chunk_sizes(samples)
            .into_par_iter()
            .enumerate()
            .map(|(c, size)| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c as u64));
                let mut sum = 0.0f64;
                let mut sum_sq = 0.0f64;
                let mut bary = vec![0.0f64; n + 1];
                for _ in 0..size {
                    let h: f64 = gamma.sample(&mut rng);
                    // Uniform point of K via Dirichlet(1,...,1).
                    let mut total = 0.0;
                    for b in bary.iter_mut() {
                        let e: f64 = Exp1.sample(&mut rng);
                        *b = e;
                        total += e;
                    }
                    let side = h / nf.sqrt();
                    let mut x = DVector::zeros(n + 1);
                    for (b, v) in bary.iter().zip(&vertices) {
                        let w = side * b / total;
                        for k in 0..n {
                            x[k] += w * v[k];
                        }
                    }
                    x[n] = h;
                    let f = bl_integrand(sys, &x);
                    let w = if f > 0.0 && h > 0.0 {
                        let ln_section = nf * side.ln() + ln_vol;
                        let ln_g = ln_g_const + nf * h.ln() - rate * h;
                        (f.ln() + ln_section - ln_g).exp()
                    } else {
                        0.0
                    };
                    sum += w;
                    sum_sq += w * w;
                }
                (sum, sum_sq)
            })
            .collect();
        Ok(combine_chunks(moments, samples, EstimateMethod::MonteCarlo))
    }
}

/// Gaussian density `f(t) = e^{-pi t^2}` with unit mass: the product
/// bound is an identity for any identity decomposition, regardless of the
/// source geometry, so this model deliberately cannot detect
/// irregularity. `vol_k` and the support cone play no role; sampling is
/// a standard normal scaled to variance `1/(2 pi)` over the whole lifted
/// space.
pub struct GaussianDensity;

impl DensityModel for GaussianDensity {
    fn name(&self) -> &'static str {
        "gaussian"
    }
    fn description(&self) -> &'static str {
        "Gaussian density e^{-pi t^2}; product bound holds with equality for every configuration"
    }
    fn closed_form(&self, _vol_k: f64, _n: usize) -> f64 {
        1.0
    }
    fn estimate(
        &self,
        sys: &BLSystem,
        _vol_k: f64,
        samples: usize,
        seed: u64,
    ) -> Result<IntegralEstimate> {
        check_sample_budget(samples)?;
        let dim = sys.ambient_dim();
        let sigma = 1.0 / (2.0 * std::f64::consts::PI).sqrt();

        let moments: Vec<(f64, f64)> = chunk_sizes(samples)
            .into_par_iter()
            .enumerate()
            .map(|(c, size)| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c as u64));
                let mut sum = 0.0f64;
                let mut sum_sq = 0.0f64;
                for _ in 0..size {
                    let x: DVector<f64> =
                        DVector::from_fn(dim, |_, _| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            sigma * z
                        });
                    // F(x) / pdf(x) with pdf(x) = e^{-pi |x|^2}.
                    let mut quad = 0.0;
                    for (v, &d) in sys.vectors().iter().zip(sys.weights()) {
                        let t = v.dot(&x);
                        quad += d * t * t;
                    }
                    let w = (-std::f64::consts::PI * (quad - x.norm_squared())).exp();
                    sum += w;
                    sum_sq += w * w;
                }
                (sum, sum_sq)
            })
            .collect();
        Ok(combine_chunks(moments, samples, EstimateMethod::MonteCarlo))
    }
}

/// Look up a density model by name (`exponential`, `gaussian`).
pub fn density_by_name(name: &str) -> Result<Box<dyn DensityModel>> {
    match name {
        "exponential" => Ok(Box::new(ExponentialDensity)),
        "gaussian" => Ok(Box::new(GaussianDensity)),
        other => Err(Error::UnknownStrategy(
            other.to_string(),
            density_names().join(", "),
        )),
    }
}

/// Names of the registered density models.
pub fn density_names() -> Vec<&'static str> {
    vec!["exponential", "gaussian"]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{random_simplex, regular_simplex};
    use crate::john::{certificate_from_ellipsoid, regular_certificate};
    use crate::mvie::analytic_simplex_john;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Certificate of a random simplex via the analytic pipeline, together
    /// with the volume of its unit-ball-normalized body.
    fn random_lifted_system(n: usize, seed: u64) -> (BLSystem, f64) {
        let s = random_simplex(n, seed, 0.05).unwrap();
        let hp = s.to_halfspaces().unwrap();
        let e = analytic_simplex_john(&s).unwrap();
        let cert = certificate_from_ellipsoid(&hp, &e).unwrap();
        let sys = lift(&cert).unwrap();
        let vol = sys.section_body().unwrap().volume();
        (sys, vol)
    }

    #[test]
    fn lift_of_regular_certificate_is_orthonormal() {
        for n in 1..=6 {
            let sys = lift(&regular_certificate(n).unwrap()).unwrap();
            assert_eq!(sys.ambient_dim(), n + 1);
            // All weights exactly 1, summing to n+1.
            for &d in sys.weights() {
                assert_relative_eq!(d, 1.0, epsilon = 1e-14);
            }
            for v in sys.vectors() {
                assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-13);
            }
            assert!(sys.isotropy_residual() <= 1e-10);
            let (ortho, max_off, implied) = equality_orthonormality_check(&sys, 1e-6);
            assert!(ortho);
            assert!(max_off <= 1e-12, "n={n}: {max_off}");
            assert_relative_eq!(implied, -1.0 / n as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn lift_rejects_non_simplex_and_sloppy_certificates() {
        // Cube certificate: m = 2n > n+1.
        let cube = HPolytope::cube(3, 1.0).unwrap();
        let contacts = crate::john::contact_points(&cube).unwrap();
        let weights = crate::john::solve_weights(&contacts).unwrap();
        let cert = JohnCertificate::new(3, contacts, weights).unwrap();
        assert!(lift(&cert).is_err());

        // Perturbed weights: residuals above the gate.
        let good = regular_certificate(2).unwrap();
        let mut weights = good.weights().to_vec();
        weights[0] += 1e-4;
        let bad = JohnCertificate::new(2, good.contacts().to_vec(), weights).unwrap();
        assert!(bad.residual_a() > LIFT_RESIDUAL_GATE);
        assert!(lift(&bad).is_err());
    }

    #[test]
    fn integrand_values_on_orthonormal_systems() {
        // Exactly orthonormal system: the standard basis with unit weights.
        let basis: Vec<DVector<f64>> =
            (0..3).map(|k| DVector::from_fn(3, |i, _| f64::from(i == k))).collect();
        let sys = BLSystem::new(basis, vec![1.0; 3]).unwrap();
        // Empty exponent at the origin.
        assert_eq!(bl_integrand(&sys, &DVector::zeros(3)), 1.0);
        // At x = v_1 only the first inner product survives: e^{-d_1}.
        let v1 = sys.vectors()[0].clone();
        assert_relative_eq!(bl_integrand(&sys, &v1), (-1.0f64).exp(), epsilon = 1e-15);
        // Any negative inner product kills the product.
        assert_eq!(bl_integrand(&sys, &(-&v1)), 0.0);

        // Lifted regular system: on the cone axis all inner products are
        // h/sqrt(n+1), so F = e^{-sqrt(n+1) h}.
        let sys = lift(&regular_certificate(2).unwrap()).unwrap();
        let axis = DVector::from_column_slice(&[0.0, 0.0, 2.0]);
        assert_relative_eq!(
            bl_integrand(&sys, &axis),
            (-2.0 * 3f64.sqrt()).exp(),
            epsilon = 1e-12
        );
        let below = DVector::from_column_slice(&[0.0, 0.0, -1.0]);
        assert_eq!(bl_integrand(&sys, &below), 0.0);
    }

    #[test]
    fn closed_form_hits_one_at_the_regular_volume() {
        assert_relative_eq!(closed_form_integral(3.0 * 3f64.sqrt(), 2), 1.0, epsilon = 1e-12);
        assert_relative_eq!(closed_form_integral(8.0 * 3f64.sqrt(), 3), 1.0, epsilon = 1e-12);
        // Linear in the volume.
        assert_relative_eq!(
            closed_form_integral(1.5, 4),
            1.5 * closed_form_integral(1.0, 4),
            epsilon = 1e-14
        );
        assert_eq!(closed_form_integral(0.0, 4), 0.0);
    }

    #[test]
    fn volume_bound_matches_regular_simplex_volume() {
        assert_relative_eq!(volume_bound(1), 2.0, epsilon = 1e-14);
        assert_relative_eq!(volume_bound(2), 3.0 * 3f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(volume_bound(3), 8.0 * 3f64.sqrt(), epsilon = 1e-12);
        for n in 1..=10 {
            let vol = regular_simplex(n).unwrap().volume();
            let bound = volume_bound(n);
            assert!(
                ((vol - bound) / bound).abs() <= 1e-10,
                "n={n}: vol {vol} vs bound {bound}"
            );
        }
        // Log-domain evaluation stays finite far beyond factorial overflow.
        assert!(volume_bound(60).is_finite());
    }

    #[test]
    fn slab_values_and_quadrature() {
        assert_eq!(slab_section_value(0.0, 5.0, 2), 0.0);
        let expected = 3.0 * 3f64.sqrt() * (-(6f64.sqrt())).exp();
        assert_relative_eq!(
            slab_section_value(2f64.sqrt(), 3.0 * 3f64.sqrt(), 2),
            expected,
            epsilon = 1e-12
        );
        for n in 1..=8 {
            let vol = volume_bound(n); // regular case: closed form 1
            let q = slab_quadrature_integral(vol, n);
            assert_eq!(q.method, EstimateMethod::ProductQuadrature);
            assert!(
                (q.value - 1.0).abs() <= 1e-8,
                "n={n}: quadrature {} vs closed form 1",
                q.value
            );
        }
    }

    #[test]
    fn monte_carlo_reproduces_the_closed_form() {
        let sys = lift(&regular_certificate(2).unwrap()).unwrap();
        let vol = sys.section_body().unwrap().volume();
        assert_relative_eq!(vol, 3.0 * 3f64.sqrt(), epsilon = 1e-9);
        let est = estimate_integral(&sys, vol, 50_000, 41).unwrap();
        assert_eq!(est.method, EstimateMethod::MonteCarlo);
        assert_eq!(est.samples, 50_000);
        assert!((est.value - 1.0).abs() <= 0.01, "value {}", est.value);
        assert!(est.value <= 1.0 + 3.0 * est.std_error);
        assert!(est.std_error >= 0.0);
    }

    #[test]
    fn monte_carlo_is_deterministic_per_seed() {
        let (sys, vol) = random_lifted_system(3, 5);
        let a = estimate_integral(&sys, vol, 20_000, 9).unwrap();
        let b = estimate_integral(&sys, vol, 20_000, 9).unwrap();
        assert_eq!(a, b);
        let c = estimate_integral(&sys, vol, 20_000, 10).unwrap();
        assert_eq!(a.samples, c.samples);
    }

    #[test]
    fn normalized_simplex_systems_sit_at_the_sharp_bound() {
        // Normalizing a simplex so its largest inscribed ellipsoid is the
        // unit ball always lands on a rotated regular simplex, so every
        // valid simplex lift reproduces the equality case exactly.
        for seed in [2u64, 6, 11] {
            let (sys, vol) = random_lifted_system(2, seed);
            let closed = closed_form_integral(vol, 2);
            assert!(
                (closed - 1.0).abs() <= 1e-9,
                "seed {seed}: closed form {closed}"
            );
            let (ortho, _, implied) = equality_orthonormality_check(&sys, 1e-6);
            assert!(ortho);
            assert_relative_eq!(implied, -0.5, epsilon = 1e-8);
            let est = estimate_integral(&sys, vol, 20_000, seed).unwrap();
            assert!(est.value <= 1.0 + 3.0 * est.std_error);
            assert!(
                (est.value - closed).abs() <= 3.0 * est.std_error,
                "seed {seed}: {} vs {closed} (se {})",
                est.value,
                est.std_error
            );
        }
    }

    #[test]
    fn cube_lift_is_valid_isotropic_and_strictly_below_the_bound() {
        // 2n contact points of the cube lift to a valid identity
        // decomposition in n+1 dimensions that is not an orthonormal
        // basis, so the product bound is strict: integral = 2^n / bound.
        for n in 2..=4 {
            let cube = HPolytope::cube(n, 1.0).unwrap();
            let contacts = crate::john::contact_points(&cube).unwrap();
            let weights = crate::john::solve_weights(&contacts).unwrap();
            let (vectors, lifted) = lift_vectors(&contacts, &weights);
            let sys = BLSystem::new(vectors, lifted).unwrap();
            assert!(sys.isotropy_residual() <= 1e-10, "n={n}");
            let (ortho, max_off, _) = equality_orthonormality_check(&sys, 1e-6);
            assert!(!ortho);
            // Antipodal pairs have <v_i, v_j> = (n/(n+1))(1/n - 1).
            let expected = (n as f64 / (n as f64 + 1.0)) * (1.0 - 1.0 / n as f64);
            assert_relative_eq!(max_off, expected, epsilon = 1e-9);

            let vol = 2f64.powi(n as i32);
            let closed = closed_form_integral(vol, n);
            assert!(closed < 1.0, "n={n}: {closed}");
            let quad = slab_quadrature_integral(vol, n);
            assert_relative_eq!(quad.value, closed, epsilon = 1e-10);
        }
    }

    #[test]
    fn sample_budget_is_enforced() {
        let sys = lift(&regular_certificate(2).unwrap()).unwrap();
        assert!(estimate_integral(&sys, 1.0, 9_999, 1).is_err());
    }

    #[test]
    fn gaussian_density_is_blind_to_non_orthonormality() {
        // Equality holds for the orthonormal regular lift...
        let sys = lift(&regular_certificate(2).unwrap()).unwrap();
        let est = GaussianDensity.estimate(&sys, 1.0, 40_000, 3).unwrap();
        assert!(
            (est.value - 1.0).abs() <= 3.0 * est.std_error.max(1e-6),
            "gaussian regular value {} se {}",
            est.value,
            est.std_error
        );
        // ...and equally for the non-orthonormal cube lift, where the
        // exponential integral drops to 2^n / bound < 1.
        let cube = HPolytope::cube(2, 1.0).unwrap();
        let contacts = crate::john::contact_points(&cube).unwrap();
        let weights = crate::john::solve_weights(&contacts).unwrap();
        let (vectors, lifted) = lift_vectors(&contacts, &weights);
        let sys = BLSystem::new(vectors, lifted).unwrap();
        let vol = 4.0;
        assert!(closed_form_integral(vol, 2) < 0.8);
        let est = GaussianDensity.estimate(&sys, vol, 40_000, 3).unwrap();
        assert!(
            (est.value - 1.0).abs() <= 3.0 * est.std_error.max(1e-6),
            "gaussian cube value {} se {}",
            est.value,
            est.std_error
        );
        assert_eq!(GaussianDensity.closed_form(vol, 2), 1.0);
    }

    #[test]
    fn facet_normal_lift_classifies_regularity() {
        for n in 2..=5 {
            let sys = lift_facet_normals(&regular_simplex(n).unwrap()).unwrap();
            let (ortho, max_off, implied) = equality_orthonormality_check(&sys, 1e-6);
            assert!(ortho, "n={n}");
            assert!(max_off <= 1e-10);
            assert_relative_eq!(implied, -1.0 / n as f64, epsilon = 1e-10);
            assert!(sys.isotropy_residual() <= 1e-10);
        }
        let skew = random_simplex(3, 17, 0.05).unwrap();
        assert!(skew.edge_spread() > 1e-3);
        let sys = lift_facet_normals(&skew).unwrap();
        let (ortho, _, _) = equality_orthonormality_check(&sys, 1e-6);
        assert!(!ortho);
    }

    #[test]
    fn orthonormality_check_detects_perturbation() {
        let cert = regular_certificate(2).unwrap();
        let mut contacts = cert.contacts().to_vec();
        // Rotate one contact by 0.01 rad.
        let (s, c) = (0.01f64.sin(), 0.01f64.cos());
        let u0 = contacts[0].clone();
        contacts[0] = DVector::from_row_slice(&[c * u0[0] - s * u0[1], s * u0[0] + c * u0[1]]);
        let (vectors, weights) = lift_vectors(&contacts, cert.weights());
        let sys = BLSystem::from_raw(vectors, weights).unwrap();
        let (ortho, max_off, _) = equality_orthonormality_check(&sys, 1e-6);
        assert!(!ortho);
        assert!(max_off > 1e-3);
    }

    #[test]
    fn density_registry_lookup() {
        assert_eq!(density_by_name("exponential").unwrap().name(), "exponential");
        assert_eq!(density_by_name("gaussian").unwrap().name(), "gaussian");
        match density_by_name("cauchy").map(|m| m.name()) {
            Err(Error::UnknownStrategy(name, known)) => {
                assert_eq!(name, "cauchy");
                assert!(known.contains("exponential"));
            }
            other => panic!("expected unknown-strategy error, got {other:?}"),
        }
        assert_eq!(density_names(), vec!["exponential", "gaussian"]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn prop_lift_isotropy_tracks_certificate_residuals(seed in 0u64..200, n in 2usize..5) {
            let s = random_simplex(n, seed, 0.05);
            prop_assume!(s.is_ok());
            let s = s.unwrap();
            let hp = s.to_halfspaces().unwrap();
            let e = analytic_simplex_john(&s).unwrap();
            let cert = certificate_from_ellipsoid(&hp, &e).unwrap();
            let sys = lift(&cert).unwrap();
            let lhs = sys.isotropy_residual();
            prop_assert!(lhs <= 1e-10);
            prop_assert!(lhs <= 10.0 * (cert.residual_a() + cert.residual_b()) + 1e-14);
            // Trace: sum of lifted weights is n + 1 up to the same residuals.
            let total: f64 = sys.weights().iter().sum();
            prop_assert!((total - (n as f64 + 1.0)).abs() <= 1e-8);
        }

        #[test]
        fn prop_facet_normal_lift_orthonormal_iff_regular(seed in 0u64..100, n in 2usize..5) {
            let s = random_simplex(n, seed, 0.05);
            prop_assume!(s.is_ok());
            let s = s.unwrap();
            prop_assume!(s.edge_spread() >= 1e-3);
            let sys = lift_facet_normals(&s).unwrap();
            let (ortho, max_off, _) = equality_orthonormality_check(&sys, 1e-6);
            prop_assert!(!ortho, "irregular normals lifted to an orthonormal frame");
            prop_assert!(max_off > 1e-6);
            // The raw normals of an irregular simplex are not an identity
            // decomposition, which is exactly what the probe exploits.
            prop_assert!(sys.isotropy_residual() > 1e-6);
        }

        #[test]
        fn prop_certificate_lifts_are_rigidly_orthonormal(seed in 0u64..100, n in 2usize..5) {
            // With n+2 unit vectors in dimension n+1, the identity
            // decomposition forces an orthonormal basis, so every valid
            // simplex certificate lift is orthonormal no matter how
            // irregular the source was before normalization.
            let s = random_simplex(n, seed, 0.05);
            prop_assume!(s.is_ok());
            let s = s.unwrap();
            let hp = s.to_halfspaces().unwrap();
            let e = analytic_simplex_john(&s).unwrap();
            let cert = certificate_from_ellipsoid(&hp, &e).unwrap();
            let sys = lift(&cert).unwrap();
            let (ortho, _, implied) = equality_orthonormality_check(&sys, 1e-6);
            prop_assert!(ortho);
            prop_assert!((implied + 1.0 / n as f64).abs() <= 1e-8);
            let vol = sys.section_body().unwrap().volume();
            prop_assert!((closed_form_integral(vol, n) - 1.0).abs() <= 1e-8);
        }
    }
}
