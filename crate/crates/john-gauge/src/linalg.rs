//! Small dense numeric helpers shared across modules.

use nalgebra::{DMatrix, DVector};

/// Symmetric positive-semidefinite square root via eigendecomposition.
/// Negative eigenvalues (roundoff) are clamped to zero.
pub(crate) fn sqrtm_spd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let u = &eig.eigenvectors;
    u * DMatrix::from_diagonal(&sqrt_vals) * u.transpose()
}

/// Natural log of the volume of the unit ball in `R^n`.
///
/// Uses the two-step recurrence `V_n = V_{n-2} * 2*pi / n` with
/// `V_0 = 1`, `V_1 = 2`, carried out in log space.
/// `log(n!)` by direct summation (exact enough for desk-scale n).
pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

pub(crate) fn unit_ball_log_volume(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => 2.0f64.ln(),
        _ => unit_ball_log_volume(n - 2) + (2.0 * std::f64::consts::PI / n as f64).ln(),
    }
}

/// Nonnegative least squares `min ||A x - b||` s.t. `x >= 0` by the
/// Lawson-Hanson active-set method. Intended for small dense systems.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: usize) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.amax().max(1.0) * b.amax().max(1.0);

    for _ in 0..max_iter {
        let w = a.transpose() * (b - a * &x);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if !passive[j] && w[j] > tol && best.is_none_or(|(_, bw)| w[j] > bw) {
                best = Some((j, w[j]));
            }
        }
        let Some((j_new, _)) = best else { break };
        passive[j_new] = true;

        // Inner loop: solve on the passive set, backtrack while any
        // passive entry would go nonpositive.
        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let ap = a.select_columns(idx.iter());
            let zp = least_squares(&ap, b);

            if zp.iter().all(|&z| z > tol) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = zp[k];
                }
                break;
            }

            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if zp[k] <= tol {
                    let denom = x[j] - zp[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (zp[k] - x[j]);
            }
            for j in 0..n {
                if passive[j] && x[j] <= tol {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

/// Least squares `min ||A x - b||` by Householder QR with back
/// substitution, falling back to ridge-regularized normal equations when
/// the triangular factor is numerically rank-deficient.
///
/// Deliberately avoids `SVD::solve`: on tall systems with clustered
/// singular values it can return answers that are wrong far beyond the
/// conditioning (observed: residual 1.8e-3 on a matrix with condition
/// number 1.3), which silently corrupts active-set iterations.
pub(crate) fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {

    let k = a.ncols();
    if a.nrows() >= k {
        let qr = a.clone().qr();
        let r = qr.r();
        let qtb = qr.q().transpose() * b;
        let scale = r.diagonal().amax();
        if scale > 0.0 && (0..k).all(|i| r[(i, i)].abs() > 1e-13 * scale) {
            let mut x = DVector::zeros(k);
            for i in (0..k).rev() {
                let mut s = qtb[i];
                for j in (i + 1)..k {
                    s -= r[(i, j)] * x[j];
                }
                x[i] = s / r[(i, i)];
            }
            return x;
        }
    }
    let scale = a.amax().max(1e-150);
    let ridge = DMatrix::<f64>::identity(k, k) * (1e-12 * scale * scale);
    let ata = a.transpose() * a + ridge;
    ata.cholesky()
        .expect("ridge-regularized normal equations are positive definite")
        .solve(&(a.transpose() * b))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, found by Newton iteration
/// on the Legendre recurrence.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-style initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Integrate a smooth function over `[lo, hi]` with composite Gauss-Legendre
/// quadrature (`panels` panels of `order` points each).
pub(crate) fn integrate_gl(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    panels: usize,
    order: usize,
) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let h = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let a = lo + p as f64 * h;
        let mid = a + 0.5 * h;
        let half = 0.5 * h;
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            acc += w * f(mid + half * x);
        }
        total += acc * half;
    }
    total
}

/// Deterministically derive a substream seed from a base seed and an index
/// (splitmix64 over the mixed pair).
pub(crate) fn derive_seed(seed: u64, idx: u64) -> u64 {
    let mut z = seed ^ idx.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x2545_F491_4F6C_DD1D);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
