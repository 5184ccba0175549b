//! End-to-end acceptance suite: eight numbered checks covering the
//! certificate algebra, the solver-versus-oracle agreement, the
//! ball-iff-regular classifier, the sharp volume bound, the lifted
//! integral machinery, the slab formulas, orthonormality rigidity, and
//! the cube regression. Each check prints a single PASS/FAIL line; every
//! tolerance is pinned as a named constant at the top of this file.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use john_gauge::blcheck::{
    closed_form_integral, equality_orthonormality_check, estimate_integral, lift,
    lift_facet_normals, slab_quadrature_integral, slab_section_value, volume_bound, BLSystem,
    bl_integrand,
};
use john_gauge::engine::engine_by_name;
use john_gauge::geom::{random_simplex, regular_simplex, AffineMap, HPolytope, Simplex};
use john_gauge::john::{
    certificate_from_ellipsoid, john_ball_iff_regular, regular_certificate, verify_decomposition,
};
use john_gauge::mvie::{analytic_simplex_john, SolverConfig, SolverStatus};

// --- check 1: regular certificates -------------------------------------
const C1_MAX_DIM: usize = 8;
const C1_RESIDUAL_TOL: f64 = 1e-12;
const C1_RECONSTRUCTION_TOL: f64 = 1e-10;
const C1_TRIALS: usize = 100;
const C1_TIME_LIMIT: Duration = Duration::from_secs(1);

// --- check 2: solver vs analytic oracle --------------------------------
const C2_DIMS: [usize; 4] = [2, 3, 4, 5];
const C2_CASES_PER_DIM: usize = 100;
const C2_CENTER_TOL: f64 = 1e-6;
const C2_SHAPE_REL_TOL: f64 = 1e-5;
const C2_TIME_LIMIT: Duration = Duration::from_secs(60);

// --- check 3: ball-iff-regular classifier ------------------------------
const C3_RANDOM_CASES: usize = 1000;
const C3_REGULAR_CASES: usize = 10;
const C3_MIN_SPREAD: f64 = 1e-3;
const C3_VERDICT_TOL: f64 = 1e-6;
const C3_TIME_LIMIT: Duration = Duration::from_secs(30);

// --- check 4: sharp volume bound ----------------------------------------
const C4_BOUND_REL_TOL: f64 = 1e-10;
const C4_MAX_DIM: usize = 10;
const C4_NORMALIZED_CASES: usize = 100;
const C4_VOLUME_SLACK: f64 = 1e-9;
const C4_NEAR_BOUND_REL: f64 = 1e-6;
const C4_NEAR_BOUND_SPREAD: f64 = 1e-6;
const C4_DESK_N2: f64 = 5.1961524;
const C4_DESK_N3: f64 = 13.8564065;
const C4_DESK_TOL: f64 = 5e-7;

// --- check 5: lifted systems and the product bound ----------------------
const C5_MAX_DIM: usize = 4;
const C5_ISOTROPY_TOL: f64 = 1e-10;
const C5_SAMPLES: usize = 1_000_000;
const C5_REGULAR_REL_TOL: f64 = 1e-2;
const C5_RANDOM_PER_DIM: usize = 2;
const C5_TIME_LIMIT: Duration = Duration::from_secs(120);

// --- check 6: slab formulas ----------------------------------------------
const C6_MAX_DIM: usize = 8;
const C6_QUADRATURE_REL_TOL: f64 = 1e-8;
const C6_SECTION_REL_TOL: f64 = 5e-3;
const C6_SECTION_GRID: usize = 128;

// --- check 7: orthonormality rigidity ------------------------------------
const C7_ORTHO_TOL: f64 = 1e-6;
const C7_IMPLIED_TOL: f64 = 1e-9;

// --- check 8: cube regression ---------------------------------------------
const C8_DIMS: [usize; 5] = [2, 3, 4, 5, 6];
const C8_CENTER_TOL: f64 = 1e-8;
const C8_SHAPE_TOL: f64 = 1e-7;
const C8_CONTACT_TOL: f64 = 1e-7;
const C8_WEIGHT_TOL: f64 = 1e-7;
const C8_RESIDUAL_TOL: f64 = 1e-8;

/// Print the single verdict line for a check and panic on violations.
fn report(name: &str, failures: &[String]) {
    if failures.is_empty() {
        println!("{name}: PASS");
    } else {
        println!("{name}: FAIL");
        for f in failures {
            println!("  - {f}");
        }
        panic!("{name}: {} violation(s)", failures.len());
    }
}

fn push_if(failures: &mut Vec<String>, cond: bool, msg: impl FnOnce() -> String) {
    if !cond {
        failures.push(msg());
    }
}

/// Deterministic corpus of random simplices with edge spread at least
/// `min_spread`, cycling dimensions 2..=6.
fn spread_corpus(count: usize, min_spread: f64) -> Vec<Simplex> {
    let mut out = Vec::with_capacity(count);
    let mut seed = 10_000u64;
    while out.len() < count {
        let n = 2 + out.len() % 5;
        seed += 1;
        if let Ok(s) = random_simplex(n, seed, 0.05) {
            if s.edge_spread() >= min_spread {
                out.push(s);
            }
        }
    }
    out
}

/// Ten exactly regular instances across dimensions 2..=6: the reference
/// body and a scaled, translated copy per dimension.
fn regular_corpus() -> Vec<Simplex> {
    let mut out = Vec::new();
    for n in 2..=6usize {
        let s = regular_simplex(n).unwrap();
        out.push(s.clone());
        let moved: Vec<DVector<f64>> = s
            .vertices()
            .iter()
            .map(|v| v * 0.7 + DVector::from_element(n, 0.3))
            .collect();
        out.push(Simplex::new(moved).unwrap());
    }
    out
}

/// Map a simplex so that its exact inscribed ellipsoid becomes the unit
/// ball.
fn normalize_to_john_position(s: &Simplex) -> Simplex {
    let e = analytic_simplex_john(s).unwrap();
    let to_ellipsoid = AffineMap::new(e.shape().clone(), e.center().clone()).unwrap();
    to_ellipsoid.inverse().unwrap().apply_simplex(s).unwrap()
}

#[test]
fn check_1_regular_certificates() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for n in 1..=C1_MAX_DIM {
        let cert = regular_certificate(n).unwrap();
        let expected = n as f64 / (n as f64 + 1.0);
        push_if(&mut failures, cert.weights().iter().all(|&w| w == expected), || {
            format!("n={n}: weights {:?} are not exactly n/(n+1)", cert.weights())
        });
        push_if(&mut failures, cert.residual_a() <= C1_RESIDUAL_TOL, || {
            format!("n={n}: residual_a {:.3e}", cert.residual_a())
        });
        push_if(&mut failures, cert.residual_b() <= C1_RESIDUAL_TOL, || {
            format!("n={n}: residual_b {:.3e}", cert.residual_b())
        });
        let (_, _, reconstruction) =
            verify_decomposition(cert.contacts(), cert.weights(), C1_TRIALS, 7 + n as u64)
                .unwrap();
        push_if(&mut failures, reconstruction <= C1_RECONSTRUCTION_TOL, || {
            format!("n={n}: reconstruction error {reconstruction:.3e}")
        });
    }
    let elapsed = start.elapsed();
    push_if(&mut failures, elapsed < C1_TIME_LIMIT, || {
        format!("took {elapsed:?}, limit {C1_TIME_LIMIT:?}")
    });
    report("check 1 (regular certificates n=1..8)", &failures);
}

#[test]
fn check_2_solver_matches_analytic_oracle() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let numeric = engine_by_name("numeric").unwrap();
    let analytic = engine_by_name("analytic").unwrap();
    let cfg = SolverConfig::default();

    for &n in &C2_DIMS {
        let mut done = 0usize;
        let mut seed = 100 * n as u64;
        while done < C2_CASES_PER_DIM {
            seed += 1;
            let Ok(s) = random_simplex(n, seed, 0.05) else { continue };
            let hp = s.to_halfspaces().unwrap();
            let (en, rn) = numeric.solve(&hp, &cfg).unwrap();
            let (ea, _) = analytic.solve(&hp, &cfg).unwrap();
            push_if(&mut failures, rn.status == SolverStatus::Converged, || {
                format!("n={n} seed={seed}: status {:?}", rn.status)
            });
            let center_err = (en.center() - ea.center()).norm();
            push_if(&mut failures, center_err <= C2_CENTER_TOL, || {
                format!("n={n} seed={seed}: center error {center_err:.3e}")
            });
            let shape_err = (en.shape() - ea.shape()).norm() / ea.shape().norm();
            push_if(&mut failures, shape_err <= C2_SHAPE_REL_TOL, || {
                format!("n={n} seed={seed}: shape error {shape_err:.3e}")
            });
            done += 1;
            if failures.len() > 20 {
                break;
            }
        }
    }
    let elapsed = start.elapsed();
    push_if(&mut failures, elapsed < C2_TIME_LIMIT, || {
        format!("took {elapsed:?}, limit {C2_TIME_LIMIT:?}")
    });
    report("check 2 (solver vs oracle, 100 cases x n=2..5)", &failures);
}

#[test]
fn check_3_ball_iff_regular_classifier() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut corpus = spread_corpus(C3_RANDOM_CASES, C3_MIN_SPREAD);
    corpus.extend(regular_corpus());
    assert_eq!(corpus.len(), C3_RANDOM_CASES + C3_REGULAR_CASES);

    for (i, s) in corpus.iter().enumerate() {
        let (ball, regular, agree) =
            john_ball_iff_regular(s, C3_VERDICT_TOL, C3_VERDICT_TOL).unwrap();
        push_if(&mut failures, agree, || {
            format!(
                "case {i} (n={}): ball={ball} regular={regular} spread={:.3e}",
                s.dim(),
                s.edge_spread()
            )
        });
        if failures.len() > 20 {
            break;
        }
    }
    let elapsed = start.elapsed();
    push_if(&mut failures, elapsed < C3_TIME_LIMIT, || {
        format!("took {elapsed:?}, limit {C3_TIME_LIMIT:?}")
    });
    report("check 3 (ball iff regular, 1000 random + 10 regular)", &failures);
}

#[test]
fn check_4_sharp_volume_bound() {
    let mut failures = Vec::new();

    push_if(&mut failures, (volume_bound(2) - C4_DESK_N2).abs() <= C4_DESK_TOL, || {
        format!("n=2 desk value: {} vs {C4_DESK_N2}", volume_bound(2))
    });
    push_if(&mut failures, (volume_bound(3) - C4_DESK_N3).abs() <= C4_DESK_TOL, || {
        format!("n=3 desk value: {} vs {C4_DESK_N3}", volume_bound(3))
    });

    for n in 1..=C4_MAX_DIM {
        let vol = regular_simplex(n).unwrap().volume();
        let bound = volume_bound(n);
        let rel = ((vol - bound) / bound).abs();
        push_if(&mut failures, rel <= C4_BOUND_REL_TOL, || {
            format!("n={n}: regular volume off the bound by {rel:.3e} relative")
        });
    }

    // Every simplex placed so its inscribed ellipsoid is the unit ball
    // has volume at the bound (never above it), and volumes that close
    // always come with a regular body.
    for (i, s) in spread_corpus(C4_NORMALIZED_CASES, C3_MIN_SPREAD).iter().enumerate() {
        let normalized = normalize_to_john_position(s);
        let bound = volume_bound(s.dim());
        let vol = normalized.volume();
        push_if(&mut failures, vol <= bound * (1.0 + C4_VOLUME_SLACK), || {
            format!("case {i} (n={}): normalized volume {vol} above bound {bound}", s.dim())
        });
        if (vol - bound).abs() <= C4_NEAR_BOUND_REL * bound {
            let spread = normalized.edge_spread();
            push_if(&mut failures, spread <= C4_NEAR_BOUND_SPREAD, || {
                format!(
                    "case {i} (n={}): volume at the bound but normalized spread {spread:.3e}",
                    s.dim()
                )
            });
        }
    }
    report("check 4 (sharp volume bound, n=1..10)", &failures);
}

#[test]
fn check_5_lift_and_product_bound() {
    let start = Instant::now();
    let mut failures = Vec::new();

    let mut systems: Vec<(String, BLSystem)> = Vec::new();
    for n in 1..=C5_MAX_DIM {
        let sys = lift(&regular_certificate(n).unwrap()).unwrap();
        systems.push((format!("regular n={n}"), sys));
        let mut found = 0usize;
        let mut seed = 500 * n as u64;
        while found < C5_RANDOM_PER_DIM {
            seed += 1;
            let Ok(s) = random_simplex(n, seed, 0.05) else { continue };
            let hp = s.to_halfspaces().unwrap();
            let e = analytic_simplex_john(&s).unwrap();
            let cert = certificate_from_ellipsoid(&hp, &e).unwrap();
            systems.push((format!("random n={n} seed={seed}"), lift(&cert).unwrap()));
            found += 1;
        }
    }

    for (label, sys) in &systems {
        let iso = sys.isotropy_residual();
        push_if(&mut failures, iso <= C5_ISOTROPY_TOL, || {
            format!("{label}: isotropy residual {iso:.3e}")
        });
        let vol = sys.section_body().unwrap().volume();
        let closed = closed_form_integral(vol, sys.base_dim());
        let est = estimate_integral(sys, vol, C5_SAMPLES, 2024).unwrap();
        push_if(&mut failures, est.value <= 1.0 + 3.0 * est.std_error, || {
            format!("{label}: estimate {} above the bound (se {})", est.value, est.std_error)
        });
        push_if(
            &mut failures,
            (est.value - closed).abs() <= 3.0 * est.std_error,
            || {
                format!(
                    "{label}: estimate {} vs closed form {closed} (se {})",
                    est.value, est.std_error
                )
            },
        );
        if label.starts_with("regular") {
            push_if(
                &mut failures,
                (est.value - 1.0).abs() <= C5_REGULAR_REL_TOL,
                || format!("{label}: estimate {} not within 1% of 1", est.value),
            );
        }
    }
    let elapsed = start.elapsed();
    push_if(&mut failures, elapsed < C5_TIME_LIMIT, || {
        format!("took {elapsed:?}, limit {C5_TIME_LIMIT:?}")
    });
    report("check 5 (lift isotropy and product bound, 10^6 samples)", &failures);
}

/// Independent 2-D quadrature of `F` over the height-`r` section of the
/// lifted regular cone at n=2: composite Simpson on the Duffy square
/// mapped onto the scaled section triangle.
fn section_quadrature_n2(sys: &BLSystem, r: f64, grid: usize) -> f64 {
    let k = sys.section_body().unwrap();
    let scale = r / 2f64.sqrt();
    let verts: Vec<DVector<f64>> = k.vertices().iter().map(|v| v * scale).collect();
    let e1 = &verts[1] - &verts[0];
    let e2 = &verts[2] - &verts[0];
    let jacobian = (e1[0] * e2[1] - e1[1] * e2[0]).abs();

    let simpson_weight = |i: usize| -> f64 {
        if i == 0 || i == grid {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };

    let h = 1.0 / grid as f64;
    let mut total = 0.0;
    for i in 0..=grid {
        let u = i as f64 * h;
        for j in 0..=grid {
            let v = j as f64 * h;
            // Duffy map of the unit square onto the reference triangle.
            let s = u * (1.0 - v);
            let t = u * v;
            let point = &verts[0] + &e1 * s + &e2 * t;
            let x = DVector::from_column_slice(&[point[0], point[1], r]);
            total += simpson_weight(i) * simpson_weight(j) * u * bl_integrand(sys, &x);
        }
    }
    total * jacobian * (h / 3.0) * (h / 3.0)
}

#[test]
fn check_6_slab_formulas() {
    let mut failures = Vec::new();

    for n in 1..=C6_MAX_DIM {
        // At the regular volume the closed form is exactly 1; a second
        // probe volume checks plain linearity in vol_k.
        for vol in [volume_bound(n), 1.0] {
            let closed = closed_form_integral(vol, n);
            let quad = slab_quadrature_integral(vol, n);
            let rel = ((quad.value - closed) / closed).abs();
            push_if(&mut failures, rel <= C6_QUADRATURE_REL_TOL, || {
                format!("n={n} vol={vol}: quadrature off by {rel:.3e} relative")
            });
        }
    }

    let sys = lift(&regular_certificate(2).unwrap()).unwrap();
    let r = 2f64.sqrt();
    let expected = slab_section_value(r, 3.0 * 3f64.sqrt(), 2);
    let measured = section_quadrature_n2(&sys, r, C6_SECTION_GRID);
    let rel = ((measured - expected) / expected).abs();
    push_if(&mut failures, rel <= C6_SECTION_REL_TOL, || {
        format!("2-D section quadrature {measured} vs {expected} (rel {rel:.3e})")
    });
    report("check 6 (slab formulas, quadrature vs closed forms)", &failures);
}

#[test]
fn check_7_orthonormality_rigidity() {
    let mut failures = Vec::new();
    let mut corpus = spread_corpus(C3_RANDOM_CASES, C3_MIN_SPREAD);
    corpus.extend(regular_corpus());

    for (i, s) in corpus.iter().enumerate() {
        let n = s.dim() as f64;
        let sys = lift_facet_normals(s).unwrap();
        let (ortho, max_off, implied) = equality_orthonormality_check(&sys, C7_ORTHO_TOL);
        let regular = s.is_regular(C3_VERDICT_TOL);
        push_if(&mut failures, ortho == regular, || {
            format!(
                "case {i} (n={}): orthonormal={ortho} regular={regular} max_offdiag={max_off:.3e}",
                s.dim()
            )
        });
        if ortho {
            push_if(
                &mut failures,
                (implied + 1.0 / n).abs() <= C7_IMPLIED_TOL,
                || format!("case {i}: implied normal product {implied} vs {}", -1.0 / n),
            );
        }
        if failures.len() > 20 {
            break;
        }
    }
    report("check 7 (orthonormal lift iff regular source)", &failures);
}

#[test]
fn check_8_cube_regression() {
    let mut failures = Vec::new();
    let numeric = engine_by_name("numeric").unwrap();
    let cfg = SolverConfig::default();

    for &n in &C8_DIMS {
        let cube = HPolytope::cube(n, 1.0).unwrap();
        let (e, r) = numeric.solve(&cube, &cfg).unwrap();
        push_if(&mut failures, r.status == SolverStatus::Converged, || {
            format!("n={n}: status {:?}", r.status)
        });
        push_if(&mut failures, e.center().norm() <= C8_CENTER_TOL, || {
            format!("n={n}: center norm {:.3e}", e.center().norm())
        });
        let shape_err = (e.shape() - DMatrix::<f64>::identity(n, n)).norm();
        push_if(&mut failures, shape_err <= C8_SHAPE_TOL, || {
            format!("n={n}: shape deviates from identity by {shape_err:.3e}")
        });

        let cert = certificate_from_ellipsoid(&cube, &e).unwrap();
        push_if(&mut failures, cert.contacts().len() == 2 * n, || {
            format!("n={n}: {} contacts, expected {}", cert.contacts().len(), 2 * n)
        });
        for u in cert.contacts() {
            // Each contact must be a signed standard basis vector.
            let best: f64 = (0..n)
                .flat_map(|k| {
                    let mut plus = DVector::zeros(n);
                    plus[k] = 1.0;
                    [(u - &plus).norm(), (u + &plus).norm()]
                })
                .fold(f64::INFINITY, f64::min);
            push_if(&mut failures, best <= C8_CONTACT_TOL, || {
                format!("n={n}: contact {u:?} is {best:.3e} from any signed basis vector")
            });
        }
        for &w in cert.weights() {
            push_if(&mut failures, (w - 0.5).abs() <= C8_WEIGHT_TOL, || {
                format!("n={n}: weight {w} differs from 1/2")
            });
        }
        push_if(&mut failures, cert.residual_a() <= C8_RESIDUAL_TOL, || {
            format!("n={n}: residual_a {:.3e}", cert.residual_a())
        });
        push_if(&mut failures, cert.residual_b() <= C8_RESIDUAL_TOL, || {
            format!("n={n}: residual_b {:.3e}", cert.residual_b())
        });
    }
    report("check 8 (cube inscribed ball and contacts, n=2..6)", &failures);
}
