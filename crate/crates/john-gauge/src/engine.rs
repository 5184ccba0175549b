//! Named solver strategies for the maximum-volume inscribed ellipsoid.
//!
//! Two engines sit behind the [`MvieEngine`] trait: `numeric` runs the
//! interior-point solver on any bounded H-polytope, `analytic` recovers a
//! simplex from the halfspace data and maps the regular simplex's
//! inscribed ball through the vertex correspondence. Registering both
//! under one interface lets the command-line suites cross-validate the
//! solver against the exact construction case by case.

use crate::geom::{Ellipsoid, HPolytope};
use crate::mvie::{analytic_simplex_john, max_volume_ellipsoid, SolverConfig, SolverReport, SolverStatus};
use crate::{Error, Result};

/// A maximum-volume inscribed ellipsoid strategy, selectable by name.
pub trait MvieEngine: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    /// Compute the inscribed ellipsoid and a solve report for `p`.
    fn solve(&self, p: &HPolytope, cfg: &SolverConfig) -> Result<(Ellipsoid, SolverReport)>;
}

/// Largest deviation from tangency across all constraints: the support
/// value of `e` in direction `a_i` should meet `b_i` exactly on every
/// touching facet of an optimal ellipsoid.
fn max_tangency_deviation(p: &HPolytope, e: &Ellipsoid) -> f64 {
    let mut worst = 0.0f64;
    for (a, &b) in p.normals().iter().zip(p.offsets()) {
        let reach = a.dot(e.center()) + (e.shape() * a).norm();
        worst = worst.max((b - reach).abs());
    }
    worst
}

/// Interior-point log-det barrier solver; works on any bounded H-polytope
/// with nonempty interior.
pub struct NumericEngine;

impl MvieEngine for NumericEngine {
    fn name(&self) -> &'static str {
        "numeric"
    }
    fn description(&self) -> &'static str {
        "interior-point log-det barrier solver for bounded H-polytopes"
    }
    fn solve(&self, p: &HPolytope, cfg: &SolverConfig) -> Result<(Ellipsoid, SolverReport)> {
        max_volume_ellipsoid(p, cfg)
    }
}

/// Exact construction for simplices: recovers the vertices from the
/// halfspace data and transports the regular simplex's inscribed ball
/// through the affine change of coordinates. Errors on polytopes with
/// more than `n + 1` facets.
pub struct AnalyticEngine;

impl MvieEngine for AnalyticEngine {
    fn name(&self) -> &'static str {
        "analytic"
    }
    fn description(&self) -> &'static str {
        "exact simplex construction via the regular-simplex affine correspondence"
    }
    fn solve(&self, p: &HPolytope, cfg: &SolverConfig) -> Result<(Ellipsoid, SolverReport)> {
        cfg.validate()?;
        let s = p.recover_simplex()?;
        let e = analytic_simplex_john(&s)?;
        let report = SolverReport {
            iterations: 0,
            final_kkt_residual: max_tangency_deviation(p, &e),
            log_volume: e.log_volume(),
            status: SolverStatus::Converged,
        };
        Ok((e, report))
    }
}

/// Look up an engine by name (`numeric`, `analytic`).
pub fn engine_by_name(name: &str) -> Result<Box<dyn MvieEngine>> {
    match name {
        "numeric" => Ok(Box::new(NumericEngine)),
        "analytic" => Ok(Box::new(AnalyticEngine)),
        other => Err(Error::UnknownStrategy(
            other.to_string(),
            engine_names().join(", "),
        )),
    }
}

/// Names of the registered engines.
pub fn engine_names() -> Vec<&'static str> {
    vec!["numeric", "analytic"]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{random_simplex, Simplex};
    use approx::assert_relative_eq;

    #[test]
    fn registry_returns_both_engines() {
        assert_eq!(engine_by_name("numeric").unwrap().name(), "numeric");
        assert_eq!(engine_by_name("analytic").unwrap().name(), "analytic");
        assert_eq!(engine_names(), vec!["numeric", "analytic"]);
        match engine_by_name("simplex-only").map(|e| e.name()) {
            Err(Error::UnknownStrategy(name, known)) => {
                assert_eq!(name, "simplex-only");
                assert!(known.contains("numeric") && known.contains("analytic"));
            }
            other => panic!("expected unknown-strategy error, got {other:?}"),
        }
    }

    #[test]
    fn engines_agree_on_simplices() {
        let cfg = SolverConfig::default();
        for seed in [1u64, 4, 9] {
            let s = random_simplex(3, seed, 0.05).unwrap();
            let hp = s.to_halfspaces().unwrap();
            let (en, rn) = engine_by_name("numeric").unwrap().solve(&hp, &cfg).unwrap();
            let (ea, ra) = engine_by_name("analytic").unwrap().solve(&hp, &cfg).unwrap();
            assert_eq!(rn.status, SolverStatus::Converged);
            assert_eq!(ra.status, SolverStatus::Converged);
            assert_eq!(ra.iterations, 0);
            assert!(rn.iterations > 0);
            assert!((en.center() - ea.center()).norm() <= 1e-6, "seed {seed}");
            assert!(
                (en.shape() - ea.shape()).norm() / ea.shape().norm() <= 1e-5,
                "seed {seed}"
            );
            assert_relative_eq!(rn.log_volume, ra.log_volume, epsilon = 1e-6);
        }
    }

    #[test]
    fn analytic_engine_reports_tight_tangency() {
        let s = Simplex::from_rows(&[&[0.0, 0.0], &[4.0, 0.0], &[0.0, 3.0]]).unwrap();
        let hp = s.to_halfspaces().unwrap();
        let (_, report) = AnalyticEngine.solve(&hp, &SolverConfig::default()).unwrap();
        // Every facet of a simplex touches the inscribed ellipsoid.
        assert!(report.final_kkt_residual <= 1e-10, "{}", report.final_kkt_residual);
    }

    #[test]
    fn analytic_engine_rejects_non_simplices() {
        let cube = HPolytope::cube(3, 1.0).unwrap();
        assert!(AnalyticEngine.solve(&cube, &SolverConfig::default()).is_err());
        // The numeric engine handles the same input.
        assert!(NumericEngine.solve(&cube, &SolverConfig::default()).is_ok());
    }
}
