//! The resolvent `J_λ^F(z)`: the EP solution of `λF + G_z` near `z`.

use super::algorithm::compact_around;
use super::oracle::ep_best_on_grid;
use super::{InnerSolver, SolverConfig};
use crate::bifunction::{lipschitz_estimate, regularize, Bifunction};
use crate::error::{Error, Result};
use crate::manifold::{ManifoldPoint, Vector};
use crate::sets::ConstraintSet;

/// Backtracking threshold of the extragradient step.
const KHOBOTOV: f64 = 0.9;
const MIN_STEP: f64 = 1e-14;
/// Local probes of the compass refinement: `PROBE_RUNGS` distances from `PROBE_TOP·δ`
/// down by factors of `PROBE_RATIO`.
const PROBE_RATIO: f64 = 4.0;
const PROBE_TOP: f64 = 8.0;
const PROBE_RUNGS: usize = 6;

#[derive(Clone, Debug)]
pub struct ResolventProblem {
    pub f: Bifunction,
    pub set: ConstraintSet,
    pub lambda: f64,
    pub z: ManifoldPoint,
}

impl ResolventProblem {
    pub fn new(f: Bifunction, set: ConstraintSet, lambda: f64, z: ManifoldPoint) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
        }
        if f.manifold() != set.manifold() {
            return Err(Error::InvalidSet(format!(
                "bifunction lives on {} but the set on {}",
                f.manifold(),
                set.manifold()
            )));
        }
        set.manifold().check_point(&z)?;
        Ok(Self { f, set, lambda, z })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolventOutput {
    pub point: ManifoldPoint,
    pub inner_iters: usize,
    /// Center Lipschitz estimate of `F(z,·)` used for the step condition.
    pub lipschitz: f64,
    pub warnings: Vec<String>,
}

/// Center Lipschitz estimate of `F(x,·)` at the configured radius.
pub(crate) fn lipschitz_at(f: &Bifunction, x: &ManifoldPoint, cfg: &SolverConfig) -> Result<f64> {
    let m = f.manifold();
    let radius = cfg.lipschitz_radius.min(0.5 * m.convexity_radius(x));
    Ok(lipschitz_estimate(f, x, radius, cfg.lipschitz_samples, cfg.seed)?.value)
}

/// `λ·L̂ < D_κ/4`.
pub(crate) fn check_step(lambda: f64, lipschitz: f64, d_kappa: f64) -> Result<()> {
    let bound = d_kappa / 4.0;
    let product = lambda * lipschitz;
    if product < bound {
        Ok(())
    } else {
        Err(Error::StepCondition { product, bound })
    }
}

/// Solves the regularized EP near `z` after checking the step condition at `z`.
pub fn resolvent(prob: &ResolventProblem, cfg: &SolverConfig) -> Result<ResolventOutput> {
    cfg.validate()?;
    let lipschitz = lipschitz_at(&prob.f, &prob.z, cfg)?;
    check_step(prob.lambda, lipschitz, prob.set.manifold().d_kappa())?;
    solve_inner(prob, cfg, lipschitz)
}

pub(crate) fn solve_inner(
    prob: &ResolventProblem,
    cfg: &SolverConfig,
    lipschitz: f64,
) -> Result<ResolventOutput> {
    match cfg.inner {
        InnerSolver::Extragradient => extragradient(prob, cfg, lipschitz),
        InnerSolver::OracleGrid => oracle_grid(prob, cfg, lipschitz),
    }
}

/// `P_Q(exp_x(−s·a))`.
fn descend(set: &ConstraintSet, x: &ManifoldPoint, a: &Vector, s: f64) -> Result<ManifoldPoint> {
    let p = set.manifold().exp_unchecked(x, &(a * -s));
    set.project_point(&p)
}

fn extragradient(
    prob: &ResolventProblem,
    cfg: &SolverConfig,
    lipschitz: f64,
) -> Result<ResolventOutput> {
    let (set, z, lambda) = (&prob.set, &prob.z, prob.lambda);
    let m = set.manifold();
    let mut fallback = false;
    // λA_F(x) − exp_x⁻¹ z, with the pull dropped when the geodesic to z leaves Q.
    let mut field = |x: &ManifoldPoint| -> Result<(Vector, f64)> {
        let a = prob
            .f
            .subgradient_components(x)?
            .into_iter()
            .next()
            .ok_or(Error::NoSubgradient)?
            * lambda;
        let scale = m.norm_at(x.coords(), &a);
        if set.minimal_geodesic_inside(x, z) {
            Ok((a - m.log_vec(x, z), scale))
        } else {
            fallback = true;
            Ok((a, scale))
        }
    };
    let mut x = set.project_point(z)?;
    let mut s = 0.5 * (1.0 / (lambda * lipschitz + 1.0)).min(1.0);
    let mut natural = f64::INFINITY;
    for it in 1..=cfg.max_inner_iters {
        let (ax, scale) = field(&x)?;
        let mut xbar = descend(set, &x, &ax, s)?;
        natural = m.distance(&x, &xbar) / s;
        if natural <= cfg.inner_tol * (1.0 + scale) {
            let mut warnings = Vec::new();
            if fallback {
                warnings.push("pull toward z dropped where its geodesic leaves Q".to_string());
            }
            return Ok(ResolventOutput {
                point: x,
                inner_iters: it,
                lipschitz,
                warnings,
            });
        }
        let back = loop {
            let (ay, _) = field(&xbar)?;
            let back = m.transport_unchecked(&xbar, &x, &ay)?;
            let gap = m.norm_at(x.coords(), &(&ax - &back));
            if s * gap <= KHOBOTOV * m.distance(&x, &xbar) || s < MIN_STEP {
                break back;
            }
            s *= 0.5;
            xbar = descend(set, &x, &ax, s)?;
        };
        x = descend(set, &x, &back, s)?;
    }
    Err(Error::InnerNonConvergence {
        iterations: cfg.max_inner_iters,
        residual: natural,
    })
}

/// Unit directions `±e_i` and `±(e_i ± e_j)/√2` in an orthonormal tangent basis.
fn compass_directions(prob: &ResolventProblem, x: &ManifoldPoint) -> Vec<Vector> {
    let basis = prob.set.manifold().tangent_basis(x);
    let mut dirs = Vec::new();
    for (i, a) in basis.iter().enumerate() {
        dirs.push(a.clone());
        dirs.push(-a);
        for b in &basis[i + 1..] {
            for sign in [1.0, -1.0] {
                let d = (a + b * sign) / 2f64.sqrt();
                dirs.push(d.clone());
                dirs.push(-d);
            }
        }
    }
    dirs
}

fn oracle_grid(prob: &ResolventProblem, cfg: &SolverConfig, lipschitz: f64) -> Result<ResolventOutput> {
    let (set, z, lambda) = (&prob.set, &prob.z, prob.lambda);
    let m = set.manifold();
    let fz = regularize(&prob.f, lambda, z)?;
    let bound = m.d_kappa() / 4.0;
    let reach = (2.0 * lambda * lipschitz).max(0.5);
    let local = compact_around(set, z, reach)?;
    let grid = local.grid(cfg.oracle_resolution)?;
    let mut candidates: Vec<(f64, usize)> = (0..grid.len())
        .map(|i| (m.distance(z, &grid.points[i]), i))
        .filter(|&(d, _)| d < bound)
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let order: Vec<usize> = candidates.into_iter().map(|(_, i)| i).collect();
    let mut x = match ep_best_on_grid(&fz, &grid, &order, cfg.seed) {
        Some((i, _)) => grid.points[i].clone(),
        None => set.project_point(z)?,
    };

    // Gap min_y F_{λ,z}(x, y) over probes along the compass directions at distances
    // PROBE_TOP·δ, PROBE_TOP·δ/4, … for the current compass step δ.
    let gap = |x: &ManifoldPoint, delta: f64| -> Result<f64> {
        let mut g = fz.eval(x, x);
        for d in compass_directions(prob, x) {
            let mut t = PROBE_TOP * delta;
            for _ in 0..PROBE_RUNGS {
                let y = descend(set, x, &d, -t)?;
                g = g.min(fz.eval(x, &y));
                t /= PROBE_RATIO;
            }
        }
        Ok(g)
    };
    let inside = |p: &ManifoldPoint| !bound.is_finite() || m.distance(z, p) < bound;

    let mut delta = grid.spacing;
    let mut value = gap(&x, delta)?;
    let mut iters = 0;
    while delta > cfg.inner_tol {
        if iters == cfg.max_inner_iters {
            return Err(Error::InnerNonConvergence {
                iterations: iters,
                residual: value,
            });
        }
        iters += 1;
        let mut moved = false;
        for d in compass_directions(prob, &x) {
            let cand = descend(set, &x, &d, -delta)?;
            if !inside(&cand) {
                continue;
            }
            let v = gap(&cand, delta)?;
            if v > value {
                x = cand;
                value = v;
                moved = true;
                break;
            }
        }
        if !moved {
            delta *= 0.5;
            value = gap(&x, delta)?;
        }
    }
    Ok(ResolventOutput {
        point: x,
        inner_iters: iters,
        lipschitz,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifunction::{optimization_bifunction, zero_bifunction};
    use crate::manifold::Manifold;
    use approx::assert_abs_diff_eq;

    fn pt(c: &[f64]) -> ManifoldPoint {
        ManifoldPoint::from_slice(c)
    }

    fn half_square() -> Bifunction {
        optimization_bifunction(&Manifold::Euclidean(1), "half-square", |p| {
            0.5 * p.coords()[0].powi(2)
        })
    }

    #[test]
    fn quadratic_prox_closed_form() {
        let q = ConstraintSet::interval(-100.0, 100.0).unwrap();
        let prob = ResolventProblem::new(half_square(), q, 1.0, pt(&[2.0])).unwrap();
        let out = resolvent(&prob, &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(out.point.coords()[0], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn zero_bifunction_resolvent_is_projection() {
        let f = zero_bifunction(&Manifold::Euclidean(1));
        let q = ConstraintSet::interval(-1.0, 1.0).unwrap();
        let prob = ResolventProblem::new(f, q, 1.0, pt(&[2.0])).unwrap();
        let out = resolvent(&prob, &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(out.point.coords()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn minimizer_is_fixed() {
        let q = ConstraintSet::interval(-1.0, 1.0).unwrap();
        let prob = ResolventProblem::new(half_square(), q, 0.7, pt(&[0.0])).unwrap();
        let out = resolvent(&prob, &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(out.point.coords()[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn oracle_grid_matches_extragradient() {
        let q = ConstraintSet::interval(-1.0, 1.0).unwrap();
        let prob = ResolventProblem::new(half_square(), q, 0.5, pt(&[0.9])).unwrap();
        let eg = resolvent(&prob, &SolverConfig::default()).unwrap();
        let cfg = SolverConfig {
            inner: InnerSolver::OracleGrid,
            ..SolverConfig::default()
        };
        let og = resolvent(&prob, &cfg).unwrap();
        assert_abs_diff_eq!(eg.point.coords()[0], 0.6, epsilon = 1e-8);
        assert_abs_diff_eq!(og.point.coords()[0], 0.6, epsilon = 1e-6);
    }

    #[test]
    fn step_condition_on_sphere() {
        let s = Manifold::Sphere2;
        let a = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let f = optimization_bifunction(&s, "linear", move |p| -5.0 * a.dot(p.coords()));
        let q = ConstraintSet::whole(s);
        let prob = ResolventProblem::new(f, q, 1.0, pt(&[0.0, 0.0, 1.0])).unwrap();
        match resolvent(&prob, &SolverConfig::default()) {
            Err(Error::StepCondition { product, bound }) => {
                assert!(product >= bound);
                assert_abs_diff_eq!(bound, std::f64::consts::FRAC_PI_4, epsilon = 1e-15);
            }
            other => panic!("expected a step-condition error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_lambda() {
        let q = ConstraintSet::interval(-1.0, 1.0).unwrap();
        assert!(ResolventProblem::new(half_square(), q, -1.0, pt(&[0.0])).is_err());
    }
}
