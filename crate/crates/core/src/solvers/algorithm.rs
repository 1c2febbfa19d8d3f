//! Algorithm P: `x_{k+1} ∈ J_{λ_k}^F(x_k) ∩ B(x_k, D_κ/4)`.

use super::oracle::ep_residual;
use super::resolvent::{check_step, lipschitz_at, solve_inner, ResolventProblem};
use super::trace::{IterationRecord, SolverTrace, Status};
use super::{SolverConfig, MAX_SHRINKS};
use crate::bifunction::{check_monotone, Bifunction};
use crate::error::{Error, Result};
use crate::manifold::ManifoldPoint;
use crate::sets::{ConstraintSet, Grid, SetKind};

/// Sampled pairs for the monotonicity precheck.
const MONOTONE_PAIRS: usize = 200;
/// Slack before a residual decrease along the iteration is logged.
const RESIDUAL_SLACK: f64 = 1e-6;
/// Half-width of the local probe region on unbounded sets.
const PROBE_REACH: f64 = 1.0;

/// A compact piece of `set` containing `center`: the set itself when compact, else each
/// unbounded factor is replaced by a geodesic ball of radius `radius` (capped below the
/// convexity radius) around the matching component of `center`.
pub(crate) fn compact_around(
    set: &ConstraintSet,
    center: &ManifoldPoint,
    radius: f64,
) -> Result<ConstraintSet> {
    if set.is_compact() {
        return Ok(set.clone());
    }
    let m = set.manifold();
    match set.kind() {
        SetKind::Product(fs) => {
            let factors = fs
                .iter()
                .zip(m.split(center.coords()))
                .map(|(f, c)| compact_around(f, &ManifoldPoint::new(c), radius))
                .collect::<Result<Vec<_>>>()?;
            Ok(ConstraintSet::product(factors))
        }
        _ => {
            let r = radius.min(0.9 * m.convexity_radius(center));
            ConstraintSet::ball(m.clone(), center.clone(), r)
        }
    }
}

/// Residual probe grid near `x`: spacing close to `probe_spacing`, at most about
/// `probe_max_points` points (the spacing coarsens in higher dimension).
pub fn probe_grid(set: &ConstraintSet, x: &ManifoldPoint, cfg: &SolverConfig) -> Result<Grid> {
    let local = compact_around(set, x, PROBE_REACH)?;
    let dim = set.manifold().dim().max(1) as f64;
    let cap = ((cfg.probe_max_points as f64).powf(1.0 / dim).floor() as usize).max(3);
    let coarse = local.grid(cap)?;
    if coarse.spacing <= cfg.probe_spacing {
        let wanted = ((cap - 1) as f64 * coarse.spacing / cfg.probe_spacing).ceil() as usize + 1;
        if wanted < cap {
            return local.grid(wanted.max(3));
        }
    }
    Ok(coarse)
}

fn push_unique(warnings: &mut Vec<String>, w: String) {
    if !warnings.contains(&w) {
        warnings.push(w);
    }
}

/// Runs the proximal point iteration from `x0`.
///
/// Stops when the step drops below `step_tol` with probe residual at least
/// `−residual_tol`, when the budget runs out, or when `λ_k·L̂ < D_κ/4` fails (after up
/// to ten halvings of `λ_k` if `auto_shrink` is set).
pub fn algorithm_p(
    f: &Bifunction,
    set: &ConstraintSet,
    x0: &ManifoldPoint,
    cfg: &SolverConfig,
) -> Result<SolverTrace> {
    cfg.validate()?;
    let m = set.manifold();
    if f.manifold() != m {
        return Err(Error::InvalidSet(format!(
            "bifunction lives on {} but the set on {}",
            f.manifold(),
            m
        )));
    }
    m.check_point(x0)?;
    if !set.contains(x0) {
        return Err(Error::Infeasible);
    }
    let d_kappa = m.d_kappa();
    let bound = d_kappa / 4.0;
    let mut trace = SolverTrace {
        initial_point: x0.clone(),
        records: Vec::new(),
        status: Status::MaxIters,
        warnings: Vec::new(),
    };
    if !cfg.assume_proximity && d_kappa.is_finite() {
        trace
            .warnings
            .push("initial point not asserted to lie within D_kappa/8 of the solution set".into());
    }
    let mono = check_monotone(f, set, MONOTONE_PAIRS, cfg.seed);
    if !mono.monotone {
        trace.warnings.push(format!(
            "sampled monotonicity check failed: max F(x,y)+F(y,x) = {:e}",
            mono.worst
        ));
    }

    if !set.exact_projection() {
        trace.warnings.push(
            "projection onto the spherical cap is approximate (cyclic, at most 50 sweeps, tolerance 1e-9)".into(),
        );
    }

    let fixed_probe = if set.is_compact() {
        Some(probe_grid(set, x0, cfg)?)
    } else {
        None
    };
    let residual_of = |x: &ManifoldPoint| -> Result<f64> {
        match &fixed_probe {
            Some(g) => Ok(ep_residual(f, x, g)),
            None => Ok(ep_residual(f, x, &probe_grid(set, x, cfg)?)),
        }
    };

    let mut x = x0.clone();
    let mut previous = residual_of(&x)?;
    for k in 0..cfg.max_outer_iters {
        let mut lambda = cfg.lambda.at(k);
        let lipschitz = lipschitz_at(f, &x, cfg)?;
        let mut verdict = check_step(lambda, lipschitz, d_kappa);
        if verdict.is_err() && cfg.auto_shrink {
            for _ in 0..MAX_SHRINKS {
                lambda *= 0.5;
                verdict = check_step(lambda, lipschitz, d_kappa);
                if verdict.is_ok() {
                    break;
                }
            }
        }
        if let Err(e) = verdict {
            trace.records.push(IterationRecord {
                k,
                point: x.clone(),
                lambda,
                lipschitz,
                step: f64::NAN,
                residual: previous,
                inner_iters: 0,
                ball_slack: f64::NAN,
            });
            trace.warnings.push(format!("iteration {k}: {e}"));
            trace.status = Status::StepConditionViolated;
            return Ok(trace);
        }
        if lambda != cfg.lambda.at(k) {
            push_unique(&mut trace.warnings, "lambda shrunk to satisfy the step condition".into());
        }

        let prob = ResolventProblem::new(f.clone(), set.clone(), lambda, x.clone())?;
        let out = solve_inner(&prob, cfg, lipschitz)?;
        for w in out.warnings {
            push_unique(&mut trace.warnings, w);
        }
        let step = m.distance(&x, &out.point);
        if step >= bound {
            trace.warnings.push(format!(
                "iteration {k}: step {step:e} leaves the ball of radius {bound:e}"
            ));
            trace.status = Status::StepConditionViolated;
            trace.records.push(IterationRecord {
                k,
                point: x.clone(),
                lambda,
                lipschitz,
                step: f64::NAN,
                residual: previous,
                inner_iters: out.inner_iters,
                ball_slack: f64::NAN,
            });
            return Ok(trace);
        }
        let residual = residual_of(&out.point)?;
        if residual < previous - RESIDUAL_SLACK {
            push_unique(
                &mut trace.warnings,
                format!("probe residual decreased at iteration {k}"),
            );
        }
        trace.records.push(IterationRecord {
            k,
            point: out.point.clone(),
            lambda,
            lipschitz,
            step,
            residual,
            inner_iters: out.inner_iters,
            ball_slack: bound - step,
        });
        x = out.point;
        previous = residual;
        if step < cfg.step_tol && residual >= -cfg.residual_tol {
            trace.status = Status::Converged;
            return Ok(trace);
        }
    }
    Ok(trace)
}
