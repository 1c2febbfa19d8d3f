//! Mixed variational inequalities `⟨V(x̄), γ̇(0)⟩ + f(y) − f(x̄) ≥ 0` as equilibrium
//! problems.

use std::fmt;
use std::sync::Arc;

use crate::bifunction::{eval_gv, ext_add, ext_sub, Bifunction, VectorField};
use crate::error::{Error, Result};
use crate::manifold::{ManifoldPoint, Vector};
use crate::sets::{ConstraintSet, SetSampler};
use crate::solvers::oracle::{accept, min_pairing, shuffled};
use crate::solvers::{OracleOptions, SolutionSet};

type ScalarFn = dyn Fn(&ManifoldPoint) -> f64 + Send + Sync;
type SubFn = dyn Fn(&ManifoldPoint) -> Vec<Vector> + Send + Sync;

/// Points of `Q` sampled to check that `f` is finite there.
const DOMAIN_SAMPLES: usize = 64;

#[derive(Clone)]
pub struct MVIProblem {
    field: VectorField,
    f: Arc<ScalarFn>,
    subgradient: Arc<SubFn>,
    set: ConstraintSet,
}

impl fmt::Debug for MVIProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MVIProblem")
            .field("field", &self.field)
            .field("set", &self.set)
            .finish()
    }
}

impl MVIProblem {
    /// `field` must be single-valued; `subgradient` returns the extreme points of `∂f(x)`.
    pub fn new(
        field: VectorField,
        set: ConstraintSet,
        f: impl Fn(&ManifoldPoint) -> f64 + Send + Sync + 'static,
        subgradient: impl Fn(&ManifoldPoint) -> Vec<Vector> + Send + Sync + 'static,
    ) -> Result<Self> {
        if field.manifold() != set.manifold() {
            return Err(Error::InvalidSet(format!(
                "field lives on {} but the set on {}",
                field.manifold(),
                set.manifold()
            )));
        }
        let mut sampler = SetSampler::new(&set, 0);
        for _ in 0..DOMAIN_SAMPLES {
            let x = sampler.sample();
            if !f(&x).is_finite() {
                return Err(Error::InvalidConfig(format!("f is not finite at {x} in Q")));
            }
            if field.components(&x).len() != 1 {
                return Err(Error::InvalidConfig("the MVIP field must be single-valued".into()));
            }
        }
        Ok(Self {
            field,
            f: Arc::new(f),
            subgradient: Arc::new(subgradient),
            set,
        })
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn set(&self) -> &ConstraintSet {
        &self.set
    }

    pub fn f(&self, x: &ManifoldPoint) -> f64 {
        (self.f)(x)
    }

    pub fn subgradient(&self, x: &ManifoldPoint) -> Vec<Vector> {
        (self.subgradient)(x)
    }
}

/// `F(x, y) = sup_{u ∈ exp_x⁻¹ y} ⟨V(x), u⟩ + f(y) − f(x)` with `A_F(x) = V(x) + ∂f(x)`.
pub fn build_mvip_bifunction(p: &MVIProblem) -> Bifunction {
    let q = p.clone();
    let o = p.clone();
    Bifunction::new(p.set.manifold().clone(), "mvip", move |x, y| {
        ext_add(eval_gv(&q.field, x, y), ext_sub(q.f(y), q.f(x)))
    })
    .with_subgradient(move |x| {
        let v = o.field.components(x).remove(0);
        o.subgradient(x).into_iter().map(|g| &v + g).collect()
    })
}

/// Grid points passing the direct inequality `⟨V(x), γ̇(0)⟩ + f(y) − f(x) ≥ −ε` for all
/// grid `y` whose minimal geodesic from `x` stays in `Q`.
pub fn mvip_direct_oracle(p: &MVIProblem, resolution: usize) -> Result<SolutionSet> {
    let grid = p.set.grid(resolution)?;
    let m = p.set.manifold();
    let convex = p.set.geodesically_convex();
    let order = shuffled(grid.len(), 0);
    let value = |x: &ManifoldPoint, v: &Vector, y: &ManifoldPoint| {
        min_pairing(m, x, v, y) + ext_sub(p.f(y), p.f(x))
    };
    let residual = |x: &ManifoldPoint, bound: f64| -> Option<f64> {
        let v = p.field.components(x).remove(0);
        let mut r = f64::INFINITY;
        for &j in &order {
            let y = &grid.points[j];
            if !convex && !p.set.minimal_geodesic_inside(x, y) {
                continue;
            }
            r = r.min(value(x, &v, y));
            if r < -bound {
                return None;
            }
        }
        Some(r)
    };
    let all: Vec<usize> = (0..grid.len()).collect();
    Ok(accept(m, &grid, &all, &OracleOptions::default(), &residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Manifold;
    use crate::solvers::brute_force_ep;
    use approx::assert_abs_diff_eq;

    fn pt(c: &[f64]) -> ManifoldPoint {
        ManifoldPoint::from_slice(c)
    }

    fn line_problem(v: f64, f: fn(f64) -> f64, df: fn(f64) -> Vec<f64>) -> MVIProblem {
        let e = Manifold::Euclidean(1);
        MVIProblem::new(
            VectorField::single(e, "const", move |_| Vector::from_element(1, v)),
            ConstraintSet::interval(-1.0, 1.0).unwrap(),
            move |x| f(x.coords()[0]),
            move |x| df(x.coords()[0]).into_iter().map(|g| Vector::from_element(1, g)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn abs_value_without_field_solves_at_zero() {
        let p = line_problem(0.0, f64::abs, |x| {
            if x == 0.0 {
                vec![-1.0, 1.0]
            } else {
                vec![x.signum()]
            }
        });
        let f = build_mvip_bifunction(&p);
        let ep = brute_force_ep(&f, p.set(), 201).unwrap();
        assert!(ep.points.iter().all(|x| x.coords()[0].abs() <= 0.02));
        let direct = mvip_direct_oracle(&p, 201).unwrap();
        assert!(direct.hausdorff(&Manifold::Euclidean(1), &ep) <= 3.0 * ep.spacing);
    }

    #[test]
    fn constant_field_pushes_to_left_end() {
        let p = line_problem(1.0, |_| 0.0, |_| vec![0.0]);
        let ep = brute_force_ep(&build_mvip_bifunction(&p), p.set(), 101).unwrap();
        assert_eq!(ep.points, vec![pt(&[-1.0])]);
    }

    #[test]
    fn af_is_field_plus_gradient() {
        let e = Manifold::Euclidean(2);
        let p = MVIProblem::new(
            VectorField::single(e, "rot", |x| Vector::from_vec(vec![-x.coords()[1], x.coords()[0]])),
            ConstraintSet::ball(Manifold::Euclidean(2), pt(&[0.0, 0.0]), 1.0).unwrap(),
            |x| 0.5 * x.coords().norm_squared(),
            |x| vec![x.coords().clone()],
        )
        .unwrap();
        let f = build_mvip_bifunction(&p);
        let x = pt(&[0.3, 0.4]);
        let fd = f.clone().smooth().fd_gradient(&x);
        assert_abs_diff_eq!(fd[0], -0.4 + 0.3, epsilon = 1e-6);
        assert_abs_diff_eq!(fd[1], 0.3 + 0.4, epsilon = 1e-6);
        assert_abs_diff_eq!(&f.subgradient_components(&x).unwrap()[0], &fd, epsilon = 1e-6);
    }

    #[test]
    fn infinite_f_on_q_is_rejected() {
        let e = Manifold::Euclidean(1);
        let r = MVIProblem::new(
            VectorField::single(e, "zero", |_| Vector::zeros(1)),
            ConstraintSet::interval(-1.0, 1.0).unwrap(),
            |x| if x.coords()[0] > 0.0 { f64::INFINITY } else { 0.0 },
            |_| vec![Vector::zeros(1)],
        );
        assert!(r.is_err());
    }
}
