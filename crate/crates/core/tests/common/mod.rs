//! Test instances shared by the acceptance harness and the property tests.
#![allow(dead_code)]

use riemann_ep::bifunction::{
    gv_bifunction, optimization_bifunction, optimization_bifunction_with_gradient, Bifunction,
    VectorField,
};
use riemann_ep::manifold::{hyperbolic_lift, Manifold, ManifoldPoint, Vector};
use riemann_ep::sets::ConstraintSet;

pub fn pt(c: &[f64]) -> ManifoldPoint {
    ManifoldPoint::from_slice(c)
}

pub fn north() -> ManifoldPoint {
    pt(&[0.0, 0.0, 1.0])
}

/// `normalize(0.2, 0, 1)`.
pub fn tilted() -> Vector {
    Vector::from_vec(vec![0.2, 0.0, 1.0]).normalize()
}

pub fn h2(t1: f64, t2: f64) -> ManifoldPoint {
    ManifoldPoint::new(hyperbolic_lift(t1, t2))
}

pub fn families() -> Vec<(&'static str, Manifold)> {
    vec![
        ("euclidean(3)", Manifold::Euclidean(3)),
        ("sphere2", Manifold::Sphere2),
        ("hyperbolic2", Manifold::Hyperbolic2),
        (
            "product(euclidean(1),sphere2,hyperbolic2)",
            Manifold::product(vec![Manifold::Euclidean(1), Manifold::Sphere2, Manifold::Hyperbolic2]),
        ),
    ]
}

/// Riemannian gradient of `x ↦ −⟨a, x⟩` on S²: `−(a − ⟨a,x⟩x)`.
pub fn sphere_linear_gradient(a: Vector) -> VectorField {
    VectorField::single(Manifold::Sphere2, "grad(-<a,x>)", move |x| {
        let x = x.coords();
        -(&a - x * a.dot(x))
    })
}

/// `F(x,y) = ⟨x, y − x⟩` on ℝ².
pub fn identity_gv() -> Bifunction {
    gv_bifunction(&VectorField::single(Manifold::Euclidean(2), "id", |x| x.coords().clone()))
}

pub fn unit_disc() -> ConstraintSet {
    ConstraintSet::ball(Manifold::Euclidean(2), pt(&[0.0, 0.0]), 1.0).unwrap()
}

pub fn half_norm_squared(n: usize) -> Bifunction {
    optimization_bifunction_with_gradient(
        &Manifold::Euclidean(n),
        "half-norm-squared",
        |x| 0.5 * x.coords().norm_squared(),
        |x| x.coords().clone(),
    )
}

/// `f = d(·, p)²` on H², geodesically convex.
pub fn hyperbolic_distance_squared(p: ManifoldPoint) -> Bifunction {
    let m = Manifold::Hyperbolic2;
    optimization_bifunction(&m.clone(), "hyperbolic-d2", move |x| m.distance(x, &p).powi(2))
}

/// Monotone affine field `V(x) = A(x − b)` on ℝ² with `A = [[1, −2], [2, 1]]`.
pub fn affine_field(b: [f64; 2]) -> VectorField {
    VectorField::single(Manifold::Euclidean(2), "affine", move |x| {
        let (u, v) = (x.coords()[0] - b[0], x.coords()[1] - b[1]);
        Vector::from_vec(vec![u - 2.0 * v, 2.0 * u + v])
    })
}
