//! Hyperbolic plane H² in hyperboloid coordinates: the upper sheet of
//! −t₀² + t₁² + t₂² = −1 in ℝ³ with the Minkowski form restricted to tangent planes.

use super::Vector;

pub(super) fn minkowski(a: &Vector, b: &Vector) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(super) fn violation(x: &Vector) -> f64 {
    let sheet = if x[0] > 0.0 { 0.0 } else { 1.0 };
    (minkowski(x, x) + 1.0).abs() + sheet
}

/// Lift back onto the upper sheet by recomputing the time coordinate.
pub(super) fn normalize(x: &Vector) -> Vector {
    let t0 = (1.0 + x[1] * x[1] + x[2] * x[2]).sqrt();
    Vector::from_vec(vec![t0, x[1], x[2]])
}

pub(super) fn tangent_violation(x: &Vector, v: &Vector) -> f64 {
    minkowski(x, v).abs()
}

pub(super) fn project_tangent(x: &Vector, v: &Vector) -> Vector {
    v + x * minkowski(x, v)
}

pub(super) fn norm(v: &Vector) -> f64 {
    minkowski(v, v).max(0.0).sqrt()
}

pub(super) fn exp(x: &Vector, v: &Vector) -> Vector {
    let n = norm(v);
    if n == 0.0 {
        return x.clone();
    }
    let y = x * n.cosh() + v * (n.sinh() / n);
    normalize(&y)
}

pub(super) fn distance(x: &Vector, y: &Vector) -> f64 {
    let diff = y - x;
    let chord = minkowski(&diff, &diff).max(0.0).sqrt();
    2.0 * (chord / 2.0).asinh()
}

pub(super) fn log(x: &Vector, y: &Vector) -> Vector {
    let d = distance(x, y);
    if d == 0.0 {
        return Vector::zeros(3);
    }
    let c = -minkowski(x, y);
    let w = y - x * c;
    let nw = norm(&w);
    if nw == 0.0 {
        return Vector::zeros(3);
    }
    w * (d / nw)
}

pub(super) fn transport(x: &Vector, y: &Vector, v: &Vector) -> Vector {
    let c = -minkowski(x, y);
    let moved = v + (x + y) * (minkowski(y, v) / (1.0 + c));
    project_tangent(y, &moved)
}

/// Point of H² above the planar coordinates (t₁, t₂).
pub fn lift(t1: f64, t2: f64) -> Vector {
    normalize(&Vector::from_vec(vec![0.0, t1, t2]))
}
