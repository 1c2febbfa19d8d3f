//! Unit sphere S² embedded in ℝ³.

use std::f64::consts::PI;

use super::{LeafLog, Vector, ANTIPODAL_TOL};
use crate::error::{Error, Result};

pub(super) fn violation(x: &Vector) -> f64 {
    (x.norm() - 1.0).abs()
}

pub(super) fn normalize(x: &Vector) -> Vector {
    x / x.norm()
}

pub(super) fn tangent_violation(x: &Vector, v: &Vector) -> f64 {
    x.dot(v).abs()
}

pub(super) fn project_tangent(x: &Vector, v: &Vector) -> Vector {
    v - x * x.dot(v)
}

pub(super) fn exp(x: &Vector, v: &Vector) -> Vector {
    let theta = v.norm();
    if theta == 0.0 {
        return x.clone();
    }
    let y = x * theta.cos() + v * (theta.sin() / theta);
    normalize(&y)
}

pub(super) fn distance(x: &Vector, y: &Vector) -> f64 {
    let cross = cross3(x, y);
    cross.norm().atan2(x.dot(y))
}

pub(super) fn log(x: &Vector, y: &Vector) -> LeafLog {
    if x == y {
        return LeafLog::Unique(Vector::zeros(3));
    }
    let dot = x.dot(y);
    let w = y - x * dot;
    let nw = w.norm();
    let theta = nw.atan2(dot);
    if PI - theta < ANTIPODAL_TOL {
        let [e1, e2] = tangent_basis(x);
        return LeafLog::Circle {
            basis: [e1, e2],
            radius: PI,
        };
    }
    if nw == 0.0 {
        return LeafLog::Unique(Vector::zeros(3));
    }
    LeafLog::Unique(w * (theta / nw))
}

/// Transport along the minimal great-circle arc from `x` to `y`: the component of `v`
/// along the arc direction rotates in the plane of the arc, the normal component is fixed.
pub(super) fn transport(x: &Vector, y: &Vector, v: &Vector) -> Result<Vector> {
    let u = match log(x, y) {
        LeafLog::Unique(u) => u,
        LeafLog::Circle { .. } => return Err(Error::Antipodal),
    };
    let theta = u.norm();
    if theta == 0.0 {
        return Ok(project_tangent(y, v));
    }
    let e = &u / theta;
    let along = e.dot(v);
    let moved = v + (&e * (theta.cos() - 1.0) - x * theta.sin()) * along;
    Ok(project_tangent(y, &moved))
}

/// Orthonormal basis of the tangent plane at `x`.
pub(super) fn tangent_basis(x: &Vector) -> [Vector; 2] {
    let a = if x[0].abs() > 0.9 {
        Vector::from_vec(vec![0.0, 1.0, 0.0])
    } else {
        Vector::from_vec(vec![1.0, 0.0, 0.0])
    };
    let e1 = project_tangent(x, &a).normalize();
    let e2 = cross3(x, &e1).normalize();
    [e1, e2]
}

pub(super) fn cross3(a: &Vector, b: &Vector) -> Vector {
    Vector::from_vec(vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])
}
