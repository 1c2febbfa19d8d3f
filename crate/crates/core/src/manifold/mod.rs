//! Geometry kernel for the supported manifold families.
//!
//! Points and tangent vectors are stored in ambient coordinates: ℝⁿ for Euclidean
//! space, unit vectors of ℝ³ for the sphere S², the upper hyperboloid sheet of ℝ³
//! for the hyperbolic plane H², and concatenations of factor coordinates for
//! products. Every operation is a pure function of its arguments.
//!
//! The inverse exponential map is multivalued in general. [`Manifold::log_min`]
//! returns the full set of minimal-geodesic directions as a [`MinimalLog`]; on the
//! sphere an antipodal pair yields a degenerate circle of directions which the
//! supremum helpers maximize over analytically.

mod hyperbolic;
mod sphere;

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};

pub use hyperbolic::lift as hyperbolic_lift;

/// Ambient coordinate vector.
pub type Vector = DVector<f64>;

/// Angular distance from π below which a sphere pair is treated as antipodal.
pub const ANTIPODAL_TOL: f64 = 1e-9;

/// Accepted constraint violation for externally supplied points before projection back.
pub const INPUT_TOL: f64 = 1e-8;

/// Tangency tolerance, relative to `max(1, |v|)`.
pub const TANGENT_TOL: f64 = 1e-10;

/// `D_κ = π/√κ` for `κ > 0`, `+∞` otherwise.
pub fn d_kappa(kappa: f64) -> f64 {
    if kappa > 0.0 {
        PI / kappa.sqrt()
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldPoint {
    coords: Vector,
}

impl ManifoldPoint {
    /// Wraps coordinates without validation; see [`Manifold::point`].
    pub fn new(coords: Vector) -> Self {
        Self { coords }
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Self::new(Vector::from_column_slice(coords))
    }

    pub fn coords(&self) -> &Vector {
        &self.coords
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }

    pub fn into_coords(self) -> Vector {
        self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

impl fmt::Display for ManifoldPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    base: ManifoldPoint,
    components: Vector,
}

impl TangentVector {
    /// Wraps components without validation; see [`Manifold::tangent`].
    pub fn new(base: ManifoldPoint, components: Vector) -> Self {
        Self { base, components }
    }

    pub fn zero(base: &ManifoldPoint) -> Self {
        Self::new(base.clone(), Vector::zeros(base.len()))
    }

    pub fn base(&self) -> &ManifoldPoint {
        &self.base
    }

    pub fn components(&self) -> &Vector {
        &self.components
    }

    pub fn into_components(self) -> Vector {
        self.components
    }

    pub fn scale(&self, t: f64) -> Self {
        Self::new(self.base.clone(), &self.components * t)
    }
}

/// One leaf block of a minimal-log set.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum LeafLog {
    Unique(Vector),
    Circle { basis: [Vector; 2], radius: f64 },
}

/// The full circle `{radius·(cos θ e₁ + sin θ e₂)}` of minimal directions on a sphere
/// factor, stored in the coordinates of that factor.
#[derive(Clone, Debug, PartialEq)]
pub struct DegenerateCircle {
    pub range: Range<usize>,
    pub basis: [Vector; 2],
    pub radius: f64,
}

impl DegenerateCircle {
    fn plane_norm(&self, block: &Vector) -> f64 {
        let a = self.basis[0].dot(block);
        let b = self.basis[1].dot(block);
        a.hypot(b)
    }
}

/// The set `exp_x⁻¹ y` restricted to minimal geodesics.
///
/// Non-degenerate factors contribute one vector; antipodal sphere factors contribute a
/// [`DegenerateCircle`]. The representative uses `radius·e₁` on each circle.
#[derive(Clone, Debug, PartialEq)]
pub struct MinimalLog {
    base: ManifoldPoint,
    representative: Vector,
    circles: Vec<DegenerateCircle>,
}

impl MinimalLog {
    pub fn base(&self) -> &ManifoldPoint {
        &self.base
    }

    pub fn is_degenerate(&self) -> bool {
        !self.circles.is_empty()
    }

    pub fn circles(&self) -> &[DegenerateCircle] {
        &self.circles
    }

    /// One element of the set.
    pub fn representative(&self) -> TangentVector {
        TangentVector::new(self.base.clone(), self.representative.clone())
    }

    pub fn representative_components(&self) -> &Vector {
        &self.representative
    }

    /// The single element when the set is a singleton.
    pub fn unique(&self) -> Option<TangentVector> {
        if self.is_degenerate() {
            None
        } else {
            Some(self.representative())
        }
    }

    /// `k` evenly spaced elements per degenerate circle (all combinations), or the
    /// singleton.
    pub fn sample(&self, k: usize) -> Vec<TangentVector> {
        let mut out = vec![self.representative.clone()];
        for circle in &self.circles {
            let mut next = Vec::with_capacity(out.len() * k);
            for v in &out {
                for j in 0..k.max(1) {
                    let angle = 2.0 * PI * j as f64 / k.max(1) as f64;
                    let dir = &circle.basis[0] * angle.cos() + &circle.basis[1] * angle.sin();
                    let mut w = v.clone();
                    w.rows_mut(circle.range.start, circle.range.len())
                        .copy_from(&(dir * circle.radius));
                    next.push(w);
                }
            }
            out = next;
        }
        out.into_iter()
            .map(|c| TangentVector::new(self.base.clone(), c))
            .collect()
    }

    /// `sup_{v ∈ set} ⟨u, v⟩_x`.
    pub fn support(&self, m: &Manifold, u: &Vector) -> f64 {
        let mut value = m.inner_at(self.base.coords(), u, &self.representative);
        for c in &self.circles {
            let ub = u.rows(c.range.start, c.range.len()).into_owned();
            let rb = self.representative.rows(c.range.start, c.range.len());
            value += c.radius * c.plane_norm(&ub) - ub.dot(&rb);
        }
        value
    }
}

/// `sup_{a ∈ sign·A, b ∈ B} ⟨a, b⟩_x` for two minimal-log sets at the same base point.
///
/// The sum splits over factors; a circle paired with a vector contributes
/// `radius · |vector|`, two circles contribute the product of radii.
pub fn sup_pairing(m: &Manifold, a: &MinimalLog, sign: f64, b: &MinimalLog) -> f64 {
    let x = a.base.coords();
    let mut value = sign * m.inner_at(x, &a.representative, &b.representative);
    let mut starts: Vec<usize> = a
        .circles
        .iter()
        .chain(b.circles.iter())
        .map(|c| c.range.start)
        .collect();
    starts.sort_unstable();
    starts.dedup();
    for start in starts {
        let ca = a.circles.iter().find(|c| c.range.start == start);
        let cb = b.circles.iter().find(|c| c.range.start == start);
        let range = ca.or(cb).map(|c| c.range.clone()).unwrap_or(start..start);
        let ra = a.representative.rows(range.start, range.len()).into_owned();
        let rb = b.representative.rows(range.start, range.len()).into_owned();
        value -= sign * ra.dot(&rb);
        value += match (ca, cb) {
            (Some(ca), Some(cb)) => ca.radius * cb.radius,
            (Some(ca), None) => ca.radius * ca.plane_norm(&rb),
            (None, Some(cb)) => cb.radius * cb.plane_norm(&ra),
            (None, None) => unreachable!(),
        };
    }
    value
}

/// A geodesic `γ(t) = exp(start, t·velocity)`, `t ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicSegment {
    manifold: Manifold,
    velocity: TangentVector,
    minimal: bool,
}

impl GeodesicSegment {
    pub fn new(manifold: Manifold, velocity: TangentVector, minimal: bool) -> Self {
        Self {
            manifold,
            velocity,
            minimal,
        }
    }

    pub fn start(&self) -> &ManifoldPoint {
        self.velocity.base()
    }

    pub fn initial_velocity(&self) -> &TangentVector {
        &self.velocity
    }

    pub fn is_minimal(&self) -> bool {
        self.minimal
    }

    pub fn at(&self, t: f64) -> ManifoldPoint {
        self.manifold
            .exp_unchecked(self.start(), &(self.velocity.components() * t))
    }

    pub fn end(&self) -> ManifoldPoint {
        self.at(1.0)
    }

    /// Velocity γ̇(1), the initial velocity transported to the end point.
    pub fn end_velocity(&self) -> Vector {
        let end = self.end();
        self.manifold
            .transport_unchecked(self.start(), &end, self.velocity.components())
            .unwrap_or_else(|_| Vector::zeros(end.len()))
    }

    pub fn length(&self) -> f64 {
        self.manifold
            .norm_at(self.start().coords(), self.velocity.components())
    }
}

/// Supported manifold families.
#[derive(Clone, Debug, PartialEq)]
pub enum Manifold {
    /// ℝⁿ.
    Euclidean(usize),
    /// The unit sphere in ℝ³.
    Sphere2,
    /// The hyperbolic plane, hyperboloid model in ℝ³.
    Hyperbolic2,
    /// Finite product with the product Riemannian metric.
    Product(Vec<Manifold>),
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Manifold::Euclidean(n) => write!(f, "euclidean({n})"),
            Manifold::Sphere2 => write!(f, "sphere2"),
            Manifold::Hyperbolic2 => write!(f, "hyperbolic2"),
            Manifold::Product(fs) => {
                write!(f, "product([")?;
                for (i, m) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{m}")?;
                }
                write!(f, "])")
            }
        }
    }
}

impl Manifold {
    pub fn product(factors: Vec<Manifold>) -> Self {
        Manifold::Product(factors)
    }

    /// Size of the ambient coordinate vector.
    pub fn ambient_dim(&self) -> usize {
        match self {
            Manifold::Euclidean(n) => *n,
            Manifold::Sphere2 | Manifold::Hyperbolic2 => 3,
            Manifold::Product(fs) => fs.iter().map(Manifold::ambient_dim).sum(),
        }
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match self {
            Manifold::Euclidean(n) => *n,
            Manifold::Sphere2 | Manifold::Hyperbolic2 => 2,
            Manifold::Product(fs) => fs.iter().map(Manifold::dim).sum(),
        }
    }

    /// Upper bound κ ≥ 0 on sectional curvature (0 for flat and hyperbolic factors).
    pub fn curvature_upper_bound(&self) -> f64 {
        match self {
            Manifold::Euclidean(_) | Manifold::Hyperbolic2 => 0.0,
            Manifold::Sphere2 => 1.0,
            Manifold::Product(fs) => fs
                .iter()
                .map(Manifold::curvature_upper_bound)
                .fold(0.0, f64::max),
        }
    }

    pub fn d_kappa(&self) -> f64 {
        d_kappa(self.curvature_upper_bound())
    }

    /// Nonpositive curvature everywhere (no sphere factor).
    pub fn is_hadamard(&self) -> bool {
        self.curvature_upper_bound() == 0.0
    }

    /// Convexity radius at `x`. Constant for every supported family.
    pub fn convexity_radius(&self, _x: &ManifoldPoint) -> f64 {
        self.convexity_radius_const()
    }

    fn convexity_radius_const(&self) -> f64 {
        match self {
            Manifold::Euclidean(_) | Manifold::Hyperbolic2 => f64::INFINITY,
            Manifold::Sphere2 => PI / 2.0,
            Manifold::Product(fs) => fs
                .iter()
                .map(Manifold::convexity_radius_const)
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Immediate factors with their coordinate ranges; a non-product is its own single
    /// factor.
    pub fn factors(&self) -> Vec<(&Manifold, Range<usize>)> {
        match self {
            Manifold::Product(fs) => {
                let mut start = 0;
                fs.iter()
                    .map(|m| {
                        let n = m.ambient_dim();
                        let r = start..start + n;
                        start += n;
                        (m, r)
                    })
                    .collect()
            }
            other => vec![(other, 0..other.ambient_dim())],
        }
    }

    pub fn split(&self, x: &Vector) -> Vec<Vector> {
        self.factors()
            .into_iter()
            .map(|(_, r)| x.rows(r.start, r.len()).into_owned())
            .collect()
    }

    pub fn join(parts: &[Vector]) -> Vector {
        let data: Vec<f64> = parts.iter().flat_map(|p| p.iter().copied()).collect();
        Vector::from_vec(data)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        let expected = self.ambient_dim();
        if len != expected {
            return Err(Error::DimensionMismatch { expected, got: len });
        }
        Ok(())
    }

    /// Constraint violation of ambient coordinates.
    pub fn point_violation(&self, x: &Vector) -> f64 {
        match self {
            Manifold::Euclidean(_) => {
                if x.iter().all(|c| c.is_finite()) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Manifold::Sphere2 => sphere::violation(x),
            Manifold::Hyperbolic2 => hyperbolic::violation(x),
            Manifold::Product(_) => self.map_factors_max(x, |m, xi| m.point_violation(xi)),
        }
    }

    fn map_factors_max(&self, x: &Vector, f: impl Fn(&Manifold, &Vector) -> f64) -> f64 {
        self.factors()
            .into_iter()
            .map(|(m, r)| f(m, &x.rows(r.start, r.len()).into_owned()))
            .fold(0.0, f64::max)
    }

    fn map_factors(&self, x: &Vector, f: impl Fn(&Manifold, &Vector) -> Vector) -> Vector {
        let parts: Vec<Vector> = self
            .factors()
            .into_iter()
            .map(|(m, r)| f(m, &x.rows(r.start, r.len()).into_owned()))
            .collect();
        Manifold::join(&parts)
    }

    fn map_factors2(
        &self,
        x: &Vector,
        v: &Vector,
        f: impl Fn(&Manifold, &Vector, &Vector) -> Vector,
    ) -> Vector {
        let parts: Vec<Vector> = self
            .factors()
            .into_iter()
            .map(|(m, r)| {
                f(
                    m,
                    &x.rows(r.start, r.len()).into_owned(),
                    &v.rows(r.start, r.len()).into_owned(),
                )
            })
            .collect();
        Manifold::join(&parts)
    }

    /// Re-imposes the point constraint after floating-point arithmetic.
    pub fn normalize(&self, x: &Vector) -> Vector {
        match self {
            Manifold::Euclidean(_) => x.clone(),
            Manifold::Sphere2 => sphere::normalize(x),
            Manifold::Hyperbolic2 => hyperbolic::normalize(x),
            Manifold::Product(_) => self.map_factors(x, |m, xi| m.normalize(xi)),
        }
    }

    /// Validates coordinates (within [`INPUT_TOL`]) and projects them back onto the
    /// manifold.
    pub fn point(&self, coords: &[f64]) -> Result<ManifoldPoint> {
        self.check_len(coords.len())?;
        let x = Vector::from_column_slice(coords);
        let violation = self.point_violation(&x);
        if !(violation <= INPUT_TOL) {
            return Err(Error::NotOnManifold(violation));
        }
        Ok(ManifoldPoint::new(self.normalize(&x)))
    }

    pub fn check_point(&self, x: &ManifoldPoint) -> Result<()> {
        self.check_len(x.len())?;
        let violation = self.point_violation(x.coords());
        if !(violation <= INPUT_TOL) {
            return Err(Error::NotOnManifold(violation));
        }
        Ok(())
    }

    pub fn tangent_violation(&self, x: &Vector, v: &Vector) -> f64 {
        match self {
            Manifold::Euclidean(_) => 0.0,
            Manifold::Sphere2 => sphere::tangent_violation(x, v),
            Manifold::Hyperbolic2 => hyperbolic::tangent_violation(x, v),
            Manifold::Product(_) => self
                .factors()
                .into_iter()
                .map(|(m, r)| {
                    m.tangent_violation(
                        &x.rows(r.start, r.len()).into_owned(),
                        &v.rows(r.start, r.len()).into_owned(),
                    )
                })
                .fold(0.0, f64::max),
        }
    }

    /// Builds a tangent vector at `x`, rejecting components that leave the tangent space.
    pub fn tangent(&self, x: &ManifoldPoint, components: &[f64]) -> Result<TangentVector> {
        self.check_len(components.len())?;
        let v = Vector::from_column_slice(components);
        let violation = self.tangent_violation(x.coords(), &v);
        if violation > TANGENT_TOL * v.norm().max(1.0) {
            return Err(Error::NotTangent(violation));
        }
        Ok(TangentVector::new(x.clone(), v))
    }

    /// Orthogonal projection of ambient components onto the tangent space at `x`.
    pub fn project_tangent(&self, x: &Vector, v: &Vector) -> Vector {
        match self {
            Manifold::Euclidean(_) => v.clone(),
            Manifold::Sphere2 => sphere::project_tangent(x, v),
            Manifold::Hyperbolic2 => hyperbolic::project_tangent(x, v),
            Manifold::Product(_) => self.map_factors2(x, v, |m, xi, vi| m.project_tangent(xi, vi)),
        }
    }

    /// Riemannian inner product on the tangent space at `x` (Minkowski form on
    /// hyperbolic factors).
    pub fn inner_at(&self, x: &Vector, u: &Vector, v: &Vector) -> f64 {
        match self {
            Manifold::Euclidean(_) | Manifold::Sphere2 => u.dot(v),
            Manifold::Hyperbolic2 => hyperbolic::minkowski(u, v),
            Manifold::Product(_) => self
                .factors()
                .into_iter()
                .map(|(m, r)| {
                    m.inner_at(
                        &x.rows(r.start, r.len()).into_owned(),
                        &u.rows(r.start, r.len()).into_owned(),
                        &v.rows(r.start, r.len()).into_owned(),
                    )
                })
                .sum(),
        }
    }

    pub fn norm_at(&self, x: &Vector, v: &Vector) -> f64 {
        self.inner_at(x, v, v).max(0.0).sqrt()
    }

    pub fn inner(&self, u: &TangentVector, v: &TangentVector) -> Result<f64> {
        if !same_base(u.base(), v.base()) {
            return Err(Error::BaseMismatch);
        }
        Ok(self.inner_at(u.base().coords(), u.components(), v.components()))
    }

    pub fn norm(&self, v: &TangentVector) -> f64 {
        self.norm_at(v.base().coords(), v.components())
    }

    /// Orthonormal basis of `T_x M` by Gram–Schmidt on projected ambient unit vectors.
    pub fn tangent_basis(&self, x: &ManifoldPoint) -> Vec<Vector> {
        let n = self.ambient_dim();
        let xs = x.coords();
        let mut basis: Vec<Vector> = Vec::with_capacity(self.dim());
        for i in 0..n {
            if basis.len() == self.dim() {
                break;
            }
            let mut e = Vector::zeros(n);
            e[i] = 1.0;
            let mut w = self.project_tangent(xs, &e);
            for b in &basis {
                let c = self.inner_at(xs, &w, b);
                w -= b * c;
            }
            let nw = self.norm_at(xs, &w);
            if nw > 1e-8 {
                basis.push(w / nw);
            }
        }
        basis
    }

    pub fn exp(&self, x: &ManifoldPoint, v: &TangentVector) -> Result<ManifoldPoint> {
        self.check_len(x.len())?;
        self.check_len(v.components().len())?;
        if !same_base(x, v.base()) {
            return Err(Error::BaseMismatch);
        }
        let violation = self.tangent_violation(x.coords(), v.components());
        if violation > TANGENT_TOL * v.components().norm().max(1.0) {
            return Err(Error::NotTangent(violation));
        }
        Ok(self.exp_unchecked(x, v.components()))
    }

    /// Exponential map without validation; the result is projected back onto the
    /// manifold.
    pub fn exp_unchecked(&self, x: &ManifoldPoint, v: &Vector) -> ManifoldPoint {
        ManifoldPoint::new(self.exp_vec(x.coords(), v))
    }

    fn exp_vec(&self, x: &Vector, v: &Vector) -> Vector {
        match self {
            Manifold::Euclidean(_) => x + v,
            Manifold::Sphere2 => sphere::exp(x, v),
            Manifold::Hyperbolic2 => hyperbolic::exp(x, v),
            Manifold::Product(_) => self.map_factors2(x, v, |m, xi, vi| m.exp_vec(xi, vi)),
        }
    }

    /// All initial velocities of minimal geodesics from `x` to `y`.
    pub fn log_min(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<MinimalLog> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        Ok(self.log_unchecked(x, y))
    }

    pub fn log_unchecked(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> MinimalLog {
        let mut representative = Vector::zeros(x.len());
        let mut circles = Vec::new();
        self.log_into(x.coords(), y.coords(), 0, &mut representative, &mut circles);
        MinimalLog {
            base: x.clone(),
            representative,
            circles,
        }
    }

    fn log_into(
        &self,
        x: &Vector,
        y: &Vector,
        offset: usize,
        rep: &mut Vector,
        circles: &mut Vec<DegenerateCircle>,
    ) {
        let leaf = match self {
            Manifold::Euclidean(_) => LeafLog::Unique(y - x),
            Manifold::Sphere2 => sphere::log(x, y),
            Manifold::Hyperbolic2 => LeafLog::Unique(hyperbolic::log(x, y)),
            Manifold::Product(_) => {
                for (m, r) in self.factors() {
                    m.log_into(
                        &x.rows(r.start, r.len()).into_owned(),
                        &y.rows(r.start, r.len()).into_owned(),
                        offset + r.start,
                        rep,
                        circles,
                    );
                }
                return;
            }
        };
        let n = x.len();
        match leaf {
            LeafLog::Unique(u) => rep.rows_mut(offset, n).copy_from(&u),
            LeafLog::Circle { basis, radius } => {
                rep.rows_mut(offset, n).copy_from(&(&basis[0] * radius));
                circles.push(DegenerateCircle {
                    range: offset..offset + n,
                    basis,
                    radius,
                });
            }
        }
    }

    /// Representative minimal-log components (first element of [`Manifold::log_min`]).
    pub fn log_vec(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> Vector {
        self.log_unchecked(x, y).representative
    }

    pub fn distance(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> f64 {
        self.distance_vec(x.coords(), y.coords())
    }

    fn distance_vec(&self, x: &Vector, y: &Vector) -> f64 {
        match self {
            Manifold::Euclidean(_) => (y - x).norm(),
            Manifold::Sphere2 => sphere::distance(x, y),
            Manifold::Hyperbolic2 => hyperbolic::distance(x, y),
            Manifold::Product(_) => self
                .factors()
                .into_iter()
                .map(|(m, r)| {
                    m.distance_vec(
                        &x.rows(r.start, r.len()).into_owned(),
                        &y.rows(r.start, r.len()).into_owned(),
                    )
                    .powi(2)
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Parallel transport of `v ∈ T_x M` to `T_y M` along the minimal geodesic.
    pub fn parallel_transport(
        &self,
        x: &ManifoldPoint,
        y: &ManifoldPoint,
        v: &TangentVector,
    ) -> Result<TangentVector> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        if !same_base(x, v.base()) {
            return Err(Error::BaseMismatch);
        }
        let w = self.transport_unchecked(x, y, v.components())?;
        Ok(TangentVector::new(y.clone(), w))
    }

    pub fn transport_unchecked(
        &self,
        x: &ManifoldPoint,
        y: &ManifoldPoint,
        v: &Vector,
    ) -> Result<Vector> {
        self.transport_vec(x.coords(), y.coords(), v)
    }

    fn transport_vec(&self, x: &Vector, y: &Vector, v: &Vector) -> Result<Vector> {
        match self {
            Manifold::Euclidean(_) => Ok(v.clone()),
            Manifold::Sphere2 => sphere::transport(x, y, v),
            Manifold::Hyperbolic2 => Ok(hyperbolic::transport(x, y, v)),
            Manifold::Product(_) => {
                let mut parts = Vec::new();
                for (m, r) in self.factors() {
                    parts.push(m.transport_vec(
                        &x.rows(r.start, r.len()).into_owned(),
                        &y.rows(r.start, r.len()).into_owned(),
                        &v.rows(r.start, r.len()).into_owned(),
                    )?);
                }
                Ok(Manifold::join(&parts))
            }
        }
    }

    /// Minimal geodesic from `x` to `y` (a representative when several exist).
    pub fn geodesic(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<GeodesicSegment> {
        let log = self.log_min(x, y)?;
        Ok(GeodesicSegment::new(self.clone(), log.representative(), true))
    }

    /// Random point: uniform on spheres, within `spread` of the origin elsewhere.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R, spread: f64) -> ManifoldPoint {
        ManifoldPoint::new(self.random_vec(rng, spread))
    }

    fn random_vec<R: Rng + ?Sized>(&self, rng: &mut R, spread: f64) -> Vector {
        match self {
            Manifold::Euclidean(n) => {
                Vector::from_fn(*n, |_, _| rng.gen_range(-spread..=spread))
            }
            Manifold::Sphere2 => loop {
                let v = Vector::from_fn(3, |_, _| rng.gen_range(-1.0..=1.0));
                let n = v.norm();
                if n > 0.1 && n <= 1.0 {
                    break v / n;
                }
            },
            Manifold::Hyperbolic2 => {
                let r = spread * rng.gen::<f64>().sqrt();
                let a = rng.gen_range(0.0..2.0 * PI);
                let o = Vector::from_vec(vec![1.0, 0.0, 0.0]);
                let v = Vector::from_vec(vec![0.0, r * a.cos(), r * a.sin()]);
                hyperbolic::exp(&o, &v)
            }
            Manifold::Product(fs) => {
                let parts: Vec<Vector> = fs.iter().map(|m| m.random_vec(rng, spread)).collect();
                Manifold::join(&parts)
            }
        }
    }

    /// Random tangent vector at `x` with norm uniform in `[0, max_norm)`.
    pub fn random_tangent<R: Rng + ?Sized>(
        &self,
        x: &ManifoldPoint,
        rng: &mut R,
        max_norm: f64,
    ) -> TangentVector {
        let basis = self.tangent_basis(x);
        let mut dir = Vector::zeros(x.len());
        loop {
            dir.fill(0.0);
            for b in &basis {
                dir += b * rng.gen_range(-1.0..=1.0);
            }
            if self.norm_at(x.coords(), &dir) > 1e-3 {
                break;
            }
        }
        let n = self.norm_at(x.coords(), &dir);
        let len = rng.gen::<f64>() * max_norm;
        TangentVector::new(x.clone(), dir * (len / n))
    }
}

/// Base points agree to within rounding.
pub fn same_base(a: &ManifoldPoint, b: &ManifoldPoint) -> bool {
    a.len() == b.len() && (a.coords() - b.coords()).amax() <= 1e-12 * a.coords().amax().max(1.0)
}
