//! Closed constraint sets `Q ⊆ M`: membership, metric projection and sampled checks
//! that geodesics stay inside.

mod sampling;

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::manifold::{GeodesicSegment, Manifold, ManifoldPoint, Vector};

pub use sampling::{Grid, SetSampler};

/// Boundary tolerance for membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// Default number of interior samples in [`ConstraintSet::geodesic_within`].
pub const GEODESIC_SAMPLES: usize = 64;

const CAP_MAX_SWEEPS: usize = 50;
const CAP_TOL: f64 = 1e-9;

/// `⟨normal, x⟩ ≤ offset` on the sphere's ambient coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfSpace {
    pub normal: Vector,
    pub offset: f64,
}

impl HalfSpace {
    /// Normalizes `normal`; `offset` is rescaled accordingly.
    pub fn new(normal: &[f64], offset: f64) -> Result<Self> {
        let n = Vector::from_column_slice(normal);
        let len = n.norm();
        if normal.len() != 3 || !(len > 0.0) {
            return Err(Error::InvalidSet(
                "half-space normal must be a nonzero 3-vector".into(),
            ));
        }
        Ok(Self {
            normal: n / len,
            offset: offset / len,
        })
    }

    fn value(&self, x: &Vector) -> f64 {
        self.normal.dot(x) - self.offset
    }

    /// Nearest point of the sphere region `⟨a, x⟩ ≤ b` to `x`.
    fn project(&self, x: &Vector) -> Vector {
        let along = self.normal.dot(x);
        if along <= self.offset {
            return x.clone();
        }
        let b = self.offset.clamp(-1.0, 1.0);
        let mut w = x - &self.normal * along;
        if w.norm() < 1e-14 {
            let helper = if self.normal[0].abs() > 0.9 {
                Vector::from_vec(vec![0.0, 1.0, 0.0])
            } else {
                Vector::from_vec(vec![1.0, 0.0, 0.0])
            };
            w = &helper - &self.normal * self.normal.dot(&helper);
        }
        let w = w.normalize();
        let y = &self.normal * b + w * (1.0 - b * b).max(0.0).sqrt();
        y.normalize()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SetKind {
    WholeManifold,
    /// `[lo, hi] ⊂ ℝ`.
    Interval { lo: f64, hi: f64 },
    /// Axis-aligned box in ℝⁿ.
    EuclideanBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Closed geodesic ball, radius below the convexity radius.
    MetricBall { center: ManifoldPoint, radius: f64 },
    /// Intersection of S² with closed half-spaces.
    SphericalCap { constraints: Vec<HalfSpace> },
    Product(Vec<ConstraintSet>),
}

/// Result of a metric projection; `exact` is false for the cyclic cap projection.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub point: ManifoldPoint,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSet {
    manifold: Manifold,
    kind: SetKind,
    weak_pole: Option<ManifoldPoint>,
}

impl ConstraintSet {
    pub fn whole(manifold: Manifold) -> Self {
        Self {
            manifold,
            kind: SetKind::WholeManifold,
            weak_pole: None,
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidSet(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(Self {
            manifold: Manifold::Euclidean(1),
            kind: SetKind::Interval { lo, hi },
            weak_pole: None,
        })
    }

    pub fn euclidean_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidSet("box bounds must have equal nonzero length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidSet("box bounds must satisfy lo <= hi".into()));
        }
        Ok(Self {
            manifold: Manifold::Euclidean(lo.len()),
            kind: SetKind::EuclideanBox { lo, hi },
            weak_pole: None,
        })
    }

    pub fn ball(manifold: Manifold, center: ManifoldPoint, radius: f64) -> Result<Self> {
        manifold.check_point(&center)?;
        let limit = manifold.convexity_radius(&center);
        if !(radius > 0.0 && radius < limit) {
            return Err(Error::InvalidSet(format!(
                "ball radius {radius} must lie in (0, {limit}) (convexity radius)"
            )));
        }
        Ok(Self {
            manifold,
            kind: SetKind::MetricBall { center, radius },
            weak_pole: None,
        })
    }

    pub fn spherical_cap(constraints: Vec<HalfSpace>) -> Result<Self> {
        let set = Self {
            manifold: Manifold::Sphere2,
            kind: SetKind::SphericalCap { constraints },
            weak_pole: None,
        };
        let probe = set.project(&ManifoldPoint::from_slice(&[0.0, 0.0, 1.0]))?;
        if !set.contains(&probe.point) {
            return Err(Error::InvalidSet("spherical cap constraints look infeasible".into()));
        }
        Ok(set)
    }

    /// `{x ∈ S² : d(x, axis) ≤ angle}`.
    pub fn cap_around(axis: &[f64], angle: f64) -> Result<Self> {
        let a = HalfSpace::new(axis, 0.0)?;
        Self::spherical_cap(vec![HalfSpace {
            normal: -a.normal,
            offset: -angle.cos(),
        }])
    }

    pub fn product(factors: Vec<ConstraintSet>) -> Self {
        let manifold = Manifold::product(factors.iter().map(|s| s.manifold.clone()).collect());
        Self {
            manifold,
            kind: SetKind::Product(factors),
            weak_pole: None,
        }
    }

    /// Declares a weak pole; it must belong to the set.
    pub fn with_weak_pole(mut self, pole: ManifoldPoint) -> Result<Self> {
        self.manifold.check_point(&pole)?;
        if !self.contains(&pole) {
            return Err(Error::InvalidSet(format!("weak pole {pole} is not in the set")));
        }
        self.weak_pole = Some(pole);
        Ok(self)
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn weak_pole(&self) -> Option<&ManifoldPoint> {
        self.weak_pole.as_ref()
    }

    pub fn is_compact(&self) -> bool {
        match &self.kind {
            SetKind::WholeManifold => matches!(self.manifold, Manifold::Sphere2),
            SetKind::Product(fs) => fs.iter().all(ConstraintSet::is_compact),
            _ => true,
        }
    }

    /// False when some factor is a spherical cap, whose projection is cyclic.
    pub fn exact_projection(&self) -> bool {
        match &self.kind {
            SetKind::SphericalCap { .. } => false,
            SetKind::Product(fs) => fs.iter().all(ConstraintSet::exact_projection),
            _ => true,
        }
    }

    /// Every minimal geodesic between members stays inside (convex by construction).
    pub fn geodesically_convex(&self) -> bool {
        match &self.kind {
            SetKind::WholeManifold => self.manifold.is_hadamard(),
            SetKind::Interval { .. } | SetKind::EuclideanBox { .. } | SetKind::MetricBall { .. } => {
                true
            }
            SetKind::SphericalCap { .. } => false,
            SetKind::Product(fs) => fs.iter().all(ConstraintSet::geodesically_convex),
        }
    }

    pub fn contains(&self, x: &ManifoldPoint) -> bool {
        self.contains_with(x.coords(), MEMBERSHIP_TOL)
    }

    /// Membership in the set cut out by the strict versions of the defining
    /// inequalities (the open set whose closure this is).
    pub fn contains_strict(&self, x: &ManifoldPoint) -> bool {
        self.contains_with(x.coords(), -MEMBERSHIP_TOL)
    }

    fn contains_with(&self, x: &Vector, tol: f64) -> bool {
        if x.len() != self.manifold.ambient_dim() {
            return false;
        }
        match &self.kind {
            SetKind::WholeManifold => true,
            SetKind::Interval { lo, hi } => x[0] >= lo - tol && x[0] <= hi + tol,
            SetKind::EuclideanBox { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(c, (l, h))| *c >= l - tol && *c <= h + tol),
            SetKind::MetricBall { center, radius } => {
                self.manifold.distance(center, &ManifoldPoint::new(x.clone())) <= radius + tol
            }
            SetKind::SphericalCap { constraints } => {
                constraints.iter().all(|h| h.value(x) <= tol)
            }
            SetKind::Product(fs) => {
                let mut start = 0;
                fs.iter().all(|s| {
                    let n = s.manifold.ambient_dim();
                    let part = x.rows(start, n).into_owned();
                    start += n;
                    s.contains_with(&part, tol)
                })
            }
        }
    }

    /// Metric projection onto the set. Exact for intervals, boxes and balls; cyclic
    /// single-constraint projection for caps.
    pub fn project(&self, x: &ManifoldPoint) -> Result<Projection> {
        if x.len() != self.manifold.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.manifold.ambient_dim(),
                got: x.len(),
            });
        }
        let xs = x.coords();
        let (point, exact) = match &self.kind {
            SetKind::WholeManifold => (xs.clone(), true),
            SetKind::Interval { lo, hi } => (Vector::from_vec(vec![xs[0].clamp(*lo, *hi)]), true),
            SetKind::EuclideanBox { lo, hi } => (
                Vector::from_iterator(
                    xs.len(),
                    xs.iter().zip(lo.iter().zip(hi)).map(|(c, (l, h))| c.clamp(*l, *h)),
                ),
                true,
            ),
            SetKind::MetricBall { center, radius } => {
                let d = self.manifold.distance(center, x);
                if d <= *radius {
                    (xs.clone(), true)
                } else {
                    let u = self.manifold.log_vec(center, x);
                    let n = self.manifold.norm_at(center.coords(), &u);
                    let y = self.manifold.exp_unchecked(center, &(u * (radius / n)));
                    (y.into_coords(), true)
                }
            }
            SetKind::SphericalCap { constraints } => (project_cap(constraints, xs), false),
            SetKind::Product(fs) => {
                let mut parts = Vec::with_capacity(fs.len());
                let mut exact = true;
                let mut start = 0;
                for s in fs {
                    let n = s.manifold.ambient_dim();
                    let p = s.project(&ManifoldPoint::new(xs.rows(start, n).into_owned()))?;
                    exact &= p.exact;
                    parts.push(p.point.into_coords());
                    start += n;
                }
                (Manifold::join(&parts), exact)
            }
        };
        Ok(Projection {
            point: ManifoldPoint::new(point),
            exact,
        })
    }

    /// Projection point only.
    pub fn project_point(&self, x: &ManifoldPoint) -> Result<ManifoldPoint> {
        Ok(self.project(x)?.point)
    }

    /// Sampled check that `γ(t) ∈ Q` at `samples` evenly spaced interior times.
    pub fn geodesic_within(&self, gamma: &GeodesicSegment, samples: usize) -> bool {
        (1..=samples).all(|i| {
            let t = i as f64 / (samples + 1) as f64;
            self.contains(&gamma.at(t))
        })
    }

    /// Whether the minimal geodesic from `x` to `y` (representative) stays in the set,
    /// skipping the sampled check for geodesically convex sets.
    pub fn minimal_geodesic_inside(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> bool {
        if self.geodesically_convex() {
            return true;
        }
        let log = self.manifold.log_unchecked(x, y);
        if log.is_degenerate() {
            return log.sample(8).into_iter().any(|v| {
                self.geodesic_within(
                    &GeodesicSegment::new(self.manifold.clone(), v, true),
                    GEODESIC_SAMPLES,
                )
            });
        }
        let gamma = GeodesicSegment::new(self.manifold.clone(), log.representative(), true);
        self.geodesic_within(&gamma, GEODESIC_SAMPLES)
    }

    /// Chart centre used by samplers: the weak pole if declared, else an interior-ish
    /// point.
    pub(crate) fn anchor(&self) -> ManifoldPoint {
        if let Some(p) = &self.weak_pole {
            return p.clone();
        }
        match &self.kind {
            SetKind::WholeManifold => match &self.manifold {
                Manifold::Sphere2 => ManifoldPoint::from_slice(&[0.0, 0.0, 1.0]),
                Manifold::Hyperbolic2 => ManifoldPoint::from_slice(&[1.0, 0.0, 0.0]),
                m => ManifoldPoint::new(Vector::zeros(m.ambient_dim())),
            },
            SetKind::Interval { lo, hi } => ManifoldPoint::from_slice(&[(lo + hi) / 2.0]),
            SetKind::EuclideanBox { lo, hi } => ManifoldPoint::new(Vector::from_iterator(
                lo.len(),
                lo.iter().zip(hi).map(|(a, b)| (a + b) / 2.0),
            )),
            SetKind::MetricBall { center, .. } => center.clone(),
            SetKind::SphericalCap { constraints } => cap_anchor(constraints),
            SetKind::Product(fs) => {
                let parts: Vec<Vector> = fs.iter().map(|s| s.anchor().into_coords()).collect();
                ManifoldPoint::new(Manifold::join(&parts))
            }
        }
    }
}

fn project_cap(constraints: &[HalfSpace], x: &Vector) -> Vector {
    let mut y = x / x.norm();
    for _ in 0..CAP_MAX_SWEEPS {
        for h in constraints {
            y = h.project(&y);
        }
        if constraints.iter().all(|h| h.value(&y) <= CAP_TOL) {
            break;
        }
    }
    y
}

/// Normalized mean of a deterministic fibonacci-lattice sample of the cap.
fn cap_anchor(constraints: &[HalfSpace]) -> ManifoldPoint {
    let n = 4000;
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut sum = Vector::zeros(3);
    for i in 0..n {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let a = golden * i as f64;
        let p = Vector::from_vec(vec![r * a.cos(), r * a.sin(), z]);
        if constraints.iter().all(|h| h.value(&p) <= 0.0) {
            sum += p;
        }
    }
    let start = if sum.norm() > 1e-9 {
        sum.normalize()
    } else {
        Vector::from_vec(vec![0.0, 0.0, 1.0])
    };
    ManifoldPoint::new(project_cap(constraints, &start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Closure of `{t₁ > 0, |t₂| ≤ ½, t₃ > 0}` on S².
    fn example_cap() -> ConstraintSet {
        ConstraintSet::spherical_cap(vec![
            HalfSpace::new(&[-1.0, 0.0, 0.0], 0.0).unwrap(),
            HalfSpace::new(&[0.0, 1.0, 0.0], 0.5).unwrap(),
            HalfSpace::new(&[0.0, -1.0, 0.0], 0.5).unwrap(),
            HalfSpace::new(&[0.0, 0.0, -1.0], 0.0).unwrap(),
        ])
        .unwrap()
    }

    fn pt(c: &[f64]) -> ManifoldPoint {
        ManifoldPoint::from_slice(c)
    }

    #[test]
    fn membership_examples() {
        let q = ConstraintSet::interval(-1.0, 1.0).unwrap();
        assert!(q.contains(&pt(&[0.5])));
        assert!(!q.contains(&pt(&[1.1])));

        let cap = example_cap();
        let e1 = pt(&[1.0, 0.0, 0.0]);
        assert!(cap.contains(&e1));
        assert!(!cap.contains_strict(&e1));
        let inner = ManifoldPoint::new(Vector::from_vec(vec![0.6, 0.1, 0.7]).normalize());
        assert!(cap.contains_strict(&inner));

        let ball = ConstraintSet::ball(Manifold::Sphere2, e1.clone(), 0.3).unwrap();
        assert!(!ball.contains(&pt(&[0.0, 1.0, 0.0])));
        assert!(ball.contains(&e1));
    }

    #[test]
    fn ball_radius_must_be_below_convexity_radius() {
        let c = pt(&[1.0, 0.0, 0.0]);
        assert!(ConstraintSet::ball(Manifold::Sphere2, c.clone(), PI / 2.0).is_err());
        assert!(ConstraintSet::ball(Manifold::Sphere2, c, 1.5).is_ok());
        assert!(ConstraintSet::ball(Manifold::Euclidean(2), pt(&[0.0, 0.0]), 1e6).is_ok());
    }

    #[test]
    fn projection_examples() {
        let q = ConstraintSet::interval(-1.0, 1.0).unwrap();
        assert_eq!(q.project_point(&pt(&[2.0])).unwrap().as_slice(), &[1.0]);
        assert_eq!(q.project_point(&pt(&[0.25])).unwrap().as_slice(), &[0.25]);

        let m = Manifold::Sphere2;
        let c = pt(&[1.0, 0.0, 0.0]);
        let ball = ConstraintSet::ball(m.clone(), c.clone(), 0.5).unwrap();
        let p = ball.project(&pt(&[0.0, 1.0, 0.0])).unwrap();
        assert!(p.exact);
        assert_abs_diff_eq!(m.distance(&c, &p.point), 0.5, epsilon = 1e-14);
        // on the great circle through e1 and e2
        assert_abs_diff_eq!(p.point.coords()[2], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.point.coords()[0], 0.5f64.cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(p.point.coords()[1], 0.5f64.sin(), epsilon = 1e-14);
    }

    #[test]
    fn cap_projection_is_feasible_and_flagged() {
        let cap = example_cap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let x = Manifold::Sphere2.random_point(&mut rng, 1.0);
            let p = cap.project(&x).unwrap();
            assert!(!p.exact);
            assert!(cap.contains(&p.point), "{}", p.point);
            let again = cap.project_point(&p.point).unwrap();
            assert_abs_diff_eq!(again.coords(), p.point.coords(), epsilon = 1e-10);
        }
    }

    #[test]
    fn unsupported_dimension_is_an_error() {
        let q = ConstraintSet::interval(0.0, 1.0).unwrap();
        assert!(q.project(&pt(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn geodesic_within_examples() {
        let q = ConstraintSet::interval(-1.0, 1.0).unwrap();
        let m = Manifold::Euclidean(1);
        let g = m.geodesic(&pt(&[-1.0]), &pt(&[0.7])).unwrap();
        assert!(q.geodesic_within(&g, GEODESIC_SAMPLES));

        let cap = example_cap();
        let g = Manifold::Sphere2
            .geodesic(&pt(&[1.0, 0.0, 0.0]), &pt(&[0.0, 0.0, 1.0]))
            .unwrap();
        assert!(cap.geodesic_within(&g, GEODESIC_SAMPLES));
        for i in 1..=GEODESIC_SAMPLES {
            let p = g.at(i as f64 / 65.0);
            assert_abs_diff_eq!(p.coords()[1], 0.0, epsilon = 1e-15);
        }

        let s = Manifold::Sphere2;
        let ball = ConstraintSet::ball(s.clone(), pt(&[0.0, 0.0, 1.0]), 1.2).unwrap();
        let a = s.exp_unchecked(&pt(&[0.0, 0.0, 1.0]), &Vector::from_vec(vec![1.2, 0.0, 0.0]));
        let b = s.exp_unchecked(&pt(&[0.0, 0.0, 1.0]), &Vector::from_vec(vec![0.0, 1.2, 0.0]));
        let g = s.geodesic(&a, &b).unwrap();
        assert!(ball.geodesic_within(&g, GEODESIC_SAMPLES));
    }

    #[test]
    fn large_band_is_not_geodesically_convex() {
        // two points on the latitude t2 = 1/2: the great-circle arc bulges past it
        let cap = example_cap();
        let r = (0.75f64).sqrt();
        let a = pt(&[r * 0.99, 0.5, r * (1.0 - 0.99f64 * 0.99).sqrt()]);
        let b = pt(&[r * (1.0 - 0.99f64 * 0.99).sqrt(), 0.5, r * 0.99]);
        let g = Manifold::Sphere2.geodesic(&a, &b).unwrap();
        assert!(!cap.geodesic_within(&g, GEODESIC_SAMPLES));
        assert!(!cap.minimal_geodesic_inside(&a, &b));
    }

    #[test]
    fn weak_pole_must_be_member() {
        let cap = example_cap();
        let inside = Manifold::Sphere2
            .point(&[0.5f64.sqrt(), 0.0, 0.5f64.sqrt()])
            .unwrap();
        assert!(cap.clone().with_weak_pole(inside).is_ok());
        assert!(cap.with_weak_pole(pt(&[0.0, 1.0, 0.0])).is_err());
    }

    #[test]
    fn product_membership_and_projection() {
        let q = ConstraintSet::product(vec![
            ConstraintSet::interval(-1.0, 1.0).unwrap(),
            example_cap(),
        ]);
        assert!(q.contains(&pt(&[0.0, 1.0, 0.0, 0.0])));
        assert!(!q.contains(&pt(&[2.0, 1.0, 0.0, 0.0])));
        assert!(!q.contains(&pt(&[0.0, -1.0, 0.0, 0.0])));
        let p = q.project(&pt(&[3.0, 0.0, 0.0, -1.0])).unwrap();
        assert!(!p.exact);
        assert!(q.contains(&p.point));
        assert_eq!(p.point.coords()[0], 1.0);
    }
}
