//! Sampling-based property checks for bifunctions.

use rand::Rng;

use super::Bifunction;
use crate::error::{Error, Result};
use crate::manifold::{GeodesicSegment, ManifoldPoint, TangentVector};
use crate::sets::{ConstraintSet, SetSampler};

/// Slack in the midpoint-convexity inequality.
pub const CONVEXITY_SLACK: f64 = 1e-9;
/// Slack in the subgradient inequality.
pub const SUBGRADIENT_TOL: f64 = 1e-8;
/// Slack in the monotonicity inequalities.
pub const MONOTONE_TOL: f64 = 1e-8;

/// Points per sampled geodesic in the convexity check (`t = 0, 1/8, …, 1`).
const CONVEXITY_GRID: usize = 9;

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityReport {
    pub pairs: usize,
    /// `max F(x,y) + F(y,x)` over the sample.
    pub worst: f64,
    pub witness: Option<(ManifoldPoint, ManifoldPoint)>,
    /// `max |F(x,x)|` over the sample.
    pub diagonal: f64,
    pub monotone: bool,
    /// Monotone and vanishing on the diagonal.
    pub strict: bool,
}

/// Samples `pairs` pairs from `Q` and checks `F(x,y) + F(y,x) ≤ 0`.
pub fn check_monotone(
    f: &Bifunction,
    set: &ConstraintSet,
    pairs: usize,
    seed: u64,
) -> MonotonicityReport {
    let mut sampler = SetSampler::new(set, seed);
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let mut diagonal: f64 = 0.0;
    for _ in 0..pairs {
        let x = sampler.sample();
        let y = sampler.sample();
        let s = f.eval(&x, &y) + f.eval(&y, &x);
        if s > worst {
            worst = s;
            witness = Some((x.clone(), y));
        }
        diagonal = diagonal.max(f.eval(&x, &x).abs());
    }
    let monotone = worst <= MONOTONE_TOL;
    MonotonicityReport {
        pairs,
        worst,
        witness: if monotone { None } else { witness },
        diagonal,
        monotone,
        strict: monotone && diagonal <= MONOTONE_TOL,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexityViolation {
    pub x: ManifoldPoint,
    pub y: ManifoldPoint,
    pub t: f64,
    /// Amount by which the midpoint inequality fails.
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexityReport {
    pub geodesics: usize,
    pub violations: Vec<ConvexityViolation>,
}

impl ConvexityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that `t ↦ F(x, γ(t))` is convex along minimal geodesics from sampled `x ∈ Q`
/// to sampled `y ∈ Q` whose geodesic stays in `Q`, on a 9-point grid in `t`.
pub fn check_pointwise_weak_convexity(
    f: &Bifunction,
    set: &ConstraintSet,
    points: usize,
    directions: usize,
    seed: u64,
) -> ConvexityReport {
    let m = f.manifold();
    let mut sampler = SetSampler::new(set, seed);
    let mut report = ConvexityReport {
        geodesics: 0,
        violations: Vec::new(),
    };
    for _ in 0..points {
        let x = sampler.sample();
        for _ in 0..directions {
            let y = sampler.sample();
            if !set.minimal_geodesic_inside(&x, &y) {
                continue;
            }
            let gamma = GeodesicSegment::new(m.clone(), m.log_unchecked(&x, &y).representative(), true);
            report.geodesics += 1;
            let ts: Vec<f64> = (0..CONVEXITY_GRID)
                .map(|i| i as f64 / (CONVEXITY_GRID - 1) as f64)
                .collect();
            let values: Vec<f64> = ts.iter().map(|&t| f.eval(&x, &gamma.at(t))).collect();
            for i in 1..CONVEXITY_GRID - 1 {
                let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
                if !a.is_finite() || !c.is_finite() {
                    continue;
                }
                let excess = b - 0.5 * (a + c);
                if excess > CONVEXITY_SLACK {
                    report.violations.push(ConvexityViolation {
                        x: x.clone(),
                        y: y.clone(),
                        t: ts[i],
                        excess,
                    });
                }
            }
        }
    }
    report
}

/// Tests `F(x,y) ≥ F(x,x) + ⟨v, γ̇(0)⟩ − tol` at `samples` points `y ∈ Q`, where `γ`
/// may be any minimal geodesic from `x` to `y`. Returns the number of failures.
pub fn subgradient_inequality_test(
    f: &Bifunction,
    v: &TangentVector,
    set: &ConstraintSet,
    samples: usize,
    seed: u64,
) -> usize {
    let m = f.manifold();
    let x = v.base();
    let fxx = f.eval(x, x);
    let mut sampler = SetSampler::new(set, seed);
    let neg = -v.components();
    (0..samples)
        .filter(|_| {
            let y = sampler.sample();
            let fxy = f.eval(x, &y);
            if fxy == f64::INFINITY {
                return false;
            }
            // min over minimal directions of ⟨v, u⟩
            let best = -m.log_unchecked(x, &y).support(m, &neg);
            fxy < fxx + best - SUBGRADIENT_TOL
        })
        .count()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AfMonotonicityReport {
    pub pairs: usize,
    /// `max ⟨u, γ̇(0)⟩ − ⟨w, γ̇(1)⟩` over sampled pairs and oracle outputs.
    pub worst: f64,
    pub monotone: bool,
}

/// Checks that `A_F` is a monotone field on `Q` along sampled minimal geodesics.
pub fn check_af_monotone(
    f: &Bifunction,
    set: &ConstraintSet,
    pairs: usize,
    seed: u64,
) -> Result<AfMonotonicityReport> {
    let m = f.manifold();
    let mut sampler = SetSampler::new(set, seed);
    let mut worst = f64::NEG_INFINITY;
    let mut used = 0;
    for _ in 0..pairs {
        let x = sampler.sample();
        let y = sampler.sample();
        let log = m.log_unchecked(&x, &y);
        if log.is_degenerate() || !set.minimal_geodesic_inside(&x, &y) {
            continue;
        }
        let gamma = GeodesicSegment::new(m.clone(), log.representative(), true);
        let start = gamma.initial_velocity().components().clone();
        let end = gamma.end_velocity();
        let ax = f.subgradient_components(&x)?;
        let ay = f.subgradient_components(&y)?;
        for u in &ax {
            for w in &ay {
                let s = m.inner_at(x.coords(), u, &start) - m.inner_at(y.coords(), w, &end);
                worst = worst.max(s);
            }
        }
        used += 1;
    }
    Ok(AfMonotonicityReport {
        pairs: used,
        worst,
        monotone: worst <= MONOTONE_TOL,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzEstimate {
    /// `max |F(x,y) − F(x,x)| / d(x,y)` over the sample.
    pub value: f64,
    pub radius: f64,
    pub samples: usize,
}

/// Estimates the Lipschitz constant of `F(x,·)` on `B(x, radius)` from `samples` random
/// points plus the `±radius` points along an orthonormal tangent basis.
pub fn lipschitz_estimate(
    f: &Bifunction,
    x: &ManifoldPoint,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<LipschitzEstimate> {
    let m = f.manifold();
    if !(radius > 0.0) || radius >= m.convexity_radius(x) {
        return Err(Error::InvalidConfig(format!(
            "lipschitz radius {radius} must lie in (0, {})",
            m.convexity_radius(x)
        )));
    }
    let fxx = f.eval(x, x);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let mut directions = Vec::new();
    for e in m.tangent_basis(x) {
        directions.push(&e * radius);
        directions.push(&e * -radius);
    }
    for _ in 0..samples {
        let v = m.random_tangent(x, &mut rng, 1.0);
        let n = m.norm_at(x.coords(), v.components());
        if n > 0.0 {
            let r = radius * rng.gen_range(0.05..=1.0);
            directions.push(v.components() * (r / n));
        }
    }
    let mut value: f64 = 0.0;
    for v in &directions {
        let y = m.exp_unchecked(x, v);
        let d = m.distance(x, &y);
        if d > 0.0 {
            value = value.max(((f.eval(x, &y) - fxx) / d).abs());
        }
    }
    Ok(LipschitzEstimate {
        value,
        radius,
        samples: directions.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifunction::{gv_bifunction, optimization_bifunction, regularize, VectorField};
    use crate::manifold::{Manifold, Vector};

    fn pt(c: &[f64]) -> ManifoldPoint {
        ManifoldPoint::from_slice(c)
    }

    #[test]
    fn linear_bifunction_lipschitz_approaches_norm() {
        let e = Manifold::Euclidean(2);
        let c = Vector::from_vec(vec![3.0, -4.0]);
        let cc = c.clone();
        let f = Bifunction::new(e, "linear", move |x, y| cc.dot(&(y.coords() - x.coords())));
        let est = lipschitz_estimate(&f, &pt(&[0.2, 0.1]), 0.1, 2000, 1).unwrap();
        assert!(est.value <= 5.0 + 1e-12);
        assert!(est.value > 5.0 - 1e-3);
    }

    #[test]
    fn lipschitz_radius_must_be_below_convexity_radius() {
        let s = Manifold::Sphere2;
        let f = Bifunction::new(s, "zero", |_, _| 0.0);
        assert!(lipschitz_estimate(&f, &pt(&[0.0, 0.0, 1.0]), 2.0, 4, 0).is_err());
    }

    #[test]
    fn optimization_bifunction_is_strictly_monotone() {
        let e = Manifold::Euclidean(2);
        let f = optimization_bifunction(&e, "sq", |p| p.coords().norm_squared());
        let q = ConstraintSet::euclidean_box(vec![-1.0; 2], vec![1.0; 2]).unwrap();
        let rep = check_monotone(&f, &q, 200, 3);
        assert!(rep.monotone && rep.strict);
    }

    #[test]
    fn non_monotone_bifunction_reports_a_witness() {
        let e = Manifold::Euclidean(1);
        let f = Bifunction::new(e, "bad", |x, y| (y.coords()[0] - x.coords()[0]).powi(2));
        let q = ConstraintSet::interval(-1.0, 1.0).unwrap();
        let rep = check_monotone(&f, &q, 50, 3);
        assert!(!rep.monotone);
        assert!(rep.witness.is_some());
    }

    #[test]
    fn concave_in_y_fails_convexity() {
        let e = Manifold::Euclidean(1);
        let f = Bifunction::new(e, "concave", |x, y| {
            -(y.coords()[0] - x.coords()[0]).powi(2)
        });
        let q = ConstraintSet::interval(-1.0, 1.0).unwrap();
        let rep = check_pointwise_weak_convexity(&f, &q, 10, 10, 0);
        assert!(!rep.passed());
    }

    #[test]
    fn gv_on_sphere_is_convex_along_minimal_geodesics() {
        let s = Manifold::Sphere2;
        let field = VectorField::single(s.clone(), "rot", |p| {
            let c = p.coords();
            Vector::from_vec(vec![-c[1], c[0], 0.0])
        });
        let q = ConstraintSet::ball(s.clone(), pt(&[0.0, 0.0, 1.0]), 1.2).unwrap();
        let f = gv_bifunction(&field);
        let rep = check_pointwise_weak_convexity(&f, &q, 20, 20, 9);
        assert!(rep.passed(), "{:?}", rep.violations.first());
        let rep = check_af_monotone(&f, &q, 200, 1).unwrap();
        assert!(rep.monotone, "{}", rep.worst);
    }

    #[test]
    fn subgradient_inequality_for_convex_function() {
        let e = Manifold::Euclidean(2);
        let f = optimization_bifunction(&e, "sq", |p| p.coords().norm_squared());
        let q = ConstraintSet::euclidean_box(vec![-2.0; 2], vec![2.0; 2]).unwrap();
        let x = pt(&[0.5, -0.5]);
        let v = f.subgradient_af(&x).unwrap().remove(0);
        assert_eq!(subgradient_inequality_test(&f, &v, &q, 500, 0), 0);
        let wrong = TangentVector::new(x.clone(), Vector::from_vec(vec![3.0, 0.0]));
        assert!(subgradient_inequality_test(&f, &wrong, &q, 500, 0) > 0);
    }

    #[test]
    fn regularization_makes_zero_strictly_monotone_field() {
        let e = Manifold::Euclidean(2);
        let f = crate::bifunction::zero_bifunction(&e);
        let r = regularize(&f, 1.0, &pt(&[0.3, 0.3])).unwrap();
        let q = ConstraintSet::euclidean_box(vec![-1.0; 2], vec![1.0; 2]).unwrap();
        let rep = check_monotone(&r, &q, 200, 5);
        assert!(rep.worst < 0.0);
    }
}
