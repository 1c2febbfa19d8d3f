use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ConstraintSet, SetKind};
use crate::error::{Error, Result};
use crate::manifold::{Manifold, ManifoldPoint, Vector};

/// Finite point grid over a compact set.
///
/// `spacing` is the per-axis step of the underlying lattice (tangent-chart coordinates
/// for balls and caps); `covering_radius` bounds the distance from any point of the set
/// to its nearest grid point.
#[derive(Clone, Debug)]
pub struct Grid {
    pub points: Vec<ManifoldPoint>,
    pub spacing: f64,
    pub covering_radius: f64,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Radius within which two grid points count as lattice neighbours.
    pub fn neighbor_radius(&self) -> f64 {
        2.0 * self.covering_radius * 1.01
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || hi == lo {
        return vec![(lo + hi) / 2.0];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for &v in axis {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

impl ConstraintSet {
    /// Lattice grid with `resolution` points per intrinsic dimension.
    pub fn grid(&self, resolution: usize) -> Result<Grid> {
        let resolution = resolution.max(2);
        match &self.kind {
            SetKind::WholeManifold => match self.manifold {
                Manifold::Sphere2 => self.chart_grid(&self.anchor(), std::f64::consts::PI, resolution),
                _ => Err(Error::NotCompact("whole manifold")),
            },
            SetKind::Interval { lo, hi } => {
                let xs = linspace(*lo, *hi, resolution);
                let h = if xs.len() > 1 { xs[1] - xs[0] } else { 0.0 };
                Ok(Grid {
                    points: xs.into_iter().map(|x| ManifoldPoint::from_slice(&[x])).collect(),
                    spacing: h,
                    covering_radius: h / 2.0,
                })
            }
            SetKind::EuclideanBox { lo, hi } => {
                let axes: Vec<Vec<f64>> = lo
                    .iter()
                    .zip(hi)
                    .map(|(a, b)| linspace(*a, *b, resolution))
                    .collect();
                let steps: Vec<f64> = lo
                    .iter()
                    .zip(hi)
                    .map(|(a, b)| (b - a) / (resolution - 1) as f64)
                    .collect();
                Ok(Grid {
                    points: cartesian(&axes)
                        .into_iter()
                        .map(|p| ManifoldPoint::from_slice(&p))
                        .collect(),
                    spacing: steps.iter().copied().fold(0.0, f64::max),
                    covering_radius: steps.iter().map(|s| s * s).sum::<f64>().sqrt() / 2.0,
                })
            }
            SetKind::MetricBall { center, radius } => self.chart_grid(center, *radius, resolution),
            SetKind::SphericalCap { .. } => {
                let anchor = self.anchor();
                let reach = self.cap_reach(&anchor);
                self.chart_grid(&anchor, reach, resolution)
            }
            SetKind::Product(fs) => {
                let grids = fs
                    .iter()
                    .map(|s| s.grid(resolution))
                    .collect::<Result<Vec<_>>>()?;
                Ok(product_grid(&grids))
            }
        }
    }

    /// Grid with a separate resolution for each factor of a product set.
    pub fn grid_per_factor(&self, resolutions: &[usize]) -> Result<Grid> {
        match &self.kind {
            SetKind::Product(fs) if fs.len() == resolutions.len() => {
                let grids = fs
                    .iter()
                    .zip(resolutions)
                    .map(|(s, &r)| s.grid(r))
                    .collect::<Result<Vec<_>>>()?;
                Ok(product_grid(&grids))
            }
            SetKind::Product(fs) => Err(Error::InvalidSet(format!(
                "expected {} factor resolutions, got {}",
                fs.len(),
                resolutions.len()
            ))),
            _ => self.grid(resolutions.first().copied().unwrap_or(2)),
        }
    }

    /// Largest distance from `anchor` to a lattice sample of the cap, plus a margin.
    fn cap_reach(&self, anchor: &ManifoldPoint) -> f64 {
        let m = &self.manifold;
        let n = 4000;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let mut reach: f64 = 0.0;
        for i in 0..n {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            let p = ManifoldPoint::from_slice(&[r * a.cos(), r * a.sin(), z]);
            if self.contains(&p) {
                reach = reach.max(m.distance(anchor, &p));
            }
        }
        (reach + 0.1).min(std::f64::consts::PI - 1e-3)
    }

    /// Square lattice in an orthonormal tangent chart at `center`, clipped to the chart
    /// disc of radius `reach`, mapped through `exp`. Lattice points that fall outside
    /// the set but within two covering radii of it are replaced by their projection, so
    /// the boundary is covered as densely as the interior.
    fn chart_grid(&self, center: &ManifoldPoint, reach: f64, resolution: usize) -> Result<Grid> {
        let m = &self.manifold;
        let basis = m.tangent_basis(center);
        let d = basis.len();
        let h = 2.0 * reach / (resolution - 1) as f64;
        let covering = h * (d as f64).sqrt() / 2.0;
        let axis = linspace(-reach, reach, resolution);
        let cell = h / 4.0;
        let key = |c: &[f64]| -> Vec<i64> { c.iter().map(|v| (v / cell).floor() as i64).collect() };
        let mut points = Vec::new();
        let mut occupied: HashMap<Vec<i64>, Vec<Vec<f64>>> = HashMap::new();
        let mut boundary: Vec<(ManifoldPoint, Vec<f64>)> = Vec::new();
        let slack = reach + 2.0 * covering;
        for coords in cartesian(&vec![axis; d]) {
            let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > slack {
                continue;
            }
            let mut v = Vector::zeros(center.len());
            for (c, b) in coords.iter().zip(&basis) {
                v += b * *c;
            }
            let p = m.exp_unchecked(center, &v);
            if norm <= reach && self.contains(&p) {
                occupied.entry(key(&coords)).or_default().push(coords);
                points.push(p);
                continue;
            }
            let q = self.project_point(&p)?;
            if m.distance(&p, &q) <= 2.0 * covering && self.contains(&q) {
                let log = m.log_vec(center, &q);
                let chart: Vec<f64> = basis.iter().map(|b| b.dot(&log)).collect();
                boundary.push((q, chart));
            }
        }
        // Drop projected points within h/4 (chart distance) of an accepted point.
        for (q, chart) in boundary {
            let k = key(&chart);
            let mut duplicate = false;
            for offset in cartesian(&vec![vec![-1.0, 0.0, 1.0]; d]) {
                let nk: Vec<i64> = k.iter().zip(&offset).map(|(a, o)| a + *o as i64).collect();
                if let Some(list) = occupied.get(&nk) {
                    if list.iter().any(|c| {
                        c.iter().zip(&chart).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() < cell
                    }) {
                        duplicate = true;
                        break;
                    }
                }
            }
            if !duplicate {
                occupied.entry(k).or_default().push(chart);
                points.push(q);
            }
        }
        Ok(Grid {
            points,
            spacing: h,
            covering_radius: covering,
        })
    }
}

fn product_grid(grids: &[Grid]) -> Grid {
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for g in grids {
        let mut next = Vec::with_capacity(points.len() * g.len());
        for prefix in &points {
            for p in &g.points {
                let mut c = prefix.clone();
                c.extend(p.as_slice());
                next.push(c);
            }
        }
        points = next;
    }
    Grid {
        points: points.iter().map(|c| ManifoldPoint::from_slice(c)).collect(),
        spacing: grids.iter().map(|g| g.spacing).fold(0.0, f64::max),
        covering_radius: grids
            .iter()
            .map(|g| g.covering_radius * g.covering_radius)
            .sum::<f64>()
            .sqrt(),
    }
}

/// Seeded random sampler over a constraint set.
///
/// Unbounded sets are sampled within `spread` of their anchor point.
#[derive(Clone, Debug)]
pub struct SetSampler {
    set: ConstraintSet,
    rng: ChaCha8Rng,
    spread: f64,
}

impl SetSampler {
    pub fn new(set: &ConstraintSet, seed: u64) -> Self {
        Self {
            set: set.clone(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            spread: 2.0,
        }
    }

    pub fn with_spread(mut self, spread: f64) -> Self {
        self.spread = spread;
        self
    }

    pub fn sample(&mut self) -> ManifoldPoint {
        let set = self.set.clone();
        let p = self.sample_from(&set);
        debug_assert!(set.contains(&p));
        p
    }

    pub fn sample_n(&mut self, n: usize) -> Vec<ManifoldPoint> {
        (0..n).map(|_| self.sample()).collect()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn sample_from(&mut self, set: &ConstraintSet) -> ManifoldPoint {
        let m = set.manifold();
        match set.kind() {
            SetKind::WholeManifold => match m {
                Manifold::Euclidean(_) | Manifold::Hyperbolic2 | Manifold::Sphere2 => {
                    m.random_point(&mut self.rng, self.spread)
                }
                Manifold::Product(fs) => {
                    let parts: Vec<Vector> = fs
                        .iter()
                        .map(|f| {
                            let whole = ConstraintSet::whole(f.clone());
                            self.sample_from(&whole).into_coords()
                        })
                        .collect();
                    ManifoldPoint::new(Manifold::join(&parts))
                }
            },
            SetKind::Interval { lo, hi } => {
                ManifoldPoint::from_slice(&[self.rng.gen_range(*lo..=*hi)])
            }
            SetKind::EuclideanBox { lo, hi } => ManifoldPoint::new(Vector::from_iterator(
                lo.len(),
                lo.iter()
                    .zip(hi)
                    .map(|(a, b)| self.rng.gen_range(*a..=*b))
                    .collect::<Vec<_>>(),
            )),
            SetKind::MetricBall { center, radius } => {
                // uniform in the tangent disc, mapped through exp
                let basis = m.tangent_basis(center);
                let v = loop {
                    let coords: Vec<f64> = basis
                        .iter()
                        .map(|_| self.rng.gen_range(-1.0..=1.0))
                        .collect();
                    let n = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
                    if n <= 1.0 {
                        let mut v = Vector::zeros(center.len());
                        for (c, b) in coords.iter().zip(&basis) {
                            v += b * (*c * radius);
                        }
                        break v;
                    }
                };
                let p = m.exp_unchecked(center, &v);
                if set.contains(&p) {
                    p
                } else {
                    set.project_point(&p).unwrap_or_else(|_| center.clone())
                }
            }
            SetKind::SphericalCap { .. } => {
                for _ in 0..10_000 {
                    let p = m.random_point(&mut self.rng, 1.0);
                    if set.contains(&p) {
                        return p;
                    }
                }
                let p = m.random_point(&mut self.rng, 1.0);
                set.project_point(&p).unwrap_or_else(|_| set.anchor())
            }
            SetKind::Product(fs) => {
                let parts: Vec<Vector> = fs
                    .iter()
                    .map(|f| self.sample_from(f).into_coords())
                    .collect();
                ManifoldPoint::new(Manifold::join(&parts))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::HalfSpace;

    #[test]
    fn interval_grid_includes_endpoints() {
        let q = ConstraintSet::interval(-1.0, 1.0).unwrap();
        let g = q.grid(201).unwrap();
        assert_eq!(g.len(), 201);
        assert_eq!(g.points[0].as_slice(), &[-1.0]);
        assert_eq!(g.points[200].as_slice(), &[1.0]);
        assert!((g.spacing - 0.01).abs() < 1e-15);
    }

    #[test]
    fn ball_grid_points_are_members_and_cover_the_boundary() {
        let m = Manifold::Sphere2;
        let c = ManifoldPoint::from_slice(&[0.0, 0.0, 1.0]);
        let q = ConstraintSet::ball(m.clone(), c.clone(), 0.6).unwrap();
        let g = q.grid(41).unwrap();
        assert!(g.points.iter().all(|p| q.contains(p)));
        let mut sampler = SetSampler::new(&q, 3);
        for p in sampler.sample_n(300) {
            let nearest = g
                .points
                .iter()
                .map(|g| m.distance(g, &p))
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= g.covering_radius + 1e-12, "{nearest}");
        }
        let boundary = g
            .points
            .iter()
            .filter(|p| (m.distance(&c, p) - 0.6).abs() < 1e-12)
            .count();
        assert!(boundary > 40);
    }

    #[test]
    fn cap_grid_stays_inside() {
        let q = ConstraintSet::spherical_cap(vec![
            HalfSpace::new(&[-1.0, 0.0, 0.0], 0.0).unwrap(),
            HalfSpace::new(&[0.0, 1.0, 0.0], 0.5).unwrap(),
            HalfSpace::new(&[0.0, -1.0, 0.0], 0.5).unwrap(),
            HalfSpace::new(&[0.0, 0.0, -1.0], 0.0).unwrap(),
        ])
        .unwrap();
        let g = q.grid(31).unwrap();
        assert!(g.len() > 100);
        assert!(g.points.iter().all(|p| q.contains(p)));
        let mut sampler = SetSampler::new(&q, 11);
        for p in sampler.sample_n(200) {
            assert!(q.contains(&p));
            let nearest = g
                .points
                .iter()
                .map(|g| Manifold::Sphere2.distance(g, &p))
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= g.covering_radius + 1e-12);
        }
    }

    #[test]
    fn whole_euclidean_space_has_no_grid() {
        let q = ConstraintSet::whole(Manifold::Euclidean(2));
        assert!(matches!(q.grid(10), Err(Error::NotCompact(_))));
    }

    #[test]
    fn product_grid_is_cartesian() {
        let q = ConstraintSet::product(vec![
            ConstraintSet::interval(0.0, 1.0).unwrap(),
            ConstraintSet::interval(-1.0, 1.0).unwrap(),
        ]);
        let g = q.grid_per_factor(&[3, 5]).unwrap();
        assert_eq!(g.len(), 15);
        assert!((g.covering_radius - (0.25f64 * 0.25 + 0.25 * 0.25).sqrt()).abs() < 1e-15);
    }
}
