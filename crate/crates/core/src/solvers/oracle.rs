//! Brute-force grid oracles for EP and VIP solution sets, plus residual diagnostics.
//!
//! A grid point `x` is reported when its residual `r(x)` (the minimum of `F(x,·)` over
//! the grid, or the VIP analogue) is at least `−c·S(x)`, where `c` is the grid covering
//! radius and `S(x)` is the slope of `r` toward the neighbouring grid point where `r`
//! increases fastest. At a discrete local maximum of `r` the steepest slope in any
//! direction is used instead. Points whose partial scan already drops below a capped
//! bound are rejected early; the cap is a sampled residual slope with a safety factor.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bifunction::{Bifunction, VectorField};
use crate::error::Result;
use crate::manifold::{Manifold, ManifoldPoint, Vector};
use crate::sets::{ConstraintSet, Grid};

/// Multiplier on the sampled residual slope used for early rejection.
pub const CAP_SAFETY: f64 = 4.0;
/// Hausdorff tolerance between solution sets, in grid spacings.
pub const SET_TOLERANCE_SPACINGS: f64 = 3.0;
/// Minimizing grid points remembered by [`ep_best_on_grid`].
const RECENT_WITNESSES: usize = 8;
const SLOPE_POINTS: usize = 24;
const SLOPE_NEIGHBOURS: usize = 2;
const ROUNDOFF: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tolerance {
    /// Covering radius times the local residual slope.
    Adaptive,
    /// Accept `r(x) ≥ −ε`.
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOptions {
    pub tolerance: Tolerance,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tolerance: Tolerance::Adaptive,
            seed: 0,
        }
    }
}

/// Grid points accepted by an oracle, with their residuals.
#[derive(Clone, Debug)]
pub struct SolutionSet {
    /// Indices of the accepted points in the scanned grid.
    pub indices: Vec<usize>,
    pub points: Vec<ManifoldPoint>,
    pub residuals: Vec<f64>,
    pub spacing: f64,
    pub covering_radius: f64,
    pub grid_size: usize,
}

impl SolutionSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Point with the largest residual.
    pub fn best(&self) -> Option<&ManifoldPoint> {
        self.residuals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| &self.points[i])
    }

    pub fn diameter(&self, m: &Manifold) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                d = d.max(m.distance(a, b));
            }
        }
        d
    }

    /// Largest distance from a point of `self` to the nearest point of `other`.
    pub fn directed_distance(&self, m: &Manifold, other: &SolutionSet) -> f64 {
        directed_distance(m, &self.points, &other.points)
    }

    pub fn hausdorff(&self, m: &Manifold, other: &SolutionSet) -> f64 {
        self.directed_distance(m, other)
            .max(other.directed_distance(m, self))
    }

    /// Distance from `x` to the nearest reported point.
    pub fn distance_to(&self, m: &Manifold, x: &ManifoldPoint) -> f64 {
        self.points
            .iter()
            .map(|p| m.distance(p, x))
            .fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn directed_distance(m: &Manifold, a: &[ManifoldPoint], b: &[ManifoldPoint]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if b.is_empty() {
        return f64::INFINITY;
    }
    a.iter()
        .map(|p| b.iter().map(|q| m.distance(p, q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Ambient coordinates hashed by the neighbour index.
const HASHED_COORDS: usize = 4;

/// Radius queries on a fixed point list.
///
/// Ambient Euclidean distance never exceeds the intrinsic distance on Euclidean and
/// spherical factors, so a hash on the leading ambient coordinates with cell size
/// `radius` finds every neighbour. Hyperbolic factors fall back to a linear scan.
pub(crate) struct NeighbourIndex<'a> {
    m: &'a Manifold,
    points: &'a [ManifoldPoint],
    radius: f64,
    cells: Option<HashMap<Vec<i64>, Vec<usize>>>,
}

fn has_hyperbolic(m: &Manifold) -> bool {
    match m {
        Manifold::Hyperbolic2 => true,
        Manifold::Product(fs) => fs.iter().any(has_hyperbolic),
        _ => false,
    }
}

impl<'a> NeighbourIndex<'a> {
    pub(crate) fn new(m: &'a Manifold, points: &'a [ManifoldPoint], radius: f64) -> Self {
        let hashable = !has_hyperbolic(m) && radius.is_finite() && radius > 0.0;
        let mut index = Self {
            m,
            points,
            radius,
            cells: None,
        };
        if hashable {
            let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
            for (i, p) in points.iter().enumerate() {
                cells.entry(index.key(p)).or_default().push(i);
            }
            index.cells = Some(cells);
        }
        index
    }

    fn key(&self, p: &ManifoldPoint) -> Vec<i64> {
        p.as_slice()
            .iter()
            .take(HASHED_COORDS)
            .map(|v| (v / self.radius).floor() as i64)
            .collect()
    }

    /// Indices other than `i` within `radius` of `points[i]`.
    pub(crate) fn query(&self, i: usize) -> Vec<usize> {
        let x = &self.points[i];
        let close = |j: usize| j != i && self.m.distance(x, &self.points[j]) <= self.radius;
        let Some(cells) = &self.cells else {
            return (0..self.points.len()).filter(|&j| close(j)).collect();
        };
        let base = self.key(x);
        let mut out = Vec::new();
        let mut offset = vec![-1i64; base.len()];
        loop {
            let key: Vec<i64> = base.iter().zip(&offset).map(|(b, o)| b + o).collect();
            if let Some(bucket) = cells.get(&key) {
                out.extend(bucket.iter().copied().filter(|&j| close(j)));
            }
            let mut k = 0;
            while k < offset.len() && offset[k] == 1 {
                offset[k] = -1;
                k += 1;
            }
            if k == offset.len() {
                break;
            }
            offset[k] += 1;
        }
        out.sort_unstable();
        out
    }
}

/// Shared acceptance engine.
///
/// `residual(x, bound)` returns `None` once the residual is known to be below `−bound`
/// and the exact residual otherwise.
pub(crate) fn accept(
    m: &Manifold,
    grid: &Grid,
    candidates: &[usize],
    opts: &OracleOptions,
    residual: &dyn Fn(&ManifoldPoint, f64) -> Option<f64>,
) -> SolutionSet {
    let points = &grid.points;
    let c = grid.covering_radius;
    let mut exact: HashMap<usize, f64> = HashMap::new();
    let cap = match opts.tolerance {
        Tolerance::Fixed(eps) => eps,
        Tolerance::Adaptive => {
            c * CAP_SAFETY * slope_bound(m, grid, candidates, opts.seed, residual, &mut exact)
                + ROUNDOFF
        }
    };
    let index = NeighbourIndex::new(m, points, grid.neighbor_radius());
    let mut survivors = Vec::new();
    for &i in candidates {
        if let Some(&r) = exact.get(&i) {
            if r >= -cap {
                survivors.push(i);
            }
            continue;
        }
        if let Some(r) = residual(&points[i], cap) {
            exact.insert(i, r);
            survivors.push(i);
        }
    }
    let mut out = SolutionSet {
        indices: Vec::new(),
        points: Vec::new(),
        residuals: Vec::new(),
        spacing: grid.spacing,
        covering_radius: c,
        grid_size: grid.len(),
    };
    for &i in &survivors {
        let r = exact[&i];
        let pass = match opts.tolerance {
            Tolerance::Fixed(eps) => r >= -eps - ROUNDOFF,
            Tolerance::Adaptive => {
                r >= -ROUNDOFF || {
                    let mut up: f64 = 0.0;
                    let mut any: f64 = 0.0;
                    for j in index.query(i) {
                        let rj = *exact
                            .entry(j)
                            .or_insert_with(|| residual(&points[j], f64::INFINITY).unwrap_or(f64::NEG_INFINITY));
                        if !rj.is_finite() || !r.is_finite() {
                            continue;
                        }
                        let slope = (rj - r) / m.distance(&points[i], &points[j]);
                        up = up.max(slope);
                        any = any.max(slope.abs());
                    }
                    let s = if up > 0.0 { up } else { any };
                    r >= -c * s - ROUNDOFF
                }
            }
        };
        if pass {
            out.indices.push(i);
            out.points.push(points[i].clone());
            out.residuals.push(r);
        }
    }
    out
}

/// Largest residual slope `|r(x) − r(x')| / d(x,x')` over sampled neighbouring grid
/// points; the exact residuals computed on the way are cached.
fn slope_bound(
    m: &Manifold,
    grid: &Grid,
    candidates: &[usize],
    seed: u64,
    residual: &dyn Fn(&ManifoldPoint, f64) -> Option<f64>,
    exact: &mut HashMap<usize, f64>,
) -> f64 {
    if candidates.is_empty() || grid.len() < 2 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let points = &grid.points;
    let value = |i: usize, exact: &mut HashMap<usize, f64>| -> f64 {
        *exact
            .entry(i)
            .or_insert_with(|| residual(&points[i], f64::INFINITY).unwrap_or(f64::NEG_INFINITY))
    };
    let index = NeighbourIndex::new(m, points, grid.neighbor_radius());
    let mut bound: f64 = 0.0;
    for _ in 0..SLOPE_POINTS.min(candidates.len()) {
        let i = candidates[rng.gen_range(0..candidates.len())];
        let ri = value(i, exact);
        let mut nb = index.query(i);
        nb.shuffle(&mut rng);
        for &j in nb.iter().take(SLOPE_NEIGHBOURS) {
            let d = m.distance(&points[i], &points[j]);
            let s = (value(j, exact) - ri).abs() / d;
            if d > 0.0 && s.is_finite() {
                bound = bound.max(s);
            }
        }
    }
    bound
}

pub(crate) fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

fn ep_scan(f: &Bifunction, x: &ManifoldPoint, ys: &[ManifoldPoint], order: &[usize], bound: f64) -> Option<f64> {
    let mut r = f64::INFINITY;
    for &j in order {
        let v = f.eval(x, &ys[j]);
        if v < r {
            r = v;
            if r < -bound {
                return None;
            }
        }
    }
    Some(r)
}

/// `min_u ⟨v, u⟩` over minimal directions `u ∈ exp_x⁻¹ y`.
pub(crate) fn min_pairing(m: &Manifold, x: &ManifoldPoint, v: &Vector, y: &ManifoldPoint) -> f64 {
    -m.log_unchecked(x, y).support(m, &-v)
}

fn vip_scan(
    field: &VectorField,
    set: &ConstraintSet,
    x: &ManifoldPoint,
    ys: &[ManifoldPoint],
    order: &[usize],
    bound: f64,
) -> Option<f64> {
    let m = field.manifold();
    let convex = set.geodesically_convex();
    let mut best: Option<f64> = None;
    'fields: for v in field.components(x) {
        let mut r: f64 = 0.0;
        for &j in order {
            let y = &ys[j];
            if !convex && !set.minimal_geodesic_inside(x, y) {
                continue;
            }
            r = r.min(min_pairing(m, x, &v, y));
            if r < -bound {
                continue 'fields;
            }
        }
        best = Some(best.map_or(r, |b: f64| b.max(r)));
    }
    best
}

/// EP solution set of `F` over a grid, restricted to `candidates` (all points when
/// `None`). Every grid point of `Q` is tested; the result is exhaustive at the grid's
/// resolution.
pub fn ep_solutions_on_grid(
    f: &Bifunction,
    grid: &Grid,
    candidates: Option<&[usize]>,
    opts: &OracleOptions,
) -> SolutionSet {
    let all: Vec<usize>;
    let candidates = match candidates {
        Some(c) => c,
        None => {
            all = (0..grid.len()).collect();
            &all
        }
    };
    let order = shuffled(grid.len(), opts.seed);
    let ys = &grid.points;
    accept(f.manifold(), grid, candidates, opts, &|x, bound| {
        ep_scan(f, x, ys, &order, bound)
    })
}

/// Candidate maximizing the grid residual `min_y F(x,y)`, scanned in the given order.
///
/// A scan stops once it falls below the best residual so far; recent minimizing `y`
/// are tried first.
pub(crate) fn ep_best_on_grid(
    f: &Bifunction,
    grid: &Grid,
    candidates: &[usize],
    seed: u64,
) -> Option<(usize, f64)> {
    let ys = &grid.points;
    let order = shuffled(grid.len(), seed);
    let mut recent: Vec<usize> = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for &i in candidates {
        let x = &ys[i];
        let floor = best.map_or(f64::NEG_INFINITY, |b| b.1);
        let mut r = f64::INFINITY;
        let mut witness = None;
        for &j in recent.iter().chain(&order) {
            let v = f.eval(x, &ys[j]);
            if v < r {
                r = v;
                witness = Some(j);
                if r <= floor {
                    break;
                }
            }
        }
        if let Some(j) = witness {
            if !recent.contains(&j) {
                recent.insert(0, j);
                recent.truncate(RECENT_WITNESSES);
            }
        }
        if r > floor {
            best = Some((i, r));
        }
    }
    best
}

/// Grid points `x ∈ Q` with `min_y F(x,y) ≥ −ε`, using the adaptive tolerance.
pub fn brute_force_ep(f: &Bifunction, set: &ConstraintSet, resolution: usize) -> Result<SolutionSet> {
    let grid = set.grid(resolution)?;
    Ok(ep_solutions_on_grid(f, &grid, None, &OracleOptions::default()))
}

/// VIP solution set of a field over a grid of `Q`.
pub fn vip_solutions_on_grid(
    field: &VectorField,
    set: &ConstraintSet,
    grid: &Grid,
    opts: &OracleOptions,
) -> SolutionSet {
    let m = field.manifold();
    let candidates: Vec<usize> = (0..grid.len()).collect();
    let order = shuffled(grid.len(), opts.seed);
    let ys = &grid.points;
    accept(m, grid, &candidates, opts, &|x, bound| {
        vip_scan(field, set, x, ys, &order, bound)
    })
}

pub fn brute_force_vip(field: &VectorField, set: &ConstraintSet, resolution: usize) -> Result<SolutionSet> {
    let grid = set.grid(resolution)?;
    Ok(vip_solutions_on_grid(field, set, &grid, &OracleOptions::default()))
}

/// `min_{y ∈ grid} F(x, y)`.
pub fn ep_residual(f: &Bifunction, x: &ManifoldPoint, grid: &Grid) -> f64 {
    grid.points
        .iter()
        .map(|y| f.eval(x, y))
        .fold(f64::INFINITY, f64::min)
}

/// `max_{v ∈ A(x)} min_y ⟨v, γ̇(0)⟩` over grid points `y` whose minimal geodesic from `x`
/// stays in `Q`.
pub fn vip_residual(field: &VectorField, set: &ConstraintSet, x: &ManifoldPoint, grid: &Grid) -> f64 {
    let order: Vec<usize> = (0..grid.len()).collect();
    vip_scan(field, set, x, &grid.points, &order, f64::INFINITY).unwrap_or(f64::NEG_INFINITY)
}

/// Outcome of comparing `VIP(A_F, Q)` with `EP(F, Q)` on a grid.
#[derive(Clone, Debug)]
pub struct InclusionReport {
    pub ep: SolutionSet,
    pub vip: SolutionSet,
    /// Set distance tolerance, three grid spacings.
    pub tolerance: f64,
    /// Largest distance from a VIP point to the EP set.
    pub vip_to_ep: f64,
    /// Largest distance from an EP point to the VIP set.
    pub ep_to_vip: f64,
}

impl InclusionReport {
    pub fn vip_in_ep(&self) -> bool {
        !self.vip.is_empty() && self.vip_to_ep <= self.tolerance
    }

    pub fn equal(&self) -> bool {
        self.vip_in_ep() && !self.ep.is_empty() && self.ep_to_vip <= self.tolerance
    }
}

/// Computes both solution sets by brute force and compares them.
pub fn verify_inclusion_vip_ep(
    f: &Bifunction,
    set: &ConstraintSet,
    resolution: usize,
) -> Result<InclusionReport> {
    let grid = set.grid(resolution)?;
    let field = f.af_field()?;
    let opts = OracleOptions::default();
    let ep = ep_solutions_on_grid(f, &grid, None, &opts);
    let vip = vip_solutions_on_grid(&field, set, &grid, &opts);
    let m = f.manifold();
    Ok(InclusionReport {
        tolerance: SET_TOLERANCE_SPACINGS * grid.spacing,
        vip_to_ep: vip.directed_distance(m, &ep),
        ep_to_vip: ep.directed_distance(m, &vip),
        ep,
        vip,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifunction::{gv_bifunction, optimization_bifunction, zero_bifunction};
    use approx::assert_abs_diff_eq;

    fn pt(c: &[f64]) -> ManifoldPoint {
        ManifoldPoint::from_slice(c)
    }

    #[test]
    fn neighbour_index_matches_linear_scan() {
        let set = ConstraintSet::product(vec![
            ConstraintSet::interval(-1.0, 1.0).unwrap(),
            ConstraintSet::cap_around(&[0.0, 0.0, 1.0], 1.0).unwrap(),
        ]);
        let grid = set.grid(9).unwrap();
        let m = set.manifold();
        let r = grid.neighbor_radius();
        let index = NeighbourIndex::new(m, &grid.points, r);
        for i in (0..grid.len()).step_by(7) {
            let brute: Vec<usize> = (0..grid.len())
                .filter(|&j| j != i && m.distance(&grid.points[i], &grid.points[j]) <= r)
                .collect();
            assert_eq!(index.query(i), brute);
        }
    }

    fn identity_field() -> VectorField {
        VectorField::single(Manifold::Euclidean(2), "id", |x| x.coords().clone())
    }

    #[test]
    fn optimization_ep_is_the_minimizer() {
        let e = Manifold::Euclidean(1);
        let f = optimization_bifunction(&e, "shifted", |p| (p.coords()[0] - 0.3).powi(2));
        let q = ConstraintSet::interval(-1.0, 1.0).unwrap();
        let sol = brute_force_ep(&f, &q, 2001).unwrap();
        assert!(!sol.is_empty());
        for p in &sol.points {
            assert!((p.coords()[0] - 0.3).abs() <= 2e-3, "{p}");
        }
    }

    #[test]
    fn zero_bifunction_accepts_everything() {
        let f = zero_bifunction(&Manifold::Euclidean(1));
        let q = ConstraintSet::interval(-1.0, 1.0).unwrap();
        let sol = brute_force_ep(&f, &q, 101).unwrap();
        assert_eq!(sol.len(), 101);
    }

    #[test]
    fn linear_monotone_ep_on_disc() {
        let f = gv_bifunction(&identity_field());
        let q = ConstraintSet::ball(Manifold::Euclidean(2), pt(&[0.0, 0.0]), 1.0).unwrap();
        let sol = brute_force_ep(&f, &q, 61).unwrap();
        assert!(!sol.is_empty());
        let m = Manifold::Euclidean(2);
        for p in &sol.points {
            assert!(m.distance(p, &pt(&[0.0, 0.0])) <= 2.0 * sol.spacing);
        }
    }

    #[test]
    fn ep_residual_examples() {
        let e = Manifold::Euclidean(1);
        let f = optimization_bifunction(&e, "half-square", |p| 0.5 * p.coords()[0].powi(2));
        let q = ConstraintSet::interval(-1.0, 1.0).unwrap();
        let grid = q.grid(201).unwrap();
        assert_abs_diff_eq!(ep_residual(&f, &pt(&[0.5]), &grid), -0.125, epsilon = 1e-12);
        assert!(ep_residual(&f, &pt(&[0.0]), &grid) >= 0.0);
        let z = zero_bifunction(&e);
        assert_eq!(ep_residual(&z, &pt(&[0.4]), &grid), 0.0);
    }

    #[test]
    fn vip_residual_examples() {
        let q = ConstraintSet::ball(Manifold::Euclidean(2), pt(&[0.0, 0.0]), 1.0).unwrap();
        let grid = q.grid(81).unwrap();
        let v = identity_field();
        assert_eq!(vip_residual(&v, &q, &pt(&[0.0, 0.0]), &grid), 0.0);
        let r = vip_residual(&v, &q, &pt(&[0.5, 0.0]), &grid);
        assert!(r < 0.0);
        // ⟨x, y − x⟩ over the disc at x = (0.5, 0) bottoms out at y = (−1, 0).
        assert_abs_diff_eq!(r, -0.75, epsilon = 1e-9);

        let interval = ConstraintSet::interval(-1.0, 1.0).unwrap();
        let g = interval.grid(21).unwrap();
        let one = VectorField::single(Manifold::Euclidean(1), "one", |_| Vector::from_element(1, 1.0));
        assert_eq!(vip_residual(&one, &interval, &pt(&[-1.0]), &g), 0.0);
    }

    #[test]
    fn vip_equals_ep_on_small_instances() {
        let e = Manifold::Euclidean(1);
        let f = optimization_bifunction(&e, "shifted", |p| (p.coords()[0] - 0.3).powi(2));
        let q = ConstraintSet::interval(-1.0, 1.0).unwrap();
        let rep = verify_inclusion_vip_ep(&f, &q, 201).unwrap();
        assert!(rep.equal(), "{rep:?}");

        let z = zero_bifunction(&e);
        let rep = verify_inclusion_vip_ep(&z, &q, 51).unwrap();
        assert!(rep.equal());
        assert_eq!(rep.ep.len(), 51);
        assert_eq!(rep.vip.len(), 51);

        let f = gv_bifunction(&identity_field());
        let disc = ConstraintSet::ball(Manifold::Euclidean(2), pt(&[0.0, 0.0]), 1.0).unwrap();
        let rep = verify_inclusion_vip_ep(&f, &disc, 61).unwrap();
        assert!(rep.equal(), "{rep:?}");
    }

    #[test]
    fn solution_set_geometry() {
        let m = Manifold::Euclidean(1);
        let a = SolutionSet {
            indices: vec![0, 2],
            points: vec![pt(&[0.0]), pt(&[0.2])],
            residuals: vec![0.0, -0.1],
            spacing: 0.1,
            covering_radius: 0.05,
            grid_size: 2,
        };
        let mut b = a.clone();
        b.points = vec![pt(&[0.5])];
        assert_abs_diff_eq!(a.diameter(&m), 0.2);
        assert_abs_diff_eq!(a.hausdorff(&m, &b), 0.5);
        assert_eq!(a.best(), Some(&pt(&[0.0])));
    }
}
