//! Nash equilibrium problems reduced to equilibrium problems.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use crate::bifunction::{ext_sub, fd_gradient, Bifunction};
use crate::error::{Error, Result};
use crate::manifold::{Manifold, ManifoldPoint, TangentVector, Vector};
use crate::sets::ConstraintSet;
use crate::solvers::oracle::{accept, shuffled};
use crate::solvers::{OracleOptions, SolutionSet};

type LossFn = dyn Fn(&ManifoldPoint) -> f64 + Send + Sync;
type PartialFn = dyn Fn(&ManifoldPoint) -> Vec<Vector> + Send + Sync;

/// One player: a strategy set on its factor manifold and a loss on the full profile.
#[derive(Clone)]
pub struct Player {
    set: ConstraintSet,
    loss: Arc<LossFn>,
    partial: Option<Arc<PartialFn>>,
    smooth: bool,
}

impl fmt::Debug for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Player")
            .field("set", &self.set)
            .field("has_oracle", &self.partial.is_some())
            .field("smooth", &self.smooth)
            .finish()
    }
}

impl Player {
    /// `loss` receives the full strategy profile as a point of the product manifold.
    pub fn new(set: ConstraintSet, loss: impl Fn(&ManifoldPoint) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            set,
            loss: Arc::new(loss),
            partial: None,
            smooth: false,
        }
    }

    /// Marks the loss as differentiable in the player's own block.
    pub fn smooth(mut self) -> Self {
        self.smooth = true;
        self
    }

    /// Oracle returning partial subgradients in the player's own block (factor ambient
    /// coordinates).
    pub fn with_partial(
        mut self,
        oracle: impl Fn(&ManifoldPoint) -> Vec<Vector> + Send + Sync + 'static,
    ) -> Self {
        self.partial = Some(Arc::new(oracle));
        self
    }

    pub fn set(&self) -> &ConstraintSet {
        &self.set
    }

    pub fn loss(&self, x: &ManifoldPoint) -> f64 {
        (self.loss)(x)
    }
}

#[derive(Clone, Debug)]
pub struct NashProblem {
    players: Vec<Player>,
    weights: Vec<f64>,
    set: ConstraintSet,
    blocks: Vec<Range<usize>>,
}

impl NashProblem {
    pub fn new(players: Vec<Player>, weights: Vec<f64>) -> Result<Self> {
        if players.is_empty() {
            return Err(Error::InvalidConfig("a game needs at least one player".into()));
        }
        check_weights(&weights, players.len())?;
        let set = ConstraintSet::product(players.iter().map(|p| p.set.clone()).collect());
        let blocks = set.manifold().factors().into_iter().map(|(_, r)| r).collect();
        Ok(Self {
            players,
            weights,
            set,
            blocks,
        })
    }

    /// Same game with different weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights, self.players.len())?;
        Ok(Self {
            weights,
            ..self.clone()
        })
    }

    pub fn players(&self) -> &[Player] {
        &self.players
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn set(&self) -> &ConstraintSet {
        &self.set
    }

    pub fn manifold(&self) -> &Manifold {
        self.set.manifold()
    }

    /// Player `i`'s block of `x`.
    pub fn block(&self, x: &ManifoldPoint, i: usize) -> Vector {
        let r = &self.blocks[i];
        x.coords().rows(r.start, r.len()).into_owned()
    }

    /// `x` with player `i`'s block replaced by `yi`.
    pub fn deviate(&self, x: &ManifoldPoint, i: usize, yi: &Vector) -> ManifoldPoint {
        let r = &self.blocks[i];
        let mut c = x.coords().clone();
        c.rows_mut(r.start, r.len()).copy_from(yi);
        ManifoldPoint::new(c)
    }

    /// `f_i(x_1, …, y_i, …, x_m) − f_i(x)`.
    pub fn deviation_gain(&self, x: &ManifoldPoint, i: usize, yi: &Vector) -> f64 {
        let p = &self.players[i];
        ext_sub(p.loss(&self.deviate(x, i, yi)), p.loss(x))
    }
}

fn check_weights(weights: &[f64], players: usize) -> Result<()> {
    if weights.len() != players {
        return Err(Error::InvalidConfig(format!(
            "expected {players} weights, got {}",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidConfig(format!("weights must be positive, got {w}")));
    }
    Ok(())
}

/// `F_r(x, y) = Σ r_i (f_i(x_1, …, y_i, …, x_m) − f_i(x))`.
///
/// Carries `g_r` as its subgradient oracle when every player is smooth or supplies one.
pub fn build_nep_bifunction(p: &NashProblem) -> Bifunction {
    let game = p.clone();
    let f = Bifunction::new(p.manifold().clone(), "nash", move |x, y| {
        let mut total = 0.0;
        for (i, r) in game.weights.iter().enumerate() {
            let gain = game.deviation_gain(x, i, &game.block(y, i));
            total = crate::bifunction::ext_add(total, r * gain);
        }
        total
    });
    if p.players.iter().all(|pl| pl.smooth || pl.partial.is_some()) {
        let game = p.clone();
        f.with_subgradient(move |x| {
            pseudosubgradient_gr(&game, x)
                .map(|v| v.into_iter().map(TangentVector::into_components).collect())
                .unwrap_or_default()
        })
    } else {
        f
    }
}

/// Per-player partial subgradients of `f_i` in block `i`, from the oracle or by finite
/// differences on the factor manifold.
fn partials(p: &NashProblem, x: &ManifoldPoint, i: usize) -> Result<Vec<Vector>> {
    let player = &p.players[i];
    if let Some(oracle) = &player.partial {
        return Ok(oracle(x));
    }
    if player.smooth {
        let factor = player.set.manifold();
        let xi = ManifoldPoint::new(p.block(x, i));
        return Ok(vec![fd_gradient(factor, &xi, |yi| {
            player.loss(&p.deviate(x, i, yi.coords()))
        })]);
    }
    Err(Error::MissingPlayerOracle(i))
}

/// `g_r(x) = (r_1 ∂_1 f_1(x), …, r_m ∂_m f_m(x))`, all combinations of the per-player
/// extreme points.
pub fn pseudosubgradient_gr(p: &NashProblem, x: &ManifoldPoint) -> Result<Vec<TangentVector>> {
    let mut combos: Vec<Vec<Vector>> = vec![Vec::new()];
    for (i, r) in p.weights.iter().enumerate() {
        let block = partials(p, x, i)?;
        let mut next = Vec::with_capacity(combos.len() * block.len());
        for prefix in &combos {
            for g in &block {
                let mut c = prefix.clone();
                c.push(g * *r);
                next.push(c);
            }
        }
        combos = next;
    }
    Ok(combos
        .into_iter()
        .map(|parts| TangentVector::new(x.clone(), Manifold::join(&parts)))
        .collect())
}

/// Grid points where every player's strategy is a grid best response to the others.
///
/// Player `i`'s residual is `min_{y_i} f_i(…, y_i, …) − f_i(x)` over the `Q_i` grid; each
/// is accepted with the adaptive grid tolerance on the product grid and the per-player
/// verdicts are intersected.
pub fn best_response_oracle(p: &NashProblem, resolution: usize) -> Result<SolutionSet> {
    let grid = p.set.grid(resolution)?;
    let m = p.manifold();
    let all: Vec<usize> = (0..grid.len()).collect();
    let mut verdicts: Vec<SolutionSet> = Vec::new();
    for (i, player) in p.players.iter().enumerate() {
        let factor = player.set.grid(resolution)?;
        let order = shuffled(factor.len(), i as u64);
        let residual = |x: &ManifoldPoint, bound: f64| -> Option<f64> {
            let mut r = f64::INFINITY;
            for &j in &order {
                let v = p.deviation_gain(x, i, factor.points[j].coords());
                if v < r {
                    r = v;
                    if r < -bound {
                        return None;
                    }
                }
            }
            Some(r)
        };
        verdicts.push(accept(m, &grid, &all, &OracleOptions::default(), &residual));
    }
    let mut out = verdicts[0].clone();
    for v in &verdicts[1..] {
        let mut kept = SolutionSet {
            indices: Vec::new(),
            points: Vec::new(),
            residuals: Vec::new(),
            ..out.clone()
        };
        for (k, idx) in out.indices.iter().enumerate() {
            if let Some(pos) = v.indices.iter().position(|j| j == idx) {
                kept.indices.push(*idx);
                kept.points.push(out.points[k].clone());
                kept.residuals.push(out.residuals[k].min(v.residuals[pos]));
            }
        }
        out = kept;
    }
    Ok(out)
}
