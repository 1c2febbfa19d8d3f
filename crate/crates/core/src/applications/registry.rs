//! Built-in problems keyed by name.

use nalgebra::{Matrix2, Vector2};

use super::mvip::{build_mvip_bifunction, MVIProblem};
use super::nash::{best_response_oracle, build_nep_bifunction, NashProblem, Player};
use crate::bifunction::{optimization_bifunction_with_gradient, Bifunction, VectorField};
use crate::error::{Error, Result};
use crate::manifold::{Manifold, ManifoldPoint, Vector};
use crate::sets::{ConstraintSet, HalfSpace};
use crate::solvers::{brute_force_ep, InnerSolver, LambdaSchedule, SolutionSet, SolverConfig};

/// Names accepted by [`builtin`]; `m` is the number of players.
pub const BUILTIN_NAMES: [&str; 4] = ["example51", "quadratic-game(m)", "mvip-linear", "prox-quadratic"];

/// A ready-to-run problem with its recommended solver settings.
#[derive(Clone, Debug)]
pub struct Builtin {
    pub name: String,
    pub bifunction: Bifunction,
    pub set: ConstraintSet,
    pub start: ManifoldPoint,
    /// Closed-form solution when one is known.
    pub known_solution: Option<ManifoldPoint>,
    pub config: SolverConfig,
    pub nash: Option<NashProblem>,
    pub mvip: Option<MVIProblem>,
}

impl Builtin {
    /// Reference solution set: best responses for games, the EP oracle otherwise.
    pub fn reference_solutions(&self, resolution: usize) -> Result<SolutionSet> {
        match &self.nash {
            Some(game) => best_response_oracle(game, resolution),
            None => brute_force_ep(&self.bifunction, &self.set, resolution),
        }
    }
}

/// Looks up a built-in problem such as `example51` or `quadratic-game(3)`.
pub fn builtin(name: &str) -> Result<Builtin> {
    let name = name.trim();
    if let Some(arg) = name
        .strip_prefix("quadratic-game(")
        .and_then(|s| s.strip_suffix(')'))
    {
        let m: usize = arg.trim().parse().map_err(|_| {
            Error::InvalidConfig(format!("quadratic-game expects a player count, got {arg:?}"))
        })?;
        return quadratic_game_builtin(m);
    }
    match name {
        "example51" => example51_builtin(),
        "quadratic-game" => quadratic_game_builtin(2),
        "mvip-linear" => mvip_linear_builtin(),
        "prox-quadratic" => Ok(prox_quadratic_builtin()),
        other => Err(Error::InvalidConfig(format!(
            "unknown built-in problem {other:?}; expected one of {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

/// `{t ∈ S² : t₁ ≥ 0, |t₂| ≤ ½, t₃ ≥ 0}` with weak pole `(1,0,1)/√2`.
pub fn example51_strategy_set() -> Result<ConstraintSet> {
    let cap = ConstraintSet::spherical_cap(vec![
        HalfSpace::new(&[-1.0, 0.0, 0.0], 0.0)?,
        HalfSpace::new(&[0.0, 1.0, 0.0], 0.5)?,
        HalfSpace::new(&[0.0, -1.0, 0.0], 0.5)?,
        HalfSpace::new(&[0.0, 0.0, -1.0], 0.0)?,
    ])?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    cap.with_weak_pole(ManifoldPoint::from_slice(&[h, 0.0, h]))
}

/// Two players on `ℝ × S²`: `f₁ = (x₁ − t₃)²` on `[−1, 1]` and `f₂ = arccos t₁` on the
/// closed strategy set above.
pub fn example51(weights: [f64; 2]) -> Result<NashProblem> {
    let q1 = ConstraintSet::interval(-1.0, 1.0)?;
    let q2 = example51_strategy_set()?;
    let e1 = ManifoldPoint::from_slice(&[1.0, 0.0, 0.0]);
    let first = Player::new(q1, |x| (x.coords()[0] - x.coords()[3]).powi(2))
        .smooth()
        .with_partial(|x| vec![Vector::from_element(1, 2.0 * (x.coords()[0] - x.coords()[3]))]);
    let second = Player::new(q2, |x| x.coords()[1].clamp(-1.0, 1.0).acos()).with_partial(move |x| {
        let s = Manifold::Sphere2;
        let t = ManifoldPoint::new(x.coords().rows(1, 3).into_owned());
        let d = s.distance(&t, &e1);
        if d > 1e-12 {
            vec![-s.log_vec(&t, &e1) / d]
        } else {
            // Unit disc of T_{e₁}S², by its boundary directions.
            (0..8)
                .map(|k| {
                    let a = std::f64::consts::PI * k as f64 / 4.0;
                    Vector::from_vec(vec![0.0, a.cos(), a.sin()])
                })
                .collect()
        }
    });
    NashProblem::new(vec![first, second], weights.to_vec())
}

fn example51_builtin() -> Result<Builtin> {
    let game = example51([1.0, 1.0])?;
    let t = Vector::from_vec(vec![0.97, 0.1, 0.15]).normalize();
    let start = ManifoldPoint::from_slice(&[0.2, t[0], t[1], t[2]]);
    Ok(Builtin {
        name: "example51".into(),
        bifunction: build_nep_bifunction(&game),
        set: game.set().clone(),
        start,
        known_solution: None,
        config: SolverConfig {
            lambda: LambdaSchedule::Constant(0.7),
            inner: InnerSolver::OracleGrid,
            oracle_resolution: 21,
            auto_shrink: true,
            assume_proximity: true,
            ..SolverConfig::default()
        },
        nash: Some(game),
        mvip: None,
    })
}

/// Chain game on `[−1, 1]^m`: `f_i = (x_i − x_{i+1})²` for `i < m`, `f_m = x_m²`.
pub fn quadratic_game(m: usize, weights: Vec<f64>) -> Result<NashProblem> {
    if m == 0 {
        return Err(Error::InvalidConfig("quadratic-game needs at least one player".into()));
    }
    let players = (0..m)
        .map(|i| {
            let q = ConstraintSet::interval(-1.0, 1.0)?;
            let target = move |x: &ManifoldPoint| if i + 1 < m { x.coords()[i + 1] } else { 0.0 };
            Ok(Player::new(q, move |x| (x.coords()[i] - target(x)).powi(2))
                .smooth()
                .with_partial(move |x| vec![Vector::from_element(1, 2.0 * (x.coords()[i] - target(x)))]))
        })
        .collect::<Result<Vec<_>>>()?;
    NashProblem::new(players, weights)
}

fn quadratic_game_builtin(m: usize) -> Result<Builtin> {
    let game = quadratic_game(m, vec![1.0; m])?;
    Ok(Builtin {
        name: format!("quadratic-game({m})"),
        bifunction: build_nep_bifunction(&game),
        set: game.set().clone(),
        start: ManifoldPoint::new(Vector::from_element(m, 0.5)),
        known_solution: Some(ManifoldPoint::new(Vector::zeros(m))),
        config: SolverConfig::default(),
        nash: Some(game),
        mvip: None,
    })
}

/// `V(x) = M(x − a)` with `M = [[1, −½], [½, 1]]`, `a = (0.4, −0.2)`, `f = ½‖x‖²`, on the
/// closed unit disc.
pub fn mvip_linear() -> Result<MVIProblem> {
    let e = Manifold::Euclidean(2);
    let (mat, a) = mvip_linear_data();
    let field = VectorField::single(e.clone(), "linear", move |x| {
        let d = Vector2::new(x.coords()[0] - a[0], x.coords()[1] - a[1]);
        let v = mat * d;
        Vector::from_vec(vec![v[0], v[1]])
    });
    let disc = ConstraintSet::ball(e, ManifoldPoint::from_slice(&[0.0, 0.0]), 1.0)?;
    MVIProblem::new(field, disc, |x| 0.5 * x.coords().norm_squared(), |x| vec![x.coords().clone()])
}

fn mvip_linear_data() -> (Matrix2<f64>, Vector2<f64>) {
    (Matrix2::new(1.0, -0.5, 0.5, 1.0), Vector2::new(0.4, -0.2))
}

fn mvip_linear_builtin() -> Result<Builtin> {
    let p = mvip_linear()?;
    let (mat, a) = mvip_linear_data();
    // Interior solution of M(x − a) + x = 0.
    let x = (mat + Matrix2::identity())
        .lu()
        .solve(&(mat * a))
        .ok_or_else(|| Error::InvalidConfig("singular mvip-linear system".into()))?;
    Ok(Builtin {
        name: "mvip-linear".into(),
        bifunction: build_mvip_bifunction(&p),
        set: p.set().clone(),
        start: ManifoldPoint::from_slice(&[0.5, 0.5]),
        known_solution: Some(ManifoldPoint::from_slice(&[x[0], x[1]])),
        config: SolverConfig::default(),
        nash: None,
        mvip: Some(p),
    })
}

/// `F(x, y) = ½y² − ½x²` on `[−100, 100]`.
pub fn prox_quadratic() -> Bifunction {
    optimization_bifunction_with_gradient(
        &Manifold::Euclidean(1),
        "prox-quadratic",
        |x| 0.5 * x.coords()[0].powi(2),
        |x| x.coords().clone(),
    )
}

fn prox_quadratic_builtin() -> Builtin {
    Builtin {
        name: "prox-quadratic".into(),
        bifunction: prox_quadratic(),
        set: ConstraintSet::interval(-100.0, 100.0).expect("valid interval"),
        start: ManifoldPoint::from_slice(&[8.0]),
        known_solution: Some(ManifoldPoint::from_slice(&[0.0])),
        config: SolverConfig {
            inner_tol: 1e-13,
            ..SolverConfig::default()
        },
        nash: None,
        mvip: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lookup() {
        for name in ["example51", "quadratic-game(3)", "quadratic-game", "mvip-linear", "prox-quadratic"] {
            let b = builtin(name).unwrap();
            assert!(b.set.contains(&b.start), "{name}");
        }
        assert!(builtin("quadratic-game(x)").is_err());
        assert!(builtin("nope").is_err());
        assert_eq!(builtin("quadratic-game(3)").unwrap().start.len(), 3);
    }

    #[test]
    fn example51_bifunction_values() {
        let f = build_nep_bifunction(&example51([1.0, 1.0]).unwrap());
        let x = ManifoldPoint::from_slice(&[0.0, 1.0, 0.0, 0.0]);
        let y = ManifoldPoint::from_slice(&[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(f.eval(&x, &y), 1.0);
        assert_eq!(f.eval(&x, &x), 0.0);
    }

    #[test]
    fn mvip_linear_solution_by_hand() {
        let b = builtin("mvip-linear").unwrap();
        let x = b.known_solution.unwrap();
        // (M + I)⁻¹ M a with M a = (0.5, 0) and det(M + I) = 4.25
        assert_abs_diff_eq!(x.coords()[0], 2.0 * 0.5 / 4.25, epsilon = 1e-14);
        assert_abs_diff_eq!(x.coords()[1], -0.5 * 0.5 / 4.25, epsilon = 1e-14);
    }
}
