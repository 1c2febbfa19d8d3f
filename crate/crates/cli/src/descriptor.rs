//! The descriptor mini-language used for manifolds, sets, fields and bifunctions.
//!
//! A descriptor is a name with optional arguments, a number, or a bracketed list:
//! `product([euclidean(1), sphere2])`, `ball([0, 0, 1], 0.8)`, `gv(affine([[1, -2], [2, 1]], [0, 0]))`.

use std::fmt;

use riemann_ep::applications::{
    build_mvip_bifunction, build_nep_bifunction, builtin, example51, quadratic_game, MVIProblem,
    NashProblem, BUILTIN_NAMES,
};
use riemann_ep::bifunction::{
    fd_gradient, gv_bifunction, gz_bifunction, optimization_bifunction_with_gradient,
    zero_bifunction, Bifunction, VectorField,
};
use riemann_ep::manifold::{Manifold, ManifoldPoint, Vector};
use riemann_ep::sets::{ConstraintSet, HalfSpace};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    List(Vec<Expr>),
    Call(String, Vec<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::List(items) => {
                write!(f, "[")?;
                for (i, e) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, "]")
            }
            Expr::Call(name, args) if args.is_empty() => write!(f, "{name}"),
            Expr::Call(name, args) => {
                write!(f, "{name}(")?;
                for (i, e) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, ")")
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, String>;

pub fn parse(text: &str) -> Result<Expr> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(format!("unexpected {:?} at column {}", p.rest(), p.pos + 1));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn rest(&self) -> String {
        String::from_utf8_lossy(&self.src[self.pos..]).chars().take(12).collect()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else if self.pos >= self.src.len() {
            Err(format!("expected '{}' but the descriptor ended", c as char))
        } else {
            Err(format!("expected '{}' at column {}, found {:?}", c as char, self.pos + 1, self.rest()))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'[') => {
                self.pos += 1;
                Ok(Expr::List(self.items(b']')?))
            }
            Some(c) if c.is_ascii_digit() || c == b'-' || c == b'+' || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() {
                    let c = self.src[self.pos];
                    if c.is_ascii_alphanumeric() || c == b'-' || c == b'_' {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let name = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                if self.peek() == Some(b'(') {
                    self.pos += 1;
                    Ok(Expr::Call(name, self.items(b')')?))
                } else {
                    Ok(Expr::Call(name, Vec::new()))
                }
            }
            Some(_) => Err(format!("unexpected {:?} at column {}", self.rest(), self.pos + 1)),
            None => Err("empty descriptor".into()),
        }
    }

    fn items(&mut self, close: u8) -> Result<Vec<Expr>> {
        let mut out = Vec::new();
        if self.peek() == Some(close) {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.peek() == Some(b',') {
                self.pos += 1;
                continue;
            }
            self.expect(close)?;
            return Ok(out);
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            let exponent_sign = (c == b'-' || c == b'+')
                && self.pos > start
                && matches!(self.src[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exponent_sign || self.pos == start {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = String::from_utf8_lossy(&self.src[start..self.pos]);
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| format!("invalid number {text:?} at column {}", start + 1))
    }
}

fn num(e: &Expr, what: &str) -> Result<f64> {
    match e {
        Expr::Num(v) => Ok(*v),
        other => Err(format!("{what}: expected a number, found {other}")),
    }
}

fn vector(e: &Expr, what: &str) -> Result<Vec<f64>> {
    match e {
        Expr::List(items) => items.iter().map(|i| num(i, what)).collect(),
        other => Err(format!("{what}: expected a list of numbers, found {other}")),
    }
}

fn matrix(e: &Expr, what: &str) -> Result<Vec<Vec<f64>>> {
    match e {
        Expr::List(rows) => rows.iter().map(|r| vector(r, what)).collect(),
        other => Err(format!("{what}: expected a list of rows, found {other}")),
    }
}

fn arity(name: &str, args: &[Expr], n: usize) -> Result<()> {
    if args.len() == n {
        Ok(())
    } else {
        Err(format!("{name} takes {n} argument(s), got {}", args.len()))
    }
}

/// Reads a point, first normalizing it onto the manifold so that `[0.3, 0.2, 1]` names a
/// point of the sphere.
pub fn point(m: &Manifold, coords: &[f64], what: &str) -> Result<ManifoldPoint> {
    if coords.len() != m.ambient_dim() {
        return Err(format!("{what}: expected {} coordinates, got {}", m.ambient_dim(), coords.len()));
    }
    let x = m.normalize(&Vector::from_column_slice(coords));
    m.point(x.as_slice()).map_err(|e| format!("{what}: {e}"))
}

pub fn manifold(e: &Expr) -> Result<Manifold> {
    match e {
        Expr::Call(name, args) => match name.as_str() {
            "euclidean" => {
                arity(name, args, 1)?;
                let n = num(&args[0], "euclidean dimension")?;
                if n < 1.0 || n.fract() != 0.0 {
                    return Err(format!("euclidean dimension must be a positive integer, got {n}"));
                }
                Ok(Manifold::Euclidean(n as usize))
            }
            "sphere2" => arity(name, args, 0).map(|_| Manifold::Sphere2),
            "hyperbolic2" => arity(name, args, 0).map(|_| Manifold::Hyperbolic2),
            "product" => {
                arity(name, args, 1)?;
                match &args[0] {
                    Expr::List(fs) if !fs.is_empty() => {
                        Ok(Manifold::product(fs.iter().map(manifold).collect::<Result<_>>()?))
                    }
                    other => Err(format!("product expects a non-empty list of manifolds, found {other}")),
                }
            }
            other => Err(format!(
                "unknown manifold {other:?}; expected euclidean(n), sphere2, hyperbolic2 or product([...])"
            )),
        },
        other => Err(format!("expected a manifold, found {other}")),
    }
}

/// Parses a set on the manifold `m`.
pub fn set(e: &Expr, m: &Manifold) -> Result<ConstraintSet> {
    let Expr::Call(name, args) = e else {
        return Err(format!("expected a set, found {e}"));
    };
    let q = match name.as_str() {
        "whole" => {
            arity(name, args, 0)?;
            ConstraintSet::whole(m.clone())
        }
        "interval" => {
            arity(name, args, 2)?;
            ConstraintSet::interval(num(&args[0], "interval lo")?, num(&args[1], "interval hi")?)
                .map_err(|e| e.to_string())?
        }
        "box" => {
            arity(name, args, 2)?;
            ConstraintSet::euclidean_box(vector(&args[0], "box lo")?, vector(&args[1], "box hi")?)
                .map_err(|e| e.to_string())?
        }
        "ball" => {
            arity(name, args, 2)?;
            let center = point(m, &vector(&args[0], "ball center")?, "ball center")?;
            ConstraintSet::ball(m.clone(), center, num(&args[1], "ball radius")?)
                .map_err(|e| e.to_string())?
        }
        "cap" => {
            arity(name, args, 2)?;
            ConstraintSet::cap_around(&vector(&args[0], "cap axis")?, num(&args[1], "cap angle")?)
                .map_err(|e| e.to_string())?
        }
        "halfspaces" => {
            let constraints = args
                .iter()
                .map(|a| match a {
                    Expr::List(pair) if pair.len() == 2 => {
                        HalfSpace::new(&vector(&pair[0], "half-space normal")?, num(&pair[1], "half-space offset")?)
                            .map_err(|e| e.to_string())
                    }
                    other => Err(format!("halfspaces expects [[n1, n2, n3], b] entries, found {other}")),
                })
                .collect::<Result<Vec<_>>>()?;
            ConstraintSet::spherical_cap(constraints).map_err(|e| e.to_string())?
        }
        "product" => {
            arity(name, args, 1)?;
            let Manifold::Product(fs) = m else {
                return Err(format!("product set on non-product manifold {m}"));
            };
            match &args[0] {
                Expr::List(parts) if parts.len() == fs.len() => ConstraintSet::product(
                    parts.iter().zip(fs).map(|(p, f)| set(p, f)).collect::<Result<_>>()?,
                ),
                other => return Err(format!("product set needs {} factor sets, found {other}", fs.len())),
            }
        }
        other => {
            return Err(format!(
                "unknown set {other:?}; expected whole, interval, box, ball, cap, halfspaces or product"
            ))
        }
    };
    if q.manifold() != m {
        return Err(format!("set {e} lives on {} but the manifold is {m}", q.manifold()));
    }
    Ok(q)
}

type ScalarFn = Box<dyn Fn(&ManifoldPoint) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&ManifoldPoint) -> Vector + Send + Sync>;

/// A scalar function with its Riemannian gradient.
pub struct Scalar {
    pub name: String,
    pub value: ScalarFn,
    pub gradient: GradFn,
}

fn euclidean_only(m: &Manifold, what: &str) -> Result<usize> {
    match m {
        Manifold::Euclidean(n) => Ok(*n),
        other => Err(format!("{what} is only defined on euclidean(n), not {other}")),
    }
}

fn has_hyperbolic(m: &Manifold) -> bool {
    match m {
        Manifold::Hyperbolic2 => true,
        Manifold::Product(fs) => fs.iter().any(has_hyperbolic),
        _ => false,
    }
}

fn check_len(m: &Manifold, v: &[f64], what: &str) -> Result<()> {
    if v.len() == m.ambient_dim() {
        Ok(())
    } else {
        Err(format!("{what} needs {} coordinates, got {}", m.ambient_dim(), v.len()))
    }
}

pub fn scalar(e: &Expr, m: &Manifold) -> Result<Scalar> {
    let Expr::Call(name, args) = e else {
        return Err(format!("expected a scalar function, found {e}"));
    };
    let label = e.to_string();
    match name.as_str() {
        "zero" => {
            arity(name, args, 0)?;
            let n = m.ambient_dim();
            Ok(Scalar {
                name: label,
                value: Box::new(|_| 0.0),
                gradient: Box::new(move |_| Vector::zeros(n)),
            })
        }
        "half-norm-squared" => {
            arity(name, args, 0)?;
            euclidean_only(m, name)?;
            Ok(Scalar {
                name: label,
                value: Box::new(|x| 0.5 * x.coords().norm_squared()),
                gradient: Box::new(|x| x.coords().clone()),
            })
        }
        "shifted-square" => {
            arity(name, args, 1)?;
            euclidean_only(m, name)?;
            let c = vector(&args[0], "shifted-square center")?;
            check_len(m, &c, "shifted-square center")?;
            let c = Vector::from_vec(c);
            let c2 = c.clone();
            Ok(Scalar {
                name: label,
                value: Box::new(move |x| (x.coords() - &c).norm_squared()),
                gradient: Box::new(move |x| (x.coords() - &c2) * 2.0),
            })
        }
        "linear" => {
            arity(name, args, 1)?;
            let a = vector(&args[0], "linear coefficients")?;
            check_len(m, &a, "linear coefficients")?;
            let a = Vector::from_vec(a);
            let a2 = a.clone();
            let m2 = m.clone();
            // The hyperboloid metric is not the ambient one, so the projection is not the gradient there.
            let gradient: GradFn = if has_hyperbolic(m) {
                Box::new(move |x| fd_gradient(&m2, x, |y| a2.dot(y.coords())))
            } else {
                Box::new(move |x| m2.project_tangent(x.coords(), &a2))
            };
            Ok(Scalar {
                name: label,
                value: Box::new(move |x| a.dot(x.coords())),
                gradient,
            })
        }
        "distance-squared" => {
            arity(name, args, 1)?;
            let p = point(m, &vector(&args[0], "distance-squared anchor")?, "distance-squared anchor")?;
            let (m1, m2, p2) = (m.clone(), m.clone(), p.clone());
            Ok(Scalar {
                name: label,
                value: Box::new(move |x| m1.distance(x, &p).powi(2)),
                gradient: Box::new(move |x| m2.log_vec(x, &p2) * -2.0),
            })
        }
        other => Err(format!(
            "unknown scalar function {other:?}; expected zero, half-norm-squared, shifted-square, linear or distance-squared"
        )),
    }
}

pub fn field(e: &Expr, m: &Manifold) -> Result<VectorField> {
    let Expr::Call(name, args) = e else {
        return Err(format!("expected a vector field, found {e}"));
    };
    let label = e.to_string();
    match name.as_str() {
        "identity" => {
            arity(name, args, 0)?;
            euclidean_only(m, name)?;
            Ok(VectorField::single(m.clone(), label, |x| x.coords().clone()))
        }
        "affine" => {
            arity(name, args, 2)?;
            let n = euclidean_only(m, name)?;
            let rows = matrix(&args[0], "affine matrix")?;
            let b = vector(&args[1], "affine offset")?;
            if rows.len() != n || rows.iter().any(|r| r.len() != n) || b.len() != n {
                return Err(format!("affine needs a {n}x{n} matrix and a length-{n} offset"));
            }
            let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]);
            let b = Vector::from_vec(b);
            Ok(VectorField::single(m.clone(), label, move |x| &mat * x.coords() + &b))
        }
        "tangent" => {
            arity(name, args, 1)?;
            let c = vector(&args[0], "tangent vector")?;
            check_len(m, &c, "tangent vector")?;
            let c = Vector::from_vec(c);
            let mm = m.clone();
            Ok(VectorField::single(m.clone(), label, move |x| mm.project_tangent(x.coords(), &c)))
        }
        "gradient" => {
            arity(name, args, 1)?;
            let s = scalar(&args[0], m)?;
            Ok(VectorField::single(m.clone(), label, move |x| (s.gradient)(x)))
        }
        other => Err(format!(
            "unknown vector field {other:?}; expected identity, affine, tangent or gradient"
        )),
    }
}

/// A bifunction together with the problem structure it came from.
pub struct BuiltProblem {
    pub bifunction: Bifunction,
    /// Strategy set of a game; games fix their own set.
    pub game_set: Option<ConstraintSet>,
    pub nash: Option<NashProblem>,
    pub mvip: Option<MVIProblem>,
}

fn plain(bifunction: Bifunction) -> BuiltProblem {
    BuiltProblem {
        bifunction,
        game_set: None,
        nash: None,
        mvip: None,
    }
}

/// Parses a bifunction on `m`; `set` is needed by `mvip(...)`.
pub fn bifunction(e: &Expr, m: Option<&Manifold>, set: Option<&ConstraintSet>) -> Result<BuiltProblem> {
    let Expr::Call(name, args) = e else {
        return Err(format!("expected a bifunction, found {e}"));
    };
    if name == "nep" {
        return nep(args);
    }
    let m = m.ok_or("this bifunction needs problem.manifold")?;
    match name.as_str() {
        "zero" => arity(name, args, 0).map(|_| plain(zero_bifunction(m))),
        "optimization" => {
            arity(name, args, 1)?;
            let s = scalar(&args[0], m)?;
            let (value, gradient) = (s.value, s.gradient);
            Ok(plain(optimization_bifunction_with_gradient(
                m,
                format!("optimization({})", s.name),
                move |x| value(x),
                move |x| gradient(x),
            )))
        }
        "gv" => {
            arity(name, args, 1)?;
            Ok(plain(gv_bifunction(&field(&args[0], m)?)))
        }
        "gz" => {
            arity(name, args, 1)?;
            let z = point(m, &vector(&args[0], "gz anchor")?, "gz anchor")?;
            Ok(plain(gz_bifunction(m, &z)))
        }
        "mvip" => {
            arity(name, args, 2)?;
            let v = field(&args[0], m)?;
            let s = scalar(&args[1], m)?;
            let set = set.ok_or("mvip(...) needs problem.set")?.clone();
            let (value, gradient) = (s.value, s.gradient);
            let p = MVIProblem::new(v, set, move |x| value(x), move |x| vec![gradient(x)])
                .map_err(|e| e.to_string())?;
            Ok(BuiltProblem {
                bifunction: build_mvip_bifunction(&p),
                game_set: None,
                nash: None,
                mvip: Some(p),
            })
        }
        other => match builtin(other) {
            Ok(b) if args.is_empty() => {
                if b.set.manifold() != m {
                    return Err(format!("{other} lives on {}, not {m}", b.set.manifold()));
                }
                Ok(BuiltProblem {
                    bifunction: b.bifunction,
                    game_set: None,
                    nash: b.nash,
                    mvip: b.mvip,
                })
            }
            _ => Err(format!(
                "unknown bifunction {other:?}; expected zero, optimization, gv, gz, mvip, nep or one of {}",
                BUILTIN_NAMES.join(", ")
            )),
        },
    }
}

fn nep(args: &[Expr]) -> Result<BuiltProblem> {
    if args.is_empty() || args.len() > 2 {
        return Err("nep takes a game and optional weights: nep(example51, [1, 1])".into());
    }
    let weights = args.get(1).map(|w| vector(w, "nep weights")).transpose()?;
    let game = match &args[0] {
        Expr::Call(g, a) if g == "example51" && a.is_empty() => {
            let w = weights.unwrap_or_else(|| vec![1.0, 1.0]);
            if w.len() != 2 {
                return Err(format!("example51 has 2 players, got {} weights", w.len()));
            }
            example51([w[0], w[1]]).map_err(|e| e.to_string())?
        }
        Expr::Call(g, a) if g == "quadratic-game" => {
            arity(g, a, 1)?;
            let n = num(&a[0], "player count")?;
            if n < 1.0 || n.fract() != 0.0 {
                return Err(format!("player count must be a positive integer, got {n}"));
            }
            let n = n as usize;
            quadratic_game(n, weights.unwrap_or_else(|| vec![1.0; n])).map_err(|e| e.to_string())?
        }
        other => return Err(format!("unknown game {other}; expected example51 or quadratic-game(m)")),
    };
    Ok(BuiltProblem {
        bifunction: build_nep_bifunction(&game),
        game_set: Some(game.set().clone()),
        nash: Some(game),
        mvip: None,
    })
}
