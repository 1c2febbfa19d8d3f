//! Bifunctions `F: M × M → ℝ ∪ {+∞}`, vector fields on `Q`, and the constructions built
//! from them: `G_V`, `G_z`, the regularization `λF + G_z` and the subgradient field
//! `A_F(x) = ∂F(x,·)(x)`.
//!
//! Evaluation closures must be pure; they are shared behind `Arc` and may be called
//! from several threads.

mod checks;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::manifold::{sup_pairing, Manifold, ManifoldPoint, TangentVector, Vector};

pub use checks::{
    check_af_monotone, check_monotone, check_pointwise_weak_convexity, lipschitz_estimate,
    subgradient_inequality_test, AfMonotonicityReport, ConvexityReport, ConvexityViolation,
    LipschitzEstimate, MonotonicityReport, CONVEXITY_SLACK, MONOTONE_TOL,
    SUBGRADIENT_TOL,
};

/// Central finite-difference step, composed with `exp`.
pub const FD_STEP: f64 = 1e-5;

type EvalFn = dyn Fn(&ManifoldPoint, &ManifoldPoint) -> f64 + Send + Sync;
type FieldFn = dyn Fn(&ManifoldPoint) -> Vec<Vector> + Send + Sync;

/// `a + b` with `+∞` absorbing.
pub fn ext_add(a: f64, b: f64) -> f64 {
    if a == f64::INFINITY || b == f64::INFINITY {
        f64::INFINITY
    } else {
        a + b
    }
}

/// `a − b` with the convention `a − (+∞) = +∞`.
pub fn ext_sub(a: f64, b: f64) -> f64 {
    if a == f64::INFINITY || b == f64::INFINITY {
        f64::INFINITY
    } else {
        a - b
    }
}

/// Set-valued vector field `x ↦ V(x) ⊂ T_x M`, finitely valued.
#[derive(Clone)]
pub struct VectorField {
    manifold: Manifold,
    name: String,
    field: Arc<FieldFn>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("manifold", &self.manifold)
            .field("name", &self.name)
            .finish()
    }
}

impl VectorField {
    /// `field(x)` returns ambient components of the vectors in `V(x)`.
    pub fn new(
        manifold: Manifold,
        name: impl Into<String>,
        field: impl Fn(&ManifoldPoint) -> Vec<Vector> + Send + Sync + 'static,
    ) -> Self {
        Self {
            manifold,
            name: name.into(),
            field: Arc::new(field),
        }
    }

    /// Single-valued field.
    pub fn single(
        manifold: Manifold,
        name: impl Into<String>,
        field: impl Fn(&ManifoldPoint) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self::new(manifold, name, move |x| vec![field(x)])
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn at(&self, x: &ManifoldPoint) -> Vec<TangentVector> {
        self.components(x)
            .into_iter()
            .map(|c| TangentVector::new(x.clone(), c))
            .collect()
    }

    pub fn components(&self, x: &ManifoldPoint) -> Vec<Vector> {
        (self.field)(x)
    }
}

/// A bifunction together with an optional subgradient oracle for `A_F`.
#[derive(Clone)]
pub struct Bifunction {
    manifold: Manifold,
    name: String,
    eval: Arc<EvalFn>,
    subgradient: Option<Arc<FieldFn>>,
    smooth: bool,
}

impl fmt::Debug for Bifunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Bifunction")
            .field("manifold", &self.manifold)
            .field("name", &self.name)
            .field("has_oracle", &self.subgradient.is_some())
            .field("smooth", &self.smooth)
            .finish()
    }
}

impl Bifunction {
    pub fn new(
        manifold: Manifold,
        name: impl Into<String>,
        eval: impl Fn(&ManifoldPoint, &ManifoldPoint) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            manifold,
            name: name.into(),
            eval: Arc::new(eval),
            subgradient: None,
            smooth: false,
        }
    }

    /// Attaches an oracle returning the extreme points of `∂F(x,·)(x)`.
    pub fn with_subgradient(
        mut self,
        oracle: impl Fn(&ManifoldPoint) -> Vec<Vector> + Send + Sync + 'static,
    ) -> Self {
        self.subgradient = Some(Arc::new(oracle));
        self
    }

    /// Marks `F(x,·)` as differentiable at `x`, enabling finite-difference `A_F`.
    pub fn smooth(mut self) -> Self {
        self.smooth = true;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    pub fn has_oracle(&self) -> bool {
        self.subgradient.is_some()
    }

    pub fn eval(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> f64 {
        (self.eval)(x, y)
    }

    /// The oracle's output if attached, else (for smooth `F`) the finite-difference
    /// Riemannian gradient of `F(x,·)` at `x`.
    pub fn subgradient_af(&self, x: &ManifoldPoint) -> Result<Vec<TangentVector>> {
        Ok(self
            .subgradient_components(x)?
            .into_iter()
            .map(|c| TangentVector::new(x.clone(), c))
            .collect())
    }

    pub fn subgradient_components(&self, x: &ManifoldPoint) -> Result<Vec<Vector>> {
        if let Some(oracle) = &self.subgradient {
            return Ok(oracle(x));
        }
        if self.smooth {
            return Ok(vec![self.fd_gradient(x)]);
        }
        Err(Error::NoSubgradient)
    }

    /// Central differences of `y ↦ F(x, y)` along an orthonormal tangent basis at `x`.
    pub fn fd_gradient(&self, x: &ManifoldPoint) -> Vector {
        let phi = |y: &ManifoldPoint| self.eval(x, y);
        fd_gradient(&self.manifold, x, phi)
    }

    /// `A_F` as a vector field.
    pub fn af_field(&self) -> Result<VectorField> {
        if self.subgradient.is_none() && !self.smooth {
            return Err(Error::NoSubgradient);
        }
        let f = self.clone();
        Ok(VectorField::new(
            self.manifold.clone(),
            format!("A[{}]", self.name),
            move |x| f.subgradient_components(x).unwrap_or_default(),
        ))
    }
}

/// Finite-difference Riemannian gradient of a scalar function at `x`.
pub fn fd_gradient(
    m: &Manifold,
    x: &ManifoldPoint,
    phi: impl Fn(&ManifoldPoint) -> f64,
) -> Vector {
    let mut grad = Vector::zeros(x.len());
    for e in m.tangent_basis(x) {
        let plus = m.exp_unchecked(x, &(&e * FD_STEP));
        let minus = m.exp_unchecked(x, &(&e * -FD_STEP));
        let slope = (phi(&plus) - phi(&minus)) / (2.0 * FD_STEP);
        grad += e * slope;
    }
    grad
}

/// `G_V(x, y) = sup_{u ∈ V(x), v ∈ exp_x⁻¹ y} ⟨u, v⟩`.
pub fn eval_gv(field: &VectorField, x: &ManifoldPoint, y: &ManifoldPoint) -> f64 {
    let m = field.manifold();
    let log = m.log_unchecked(x, y);
    field
        .components(x)
        .iter()
        .map(|u| log.support(m, u))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `G_V` as a bifunction; its `A_F` is `V` itself.
pub fn gv_bifunction(field: &VectorField) -> Bifunction {
    let f = field.clone();
    let oracle = field.clone();
    Bifunction::new(
        field.manifold().clone(),
        format!("gv[{}]", field.name()),
        move |x, y| eval_gv(&f, x, y),
    )
    .with_subgradient(move |x| oracle.components(x))
}

/// `G_z(x, y) = sup_{u ∈ exp_x⁻¹ z, v ∈ exp_x⁻¹ y} ⟨−u, v⟩`.
pub fn eval_gz(m: &Manifold, z: &ManifoldPoint, x: &ManifoldPoint, y: &ManifoldPoint) -> f64 {
    let to_z = m.log_unchecked(x, z);
    let to_y = m.log_unchecked(x, y);
    sup_pairing(m, &to_z, -1.0, &to_y)
}

/// `G_z` as a bifunction with subgradient `−exp_x⁻¹ z`.
pub fn gz_bifunction(m: &Manifold, z: &ManifoldPoint) -> Bifunction {
    let (m1, z1) = (m.clone(), z.clone());
    let (m2, z2) = (m.clone(), z.clone());
    Bifunction::new(m.clone(), "gz", move |x, y| eval_gz(&m1, &z1, x, y))
        .with_subgradient(move |x| {
            m2.log_unchecked(x, &z2)
                .sample(8)
                .into_iter()
                .map(|u| -u.into_components())
                .collect()
        })
}

/// `F_{λ,z}(x, y) = λF(x, y) + G_z(x, y)`.
///
/// When `F` carries a subgradient oracle (or is smooth) the result carries
/// `λA_F(x) − exp_x⁻¹ z`.
pub fn regularize(f: &Bifunction, lambda: f64, z: &ManifoldPoint) -> Result<Bifunction> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
    }
    let m = f.manifold().clone();
    let (inner, m1, z1) = (f.clone(), m.clone(), z.clone());
    let mut out = Bifunction::new(
        m.clone(),
        format!("{}+gz", f.name()),
        move |x, y| ext_add(lambda * inner.eval(x, y), eval_gz(&m1, &z1, x, y)),
    );
    out.smooth = f.smooth;
    if f.has_oracle() || f.is_smooth() {
        let (inner, m2, z2) = (f.clone(), m, z.clone());
        out = out.with_subgradient(move |x| {
            let af = inner.subgradient_components(x).unwrap_or_default();
            let logs = m2.log_unchecked(x, &z2).sample(8);
            let mut out = Vec::with_capacity(af.len() * logs.len());
            for a in &af {
                for u in &logs {
                    out.push(a * lambda - u.components());
                }
            }
            out
        });
    }
    Ok(out)
}

/// `F(x, y) = f(y) − f(x)`; its equilibria are the minimizers of `f`.
pub fn optimization_bifunction(
    m: &Manifold,
    name: impl Into<String>,
    f: impl Fn(&ManifoldPoint) -> f64 + Send + Sync + 'static,
) -> Bifunction {
    let f = Arc::new(f);
    let g = f.clone();
    Bifunction::new(m.clone(), name, move |x, y| ext_sub(g(y), g(x)))
        .smooth()
        .with_subgradient({
            let m = m.clone();
            move |x| vec![fd_gradient(&m, x, |y| f(y))]
        })
}

/// `F(x, y) = f(y) − f(x)` with the Riemannian gradient of `f` supplied.
pub fn optimization_bifunction_with_gradient(
    m: &Manifold,
    name: impl Into<String>,
    f: impl Fn(&ManifoldPoint) -> f64 + Send + Sync + 'static,
    grad: impl Fn(&ManifoldPoint) -> Vector + Send + Sync + 'static,
) -> Bifunction {
    Bifunction::new(m.clone(), name, move |x, y| ext_sub(f(y), f(x)))
        .smooth()
        .with_subgradient(move |x| vec![grad(x)])
}

/// `F ≡ 0`.
pub fn zero_bifunction(m: &Manifold) -> Bifunction {
    let n = m.ambient_dim();
    Bifunction::new(m.clone(), "zero", |_, _| 0.0)
        .smooth()
        .with_subgradient(move |_| vec![Vector::zeros(n)])
}
