//! TOML experiment configuration.

use std::path::Path;

use serde::Deserialize;

use riemann_ep::solvers::{InnerSolver, LambdaSchedule, SolverConfig};

use crate::descriptor::{self, Expr};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub builtin: Option<String>,
    pub manifold: Option<String>,
    pub set: Option<String>,
    pub bifunction: Option<String>,
    pub start: Option<Vec<f64>>,
    pub solution: Option<Vec<f64>>,
    pub weak_pole: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum LambdaSetting {
    Value(f64),
    Rule(String),
    List(Vec<f64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub lambda: Option<LambdaSetting>,
    pub inner: Option<String>,
    pub max_outer_iters: Option<usize>,
    pub max_inner_iters: Option<usize>,
    pub inner_tol: Option<f64>,
    pub step_tol: Option<f64>,
    pub residual_tol: Option<f64>,
    pub probe_spacing: Option<f64>,
    pub probe_max_points: Option<usize>,
    pub oracle_resolution: Option<usize>,
    pub lipschitz_radius: Option<f64>,
    pub lipschitz_samples: Option<usize>,
    pub auto_shrink: Option<bool>,
    pub assume_proximity: Option<bool>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub oracle: bool,
    pub monotone: bool,
    pub convexity: bool,
    pub vip_ep: bool,
    pub resolution: usize,
    pub pairs: usize,
    pub points: usize,
    pub directions: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            oracle: true,
            monotone: true,
            convexity: true,
            vip_ep: false,
            resolution: 41,
            pairs: 200,
            points: 40,
            directions: 4,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

pub fn load(path: &Path) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn parse(text: &str) -> Result<ExperimentConfig, String> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| e.to_string().trim_end().to_string())?;
    let v = &cfg.verify;
    if v.resolution < 2 {
        return Err(format!("verify.resolution: need at least 2 points per dimension, got {}", v.resolution));
    }
    if v.pairs == 0 || v.points == 0 || v.directions == 0 {
        return Err("verify: pairs, points and directions must be positive".into());
    }
    Ok(cfg)
}

fn lambda_schedule(setting: &LambdaSetting) -> Result<LambdaSchedule, String> {
    match setting {
        LambdaSetting::Value(c) => Ok(LambdaSchedule::Constant(*c)),
        LambdaSetting::List(v) => Ok(LambdaSchedule::Explicit(v.clone())),
        LambdaSetting::Rule(text) => {
            let rule = descriptor::parse(text)?;
            match &rule {
                Expr::Call(name, args) if args.len() == 1 => {
                    let Expr::Num(c) = args[0] else {
                        return Err(format!("{name} expects a number, found {}", args[0]));
                    };
                    match name.as_str() {
                        "constant" => Ok(LambdaSchedule::Constant(c)),
                        "harmonic" => Ok(LambdaSchedule::Harmonic(c)),
                        other => Err(format!("unknown rule {other:?}; expected constant(c) or harmonic(c)")),
                    }
                }
                other => Err(format!("expected constant(c) or harmonic(c), found {other}")),
            }
        }
    }
}

impl SolverSection {
    /// Applies the keys that are set on top of `base`.
    pub fn apply(&self, base: SolverConfig) -> Result<SolverConfig, String> {
        let mut c = base;
        if let Some(l) = &self.lambda {
            c.lambda = lambda_schedule(l).map_err(|e| format!("solver.lambda: {e}"))?;
        }
        if let Some(inner) = &self.inner {
            c.inner = match inner.as_str() {
                "extragradient" => InnerSolver::Extragradient,
                "oracle-grid" => InnerSolver::OracleGrid,
                other => {
                    return Err(format!(
                        "solver.inner: unknown inner solver {other:?}; expected extragradient or oracle-grid"
                    ))
                }
            };
        }
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { c.$field = v; })*
            };
        }
        take!(
            max_outer_iters,
            max_inner_iters,
            inner_tol,
            step_tol,
            residual_tol,
            probe_spacing,
            probe_max_points,
            oracle_resolution,
            lipschitz_radius,
            lipschitz_samples,
            auto_shrink,
            assume_proximity,
            seed
        );
        c.validate().map_err(|e| format!("solver: {e}"))?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_forms() {
        let cfg = parse(
            r#"
            [problem]
            builtin = "prox-quadratic"
            [solver]
            lambda = "harmonic(2)"
            "#,
        )
        .unwrap();
        let c = cfg.solver.apply(SolverConfig::default()).unwrap();
        assert_eq!(c.lambda, LambdaSchedule::Harmonic(2.0));

        let cfg = parse("[problem]\nbuiltin = \"x\"\n[solver]\nlambda = [1.0, 0.5]\n").unwrap();
        let c = cfg.solver.apply(SolverConfig::default()).unwrap();
        assert_eq!(c.lambda, LambdaSchedule::Explicit(vec![1.0, 0.5]));
        assert_eq!(c.lambda.at(7), 0.5);

        let cfg = parse("[problem]\nbuiltin = \"x\"\n[solver]\nlambda = -1.0\n").unwrap();
        assert!(cfg.solver.apply(SolverConfig::default()).unwrap_err().starts_with("solver:"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse("[problem]\nbuiltin = \"x\"\nstrat = [1.0]\n").unwrap_err();
        assert!(err.contains("strat"), "{err}");
        assert!(err.contains("line 3"), "{err}");
        assert!(parse("[problem]\n[solvr]\n").is_err());
    }

    #[test]
    fn overrides_apply_on_top_of_base() {
        let cfg = parse("[problem]\n[solver]\nmax_outer_iters = 7\ninner = \"oracle-grid\"\n").unwrap();
        let c = cfg.solver.apply(SolverConfig::default()).unwrap();
        assert_eq!(c.max_outer_iters, 7);
        assert_eq!(c.inner, InnerSolver::OracleGrid);
        assert_eq!(c.step_tol, SolverConfig::default().step_tol);
        let bad = parse("[problem]\n[solver]\ninner = \"newton\"\n").unwrap();
        assert!(bad.solver.apply(SolverConfig::default()).unwrap_err().starts_with("solver.inner"));
    }
}
