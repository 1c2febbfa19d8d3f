//! Assembling a problem from a config, running the solver and the checks.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use riemann_ep::applications::{best_response_oracle, builtin, mvip_direct_oracle, MVIProblem, NashProblem};
use riemann_ep::bifunction::{check_monotone, check_pointwise_weak_convexity, Bifunction};
use riemann_ep::manifold::{Manifold, ManifoldPoint};
use riemann_ep::sets::ConstraintSet;
use riemann_ep::solvers::{
    algorithm_p, brute_force_ep, verify_inclusion_vip_ep, SolutionSet, SolverConfig, SolverTrace, Status,
    SET_TOLERANCE_SPACINGS,
};

use crate::config::{ExperimentConfig, VerifySection};
use crate::descriptor;

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_MAX_ITERS: i32 = 2;
pub const EXIT_STEP_CONDITION: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

/// Command-line overrides shared by `run` and `verify`.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub max_iters: Option<usize>,
    pub out: Option<PathBuf>,
    pub quiet: bool,
}

pub struct Experiment {
    pub name: String,
    pub bifunction: Bifunction,
    pub set: ConstraintSet,
    pub start: ManifoldPoint,
    pub solution: Option<ManifoldPoint>,
    pub config: SolverConfig,
    pub nash: Option<NashProblem>,
    pub mvip: Option<MVIProblem>,
    pub verify: VerifySection,
}

fn field<T>(key: &str, r: Result<T, String>) -> Result<T, String> {
    r.map_err(|e| format!("{key}: {e}"))
}

fn point_on(m: &Manifold, coords: &[f64], key: &str) -> Result<ManifoldPoint, String> {
    descriptor::point(m, coords, key)
}

impl Experiment {
    pub fn build(cfg: ExperimentConfig, name: &str, ov: &Overrides) -> Result<Self, String> {
        let p = &cfg.problem;
        let (bifunction, set, start, solution, base, nash, mvip) = if let Some(b) = &p.builtin {
            for (key, present) in [
                ("manifold", p.manifold.is_some()),
                ("set", p.set.is_some()),
                ("bifunction", p.bifunction.is_some()),
                ("weak_pole", p.weak_pole.is_some()),
            ] {
                if present {
                    return Err(format!("problem.{key}: not allowed together with problem.builtin"));
                }
            }
            let b = builtin(b).map_err(|e| format!("problem.builtin: {e}"))?;
            (b.bifunction, b.set, Some(b.start), b.known_solution, b.config, b.nash, b.mvip)
        } else {
            let text = p
                .bifunction
                .as_deref()
                .ok_or("problem: give either builtin or bifunction")?;
            let expr = field("problem.bifunction", descriptor::parse(text))?;
            let is_game = matches!(&expr, descriptor::Expr::Call(n, _) if n == "nep");
            let (manifold, set) = if is_game {
                for (key, present) in [("manifold", p.manifold.is_some()), ("set", p.set.is_some())] {
                    if present {
                        return Err(format!("problem.{key}: a nep(...) game fixes its own strategy set"));
                    }
                }
                (None, None)
            } else {
                let mtext = p.manifold.as_deref().ok_or("problem.manifold: missing")?;
                let m = field("problem.manifold", descriptor::parse(mtext).and_then(|e| descriptor::manifold(&e)))?;
                let q = match &p.set {
                    Some(s) => field("problem.set", descriptor::parse(s).and_then(|e| descriptor::set(&e, &m)))?,
                    None => ConstraintSet::whole(m.clone()),
                };
                (Some(m), Some(q))
            };
            let built = field(
                "problem.bifunction",
                descriptor::bifunction(&expr, manifold.as_ref(), set.as_ref()),
            )?;
            let set = built.game_set.or(set).expect("set is known");
            (built.bifunction, set, None, None, SolverConfig::default(), built.nash, built.mvip)
        };
        let m = set.manifold().clone();
        let set = match &p.weak_pole {
            Some(c) => {
                let pole = point_on(&m, c, "problem.weak_pole")?;
                set.with_weak_pole(pole).map_err(|e| format!("problem.weak_pole: {e}"))?
            }
            None => set,
        };
        let start = match (&p.start, start) {
            (Some(c), _) => point_on(&m, c, "problem.start")?,
            (None, Some(s)) => s,
            (None, None) => return Err("problem.start: missing".into()),
        };
        if !set.contains(&start) {
            return Err(format!("problem.start: {start} is not in the constraint set"));
        }
        let solution = match &p.solution {
            Some(c) => Some(point_on(&m, c, "problem.solution")?),
            None => solution,
        };
        let mut config = cfg.solver.apply(base)?;
        if let Some(seed) = ov.seed {
            config.seed = seed;
        }
        if let Some(n) = ov.max_iters {
            if n == 0 {
                return Err("--max-iters: must be positive".into());
            }
            config.max_outer_iters = n;
        }
        Ok(Self {
            name: name.to_string(),
            bifunction,
            set,
            start,
            solution,
            config,
            nash,
            mvip,
            verify: cfg.verify,
        })
    }

    /// Reference solutions on a grid: best responses for games, the direct MVIP oracle,
    /// or the EP oracle.
    fn reference(&self, resolution: usize) -> riemann_ep::Result<SolutionSet> {
        if let Some(g) = &self.nash {
            best_response_oracle(g, resolution)
        } else if let Some(p) = &self.mvip {
            mvip_direct_oracle(p, resolution)
        } else {
            brute_force_ep(&self.bifunction, &self.set, resolution)
        }
    }
}

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Converged => EXIT_CONVERGED,
        Status::MaxIters => EXIT_MAX_ITERS,
        Status::StepConditionViolated => EXIT_STEP_CONDITION,
    }
}

fn fmt_point(x: &ManifoldPoint) -> String {
    let parts: Vec<String> = x.as_slice().iter().map(|v| format!("{v:.6}")).collect();
    format!("({})", parts.join(", "))
}

/// One row of the check table.
struct Check {
    name: &'static str,
    passed: Option<bool>,
    detail: String,
}

fn mark(c: &Check) -> &'static str {
    match c.passed {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "SKIP",
    }
}

/// Compares the solver output with the grid oracle; skipped on non-compact sets.
fn oracle_check(e: &Experiment, x: &ManifoldPoint) -> Check {
    let name = "oracle";
    if !e.set.is_compact() {
        return Check {
            name,
            passed: None,
            detail: "constraint set is not compact".into(),
        };
    }
    match e.reference(e.verify.resolution) {
        Ok(sol) if sol.is_empty() => Check {
            name,
            passed: Some(false),
            detail: format!("oracle found no solution at resolution {}", e.verify.resolution),
        },
        Ok(sol) => {
            let m = e.set.manifold();
            let tol = SET_TOLERANCE_SPACINGS * sol.spacing;
            let d = sol.distance_to(m, x);
            let best = sol.best().map(fmt_point).unwrap_or_default();
            Check {
                name,
                passed: Some(d <= tol),
                detail: format!(
                    "distance {d:.3e} to {} oracle point(s), tolerance {tol:.3e}, best {best}",
                    sol.len()
                ),
            }
        }
        Err(err) => Check {
            name,
            passed: None,
            detail: err.to_string(),
        },
    }
}

fn run_checks(e: &Experiment, seed: u64) -> Vec<Check> {
    let v = &e.verify;
    let f = &e.bifunction;
    let mut out = Vec::new();
    if v.monotone {
        let r = check_monotone(f, &e.set, v.pairs, seed);
        let mut detail = format!(
            "max F(x,y)+F(y,x) = {:.3e} over {} pairs, max |F(x,x)| = {:.3e}",
            r.worst, r.pairs, r.diagonal
        );
        if let Some((x, y)) = &r.witness {
            let _ = write!(detail, ", witness x = {}, y = {}", fmt_point(x), fmt_point(y));
        }
        out.push(Check {
            name: "monotone",
            passed: Some(r.monotone),
            detail,
        });
    }
    if v.convexity {
        let r = check_pointwise_weak_convexity(f, &e.set, v.points, v.directions, seed);
        let mut detail = format!("{} geodesics, {} violations", r.geodesics, r.violations.len());
        if let Some(w) = r.violations.iter().max_by(|a, b| a.excess.total_cmp(&b.excess)) {
            let _ = write!(
                detail,
                ", worst excess {:.3e} at t = {} on x = {}, y = {}",
                w.excess,
                w.t,
                fmt_point(&w.x),
                fmt_point(&w.y)
            );
        }
        out.push(Check {
            name: "convexity",
            passed: Some(r.passed()),
            detail,
        });
    }
    if v.vip_ep {
        out.push(match verify_inclusion_vip_ep(f, &e.set, v.resolution) {
            Ok(r) => Check {
                name: "vip-ep",
                passed: Some(r.equal()),
                detail: format!(
                    "|EP| = {}, |VIP| = {}, VIP->EP {:.3e}, EP->VIP {:.3e}, tolerance {:.3e}",
                    r.ep.len(),
                    r.vip.len(),
                    r.vip_to_ep,
                    r.ep_to_vip,
                    r.tolerance
                ),
            },
            Err(err) => Check {
                name: "vip-ep",
                passed: None,
                detail: err.to_string(),
            },
        });
    }
    out
}

fn report_text(e: &Experiment, trace: Option<&SolverTrace>, checks: &[Check]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "experiment: {}", e.name);
    let _ = writeln!(s, "bifunction: {}", e.bifunction.name());
    let _ = writeln!(s, "manifold: {}", e.set.manifold());
    if let Some(t) = trace {
        let x = t.final_point();
        let _ = writeln!(s, "status: {}", t.status);
        let _ = writeln!(s, "iterations: {}", t.iterations());
        let _ = writeln!(s, "final point: {}", fmt_point(x));
        if let Some(sol) = &e.solution {
            let _ = writeln!(s, "distance to known solution: {:.3e}", e.set.manifold().distance(x, sol));
        }
    }
    let _ = writeln!(s);
    for c in checks {
        let _ = writeln!(s, "{:<10} {}  {}", c.name, mark(c), c.detail);
    }
    s
}

fn out_dir(cfg_out: Option<&str>, ov: &Overrides, stem: &str) -> PathBuf {
    match (&ov.out, cfg_out) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => Path::new("out").join(stem),
    }
}

fn write(dir: &Path, file: &str, contents: &str) -> Result<(), String> {
    fs::write(dir.join(file), contents).map_err(|e| format!("{}: {e}", dir.join(file).display()))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into())
}

fn prepare(path: &Path, ov: &Overrides) -> Result<(Experiment, PathBuf), String> {
    let cfg = crate::config::load(path)?;
    let name = stem(path);
    let dir = out_dir(cfg.output.dir.as_deref(), ov, &name);
    let e = Experiment::build(cfg, &name, ov).map_err(|err| format!("{}: {err}", path.display()))?;
    fs::create_dir_all(&dir).map_err(|err| format!("{}: {err}", dir.display()))?;
    Ok((e, dir))
}

/// Runs the solver; with `verify` also the enabled checks. Returns the exit code.
pub fn run(path: &Path, ov: &Overrides, verify: bool) -> i32 {
    match run_inner(path, ov, verify) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            EXIT_ERROR
        }
    }
}

fn run_inner(path: &Path, ov: &Overrides, verify: bool) -> Result<i32, String> {
    let (e, dir) = prepare(path, ov)?;
    let trace = algorithm_p(&e.bifunction, &e.set, &e.start, &e.config)
        .map_err(|err| format!("{}: {err}", e.name))?;
    if !ov.quiet {
        for w in &trace.warnings {
            eprintln!("warning: {}: {w}", e.name);
        }
    }
    write(&dir, "trace.csv", &trace.to_csv())?;
    write(&dir, "summary.json", &format!("{}\n", trace.summary_json()))?;
    let mut code = exit_code(trace.status);
    if verify {
        let x = trace.final_point();
        let mut checks = Vec::new();
        if e.verify.oracle {
            checks.push(oracle_check(&e, x));
        }
        checks.extend(run_checks(&e, e.config.seed));
        write(&dir, "report.txt", &report_text(&e, Some(&trace), &checks))?;
        if code == EXIT_CONVERGED && checks.iter().any(|c| c.name == "oracle" && c.passed == Some(false)) {
            code = EXIT_CHECK_FAILED;
        }
        if !ov.quiet {
            for c in &checks {
                if c.passed == Some(false) {
                    eprintln!("warning: {}: {} check failed: {}", e.name, c.name, c.detail);
                }
            }
        }
    }
    if !ov.quiet {
        println!(
            "{}: {} after {} iterations, residual {:.3e}, final point {} -> {}",
            e.name,
            trace.status,
            trace.iterations(),
            trace.final_residual(),
            fmt_point(trace.final_point()),
            dir.display()
        );
    }
    Ok(code)
}

/// Runs only the checks and writes the table. Exit 4 when any enabled check fails.
pub fn verify(path: &Path, ov: &Overrides) -> i32 {
    let result = (|| -> Result<i32, String> {
        let (e, dir) = prepare(path, ov)?;
        let checks = run_checks(&e, e.config.seed);
        let text = report_text(&e, None, &checks);
        write(&dir, "report.txt", &text)?;
        if !ov.quiet {
            print!("{text}");
        }
        Ok(if checks.iter().any(|c| c.passed == Some(false)) {
            EXIT_CHECK_FAILED
        } else {
            EXIT_CONVERGED
        })
    })();
    result.unwrap_or_else(|err| {
        eprintln!("error: {err}");
        EXIT_ERROR
    })
}

/// Runs every `*.toml` in `dir` concurrently, writing to `<out>/<stem>`.
///
/// Exit 1 if any experiment errored, otherwise the largest exit code.
pub fn batch(dir: &Path, ov: &Overrides, verify: bool) -> i32 {
    let mut configs: Vec<PathBuf> = match fs::read_dir(dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect(),
        Err(err) => {
            eprintln!("error: {}: {err}", dir.display());
            return EXIT_ERROR;
        }
    };
    configs.sort();
    if configs.is_empty() {
        eprintln!("error: {}: no .toml configs", dir.display());
        return EXIT_ERROR;
    }
    let root = ov.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let codes: Vec<i32> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|p| {
                let ov = Overrides {
                    out: Some(root.join(stem(p))),
                    ..ov.clone()
                };
                s.spawn(move || run(p, &ov, verify))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or(EXIT_ERROR))
            .collect()
    });
    if codes.contains(&EXIT_ERROR) {
        EXIT_ERROR
    } else {
        codes.into_iter().max().unwrap_or(EXIT_CONVERGED)
    }
}
