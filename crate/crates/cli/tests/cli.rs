use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riemann-ep"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn help_documents_every_flag() {
    let o = run(&["run", "--help"]);
    assert!(o.status.success());
    let help = String::from_utf8_lossy(&o.stdout);
    for flag in ["--verify", "--seed", "--out", "--max-iters", "--quiet", "--batch"] {
        assert!(help.contains(flag), "{flag} missing from run --help");
    }
    let top = String::from_utf8_lossy(&run(&["--help"]).stdout).into_owned();
    assert!(top.contains("Exit codes"));
}

#[test]
fn unknown_key_is_rejected_with_its_location() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.toml", "[problem]\nbuiltin = \"prox-quadratic\"\nstrat = [1.0]\n");
    let o = run(&["run", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("strat"), "{err}");
}

#[test]
fn malformed_config_names_the_field() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap().to_string();
    let cases = [
        ("[problem\n", "line 1"),
        (
            "[problem]\nmanifold = \"euclidean(2)\"\nset = \"ball([0, 0], 1\"\nbifunction = \"zero\"\nstart = [0, 0]\n",
            "problem.set",
        ),
        ("[problem]\nbuiltin = \"prox-quadratic\"\n[solver]\nlambda = \"cubic(1)\"\n", "solver.lambda"),
        ("[problem]\nbuiltin = \"prox-quadratic\"\nstart = [500.0]\n", "problem.start"),
        ("[problem]\nbuiltin = \"nope\"\n", "problem.builtin"),
        (
            "[problem]\nmanifold = \"sphere2\"\nbifunction = \"optimization(half-norm-squared)\"\nstart = [0, 0, 1]\n",
            "problem.bifunction",
        ),
    ];
    for (i, (text, anchor)) in cases.iter().enumerate() {
        let cfg = write_config(&dir, &format!("c{i}.toml"), text);
        let o = run(&["run", &cfg, "--out", &out]);
        assert_eq!(o.status.code(), Some(1), "{text}");
        assert!(stderr(&o).contains(anchor), "{anchor}: {}", stderr(&o));
    }
}

#[test]
fn prox_quadratic_converges_to_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("prox-quadratic.toml");
    let o = run(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty() && o.stderr.is_empty());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "converged");
    assert!(summary["final_point"][0].as_f64().unwrap().abs() < 1e-6);
    assert!(summary["final_residual"].as_f64().unwrap() >= -1e-6);
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(csv.starts_with("k,lambda,step,residual,L_hat,inner_iters,ball_slack,status\n"));
    // x_k = 8 / 2^k
    let second: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert!((second[2].parse::<f64>().unwrap() - 4.0).abs() < 1e-9);
    assert!(csv.trim_end().ends_with("converged"));
}

#[test]
fn example51_agrees_with_the_best_response_oracle() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("example51.toml");
    let o = run(&["run", cfg.to_str().unwrap(), "--verify", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("oracle     PASS"), "{report}");
}

#[test]
fn budget_and_step_condition_exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let cfg = configs().join("prox-quadratic.toml");
    let o = run(&["run", cfg.to_str().unwrap(), "--max-iters", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let csv = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.trim_end().ends_with("max-iters"));

    let cfg = write_config(
        &dir,
        "big-lambda.toml",
        "[problem]\nmanifold = \"sphere2\"\nset = \"cap([0, 0, 1], 0.5)\"\n\
         bifunction = \"optimization(distance-squared([0.3, 0.2, 1]))\"\nstart = [0.3, -0.3, 1]\n\
         [solver]\nlambda = 2.0\nassume_proximity = true\n",
    );
    let o = run(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("step condition"));
}

#[test]
fn verify_reports_a_monotonicity_witness() {
    let dir = TempDir::new().unwrap();
    // F(x, y) = ⟨x, x − y⟩
    let cfg = write_config(
        &dir,
        "flip.toml",
        "[problem]\nmanifold = \"euclidean(2)\"\nset = \"ball([0, 0], 1)\"\n\
         bifunction = \"gv(affine([[-1, 0], [0, -1]], [0, 0]))\"\nstart = [0, 0]\n\
         [verify]\nconvexity = false\n",
    );
    let o = run(&["verify", &cfg, "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(4));
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("monotone   FAIL") && report.contains("witness"), "{report}");

    let cfg = write_config(
        &dir,
        "opt.toml",
        "[problem]\nmanifold = \"euclidean(1)\"\nset = \"interval(-1, 2)\"\n\
         bifunction = \"optimization(shifted-square([0.5]))\"\nstart = [0]\n\
         [verify]\nvip_ep = true\nresolution = 301\n",
    );
    let o = run(&["verify", &cfg, "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("vip-ep     PASS"), "{report}");
}

#[test]
fn batch_runs_every_config_into_its_own_directory() {
    let dir = TempDir::new().unwrap();
    let inputs = dir.path().join("in");
    fs::create_dir(&inputs).unwrap();
    fs::copy(configs().join("prox-quadratic.toml"), inputs.join("a.toml")).unwrap();
    fs::write(
        inputs.join("b.toml"),
        "[problem]\nmanifold = \"hyperbolic2\"\nbifunction = \"optimization(distance-squared([1, 0, 0]))\"\n\
         start = [1.1401754, 0.5, 0.2]\n[solver]\nlambda = 0.5\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&["run", "--batch", inputs.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for stem in ["a", "b"] {
        assert!(out.join(stem).join("trace.csv").exists());
        assert!(out.join(stem).join("summary.json").exists());
    }
    let b: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("b/summary.json")).unwrap()).unwrap();
    let x: Vec<f64> = b["final_point"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((x[0] - 1.0).abs() < 1e-5 && x[1].abs() < 1e-5 && x[2].abs() < 1e-5, "{x:?}");
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("mvip-linear.toml");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, seed) in [(&a, "1"), (&b, "1")] {
        let o = run(&["run", cfg.to_str().unwrap(), "--seed", seed, "--out", out.to_str().unwrap(), "--quiet"]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(fs::read(a.join("trace.csv")).unwrap(), fs::read(b.join("trace.csv")).unwrap());
}
