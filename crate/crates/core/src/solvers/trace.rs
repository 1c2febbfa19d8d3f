use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::manifold::ManifoldPoint;

pub const CSV_HEADER: &str = "k,lambda,step,residual,L_hat,inner_iters,ball_slack,status";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIters,
    StepConditionViolated,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIters => "max-iters",
            Status::StepConditionViolated => "step-condition-violated",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One outer iteration: `x_{k+1}` computed from `x_k` with parameter `λ_k`.
///
/// On a step-condition violation the record holds `x_k` and `step`/`ball_slack` are NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub point: ManifoldPoint,
    pub lambda: f64,
    pub lipschitz: f64,
    pub step: f64,
    pub residual: f64,
    pub inner_iters: usize,
    pub ball_slack: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverTrace {
    pub initial_point: ManifoldPoint,
    pub records: Vec<IterationRecord>,
    pub status: Status,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub status: Status,
    pub iterations: usize,
    pub final_point: Vec<f64>,
    pub final_residual: f64,
}

impl SolverTrace {
    pub fn final_point(&self) -> &ManifoldPoint {
        self.records
            .iter()
            .rev()
            .find(|r| !r.step.is_nan())
            .map(|r| &r.point)
            .unwrap_or(&self.initial_point)
    }

    pub fn final_residual(&self) -> f64 {
        self.records
            .iter()
            .rev()
            .find(|r| !r.step.is_nan())
            .or(self.records.last())
            .map_or(f64::NAN, |r| r.residual)
    }

    /// Accepted iterations.
    pub fn iterations(&self) -> usize {
        self.records.iter().filter(|r| !r.step.is_nan()).count()
    }

    /// Iterates `x_0, x_1, …` of accepted steps.
    pub fn iterates(&self) -> Vec<&ManifoldPoint> {
        std::iter::once(&self.initial_point)
            .chain(self.records.iter().filter(|r| !r.step.is_nan()).map(|r| &r.point))
            .collect()
    }

    pub fn summary(&self) -> Summary {
        Summary {
            status: self.status,
            iterations: self.iterations(),
            final_point: self.final_point().as_slice().to_vec(),
            final_residual: self.final_residual(),
        }
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }

    /// CSV with one row per record; the last row carries the terminal status.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let last = self.records.len().saturating_sub(1);
        for (i, r) in self.records.iter().enumerate() {
            let status = if i == last { self.status.as_str() } else { "running" };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.k, r.lambda, r.step, r.residual, r.lipschitz, r.inner_iters, r.ball_slack, status
            )
            .expect("writing to a String");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace() -> SolverTrace {
        let rec = |k, x: f64, step| IterationRecord {
            k,
            point: ManifoldPoint::from_slice(&[x]),
            lambda: 1.0,
            lipschitz: 2.0,
            step,
            residual: -0.5,
            inner_iters: 3,
            ball_slack: f64::INFINITY,
        };
        SolverTrace {
            initial_point: ManifoldPoint::from_slice(&[4.0]),
            records: vec![rec(0, 2.0, 2.0), rec(1, 1.0, 1.0)],
            status: Status::MaxIters,
            warnings: vec![],
        }
    }

    #[test]
    fn csv_layout() {
        let csv = trace().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "0,1,2,-0.5,2,3,inf,running");
        assert_eq!(lines[2], "1,1,1,-0.5,2,3,inf,max-iters");
    }

    #[test]
    fn summary_fields() {
        let t = trace();
        let v: serde_json::Value = serde_json::from_str(&t.summary_json()).unwrap();
        assert_eq!(v["status"], "max-iters");
        assert_eq!(v["iterations"], 2);
        assert_eq!(v["final_point"][0], 1.0);
        assert_eq!(v["final_residual"], -0.5);
        assert_eq!(t.iterates().len(), 3);
    }
}
