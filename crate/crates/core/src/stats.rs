//! Run statistics shared by every engine, plus acceptance criteria.

use serde::{Deserialize, Serialize};

/// Tolerance used when comparing probabilities against decision thresholds.
pub const DECISION_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepStat {
    pub p_acc: f64,
    pub p_rej: f64,
    /// Non-halting mass left after this step's measurement.
    pub residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunStats {
    pub per_step: Vec<StepStat>,
    pub p_acc: f64,
    pub p_rej: f64,
    pub residual: f64,
    pub expected_runtime_lower: f64,
    pub residual_bound_note: String,
    pub steps_executed: usize,
    pub truncated: bool,
}

impl RunStats {
    /// Accumulates a measured step. `t` is 1-based.
    pub fn push_step(&mut self, t: usize, p_acc: f64, p_rej: f64, residual: f64) {
        self.per_step.push(StepStat { p_acc, p_rej, residual });
        self.p_acc += p_acc;
        self.p_rej += p_rej;
        self.residual = residual;
        self.expected_runtime_lower += t as f64 * (p_acc + p_rej);
        self.steps_executed = t;
    }

    pub fn finish(&mut self, truncated: bool) {
        self.truncated = truncated;
        self.residual_bound_note = if self.residual <= 1e-15 {
            "all mass halted".to_string()
        } else {
            format!(
                "{:.3e} mass still running after {} steps; expected runtime is a lower bound",
                self.residual, self.steps_executed
            )
        };
    }

    /// Component-wise weighted mixture. Shorter step lists are padded with
    /// their final residual and zero halting mass.
    pub fn mixture(parts: &[(f64, RunStats)]) -> RunStats {
        let len = parts.iter().map(|(_, s)| s.per_step.len()).max().unwrap_or(0);
        let mut out = RunStats::default();
        for t in 0..len {
            let mut st = StepStat::default();
            for (w, s) in parts {
                match s.per_step.get(t) {
                    Some(x) => {
                        st.p_acc += w * x.p_acc;
                        st.p_rej += w * x.p_rej;
                        st.residual += w * x.residual;
                    }
                    None => st.residual += w * s.residual,
                }
            }
            out.per_step.push(st);
        }
        for (w, s) in parts {
            out.p_acc += w * s.p_acc;
            out.p_rej += w * s.p_rej;
            out.residual += w * s.residual;
            out.expected_runtime_lower += w * s.expected_runtime_lower;
            out.steps_executed = out.steps_executed.max(s.steps_executed);
            out.truncated |= s.truncated;
        }
        let truncated = out.truncated;
        out.finish(truncated);
        out
    }

    /// CSV rows `step, p_acc_step, p_rej_step, residual`.
    pub fn csv_rows(&self) -> Vec<[String; 4]> {
        self.per_step
            .iter()
            .enumerate()
            .map(|(i, s)| {
                [
                    (i + 1).to_string(),
                    format!("{:.15e}", s.p_acc),
                    format!("{:.15e}", s.p_rej),
                    format!("{:.15e}", s.residual),
                ]
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "mode", content = "epsilon")]
pub enum Criterion {
    BoundedError(f64),
    UnboundedError,
    NondetQuantum,
}

impl Criterion {
    pub fn bounded(eps: f64) -> crate::Result<Self> {
        if !(0.0..0.5).contains(&eps) {
            return Err(crate::Error::Invalid(format!("bounded error needs 0 <= eps < 1/2, got {eps}")));
        }
        Ok(Criterion::BoundedError(eps))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
    Fail,
}

pub fn decide(stats: &RunStats, criterion: Criterion) -> Decision {
    decide_probs(stats.p_acc, stats.p_rej, criterion)
}

pub fn decide_probs(p_acc: f64, p_rej: f64, criterion: Criterion) -> Decision {
    let tol = DECISION_TOL;
    match criterion {
        Criterion::BoundedError(eps) => {
            if p_acc >= 1.0 - eps - tol {
                Decision::Accept
            } else if p_rej >= 1.0 - eps - tol {
                Decision::Reject
            } else {
                Decision::Fail
            }
        }
        Criterion::UnboundedError => {
            if p_acc > 0.5 + tol {
                Decision::Accept
            } else if p_rej >= 0.5 - tol {
                Decision::Reject
            } else {
                Decision::Fail
            }
        }
        Criterion::NondetQuantum => {
            if p_acc > tol {
                Decision::Accept
            } else {
                Decision::Reject
            }
        }
    }
}
