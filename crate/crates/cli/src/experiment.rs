//! Config-driven sweeps.
//!
//! ```json
//! {
//!   "machine": { "zoo": "mod", "n": 5 },
//!   "inputs": { "powers": { "symbol": "a", "from": 1, "to": 15 } },
//!   "criterion": "bounded:0.125",
//!   "engine": { "engine": "exact", "maxSteps": 1000 },
//!   "approx": { "rowEps": 0.05 },
//!   "output": "mod5.csv"
//! }
//! ```
//!
//! Relative paths resolve against the config's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::json;

use qfa_core::problems::promised_instances;
use qfa_core::qcompile::build_approx_machine;
use qfa_core::{decide, Criterion, SimOptions};

use crate::commands::{decision_str, exhaustive, sci};
use crate::load::{self, Machine};
use crate::{Engine, Failure, Outcome, Source};

/// Longest word an exhaustive sweep may ask for.
pub const MAX_SWEEP_LEN: usize = 24;

#[derive(Deserialize, Debug)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub machine: MachineSource,
    pub inputs: InputSet,
    #[serde(default)]
    pub criterion: Option<String>,
    #[serde(default)]
    pub engine: EngineConfig,
    /// Pair every run with a gate-synthesized copy of the machine.
    #[serde(default)]
    pub approx: Option<ApproxConfig>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Deserialize, Debug)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MachineSource {
    pub spec: Option<PathBuf>,
    pub zoo: Option<String>,
    pub n: Option<u64>,
    pub eps: Option<f64>,
    pub advice: Option<PathBuf>,
    pub advice_string: Option<String>,
}

#[derive(Deserialize, Debug)]
#[serde(rename_all = "camelCase")]
pub enum InputSet {
    List(Vec<String>),
    /// Every word up to this length.
    UpTo(usize),
    /// `symbol^j` for `from <= j <= to`.
    Powers { symbol: char, from: usize, to: usize },
    /// Promised instances of a zoo family.
    Promised { family: String, n: u64, count: usize },
}

#[derive(Deserialize, Debug)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EngineConfig {
    pub engine: Engine,
    /// Defaults by machine type, as for `simulate`.
    pub max_steps: Option<usize>,
    #[serde(default = "default_residual_target")]
    pub residual_target: f64,
}

fn default_residual_target() -> f64 {
    SimOptions::default().residual_target
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { engine: Engine::Exact, max_steps: None, residual_target: default_residual_target() }
    }
}

#[derive(Deserialize, Debug)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ApproxConfig {
    /// Error bound of the exact machine; defaults to the criterion's epsilon.
    pub error_bound: Option<f64>,
    /// Fixed per-row accuracy instead of the step budget.
    pub row_eps: Option<f64>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Canonical order: shorter words first, then lexicographic.
fn shortlex(a: &String, b: &String) -> std::cmp::Ordering {
    a.chars().count().cmp(&b.chars().count()).then_with(|| a.cmp(b))
}

pub fn run(config: &Path, out: Option<&Path>, seed: u64) -> Outcome {
    let cfg: ExperimentConfig = serde_json::from_str(&load::read(config)?)
        .map_err(|e| Failure::input(format!("{}: {e}", config.display())))?;
    let base = config.parent().unwrap_or(Path::new("."));
    let m = &cfg.machine;
    let source = Source {
        spec: m.spec.as_deref().map(|p| resolve(base, p)),
        zoo: m.zoo.clone(),
        n: m.n,
        eps: m.eps,
        advice: m.advice.as_deref().map(|p| resolve(base, p)),
        advice_string: m.advice_string.clone(),
    };
    if source.spec.is_some() == source.zoo.is_some() {
        return Err(Failure::input("machine needs exactly one of `spec` and `zoo`"));
    }
    let loaded = load::load(&source, seed)?;
    let criterion = match &cfg.criterion {
        Some(s) => load::parse_criterion(s)?,
        None => loaded.criterion.unwrap_or(Criterion::UnboundedError),
    };
    let mut inputs = match &cfg.inputs {
        InputSet::List(v) => v.clone(),
        InputSet::UpTo(l) if *l > MAX_SWEEP_LEN => {
            return Err(Failure::input(format!("upTo {l} exceeds the cap {MAX_SWEEP_LEN}")));
        }
        InputSet::UpTo(l) => exhaustive(&loaded.alphabet(), *l)?,
        InputSet::Powers { symbol, from, to } => (*from..=*to).map(|j| symbol.to_string().repeat(j)).collect(),
        InputSet::Promised { family, n, count } => promised_instances(family, *n, *count, seed)?,
    };
    inputs.sort_by(shortlex);
    inputs.dedup();

    let opts = SimOptions {
        max_steps: cfg.engine.max_steps.unwrap_or(loaded.machine.default_max_steps()),
        residual_target: cfg.engine.residual_target };
    let approx = match (&cfg.approx, &loaded.machine) {
        (None, _) => None,
        (Some(a), Machine::Fa(spec)) => {
            let bound = match (a.error_bound, criterion) {
                (Some(e), _) | (None, Criterion::BoundedError(e)) => e,
                _ => return Err(Failure::input("approx needs errorBound or a bounded-error criterion")),
            };
            let longest = inputs.iter().map(|x| x.chars().count()).max().unwrap_or(0);
            let built = build_approx_machine(spec, bound, 4 * (longest + 2), 1.0, a.row_eps)?;
            Some(Machine::Fa(built.spec))
        }
        (Some(_), Machine::Qtm(..)) => return Err(Failure::input("approx runs need a qfa")),
    };

    let path = out.map(Path::to_path_buf).or_else(|| cfg.output.as_deref().map(|p| resolve(base, p)));
    let sink: Box<dyn std::io::Write> = match &path {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| Failure { code: 3, message: format!("{}: {e}", p.display()) })?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["input", "p_acc", "p_rej", "decision", "steps"];
    if loaded.zoo.is_some() {
        header.push("expected");
    }
    if approx.is_some() {
        header.extend(["p_acc_approx", "delta"]);
    }
    header.push("error");
    w.write_record(&header)?;

    let (mut errors, mut accepted, mut max_delta) = (0usize, 0usize, 0f64);
    for x in &inputs {
        let mut rec = vec![x.clone()];
        let exact = load::run(&loaded.machine, x, cfg.engine.engine, opts);
        let paired = approx.as_ref().map(|m| load::run(m, x, cfg.engine.engine, opts));
        match (&exact, &paired) {
            (Ok((st, _)), p) if p.as_ref().is_none_or(|r| r.is_ok()) => {
                let d = decide(st, criterion);
                accepted += usize::from(d == qfa_core::Decision::Accept);
                rec.extend([sci(st.p_acc), sci(st.p_rej)]);
                rec.extend([decision_str(d).to_string(), st.steps_executed.to_string()]);
                if loaded.zoo.is_some() {
                    rec.push(loaded.expected(x).map(load::membership_str).unwrap_or("").to_string());
                }
                if let Some(Ok((ap, _))) = p {
                    let delta = (ap.p_acc - st.p_acc).abs();
                    max_delta = max_delta.max(delta);
                    rec.extend([sci(ap.p_acc), format!("{delta:.3e}")]);
                }
                rec.push(String::new());
            }
            _ => {
                errors += 1;
                let msg = match (exact, paired) {
                    (Err(e), _) | (_, Some(Err(e))) => e.to_string(),
                    _ => unreachable!("one side failed"),
                };
                rec.resize(header.len() - 1, String::new());
                rec.push(msg);
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    let mut summary = json!({ "rows": inputs.len(), "accepted": accepted, "errors": errors });
    if approx.is_some() {
        summary["maxDelta"] = json!(max_delta);
    }
    if path.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(if errors > 0 { 1 } else { 0 })
}
