//! Machine loading and single-input runs shared by the commands.

use std::path::Path;

use qfa_core::machines::{run_dfa, run_nfa, run_pfa, Kind, PfaOptions, Verdict};
use qfa_core::problems::{build_zoo, oracle_membership, zoo_entry};
use qfa_core::qtm::{PreparedQtm, QTM_SPEC_VERSION};
use qfa_core::sim::{simulate_2qfa, simulate_2qfa_traced};
use qfa_core::{AdviceFn, Criterion, MachineSpec, Membership, QtmSpec, RunStats, SimOptions, ZooParams};

use crate::{Engine, Failure, Source};

pub enum Machine {
    Fa(MachineSpec),
    Qtm(Box<PreparedQtm>, QtmSpec, AdviceFn),
}

pub struct Loaded {
    pub machine: Machine,
    /// Criterion the source suggests, if any.
    pub criterion: Option<Criterion>,
    /// Zoo family and level, for oracle lookups.
    pub zoo: Option<(String, u64)>,
}

impl Loaded {
    pub fn alphabet(&self) -> Vec<char> {
        match &self.machine {
            Machine::Fa(m) => m.input_alphabet.clone(),
            Machine::Qtm(_, q, _) => q.input_alphabet.clone(),
        }
    }

    pub fn expected(&self, x: &str) -> Option<Membership> {
        let (name, n) = self.zoo.as_ref()?;
        oracle_membership(name, *n, x).ok()
    }
}

/// Default step cap for QTM runs; an interpreted 2qfa step costs thousands.
pub const QTM_MAX_STEPS: usize = 5_000_000;

impl Machine {
    pub fn default_max_steps(&self) -> usize {
        match self {
            Machine::Fa(_) => SimOptions::default().max_steps,
            Machine::Qtm(..) => QTM_MAX_STEPS,
        }
    }
}

pub fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure { code: 3, message: format!("{}: {e}", path.display()) })
}

/// Parses and validates a qfa spec.
pub fn machine_spec(text: &str) -> Result<MachineSpec, Failure> {
    let m = MachineSpec::from_json(text)?;
    let report = m.validate();
    if !report.is_valid() {
        return Err(qfa_core::Error::InvalidSpec(report.violations).into());
    }
    Ok(m)
}

pub fn qtm_spec(text: &str) -> Result<QtmSpec, Failure> {
    let q = QtmSpec::from_json(text)?;
    let v = q.validate();
    if !v.is_empty() {
        return Err(qfa_core::Error::InvalidSpec(v).into());
    }
    Ok(q)
}

fn is_qtm(text: &str) -> bool {
    serde_json::from_str::<serde_json::Value>(text)
        .ok()
        .and_then(|v| v.get("version").and_then(|s| s.as_str()).map(|s| s == QTM_SPEC_VERSION))
        .unwrap_or(false)
}

pub fn advice(file: Option<&Path>, string: Option<&str>) -> Result<Option<AdviceFn>, Failure> {
    match (file, string) {
        (Some(p), _) => Ok(Some(AdviceFn::from_json(&read(p)?)?)),
        (None, Some(w)) => Ok(Some(AdviceFn::classical(w))),
        (None, None) => Ok(None),
    }
}

pub fn zoo_params(name: &str, n: Option<u64>, eps: Option<f64>, seed: u64) -> Result<ZooParams, Failure> {
    let entry = zoo_entry(name)?;
    Ok(ZooParams { n: n.unwrap_or(entry.default_n), seed, eps })
}

pub fn load(src: &Source, seed: u64) -> Result<Loaded, Failure> {
    if let Some(name) = &src.zoo {
        let params = zoo_params(name, src.n, src.eps, seed)?;
        let entry = zoo_entry(name)?;
        let m = build_zoo(name, &params)?;
        return Ok(Loaded {
            machine: Machine::Fa(m),
            criterion: Some((entry.criterion)(&params)),
            zoo: Some((name.clone(), params.n)),
        });
    }
    let path = src.spec.as_deref().ok_or_else(|| Failure::input("need --spec or --zoo"))?;
    let text = read(path)?;
    if is_qtm(&text) {
        let q = qtm_spec(&text)?;
        let adv = advice(src.advice.as_deref(), src.advice_string.as_deref())?
            .ok_or_else(|| Failure::input("QTM specs need --advice or --advice-string"))?;
        let prepared = PreparedQtm::new(&q)?;
        return Ok(Loaded { machine: Machine::Qtm(Box::new(prepared), q, adv), criterion: None, zoo: None });
    }
    Ok(Loaded { machine: Machine::Fa(machine_spec(&text)?), criterion: None, zoo: None })
}

/// `bounded:EPS`, `unbounded` or `nondet`.
pub fn parse_criterion(s: &str) -> Result<Criterion, Failure> {
    match s.split_once(':') {
        Some(("bounded", e)) => {
            let eps: f64 = e.parse().map_err(|_| Failure::input(format!("bad epsilon {e:?}")))?;
            Ok(Criterion::bounded(eps)?)
        }
        None if s == "unbounded" => Ok(Criterion::UnboundedError),
        None if s == "nondet" => Ok(Criterion::NondetQuantum),
        _ => Err(Failure::input(format!("unknown criterion {s:?}; use bounded:EPS, unbounded or nondet"))),
    }
}

fn verdict_stats(v: Verdict) -> RunStats {
    let mut st = RunStats::default();
    match v {
        Verdict::Accept => st.p_acc = 1.0,
        Verdict::Reject => st.p_rej = 1.0,
        Verdict::Undefined => st.residual = 1.0,
    }
    st.finish(false);
    st
}

/// One run. The second field is the QTM's work space, if any.
pub fn run(m: &Machine, x: &str, engine: Engine, opts: SimOptions) -> qfa_core::Result<(RunStats, Option<usize>)> {
    match m {
        Machine::Qtm(p, _, adv) => {
            let st = p.simulate(x, adv, opts)?;
            Ok((st.stats, Some(st.space_used)))
        }
        Machine::Fa(spec) => {
            let st = match spec.kind {
                Kind::Dfa => verdict_stats(run_dfa(spec, x)?),
                Kind::Nfa => verdict_stats(run_nfa(spec, x)?),
                Kind::Pfa => run_pfa(spec, x, PfaOptions { power_steps: None, residual_target: opts.residual_target })?,
                Kind::Qfa => match engine {
                    Engine::Exact => simulate_2qfa(spec, x, opts)?,
                    Engine::Traced => simulate_2qfa_traced(spec, x, opts)?,
                },
            };
            Ok((st, None))
        }
    }
}

pub fn membership_str(m: Membership) -> &'static str {
    match m {
        Membership::Positive => "positive",
        Membership::Negative => "negative",
        Membership::Unpromised => "unpromised",
    }
}
