use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use qfa_core::bridges::qtm_state_bound;
use qfa_core::problems::{build_zoo, zoo, zoo_entry};
use qfa_core::qcompile::{decode_table, encode_circuit, encode_rows, encode_table, machine_from_circuits, Circuit};
use qfa_core::qtm::check_qtm_well_formed;
use qfa_core::sim::check_well_formed;
use qfa_core::transforms::all_strings;
use qfa_core::{
    decide, qfa_family_to_qtm, qtm_to_qfa_family, Advice, AdviceFn, BlockSelector, Criterion, Decision, Membership,
    QfaToQtmParams, RunStats, SimOptions,
};

use crate::load::{self, Machine};
use crate::{DecodeArgs, EncodeArgs, Failure, Format, Outcome, Qfa2QtmArgs, Qtm2QfaArgs, SimulateArgs, WfcheckArgs};

/// Exhaustive input sets larger than this are refused.
pub const MAX_INPUTS: f64 = 1e6;

pub fn exhaustive(alphabet: &[char], max_len: usize) -> Result<Vec<String>, Failure> {
    let count: f64 = (0..=max_len).map(|l| (alphabet.len() as f64).powi(l as i32)).sum();
    if count > MAX_INPUTS {
        return Err(Failure::input(format!("{count} inputs up to length {max_len}; cap is {MAX_INPUTS}")));
    }
    Ok(all_strings(alphabet, max_len))
}

/// A closed stdout (e.g. piped into `head`) is not an error.
fn print_json(v: &impl Serialize) {
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(v).expect("report serializes"));
}

/// Scientific notation without a negative zero.
pub fn sci(x: f64) -> String {
    format!("{:.15e}", x + 0.0)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SimReport {
    input: String,
    decision: Decision,
    #[serde(skip_serializing_if = "Option::is_none")]
    expected: Option<Membership>,
    #[serde(skip_serializing_if = "Option::is_none")]
    space_used: Option<usize>,
    stats: RunStats,
}

pub fn simulate(a: &SimulateArgs, seed: u64) -> Outcome {
    let loaded = load::load(&a.source, seed)?;
    let criterion = match &a.criterion {
        Some(s) => load::parse_criterion(s)?,
        None => loaded.criterion.unwrap_or(Criterion::UnboundedError),
    };
    let inputs = match a.upto {
        Some(l) => exhaustive(&loaded.alphabet(), l)?,
        None if a.inputs.is_empty() => vec![String::new()],
        None => a.inputs.clone(),
    };
    let opts = SimOptions { max_steps: a.max_steps.unwrap_or(loaded.machine.default_max_steps()), residual_target: a.residual_target };
    let mut reports = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (stats, space_used) = load::run(&loaded.machine, &x, a.engine, opts)?;
        reports.push(SimReport { decision: decide(&stats, criterion), expected: loaded.expected(&x), space_used, stats, input: x });
    }
    match a.format {
        Format::Json => print_json(&reports),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            if a.per_step {
                w.write_record(["input", "step", "p_acc", "p_rej", "residual"])?;
                for r in &reports {
                    for row in r.stats.csv_rows() {
                        w.write_record([r.input.as_str(), &row[0], &row[1], &row[2], &row[3]])?;
                    }
                }
            } else {
                w.write_record(["input", "p_acc", "p_rej", "residual", "steps", "truncated", "decision"])?;
                for r in &reports {
                    let s = &r.stats;
                    w.write_record([
                        r.input.clone(),
                        sci(s.p_acc),
                        sci(s.p_rej),
                        sci(s.residual),
                        s.steps_executed.to_string(),
                        s.truncated.to_string(),
                        decision_str(r.decision).to_string(),
                    ])?;
                }
            }
            w.flush()?;
        }
    }
    Ok(0)
}

pub fn decision_str(d: Decision) -> &'static str {
    match d {
        Decision::Accept => "accept",
        Decision::Reject => "reject",
        Decision::Fail => "fail",
    }
}

/// Every advice string an advice function can hand out.
fn advice_samples(adv: &AdviceFn) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for a in adv.by_length.values().chain(adv.default.iter()) {
        match a {
            Advice::Classical(w) => out.push(w.clone()),
            Advice::Quantum(bs) => out.extend(bs.iter().map(|b| b.advice.clone())),
        }
    }
    out.sort();
    out.dedup();
    out
}

pub fn wfcheck(a: &WfcheckArgs, seed: u64) -> Outcome {
    let loaded = load::load(&a.source, seed)?;
    let ok = match &loaded.machine {
        Machine::Fa(spec) => {
            let r = check_well_formed(spec, a.maxlen)?;
            print_json(&r);
            r.is_ok()
        }
        Machine::Qtm(_, q, adv) => {
            let r = check_qtm_well_formed(q, a.maxlen, &advice_samples(adv))?;
            print_json(&r);
            r.is_ok()
        }
    };
    Ok(if ok { 0 } else { 1 })
}

pub fn encode(a: &EncodeArgs, seed: u64) -> Outcome {
    let loaded = load::load(&a.source, seed)?;
    let Machine::Fa(spec) = &loaded.machine else {
        return Err(Failure::input("encode needs a qfa"));
    };
    let t = encode_table(spec, a.row_eps)?;
    load::write(&a.out, &t.text)?;
    print_json(&json!({ "rows": t.rows, "gates": t.gates, "length": t.len(), "shapeBound": t.shape_bound }));
    Ok(0)
}

pub fn decode(a: &DecodeArgs) -> Outcome {
    let skeleton = load::machine_spec(&load::read(&a.skeleton)?)?;
    let raw = load::read(&a.table)?;
    let text = raw.strip_suffix('\n').map(|t| t.strip_suffix('\r').unwrap_or(t)).unwrap_or(&raw);
    let rows = decode_table(&skeleton, text)?;
    let listing: Vec<_> = rows
        .iter()
        .map(|((q, s), c)| json!({ "state": q, "symbol": s, "gates": c.len(), "circuit": encode_circuit(c) }))
        .collect();
    let circuits: Vec<Circuit> = rows.into_iter().map(|(_, c)| c).collect();
    if let Some(p) = &a.reencode {
        load::write(p, &encode_rows(&circuits))?;
    }
    if let Some(p) = &a.machine_out {
        load::write(p, &machine_from_circuits(&skeleton, &circuits)?.to_json())?;
    }
    print_json(&listing);
    Ok(0)
}

pub fn qtm2qfa(a: &Qtm2QfaArgs) -> Outcome {
    let q = load::qtm_spec(&load::read(&a.qtm)?)?;
    let adv = load::advice(a.advice.as_deref(), a.advice_string.as_deref())?.expect("clap requires advice");
    let m = qtm_to_qfa_family(&q, &adv, a.n.unwrap_or(a.len), a.len, a.cap)?;
    load::write(&a.out, &m.to_json())?;
    let advice_len = match adv.get(a.len) {
        Some(Advice::Classical(w)) => w.chars().count(),
        _ => 0,
    };
    print_json(&json!({
        "states": m.states.len(),
        "transitions": m.transitions.len(),
        "stateBound": qtm_state_bound(&q, advice_len),
    }));
    Ok(0)
}

fn parse_block(s: &str) -> Result<BlockSelector, Failure> {
    if s == "length" {
        return Ok(BlockSelector::InputLength);
    }
    s.parse().map(BlockSelector::Fixed).map_err(|_| Failure::input(format!("bad block {s:?}; use a number or `length`")))
}

pub fn qfa2qtm(a: &Qfa2QtmArgs, seed: u64) -> Outcome {
    let entry = zoo_entry(&a.family)?;
    let base = a.base.unwrap_or(entry.default_n);
    let mut params = QfaToQtmParams::new(a.nbar, a.eps.unwrap_or(entry.default_eps), parse_block(&a.block)?);
    params.row_eps = a.row_eps;
    params.lengths = a.lengths.clone();
    let family = |i: usize| {
        let p = load::zoo_params(&a.family, Some(base + i as u64 - 1), a.eps, seed).expect("family checked above");
        build_zoo(&a.family, &p)
    };
    let out = qfa_family_to_qtm(&family, &params)?;
    load::write(&a.out_qtm, &out.qtm.to_json())?;
    load::write(&a.out_advice, &out.advice.to_json())?;
    let row_eps: Vec<_> = out.row_eps.iter().map(|(l, e)| json!({ "length": l, "rowEps": e })).collect();
    print_json(&json!({
        "states": out.qtm.states.len(),
        "rules": out.qtm.transitions.len(),
        "spaceBound": out.qtm.space_bound,
        "alpha": out.alpha,
        "adviceSize": out.advice.size_bound,
        "rowEps": row_eps,
    }));
    Ok(0)
}

pub fn zoo_list() -> Outcome {
    println!("name\talphabet\tdefault_n\tdefault_eps\tmachine\tstate_bound\terror_bound\tdescription");
    for e in zoo() {
        let alphabet: String = e.input_alphabet.iter().collect();
        let machine = if e.build.is_some() { "yes" } else { "oracle" };
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            e.name, alphabet, e.default_n, e.default_eps, machine, e.state_bound, e.error_bound, e.description
        );
    }
    Ok(0)
}

pub fn zoo_build(name: &str, n: Option<u64>, eps: Option<f64>, out: Option<&Path>, seed: u64) -> Outcome {
    let params = load::zoo_params(name, n, eps, seed)?;
    let m = build_zoo(name, &params)?;
    match out {
        Some(p) => load::write(p, &m.to_json())?,
        None => println!("{}", m.to_json()),
    }
    Ok(0)
}
