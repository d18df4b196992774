//! Gate-level compilation of quantum transition tables.
//!
//! Each pair `(q, σ)` of a qfa gets a circuit over `{CNOT, H, T}` preparing
//! its transition column; a table is the concatenation of the encoded
//! circuits in row order (state index, then symbol index with ¢ first and $
//! last).

pub mod encode;
pub mod gates;
pub mod sk;
pub mod synth;
pub mod two_level;

pub use encode::{decode_circuit, decode_rows, encode_circuit, encode_rows};
pub use gates::{Circuit, Gate, Placement};
pub use sk::{projective_distance, sk_approx, word_matrix};
pub use synth::{synthesize_report, synthesize_transition_circuit, Layout, Synthesis};
pub use two_level::{two_level_decompose, TwoLevel};

use crate::linalg::C64;
use crate::machines::{GarbageMode, Halt, Kind, MachineSpec, TransitionRule};
use crate::{Error, Result};

/// Amplitudes below this modulus are dropped when reading a machine back
/// from circuits.
pub const AMPLITUDE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedTable {
    pub text: String,
    pub rows: usize,
    pub gates: usize,
    /// `|Q|^9 · max(|Ξ|,1)^8 · log2(1/ε)^2`, the growth shape the encoded
    /// length is compared against.
    pub shape_bound: f64,
}

impl EncodedTable {
    pub fn len(&self) -> usize {
        self.text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }
}

/// Canonical row keys `(state, symbol)` in table order.
pub fn row_keys(spec: &MachineSpec) -> Vec<(String, char)> {
    let syms = spec.tape_symbols();
    spec.states.iter().flat_map(|q| syms.iter().map(move |&c| (q.clone(), c))).collect()
}

/// Synthesizes every row at accuracy `eps`.
pub fn table_circuits(spec: &MachineSpec, eps: f64) -> Result<Vec<Circuit>> {
    spec.expect_kind(Kind::Qfa)?;
    let idx = spec.index()?;
    let layout = Layout::for_spec(spec);
    let mut rows = Vec::new();
    for q in 0..idx.n {
        for s in 0..idx.nsym {
            let v = synth::target_column(&idx, &layout, q, s)?;
            rows.push(synth::prepare_state(&v, layout.qubits(), eps)?.circuit);
        }
    }
    Ok(rows)
}

pub fn encode_table(spec: &MachineSpec, eps: f64) -> Result<EncodedTable> {
    let rows = table_circuits(spec, eps)?;
    let text = encode_rows(&rows);
    let q = spec.states.len() as f64;
    let g = spec.garbage_alphabet.len().max(1) as f64;
    Ok(EncodedTable {
        rows: rows.len(),
        gates: rows.iter().map(Circuit::len).sum(),
        shape_bound: q.powi(9) * g.powi(8) * (1.0 / eps).log2().max(1.0).powi(2),
        text,
    })
}

/// Decodes table text against the skeleton's register layout and row order.
pub fn decode_table(skeleton: &MachineSpec, text: &str) -> Result<Vec<((String, char), Circuit)>> {
    let keys = row_keys(skeleton);
    let rows = decode_rows(text)?;
    if rows.len() != keys.len() {
        return Err(Error::Parse {
            offset: text.len(),
            message: format!("expected {} rows, found {}", keys.len(), rows.len()),
        });
    }
    let qubits = Layout::for_spec(skeleton).qubits();
    let mut out = Vec::with_capacity(rows.len());
    for (key, placements) in keys.into_iter().zip(rows) {
        let c = Circuit { qubits, placements };
        if !c.fits() {
            return Err(Error::Invalid(format!("row {key:?} has a gate outside {qubits} wires")));
        }
        out.push((key, c));
    }
    Ok(out)
}

/// Machine whose `(q, σ)` transitions are the output amplitudes of the row
/// circuits. Padding, out-of-range codes, tiny amplitudes, rows of halting
/// states, and moves the skeleton's head or garbage mode forbids are dropped.
pub fn machine_from_circuits(skeleton: &MachineSpec, rows: &[Circuit]) -> Result<MachineSpec> {
    let keys = row_keys(skeleton);
    if rows.len() != keys.len() {
        return Err(Error::Invalid(format!("expected {} rows, got {}", keys.len(), rows.len())));
    }
    let layout = Layout::for_spec(skeleton);
    let mut spec = skeleton.clone();
    spec.kind = Kind::Qfa;
    spec.transitions.clear();
    for ((q, sym), c) in keys.iter().zip(rows) {
        if skeleton.accepting.contains(q) || skeleton.rejecting.contains(q) {
            continue;
        }
        if c.qubits != layout.qubits() {
            return Err(Error::Invalid(format!("row ({q} {sym:?}) has {} qubits", c.qubits)));
        }
        for (i, a) in c.output().into_iter().enumerate() {
            if a.norm() < AMPLITUDE_FLOOR {
                continue;
            }
            let Some((p, dir, g)) = layout.decode(i) else { continue };
            let allowed = skeleton.head_mode.allows(dir)
                && match skeleton.garbage_mode {
                    GarbageMode::None => g.is_none(),
                    GarbageMode::Rigid => g.is_some() == (dir == 1),
                    GarbageMode::Flexible => true,
                };
            if !allowed {
                continue;
            }
            let garbage = g.map(|g| skeleton.garbage_alphabet[g as usize].as_str());
            spec.transitions.push(TransitionRule::new(q, *sym, &skeleton.states[p], dir, garbage, a));
        }
    }
    Ok(spec)
}

pub fn machine_from_encoded(skeleton: &MachineSpec, text: &str) -> Result<MachineSpec> {
    let rows: Vec<Circuit> = decode_table(skeleton, text)?.into_iter().map(|(_, c)| c).collect();
    machine_from_circuits(skeleton, &rows)
}

#[derive(Clone, Debug)]
pub struct ApproxMachine {
    pub spec: MachineSpec,
    /// `½(½ − ε)`.
    pub alpha: f64,
    /// Accuracy each row circuit was synthesized to.
    pub row_eps: f64,
    pub table: EncodedTable,
}

/// Per-row accuracy `α·2^{−R}/(c·steps)` with `R` the register width.
pub fn row_budget(spec: &MachineSpec, error_bound: f64, steps: usize, c: f64) -> Result<(f64, f64)> {
    let alpha = 0.5 * (0.5 - error_bound);
    if alpha <= 0.0 || c <= 0.0 || steps == 0 {
        return Err(Error::BudgetInfeasible(alpha));
    }
    let r = Layout::for_spec(spec).qubits() as i32;
    Ok((alpha, alpha * 2f64.powi(-r) / (c * steps as f64)))
}

/// Approximates a bounded-error qfa (error `error_bound`) by a machine built
/// from synthesized circuits, with enough accuracy for `steps` steps.
/// `row_eps` overrides the per-row budget.
pub fn build_approx_machine(
    spec: &MachineSpec,
    error_bound: f64,
    steps: usize,
    c: f64,
    row_eps: Option<f64>,
) -> Result<ApproxMachine> {
    let (alpha, budget) = row_budget(spec, error_bound, steps, c)?;
    let row_eps = row_eps.unwrap_or(budget);
    let rows = table_circuits(spec, row_eps)?;
    let q = spec.states.len() as f64;
    let g = spec.garbage_alphabet.len().max(1) as f64;
    let table = EncodedTable {
        text: encode_rows(&rows),
        rows: rows.len(),
        gates: rows.iter().map(Circuit::len).sum(),
        shape_bound: q.powi(9) * g.powi(8) * (1.0 / row_eps).log2().max(1.0).powi(2),
    };
    let approx = machine_from_circuits(spec, &rows)?;
    Ok(ApproxMachine { spec: approx, alpha, row_eps, table })
}

/// Largest amplitude difference between two machines' transition tables.
pub fn table_distance(a: &MachineSpec, b: &MachineSpec) -> Result<f64> {
    let (ia, ib) = (a.index()?, b.index()?);
    let layout = Layout::for_spec(a);
    let mut worst: f64 = 0.0;
    for q in 0..ia.n {
        if ia.halt[q] != Halt::No {
            continue;
        }
        for s in 0..ia.nsym {
            let mut va = vec![C64::new(0.0, 0.0); 1 << layout.qubits()];
            let mut vb = va.clone();
            for m in ia.row(q, s) {
                va[layout.index(m.to, m.dir, m.garbage)] += m.weight;
            }
            for m in ib.row(q, s) {
                vb[layout.index(m.to, m.dir, m.garbage)] += m.weight;
            }
            worst = worst.max(crate::linalg::dist(&va, &vb));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machines::HeadMode;
    use crate::sim::{simulate_2qfa, SimOptions};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    /// Sweeps right; on every 'a' splits (q0,q1) by a Hadamard; at $ q0
    /// accepts and q1 rejects.
    fn hadamard_walker() -> MachineSpec {
        let mut s = MachineSpec::new(Kind::Qfa, HeadMode::OneWay, GarbageMode::None, &['a']);
        s.states = ["q0", "q1", "acc", "rej"].map(String::from).to_vec();
        s.initial = "q0".into();
        s.accepting = vec!["acc".into()];
        s.rejecting = vec!["rej".into()];
        let h = FRAC_1_SQRT_2;
        let t = &mut s.transitions;
        for q in ["q0", "q1"] {
            t.push(TransitionRule::new(q, '¢', q, 1, None, c(1.0)));
        }
        t.push(TransitionRule::new("q0", 'a', "q0", 1, None, c(h)));
        t.push(TransitionRule::new("q0", 'a', "q1", 1, None, c(h)));
        t.push(TransitionRule::new("q1", 'a', "q0", 1, None, c(h)));
        t.push(TransitionRule::new("q1", 'a', "q1", 1, None, c(-h)));
        t.push(TransitionRule::new("q0", '$', "acc", 1, None, c(1.0)));
        t.push(TransitionRule::new("q1", '$', "rej", 1, None, c(1.0)));
        s
    }

    #[test]
    fn row_separators() {
        assert!(!encode_rows(&[Circuit::new(3)]).contains("###"));
        let mut s = MachineSpec::new(Kind::Qfa, HeadMode::OneWay, GarbageMode::None, &[]);
        s.states = vec!["q".into()];
        s.initial = "q".into();
        let t = encode_table(&s, 1e-2).unwrap();
        assert_eq!(t.rows, 2);
        assert_eq!(t.text.matches("###").count(), 1);
    }

    #[test]
    fn exact_tables_round_trip() {
        let s = hadamard_walker();
        let t = encode_table(&s, 1e-6).unwrap();
        let decoded = decode_table(&s, &t.text).unwrap();
        let again = encode_rows(&decoded.iter().map(|(_, c)| c.clone()).collect::<Vec<_>>());
        assert_eq!(again, t.text);
        let m = machine_from_encoded(&s, &t.text).unwrap();
        assert!(table_distance(&s, &m).unwrap() < 1e-9);
        for x in ["", "a", "aa", "aaa"] {
            let a = simulate_2qfa(&s, x, SimOptions::default()).unwrap();
            let b = simulate_2qfa(&m, x, SimOptions::default()).unwrap();
            assert!((a.p_acc - b.p_acc).abs() < 1e-9);
        }
    }

    #[test]
    fn decoded_circuits_match_synthesis() {
        let s = hadamard_walker();
        let t = encode_table(&s, 1e-3).unwrap();
        let direct = table_circuits(&s, 1e-3).unwrap();
        for ((_, c), d) in decode_table(&s, &t.text).unwrap().iter().zip(&direct) {
            assert_eq!(c.output(), d.output());
        }
    }

    #[test]
    fn wrong_row_count_is_a_parse_error() {
        let s = hadamard_walker();
        assert!(matches!(decode_table(&s, "11#3"), Err(Error::Parse { .. })));
        assert!(matches!(decode_table(&s, "1#9"), Err(Error::Parse { offset: 2, .. })));
    }

    #[test]
    fn infeasible_budget() {
        let s = hadamard_walker();
        assert!(matches!(build_approx_machine(&s, 0.5, 10, 1.0, None), Err(Error::BudgetInfeasible(_))));
    }

    #[test]
    fn approx_machine_stays_within_alpha() {
        let mut s = hadamard_walker();
        // Irrational split so rows are genuinely approximated.
        let (co, si) = (0.3f64.cos(), 0.3f64.sin());
        s.transitions.retain(|r| r.read != 'a');
        let t = &mut s.transitions;
        t.push(TransitionRule::new("q0", 'a', "q0", 1, None, c(co)));
        t.push(TransitionRule::new("q0", 'a', "q1", 1, None, c(si)));
        t.push(TransitionRule::new("q1", 'a', "q0", 1, None, c(-si)));
        t.push(TransitionRule::new("q1", 'a', "q1", 1, None, c(co)));
        let m = build_approx_machine(&s, 0.25, 8, 1.0, None).unwrap();
        assert!(m.row_eps <= m.alpha / 8.0);
        for n in 0..6 {
            let x = "a".repeat(n);
            let a = simulate_2qfa(&s, &x, SimOptions::default()).unwrap();
            let b = simulate_2qfa(&m.spec, &x, SimOptions::default()).unwrap();
            assert!((a.p_acc - b.p_acc).abs() <= m.alpha);
            assert!((a.p_rej - b.p_rej).abs() <= m.alpha);
        }
    }
}
