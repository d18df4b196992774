//! Measure-many quantum engines for finite automata with garbage tapes.
//!
//! [`simulate_2qfa`] tracks the garbage string inside each configuration key.
//! [`simulate_2qfa_traced`] keeps the reduced operator over (state, position)
//! plus the suffix coherences needed to stay exact when two garbage strings
//! can later coincide.

use crate::linalg::{CMat, C64, ZERO};
use crate::machines::{step_pos, Halt, HeadMode, Indexed, Kind, MachineSpec};
use crate::stats::RunStats;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimOptions {
    pub max_steps: usize,
    pub residual_target: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { max_steps: 1000, residual_target: 1e-12 }
    }
}

/// Amplitudes below this squared modulus are dropped.
const PRUNE: f64 = 1e-30;

/// Interned garbage strings; node 0 is the empty string.
#[derive(Clone, Debug)]
struct Trie {
    nodes: Vec<(u32, u16)>,
    child: HashMap<(u32, u16), u32>,
}

impl Trie {
    fn new() -> Self {
        Trie { nodes: vec![(0, 0)], child: HashMap::new() }
    }

    fn push(&mut self, node: u32, sym: u16) -> u32 {
        if let Some(&c) = self.child.get(&(node, sym)) {
            return c;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push((node, sym));
        self.child.insert((node, sym), id);
        id
    }

    fn string(&self, mut node: u32) -> Vec<u16> {
        let mut out = Vec::new();
        while node != 0 {
            let (p, s) = self.nodes[node as usize];
            out.push(s);
            node = p;
        }
        out.reverse();
        out
    }
}

type Config = (usize, usize, u32);

/// Snapshot of the exact engine: surface configuration to amplitude.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperpositionState {
    pub amplitudes: BTreeMap<(String, usize, Vec<String>), C64>,
    pub step: usize,
}

impl SuperpositionState {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }
}

/// Exact configuration-tracking engine.
pub struct ExactEngine {
    m: Indexed,
    states: Vec<String>,
    tape: Vec<usize>,
    trie: Trie,
    amps: Vec<(Config, C64)>,
    t: usize,
}

impl ExactEngine {
    pub fn new(spec: &MachineSpec, x: &str) -> Result<Self> {
        spec.expect_kind(Kind::Qfa)?;
        let m = spec.index()?;
        let tape = m.tape(x)?;
        let amps = vec![((m.initial, 0, 0), C64::new(1.0, 0.0))];
        Ok(ExactEngine { m, states: spec.states.clone(), tape, trie: Trie::new(), amps, t: 0 })
    }

    /// One application of the evolution followed by the halting measurement.
    /// Returns the (accepting, rejecting) mass observed.
    pub fn step(&mut self) -> (f64, f64) {
        let len = self.tape.len();
        let mut index: HashMap<Config, usize> = HashMap::with_capacity(self.amps.len() * 2);
        let mut next: Vec<(Config, C64)> = Vec::with_capacity(self.amps.len() * 2);
        for &((q, pos, g), a) in &self.amps {
            for mv in self.m.row(q, self.tape[pos]) {
                let g2 = match mv.garbage {
                    Some(s) => self.trie.push(g, s),
                    None => g,
                };
                let key = (mv.to, step_pos(pos, mv.dir, len), g2);
                let amp = a * mv.weight;
                match index.get(&key) {
                    Some(&i) => next[i].1 += amp,
                    None => {
                        index.insert(key, next.len());
                        next.push((key, amp));
                    }
                }
            }
        }
        let (mut acc, mut rej) = (0.0, 0.0);
        next.retain(|&((q, _, _), a)| match self.m.halt[q] {
            Halt::Acc => {
                acc += a.norm_sqr();
                false
            }
            Halt::Rej => {
                rej += a.norm_sqr();
                false
            }
            Halt::No => a.norm_sqr() > PRUNE,
        });
        self.amps = next;
        self.t += 1;
        (acc, rej)
    }

    pub fn residual(&self) -> f64 {
        self.amps.iter().map(|(_, a)| a.norm_sqr()).sum()
    }

    pub fn configurations(&self) -> usize {
        self.amps.len()
    }

    pub fn snapshot(&self) -> SuperpositionState {
        let amplitudes = self
            .amps
            .iter()
            .map(|&((q, pos, g), a)| {
                let z = self.trie.string(g).into_iter().map(|s| self.m.garbage[s as usize].clone()).collect();
                ((self.states[q].clone(), pos, z), a)
            })
            .collect();
        SuperpositionState { amplitudes, step: self.t }
    }
}

trait Stepper {
    fn advance(&mut self) -> (f64, f64);
    fn mass(&self) -> f64;
}

impl Stepper for ExactEngine {
    fn advance(&mut self) -> (f64, f64) {
        self.step()
    }
    fn mass(&self) -> f64 {
        self.residual()
    }
}

fn initial_halt(m: &Indexed) -> Option<RunStats> {
    let mut st = RunStats::default();
    match m.halt[m.initial] {
        Halt::No => return None,
        Halt::Acc => st.p_acc = 1.0,
        Halt::Rej => st.p_rej = 1.0,
    }
    st.finish(false);
    Some(st)
}

/// One-way machines run exactly `|x|+2` steps in every engine.
fn step_cap(m: &Indexed, tape_len: usize, opts: SimOptions) -> (usize, bool) {
    if m.head_mode == HeadMode::OneWay {
        (tape_len, true)
    } else {
        (opts.max_steps, false)
    }
}

fn drive<S: Stepper>(eng: &mut S, cap: usize, target: f64, fixed: bool) -> RunStats {
    let mut st = RunStats::default();
    let mut mass = eng.mass();
    let mut t = 0;
    while t < cap && (fixed || mass > target) {
        t += 1;
        let (a, r) = eng.advance();
        mass = eng.mass();
        st.push_step(t, a, r, mass);
    }
    st.finish(!fixed && mass > target);
    st
}

/// Runs a one-way qfa for exactly `|x|+2` steps.
pub fn simulate_1qfa(spec: &MachineSpec, x: &str) -> Result<RunStats> {
    if spec.head_mode != HeadMode::OneWay {
        return Err(Error::Invalid("simulate_1qfa needs a oneWay machine".into()));
    }
    simulate_2qfa(spec, x, SimOptions::default())
}

/// Exact engine. One-way machines stop after `|x|+2` steps regardless of
/// `opts`; other machines run until the residual reaches the target or the
/// step cap, in which case `truncated` is set.
pub fn simulate_2qfa(spec: &MachineSpec, x: &str, opts: SimOptions) -> Result<RunStats> {
    let mut eng = ExactEngine::new(spec, x)?;
    if let Some(st) = initial_halt(&eng.m) {
        return Ok(st);
    }
    let (cap, fixed) = step_cap(&eng.m, eng.tape.len(), opts);
    Ok(drive(&mut eng, cap, opts.residual_target, fixed))
}

/// Sparse one-step operator for a fixed garbage outcome.
#[derive(Clone, Debug, Default)]
struct Kraus {
    /// (row, col, weight) triples.
    entries: Vec<(usize, usize, C64)>,
}

impl Kraus {
    /// `K · M`.
    fn left(&self, m: &CMat) -> CMat {
        let mut out = CMat::zeros(m.rows, m.cols);
        let c = m.cols;
        for &(i, j, w) in &self.entries {
            let (src, dst) = (j * c, i * c);
            for k in 0..c {
                let v = m.data[src + k];
                if v != ZERO {
                    out.data[dst + k] += w * v;
                }
            }
        }
        out
    }

    /// `M · K^†`.
    fn right_adj(&self, m: &CMat) -> CMat {
        let mut out = CMat::zeros(m.rows, m.cols);
        let c = m.cols;
        for &(i, j, w) in &self.entries {
            let w = w.conj();
            for r in 0..m.rows {
                let v = m.data[r * c + j];
                if v != ZERO {
                    out.data[r * c + i] += v * w;
                }
            }
        }
        out
    }
}

/// Garbage-traced engine over (state, position) operators.
pub struct TracedEngine {
    halt_of: Vec<Halt>,
    dim: usize,
    /// Index 0 is λ; `k+1` is garbage symbol `k`.
    kraus: Vec<Kraus>,
    blocks: BTreeMap<Vec<u16>, CMat>,
    len: usize,
}

impl TracedEngine {
    pub fn new(spec: &MachineSpec, x: &str) -> Result<Self> {
        spec.expect_kind(Kind::Qfa)?;
        let m = spec.index()?;
        let tape = m.tape(x)?;
        let len = tape.len();
        let dim = m.n * len;
        let mut kraus = vec![Kraus::default(); m.garbage.len() + 1];
        for q in 0..m.n {
            if m.halt[q] != Halt::No {
                continue;
            }
            for (pos, &s) in tape.iter().enumerate() {
                for mv in m.row(q, s) {
                    let k = mv.garbage.map_or(0, |g| g as usize + 1);
                    let row = mv.to * len + step_pos(pos, mv.dir, len);
                    kraus[k].entries.push((row, q * len + pos, mv.weight));
                }
            }
        }
        let halt_of = (0..dim).map(|c| m.halt[c / len]).collect();
        let mut rho = CMat::zeros(dim, dim);
        rho[(m.initial * len, m.initial * len)] = C64::new(1.0, 0.0);
        let blocks = BTreeMap::from([(Vec::new(), rho)]);
        Ok(TracedEngine { halt_of, dim, kraus, blocks, len })
    }

    pub fn step(&mut self) -> (f64, f64) {
        let mut next: BTreeMap<Vec<u16>, CMat> = BTreeMap::new();
        let mut add = |key: Vec<u16>, m: CMat| match next.get_mut(&key) {
            Some(b) => {
                for (x, y) in b.data.iter_mut().zip(&m.data) {
                    *x += y;
                }
            }
            None => {
                next.insert(key, m);
            }
        };
        let nk = self.kraus.len();
        for (u, c) in &self.blocks {
            // Left factors for every ξ, reused across η.
            let lefts: Vec<CMat> = self.kraus.iter().map(|k| k.left(c)).collect();
            for (xi, kc) in lefts.iter().enumerate() {
                if self.kraus[xi].entries.is_empty() {
                    continue;
                }
                // η = λ: s = u (ξ = λ) or s = uξ.
                let mut s = u.clone();
                if xi > 0 {
                    s.push(xi as u16 - 1);
                }
                add(s, self.kraus[0].right_adj(kc));
                // η ≠ λ: consumes the first symbol of u.
                if let Some((&first, rest)) = u.split_first() {
                    let eta = first as usize + 1;
                    let mut s = rest.to_vec();
                    if xi > 0 {
                        s.push(xi as u16 - 1);
                    }
                    add(s, self.kraus[eta].right_adj(kc));
                } else if xi > 0 {
                    add(Vec::new(), self.kraus[xi].right_adj(kc));
                }
            }
            // ξ ≠ λ against the empty suffix pulls in C_ξ^†.
            if u.len() == 1 {
                let xi = u[0] as usize + 1;
                if xi < nk && !self.kraus[xi].entries.is_empty() {
                    let adj = c.adjoint();
                    add(Vec::new(), self.kraus[0].right_adj(&self.kraus[xi].left(&adj)));
                }
            }
        }
        let (mut acc, mut rej) = (0.0, 0.0);
        if let Some(rho) = next.get(&Vec::new()) {
            for i in 0..self.dim {
                match self.halt_of[i] {
                    Halt::Acc => acc += rho[(i, i)].re,
                    Halt::Rej => rej += rho[(i, i)].re,
                    Halt::No => {}
                }
            }
        }
        for b in next.values_mut() {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    if self.halt_of[i] != Halt::No || self.halt_of[j] != Halt::No {
                        b[(i, j)] = ZERO;
                    }
                }
            }
        }
        next.retain(|k, b| k.is_empty() || b.frobenius() > 1e-13);
        self.blocks = next;
        (acc, rej)
    }

    pub fn residual(&self) -> f64 {
        self.blocks.get(&Vec::new()).map_or(0.0, |r| (0..self.dim).map(|i| r[(i, i)].re).sum())
    }

    /// Number of suffix blocks currently tracked (1 for machines whose
    /// garbage strings never differ by a suffix).
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn tape_len(&self) -> usize {
        self.len
    }
}

impl Stepper for TracedEngine {
    fn advance(&mut self) -> (f64, f64) {
        self.step()
    }
    fn mass(&self) -> f64 {
        self.residual()
    }
}

pub fn simulate_2qfa_traced(spec: &MachineSpec, x: &str, opts: SimOptions) -> Result<RunStats> {
    let mut eng = TracedEngine::new(spec, x)?;
    let m = spec.index()?;
    if let Some(st) = initial_halt(&m) {
        return Ok(st);
    }
    let (cap, fixed) = step_cap(&m, eng.len, opts);
    Ok(drive(&mut eng, cap, opts.residual_target, fixed))
}

/// Result of a well-formedness check.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", rename_all_fields = "camelCase", tag = "status")]
pub enum WellFormedness {
    Ok { lengths_checked: usize, inputs_checked: usize },
    Witness(Witness),
}

impl WellFormedness {
    pub fn is_ok(&self) -> bool {
        matches!(self, WellFormedness::Ok { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Witness {
    pub input: String,
    /// (state, position, symbol read) of the two configurations.
    pub first: (String, usize, char),
    pub second: (String, usize, char),
    /// Inner product of their images (should be 1 on the diagonal, 0 off it).
    pub inner: (f64, f64),
}

const WF_INPUT_BUDGET: usize = 200_000;

/// Checks that the one-step images of all non-halting basis configurations
/// are orthonormal, with each emitted garbage symbol an orthogonal tag.
///
/// Configurations more than two cells apart never share an image, so every
/// length beyond 3 is covered by the windows of shorter inputs; when the
/// alphabet makes `maxLen` too costly the sweep stops early at length ≥ 3.
pub fn check_well_formed(spec: &MachineSpec, max_len: usize) -> Result<WellFormedness> {
    spec.expect_kind(Kind::Qfa)?;
    let m = spec.index()?;
    let syms = spec.tape_symbols();
    let sigma = &spec.input_alphabet;
    let mut layer = vec![String::new()];
    let mut inputs = 0;
    let mut lengths = 0;
    for l in 0..=max_len {
        if l > 0 {
            if l > 3 && inputs + layer.len() * sigma.len().max(1) > WF_INPUT_BUDGET {
                break;
            }
            layer = layer.iter().flat_map(|w| sigma.iter().map(move |c| format!("{w}{c}"))).collect();
            if layer.is_empty() {
                break;
            }
        }
        for x in &layer {
            if let Some(w) = check_input(&m, spec, &syms, x)? {
                return Ok(WellFormedness::Witness(w));
            }
            inputs += 1;
        }
        lengths = l;
    }
    Ok(WellFormedness::Ok { lengths_checked: lengths, inputs_checked: inputs })
}

fn check_input(m: &Indexed, spec: &MachineSpec, syms: &[char], x: &str) -> Result<Option<Witness>> {
    let tape = m.tape(x)?;
    let len = tape.len();
    // target (config, garbage tag) -> contributions (source, amp)
    let mut by_target: BTreeMap<(usize, usize), Vec<(usize, C64)>> = BTreeMap::new();
    let mut sources = Vec::new();
    for q in 0..m.n {
        if m.halt[q] != Halt::No {
            continue;
        }
        for (pos, &s) in tape.iter().enumerate() {
            let src = q * len + pos;
            sources.push(src);
            for mv in m.row(q, s) {
                let tag = mv.garbage.map_or(0, |g| g as usize + 1);
                let tgt = mv.to * len + step_pos(pos, mv.dir, len);
                by_target.entry((tgt, tag)).or_default().push((src, mv.weight));
            }
        }
    }
    let mut gram: BTreeMap<(usize, usize), C64> = BTreeMap::new();
    for list in by_target.values() {
        for &(a, wa) in list {
            for &(b, wb) in list {
                if a <= b {
                    *gram.entry((a, b)).or_insert(ZERO) += wa.conj() * wb;
                }
            }
        }
    }
    let describe = |c: usize| (spec.states[c / len].clone(), c % len, syms[tape[c % len]]);
    for &s in &sources {
        let d = gram.get(&(s, s)).copied().unwrap_or(ZERO);
        if (d - C64::new(1.0, 0.0)).norm() > 1e-9 {
            return Ok(Some(Witness { input: x.to_string(), first: describe(s), second: describe(s), inner: (d.re, d.im) }));
        }
    }
    for (&(a, b), &v) in &gram {
        if a != b && v.norm() > 1e-9 {
            return Ok(Some(Witness { input: x.to_string(), first: describe(a), second: describe(b), inner: (v.re, v.im) }));
        }
    }
    Ok(None)
}

/// Random well-formed machine in simple form: each state `p` fixes the move
/// `D(p)` and the garbage `g(p)` used to enter it, and every symbol acts by a
/// Haar-random unitary on the state space.
///
/// State 0 is initial; the last `n_acc + n_rej` states halt.
pub fn random_simple_qfa<R: Rng + ?Sized>(
    rng: &mut R,
    n_states: usize,
    n_acc: usize,
    n_rej: usize,
    sigma: &[char],
    n_garbage: usize,
    head_mode: HeadMode,
    garbage_mode: crate::GarbageMode,
) -> MachineSpec {
    use crate::machines::TransitionRule;
    assert!(n_states > n_acc + n_rej, "need a non-halting initial state");
    let mut spec = MachineSpec::new(Kind::Qfa, head_mode, garbage_mode, sigma);
    spec.states = (0..n_states).map(|i| format!("q{i}")).collect();
    spec.initial = "q0".into();
    let first_halt = n_states - n_acc - n_rej;
    spec.accepting = (first_halt..first_halt + n_acc).map(|i| format!("q{i}")).collect();
    spec.rejecting = (first_halt + n_acc..n_states).map(|i| format!("q{i}")).collect();
    if garbage_mode != crate::GarbageMode::None {
        spec.garbage_alphabet = (0..n_garbage).map(|i| format!("g{i}")).collect();
    }
    let dirs: &[i8] = match head_mode {
        HeadMode::OneWay => &[1],
        HeadMode::OneFiveWay => &[0, 1],
        HeadMode::TwoWay => &[-1, 0, 1],
    };
    let mut shape = Vec::with_capacity(n_states);
    for _ in 0..n_states {
        let d = dirs[rng.random_range(0..dirs.len())];
        let g = match garbage_mode {
            crate::GarbageMode::None => None,
            _ if n_garbage == 0 => None,
            crate::GarbageMode::Rigid if d != 1 => None,
            crate::GarbageMode::Rigid => Some(rng.random_range(0..n_garbage)),
            crate::GarbageMode::Flexible => {
                let k = rng.random_range(0..=n_garbage);
                (k > 0).then(|| k - 1)
            }
        };
        shape.push((d, g));
    }
    for sym in spec.tape_symbols() {
        let u = crate::linalg::haar_unitary(n_states, rng);
        for q in 0..first_halt {
            for (p, &(d, g)) in shape.iter().enumerate() {
                let w = u[(p, q)];
                if w.norm() < 1e-14 {
                    continue;
                }
                let g = g.map(|k| spec.garbage_alphabet[k].clone());
                spec.transitions.push(TransitionRule {
                    from: format!("q{q}"),
                    read: sym,
                    to: format!("q{p}"),
                    dir: d,
                    garbage: g,
                    weight: w,
                });
            }
        }
    }
    spec
}

/// One entry of a quantum transition table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TableMachine {
    /// Encoded table text over `{1,#,2,3,4}`, read against the skeleton.
    Encoded(String),
    Spec(MachineSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    #[serde(with = "crate::linalg::cjson")]
    pub amplitude: C64,
    pub machine: TableMachine,
}

/// Normalized superposition of transition tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumTransitionTable {
    pub entries: Vec<TableEntry>,
}

impl QuantumTransitionTable {
    pub fn new(entries: Vec<(C64, TableMachine)>) -> Self {
        QuantumTransitionTable {
            entries: entries.into_iter().map(|(amplitude, machine)| TableEntry { amplitude, machine }).collect(),
        }
    }

    /// Encoded length: the longest entry encoding.
    pub fn encoded_len(&self) -> usize {
        self.entries
            .iter()
            .map(|e| match &e.machine {
                TableMachine::Encoded(s) => s.len(),
                TableMachine::Spec(s) => s.to_json().len(),
            })
            .max()
            .unwrap_or(0)
    }
}

/// Super-QFA run under decoherent-mixture semantics: branches holding
/// different tables never interfere.
pub fn simulate_2sqfa(
    table: &QuantumTransitionTable,
    skeleton: &MachineSpec,
    x: &str,
    opts: SimOptions,
) -> Result<RunStats> {
    let total: f64 = table.entries.iter().map(|e| e.amplitude.norm_sqr()).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(format!("table amplitudes have norm {total}")));
    }
    let mut parts = Vec::new();
    for (i, e) in table.entries.iter().enumerate() {
        let spec = match &e.machine {
            TableMachine::Spec(s) => s.clone(),
            TableMachine::Encoded(text) => crate::qcompile::machine_from_encoded(skeleton, text)
                .map_err(|e| Error::BadTableEntry { index: i, reason: e.to_string() })?,
        };
        let st = simulate_2qfa(&spec, x, opts).map_err(|e| Error::BadTableEntry { index: i, reason: e.to_string() })?;
        parts.push((e.amplitude.norm_sqr(), st));
    }
    Ok(RunStats::mixture(&parts))
}
