//! Unified machine description and the classical (deterministic,
//! nondeterministic, probabilistic) runners.

use crate::linalg::{cjson, C64};
use crate::stats::RunStats;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

pub const SPEC_VERSION: &str = "qfa-spec/1";
pub const LEFT_END: char = '¢';
pub const RIGHT_END: char = '$';

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Dfa,
    Nfa,
    Pfa,
    Qfa,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Kind::Dfa => "dfa",
            Kind::Nfa => "nfa",
            Kind::Pfa => "pfa",
            Kind::Qfa => "qfa",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum HeadMode {
    OneWay,
    OneFiveWay,
    TwoWay,
}

impl HeadMode {
    pub fn allows(self, dir: i8) -> bool {
        match self {
            HeadMode::OneWay => dir == 1,
            HeadMode::OneFiveWay => dir == 0 || dir == 1,
            HeadMode::TwoWay => (-1..=1).contains(&dir),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GarbageMode {
    None,
    Flexible,
    Rigid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionRule {
    pub from: String,
    pub read: char,
    pub to: String,
    pub dir: i8,
    /// `None` is λ (nothing written).
    #[serde(default)]
    pub garbage: Option<String>,
    #[serde(with = "cjson")]
    pub weight: C64,
}

impl TransitionRule {
    pub fn new(from: &str, read: char, to: &str, dir: i8, garbage: Option<&str>, weight: C64) -> Self {
        TransitionRule {
            from: from.to_string(),
            read,
            to: to.to_string(),
            dir,
            garbage: garbage.map(str::to_string),
            weight,
        }
    }

    pub fn classical(from: &str, read: char, to: &str, dir: i8) -> Self {
        Self::new(from, read, to, dir, None, C64::new(1.0, 0.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MachineSpec {
    #[serde(default = "default_version")]
    pub version: String,
    pub kind: Kind,
    pub head_mode: HeadMode,
    pub garbage_mode: GarbageMode,
    pub states: Vec<String>,
    pub input_alphabet: Vec<char>,
    #[serde(default)]
    pub garbage_alphabet: Vec<String>,
    pub initial: String,
    pub accepting: Vec<String>,
    pub rejecting: Vec<String>,
    pub transitions: Vec<TransitionRule>,
}

fn default_version() -> String {
    SPEC_VERSION.to_string()
}

/// Violations found by [`validate_spec`]; empty means valid.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl MachineSpec {
    /// Empty machine with the given shape; callers push transitions afterwards.
    pub fn new(kind: Kind, head_mode: HeadMode, garbage_mode: GarbageMode, input_alphabet: &[char]) -> Self {
        MachineSpec {
            version: SPEC_VERSION.to_string(),
            kind,
            head_mode,
            garbage_mode,
            states: Vec::new(),
            input_alphabet: input_alphabet.to_vec(),
            garbage_alphabet: Vec::new(),
            initial: String::new(),
            accepting: Vec::new(),
            rejecting: Vec::new(),
            transitions: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { offset: e.column(), message: e.to_string() })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> ValidationReport {
        validate_spec(self)
    }

    /// Validates and converts to the indexed form used by the engines.
    pub fn index(&self) -> Result<Indexed> {
        let report = validate_spec(self);
        if !report.is_valid() {
            return Err(Error::InvalidSpec(report.violations));
        }
        Ok(Indexed::build(self))
    }

    /// Symbols ¢, Σ…, $ in canonical order.
    pub fn tape_symbols(&self) -> Vec<char> {
        let mut v = vec![LEFT_END];
        v.extend(&self.input_alphabet);
        v.push(RIGHT_END);
        v
    }

    pub(crate) fn expect_kind(&self, kind: Kind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::WrongKind { expected: kind.to_string(), found: self.kind.to_string() });
        }
        Ok(())
    }
}

pub fn validate_spec(spec: &MachineSpec) -> ValidationReport {
    let mut v = Vec::new();
    if spec.version != SPEC_VERSION {
        v.push(format!("unsupported version {:?}", spec.version));
    }
    if spec.states.is_empty() {
        v.push("no states".to_string());
    }
    let states: BTreeSet<&str> = spec.states.iter().map(String::as_str).collect();
    if states.len() != spec.states.len() {
        v.push("duplicate state names".to_string());
    }
    if !states.contains(spec.initial.as_str()) {
        v.push(format!("initial state {:?} not declared", spec.initial));
    }
    for s in spec.accepting.iter().chain(&spec.rejecting) {
        if !states.contains(s.as_str()) {
            v.push(format!("halting state {s:?} not declared"));
        }
    }
    for s in &spec.accepting {
        if spec.rejecting.contains(s) {
            v.push(format!("state {s:?} both accepting and rejecting"));
        }
    }
    let sigma: BTreeSet<char> = spec.input_alphabet.iter().copied().collect();
    if sigma.len() != spec.input_alphabet.len() {
        v.push("duplicate input symbols".to_string());
    }
    if sigma.contains(&LEFT_END) || sigma.contains(&RIGHT_END) {
        v.push("endmarker listed in input alphabet".to_string());
    }
    let xi: BTreeSet<&str> = spec.garbage_alphabet.iter().map(String::as_str).collect();
    if xi.len() != spec.garbage_alphabet.len() {
        v.push("duplicate garbage symbols".to_string());
    }
    if spec.garbage_mode == GarbageMode::None && !spec.garbage_alphabet.is_empty() {
        v.push("garbage alphabet on a garbage-free machine".to_string());
    }

    let mut groups: BTreeMap<(&str, char), Vec<&TransitionRule>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for (i, r) in spec.transitions.iter().enumerate() {
        let at = format!("rule {i} ({} {:?})", r.from, r.read);
        if !states.contains(r.from.as_str()) || !states.contains(r.to.as_str()) {
            v.push(format!("{at}: unknown state"));
        }
        if !(sigma.contains(&r.read) || r.read == LEFT_END || r.read == RIGHT_END) {
            v.push(format!("{at}: unknown symbol {:?}", r.read));
        }
        if !(-1..=1).contains(&r.dir) {
            v.push(format!("{at}: direction {} out of range", r.dir));
        } else if !spec.head_mode.allows(r.dir) {
            v.push(match (spec.head_mode, r.dir) {
                (HeadMode::OneWay, 0) => format!("{at}: stationary move in oneWay"),
                (_, -1) => format!("{at}: left move in {:?}", spec.head_mode),
                _ => format!("{at}: direction not allowed"),
            });
        }
        if let Some(g) = &r.garbage {
            if !xi.contains(g.as_str()) {
                v.push(format!("{at}: unknown garbage symbol {g:?}"));
            }
        }
        match spec.garbage_mode {
            GarbageMode::None if r.garbage.is_some() => v.push(format!("{at}: garbage on a garbage-free machine")),
            GarbageMode::Rigid if r.garbage.is_some() != (r.dir == 1) => {
                v.push(format!("{at}: rigid garbage desynchronized"))
            }
            _ => {}
        }
        if !(r.weight.re.is_finite() && r.weight.im.is_finite()) || r.weight.norm() == 0.0 {
            v.push(format!("{at}: zero or non-finite weight"));
        }
        match spec.kind {
            Kind::Dfa | Kind::Nfa if r.weight != C64::new(1.0, 0.0) => {
                v.push(format!("{at}: classical weight must be 1"))
            }
            Kind::Pfa if r.weight.im != 0.0 || r.weight.re <= 0.0 || r.weight.re > 1.0 + 1e-9 => {
                v.push(format!("{at}: probability out of range"))
            }
            _ => {}
        }
        if !seen.insert((&r.from, r.read, &r.to, r.dir, &r.garbage)) {
            v.push(format!("{at}: duplicate rule"));
        }
        groups.entry((r.from.as_str(), r.read)).or_default().push(r);
    }
    for ((from, read), rules) in &groups {
        match spec.kind {
            Kind::Dfa if rules.len() > 1 => v.push(format!("dfa has {} rules at ({from} {read:?})", rules.len())),
            Kind::Pfa => {
                let total: f64 = rules.iter().map(|r| r.weight.re).sum();
                if (total - 1.0).abs() > 1e-9 {
                    v.push(format!("pfa row ({from} {read:?}) sums to {total}"));
                }
            }
            _ => {}
        }
    }
    ValidationReport { violations: v }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Halt {
    No,
    Acc,
    Rej,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Move {
    pub to: usize,
    pub dir: i8,
    pub garbage: Option<u16>,
    pub weight: C64,
}

/// Index-based view of a validated spec. Symbol 0 is ¢, `1..=|Σ|` follow the
/// input alphabet, and `|Σ|+1` is $.
#[derive(Clone, Debug)]
pub struct Indexed {
    pub n: usize,
    pub nsym: usize,
    pub initial: usize,
    pub halt: Vec<Halt>,
    pub garbage: Vec<String>,
    pub rows: Vec<Vec<Move>>,
    pub head_mode: HeadMode,
    sym_of: HashMap<char, usize>,
}

impl Indexed {
    fn build(spec: &MachineSpec) -> Self {
        let idx: HashMap<&str, usize> = spec.states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let sym_of: HashMap<char, usize> = spec.tape_symbols().into_iter().enumerate().map(|(i, c)| (c, i)).collect();
        let g_of: HashMap<&str, u16> =
            spec.garbage_alphabet.iter().enumerate().map(|(i, g)| (g.as_str(), i as u16)).collect();
        let n = spec.states.len();
        let nsym = spec.input_alphabet.len() + 2;
        let mut halt = vec![Halt::No; n];
        for s in &spec.accepting {
            halt[idx[s.as_str()]] = Halt::Acc;
        }
        for s in &spec.rejecting {
            halt[idx[s.as_str()]] = Halt::Rej;
        }
        let mut rows = vec![Vec::new(); n * nsym];
        for r in &spec.transitions {
            rows[idx[r.from.as_str()] * nsym + sym_of[&r.read]].push(Move {
                to: idx[r.to.as_str()],
                dir: r.dir,
                garbage: r.garbage.as_deref().map(|g| g_of[g]),
                weight: r.weight,
            });
        }
        Indexed {
            n,
            nsym,
            initial: idx[spec.initial.as_str()],
            halt,
            garbage: spec.garbage_alphabet.clone(),
            rows,
            head_mode: spec.head_mode,
            sym_of,
        }
    }

    pub fn row(&self, q: usize, s: usize) -> &[Move] {
        &self.rows[q * self.nsym + s]
    }

    pub fn symbol(&self, c: char) -> Option<usize> {
        self.sym_of.get(&c).copied()
    }

    /// Symbol indices of ¢x$.
    pub fn tape(&self, x: &str) -> Result<Vec<usize>> {
        let mut t = vec![0];
        for c in x.chars() {
            match self.sym_of.get(&c) {
                Some(&i) if i != 0 && i != self.nsym - 1 => t.push(i),
                _ => return Err(Error::UnknownSymbol(c)),
            }
        }
        t.push(self.nsym - 1);
        Ok(t)
    }
}

/// Head position after moving `dir` on a circular tape of length `len`.
pub fn step_pos(pos: usize, dir: i8, len: usize) -> usize {
    (pos as isize + dir as isize).rem_euclid(len as isize) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
    Undefined,
}

pub fn run_dfa(spec: &MachineSpec, x: &str) -> Result<Verdict> {
    spec.expect_kind(Kind::Dfa)?;
    let m = spec.index()?;
    let tape = m.tape(x)?;
    let len = tape.len();
    let cap = match m.head_mode {
        HeadMode::OneWay => len,
        _ => m.n * len + 1,
    };
    let (mut q, mut pos) = (m.initial, 0);
    for _ in 0..=cap {
        match m.halt[q] {
            Halt::Acc => return Ok(Verdict::Accept),
            Halt::Rej => return Ok(Verdict::Reject),
            Halt::No => {}
        }
        let Some(mv) = m.row(q, tape[pos]).first() else {
            return Ok(Verdict::Reject);
        };
        q = mv.to;
        pos = step_pos(pos, mv.dir, len);
    }
    Ok(Verdict::Undefined)
}

/// Accepts iff some path reaches an accepting state. Never undefined.
pub fn run_nfa(spec: &MachineSpec, x: &str) -> Result<Verdict> {
    spec.expect_kind(Kind::Nfa)?;
    let m = spec.index()?;
    let tape = m.tape(x)?;
    let len = tape.len();
    if m.halt[m.initial] == Halt::Acc {
        return Ok(Verdict::Accept);
    }
    if m.head_mode == HeadMode::OneWay {
        let mut cur = BTreeSet::from([m.initial]);
        for &s in &tape {
            let mut next = BTreeSet::new();
            for &q in &cur {
                if m.halt[q] != Halt::No {
                    continue;
                }
                for mv in m.row(q, s) {
                    if m.halt[mv.to] == Halt::Acc {
                        return Ok(Verdict::Accept);
                    }
                    next.insert(mv.to);
                }
            }
            cur = next;
        }
        return Ok(Verdict::Reject);
    }
    let mut seen = vec![false; m.n * len];
    let mut queue = VecDeque::from([(m.initial, 0usize)]);
    seen[m.initial * len] = true;
    while let Some((q, pos)) = queue.pop_front() {
        if m.halt[q] == Halt::Acc {
            return Ok(Verdict::Accept);
        }
        if m.halt[q] != Halt::No {
            continue;
        }
        for mv in m.row(q, tape[pos]) {
            let p = step_pos(pos, mv.dir, len);
            if !seen[mv.to * len + p] {
                seen[mv.to * len + p] = true;
                queue.push_back((mv.to, p));
            }
        }
    }
    Ok(Verdict::Reject)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PfaOptions {
    /// Use power iteration with this step cap instead of the linear solve.
    pub power_steps: Option<usize>,
    /// Stop power iteration once the running mass falls below this.
    pub residual_target: f64,
}

/// Exact probabilistic run. One-way machines are propagated for `|x|+2`
/// steps; other head modes solve the absorbing chain over (state, position).
/// A missing row for a non-halting state rejects, as for dfas.
pub fn run_pfa(spec: &MachineSpec, x: &str, opts: PfaOptions) -> Result<RunStats> {
    spec.expect_kind(Kind::Pfa)?;
    let m = spec.index()?;
    let tape = m.tape(x)?;
    if m.head_mode == HeadMode::OneWay {
        return Ok(pfa_power(&m, &tape, tape.len(), 0.0));
    }
    match opts.power_steps {
        Some(cap) => Ok(pfa_power(&m, &tape, cap, opts.residual_target)),
        None => pfa_absorbing(&m, &tape),
    }
}

fn pfa_power(m: &Indexed, tape: &[usize], cap: usize, target: f64) -> RunStats {
    let len = tape.len();
    let mut stats = RunStats::default();
    let mut v = vec![0.0; m.n * len];
    let mut mass = 1.0;
    match m.halt[m.initial] {
        Halt::Acc => stats.p_acc = 1.0,
        Halt::Rej => stats.p_rej = 1.0,
        Halt::No => v[m.initial * len] = 1.0,
    }
    if m.halt[m.initial] != Halt::No {
        stats.finish(false);
        return stats;
    }
    let mut t = 0;
    while t < cap && mass > target {
        t += 1;
        let mut next = vec![0.0; m.n * len];
        let (mut acc, mut rej) = (0.0, 0.0);
        for q in 0..m.n {
            for pos in 0..len {
                let w = v[q * len + pos];
                if w == 0.0 {
                    continue;
                }
                let row = m.row(q, tape[pos]);
                if row.is_empty() {
                    rej += w;
                }
                for mv in row {
                    let pw = w * mv.weight.re;
                    match m.halt[mv.to] {
                        Halt::Acc => acc += pw,
                        Halt::Rej => rej += pw,
                        Halt::No => next[mv.to * len + step_pos(pos, mv.dir, len)] += pw,
                    }
                }
            }
        }
        v = next;
        mass = v.iter().sum();
        stats.push_step(t, acc, rej, mass);
    }
    stats.finish(mass > target.max(1e-15) && m.head_mode != HeadMode::OneWay);
    stats
}

fn pfa_absorbing(m: &Indexed, tape: &[usize]) -> Result<RunStats> {
    let len = tape.len();
    let mut stats = RunStats::default();
    match m.halt[m.initial] {
        Halt::Acc => stats.p_acc = 1.0,
        Halt::Rej => stats.p_rej = 1.0,
        Halt::No => {}
    }
    if m.halt[m.initial] != Halt::No {
        stats.finish(false);
        return Ok(stats);
    }
    // Transient configurations reachable from the start.
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut order = vec![(m.initial, 0)];
    index.insert((m.initial, 0), 0);
    let mut i = 0;
    while i < order.len() {
        let (q, pos) = order[i];
        for mv in m.row(q, tape[pos]) {
            if m.halt[mv.to] == Halt::No {
                let key = (mv.to, step_pos(pos, mv.dir, len));
                if !index.contains_key(&key) {
                    index.insert(key, order.len());
                    order.push(key);
                }
            }
        }
        i += 1;
    }
    let nt = order.len();
    // (I - Q)^T y = e_start gives expected visit counts y.
    let mut a = DMatrix::<f64>::identity(nt, nt);
    let mut r_acc = DVector::<f64>::zeros(nt);
    let mut r_rej = DVector::<f64>::zeros(nt);
    for (j, &(q, pos)) in order.iter().enumerate() {
        let row = m.row(q, tape[pos]);
        if row.is_empty() {
            r_rej[j] = 1.0;
        }
        for mv in row {
            let p = mv.weight.re;
            match m.halt[mv.to] {
                Halt::Acc => r_acc[j] += p,
                Halt::Rej => r_rej[j] += p,
                Halt::No => {
                    let k = index[&(mv.to, step_pos(pos, mv.dir, len))];
                    a[(k, j)] -= p;
                }
            }
        }
    }
    let mut e = DVector::<f64>::zeros(nt);
    e[0] = 1.0;
    let y = a.lu().solve(&e).ok_or(Error::InvalidProbabilistic)?;
    if y.iter().any(|v| !v.is_finite() || *v < -1e-9) {
        return Err(Error::InvalidProbabilistic);
    }
    let p_acc = y.dot(&r_acc);
    let p_rej = y.dot(&r_rej);
    if (p_acc + p_rej - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidProbabilistic);
    }
    stats.p_acc = p_acc;
    stats.p_rej = p_rej;
    stats.residual = (1.0 - p_acc - p_rej).max(0.0);
    stats.expected_runtime_lower = y.sum();
    stats.finish(false);
    stats.residual_bound_note = "absorbing-chain solve; halting probability is exact".to_string();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{decide, Criterion, Decision};

    fn ends_in_a() -> MachineSpec {
        let mut s = MachineSpec::new(Kind::Dfa, HeadMode::OneWay, GarbageMode::None, &['a', 'b']);
        s.states = ["q0", "q1", "acc", "rej"].map(String::from).to_vec();
        s.initial = "q0".into();
        s.accepting = vec!["acc".into()];
        s.rejecting = vec!["rej".into()];
        let r = TransitionRule::classical;
        s.transitions = vec![
            r("q0", '¢', "q0", 1),
            r("q0", 'a', "q1", 1),
            r("q0", 'b', "q0", 1),
            r("q1", 'a', "q1", 1),
            r("q1", 'b', "q0", 1),
            r("q0", '$', "rej", 1),
            r("q1", '$', "acc", 1),
        ];
        s
    }

    #[test]
    fn minimal_spec_is_valid() {
        let mut s = MachineSpec::new(Kind::Dfa, HeadMode::OneWay, GarbageMode::None, &['a']);
        s.states = vec!["q".into()];
        s.initial = "q".into();
        for c in ['¢', 'a', '$'] {
            s.transitions.push(TransitionRule::classical("q", c, "q", 1));
        }
        assert!(validate_spec(&s).is_valid());
    }

    #[test]
    fn one_way_rejects_stationary_rules() {
        let mut s = ends_in_a();
        s.transitions[0].dir = 0;
        let rep = validate_spec(&s);
        assert!(rep.violations.iter().any(|v| v.contains("stationary move in oneWay")));
    }

    #[test]
    fn rigid_needs_synchronized_garbage() {
        let mut s = MachineSpec::new(Kind::Qfa, HeadMode::OneWay, GarbageMode::Rigid, &['a']);
        s.states = vec!["q".into()];
        s.initial = "q".into();
        s.garbage_alphabet = vec!["g".into()];
        s.transitions.push(TransitionRule::new("q", 'a', "q", 1, None, C64::new(1.0, 0.0)));
        let rep = validate_spec(&s);
        assert!(rep.violations.iter().any(|v| v.contains("rigid garbage desynchronized")));
    }

    #[test]
    fn json_round_trip() {
        let s = ends_in_a();
        let back = MachineSpec::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
        assert!(s.to_json().contains("\"headMode\": \"oneWay\""));
    }

    #[test]
    fn dfa_examples() {
        let s = ends_in_a();
        assert_eq!(run_dfa(&s, "ba").unwrap(), Verdict::Accept);
        assert_eq!(run_dfa(&s, "ab").unwrap(), Verdict::Reject);
        assert_eq!(run_dfa(&s, "").unwrap(), Verdict::Reject);
        assert!(matches!(run_dfa(&s, "c"), Err(Error::UnknownSymbol('c'))));
    }

    #[test]
    fn looping_two_way_dfa_is_undefined() {
        let mut s = MachineSpec::new(Kind::Dfa, HeadMode::TwoWay, GarbageMode::None, &['a']);
        s.states = vec!["q".into(), "acc".into()];
        s.initial = "q".into();
        s.accepting = vec!["acc".into()];
        s.transitions.push(TransitionRule::classical("q", '¢', "q", 0));
        assert_eq!(run_dfa(&s, "aa").unwrap(), Verdict::Undefined);
    }

    fn sigma_star_nfa(accepting: bool) -> MachineSpec {
        let mut s = MachineSpec::new(Kind::Nfa, HeadMode::OneWay, GarbageMode::None, &['a', 'b', 'c']);
        s.states = vec!["q".into(), "acc".into()];
        s.initial = "q".into();
        if accepting {
            s.accepting = vec!["acc".into()];
        }
        for c in ['¢', 'a', 'b', 'c'] {
            s.transitions.push(TransitionRule::classical("q", c, "q", 1));
        }
        s.transitions.push(TransitionRule::classical("q", '$', "acc", 1));
        s
    }

    #[test]
    fn nfa_examples() {
        let all = sigma_star_nfa(true);
        assert_eq!(run_nfa(&all, "").unwrap(), Verdict::Accept);
        assert_eq!(run_nfa(&all, "abc").unwrap(), Verdict::Accept);
        let none = sigma_star_nfa(false);
        assert_eq!(run_nfa(&none, "abc").unwrap(), Verdict::Reject);
    }

    /// Right sweep counts a's (capped at 3) and checks a*b*; a left sweep
    /// then cancels b's against the count, with a guessed early exit.
    fn anbn_2nfa() -> MachineSpec {
        let mut s = MachineSpec::new(Kind::Nfa, HeadMode::TwoWay, GarbageMode::None, &['a', 'b']);
        let r = TransitionRule::classical;
        let mut states = vec!["start".to_string(), "acc".into(), "rej".into()];
        for k in 0..=3 {
            states.push(format!("s{k}"));
            states.push(format!("t{k}"));
            states.push(format!("u{k}"));
        }
        s.states = states;
        s.initial = "start".into();
        s.accepting = vec!["acc".into()];
        s.rejecting = vec!["rej".into()];
        s.transitions.push(r("start", '¢', "s0", 1));
        for k in 0..=3 {
            let (sk, tk, uk) = (format!("s{k}"), format!("t{k}"), format!("u{k}"));
            if k < 3 {
                s.transitions.push(r(&sk, 'a', &format!("s{}", k + 1), 1));
            }
            s.transitions.push(r(&sk, 'b', &tk, 0));
            s.transitions.push(r(&sk, '$', &uk, -1));
            s.transitions.push(r(&tk, 'b', &tk, 1));
            s.transitions.push(r(&tk, '$', &uk, -1));
            if k > 0 {
                s.transitions.push(r(&uk, 'b', &format!("u{}", k - 1), -1));
            } else {
                s.transitions.push(r(&uk, 'a', "acc", 1));
                s.transitions.push(r(&uk, '¢', "acc", 1));
            }
        }
        s
    }

    fn all_words(alpha: &[char], max: usize) -> Vec<String> {
        let mut out = vec![String::new()];
        let mut layer = vec![String::new()];
        for _ in 0..max {
            let mut next = Vec::new();
            for w in &layer {
                for c in alpha {
                    next.push(format!("{w}{c}"));
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }

    #[test]
    fn two_way_nfa_counts_back_and_forth() {
        let s = anbn_2nfa();
        assert!(validate_spec(&s).is_valid(), "{:?}", validate_spec(&s));
        assert_eq!(run_nfa(&s, "aabb").unwrap(), Verdict::Accept);
        for w in all_words(&['a', 'b'], 8) {
            let i = w.chars().take_while(|&c| c == 'a').count();
            let member = i <= 3 && w == format!("{}{}", "a".repeat(i), "b".repeat(i));
            let expect = if member { Verdict::Accept } else { Verdict::Reject };
            assert_eq!(run_nfa(&s, &w).unwrap(), expect, "{w}");
        }
    }

    fn coin_pfa() -> MachineSpec {
        let mut s = MachineSpec::new(Kind::Pfa, HeadMode::OneWay, GarbageMode::None, &['a']);
        s.states = ["q", "acc", "rej"].map(String::from).to_vec();
        s.initial = "q".into();
        s.accepting = vec!["acc".into()];
        s.rejecting = vec!["rej".into()];
        s.transitions.push(TransitionRule::new("q", '¢', "acc", 1, None, C64::new(0.5, 0.0)));
        s.transitions.push(TransitionRule::new("q", '¢', "rej", 1, None, C64::new(0.5, 0.0)));
        s
    }

    #[test]
    fn fair_coin_is_exactly_half() {
        let st = run_pfa(&coin_pfa(), "aaa", PfaOptions::default()).unwrap();
        assert_eq!(st.p_acc, 0.5);
        assert_eq!(st.p_rej, 0.5);
        assert_eq!(decide(&st, Criterion::UnboundedError), Decision::Reject);
    }

    #[test]
    fn deterministic_pfa_matches_dfa() {
        let mut s = ends_in_a();
        s.kind = Kind::Pfa;
        let mut d = ends_in_a();
        d.kind = Kind::Dfa;
        for w in all_words(&['a', 'b'], 5) {
            let st = run_pfa(&s, &w, PfaOptions::default()).unwrap();
            let v = run_dfa(&d, &w).unwrap();
            assert_eq!(st.p_acc == 1.0, v == Verdict::Accept);
            assert!(st.p_acc == 0.0 || st.p_acc == 1.0);
            for step in &st.per_step {
                assert!(step.residual >= 0.0);
            }
        }
    }

    /// 2pfa bouncing between the endmarkers, halting on each visit to $
    /// with probability 1/3.
    fn bouncer() -> MachineSpec {
        let mut s = MachineSpec::new(Kind::Pfa, HeadMode::TwoWay, GarbageMode::None, &['0']);
        s.states = ["r", "l", "acc", "rej"].map(String::from).to_vec();
        s.initial = "r".into();
        s.accepting = vec!["acc".into()];
        s.rejecting = vec!["rej".into()];
        let p = |a: f64| C64::new(a, 0.0);
        let t = &mut s.transitions;
        t.push(TransitionRule::new("r", '¢', "r", 1, None, p(1.0)));
        t.push(TransitionRule::new("r", '0', "r", 1, None, p(1.0)));
        t.push(TransitionRule::new("r", '$', "acc", 1, None, p(0.25)));
        t.push(TransitionRule::new("r", '$', "rej", 1, None, p(0.125)));
        t.push(TransitionRule::new("r", '$', "l", -1, None, p(0.625)));
        t.push(TransitionRule::new("l", '0', "l", -1, None, p(1.0)));
        t.push(TransitionRule::new("l", '¢', "r", 1, None, p(1.0)));
        s
    }

    #[test]
    fn absorbing_solve_matches_power_iteration() {
        let s = bouncer();
        for n in 0..5 {
            let x = "0".repeat(n);
            let exact = run_pfa(&s, &x, PfaOptions::default()).unwrap();
            let it = run_pfa(&s, &x, PfaOptions { power_steps: Some(20_000), residual_target: 1e-15 }).unwrap();
            assert!((exact.p_acc - 2.0 / 3.0).abs() < 1e-12);
            assert!((exact.p_acc - it.p_acc).abs() < 1e-9);
            assert!((exact.expected_runtime_lower - it.expected_runtime_lower).abs() < 1e-6);
            // Each round trip costs 2(n+1) steps; rounds are geometric with mean 8/3.
            let rounds = 1.0 / 0.375;
            let expect = (n as f64 + 2.0) + (rounds - 1.0) * 2.0 * (n as f64 + 1.0);
            assert!((exact.expected_runtime_lower - expect).abs() < 1e-9, "{n}");
        }
    }

    #[test]
    fn never_halting_chain_is_invalid() {
        let mut s = MachineSpec::new(Kind::Pfa, HeadMode::TwoWay, GarbageMode::None, &['0']);
        s.states = vec!["q".into()];
        s.initial = "q".into();
        for c in ['¢', '0', '$'] {
            s.transitions.push(TransitionRule::new("q", c, "q", 1, None, C64::new(1.0, 0.0)));
        }
        assert_eq!(run_pfa(&s, "0", PfaOptions::default()), Err(Error::InvalidProbabilistic));
    }
}
