//! Advised quantum Turing machines with input, work, advice and garbage tapes.
//!
//! A surface configuration is `(q, t1, y, t2, t3, z)`: the state, the input
//! head on the circular tape `¢x$`, the work content `y` with its head on
//! cells `1..=space_bound`, the advice head on the circular tape `¢w$`, and
//! the garbage string `z`. The garbage head advances exactly when a rule
//! writes a garbage symbol.
//!
//! Rules may use the wildcard `*` in any read field; for a given
//! `(q, σ, γ, θ)` only the matching rules with the most concrete read fields
//! apply. A rule reading `*` on the work tape may write `*` to leave the
//! cell as it is.

use crate::linalg::{C64, ONE, ZERO};
use crate::machines::{LEFT_END, RIGHT_END};
use crate::sim::SimOptions;
use crate::stats::RunStats;
use crate::{Error, Result};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, VecDeque};

pub const QTM_SPEC_VERSION: &str = "qtm-spec/1";
pub const WILDCARD: char = '*';
pub const DEFAULT_BLANK: char = 'B';

/// `δ(q, σ, γ, θ | p, τ, ξ, d1, d2, d3)` with its amplitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QtmRule {
    pub from: String,
    pub input: char,
    pub work: char,
    pub advice: char,
    pub to: String,
    pub write: char,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub garbage: Option<String>,
    pub d_input: i8,
    pub d_work: i8,
    pub d_advice: i8,
    #[serde(with = "crate::linalg::cjson")]
    pub weight: C64,
}

impl QtmRule {
    /// `read = (σ, γ, θ)`, `dirs = (d1, d2, d3)`.
    pub fn new(
        from: &str,
        read: (char, char, char),
        to: &str,
        write: char,
        garbage: Option<&str>,
        dirs: (i8, i8, i8),
        weight: C64,
    ) -> Self {
        QtmRule {
            from: from.to_string(),
            input: read.0,
            work: read.1,
            advice: read.2,
            to: to.to_string(),
            write,
            garbage: garbage.map(str::to_string),
            d_input: dirs.0,
            d_work: dirs.1,
            d_advice: dirs.2,
            weight,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QtmSpec {
    #[serde(default = "default_version")]
    pub version: String,
    pub states: Vec<String>,
    pub input_alphabet: Vec<char>,
    /// Includes the blank.
    pub work_alphabet: Vec<char>,
    #[serde(default = "default_blank")]
    pub blank: char,
    pub advice_alphabet: Vec<char>,
    #[serde(default)]
    pub garbage_alphabet: Vec<String>,
    pub initial: String,
    pub accepting: Vec<String>,
    pub rejecting: Vec<String>,
    pub space_bound: usize,
    pub transitions: Vec<QtmRule>,
}

fn default_version() -> String {
    QTM_SPEC_VERSION.to_string()
}

fn default_blank() -> char {
    DEFAULT_BLANK
}

impl QtmSpec {
    /// Machine without states or rules; the work alphabet gets the blank
    /// prepended.
    pub fn new(input_alphabet: &[char], work_symbols: &[char], advice_alphabet: &[char], space_bound: usize) -> Self {
        let mut work_alphabet = vec![DEFAULT_BLANK];
        work_alphabet.extend(work_symbols.iter().filter(|&&c| c != DEFAULT_BLANK));
        QtmSpec {
            version: default_version(),
            states: Vec::new(),
            input_alphabet: input_alphabet.to_vec(),
            work_alphabet,
            blank: DEFAULT_BLANK,
            advice_alphabet: advice_alphabet.to_vec(),
            garbage_alphabet: Vec::new(),
            initial: String::new(),
            accepting: Vec::new(),
            rejecting: Vec::new(),
            space_bound,
            transitions: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { offset: e.column(), message: e.to_string() })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("qtm spec serializes")
    }

    pub fn is_halting(&self, q: &str) -> bool {
        self.accepting.iter().any(|s| s == q) || self.rejecting.iter().any(|s| s == q)
    }

    /// Structural violations; empty means valid.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.version != QTM_SPEC_VERSION {
            v.push(format!("version {:?}, expected {QTM_SPEC_VERSION:?}", self.version));
        }
        if self.space_bound == 0 {
            v.push("space bound must be at least 1".into());
        }
        let states: HashMap<&str, usize> = self.states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        if states.len() != self.states.len() {
            v.push("duplicate state names".into());
        }
        if !states.contains_key(self.initial.as_str()) {
            v.push(format!("initial state {:?} is not a state", self.initial));
        }
        for s in self.accepting.iter().chain(&self.rejecting) {
            if !states.contains_key(s.as_str()) {
                v.push(format!("halting state {s:?} is not a state"));
            }
        }
        if self.accepting.iter().any(|s| self.rejecting.contains(s)) {
            v.push("accepting and rejecting states overlap".into());
        }
        let reserved = [LEFT_END, RIGHT_END, WILDCARD];
        for (name, alpha) in [("input", &self.input_alphabet), ("work", &self.work_alphabet), ("advice", &self.advice_alphabet)] {
            if alpha.iter().any(|c| reserved.contains(c)) {
                v.push(format!("{name} alphabet uses a reserved symbol"));
            }
            let mut seen = alpha.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != alpha.len() {
                v.push(format!("{name} alphabet has duplicates"));
            }
        }
        if !self.work_alphabet.contains(&self.blank) {
            v.push(format!("blank {:?} missing from the work alphabet", self.blank));
        }
        let tape_ok = |c: char, alpha: &[char]| c == WILDCARD || c == LEFT_END || c == RIGHT_END || alpha.contains(&c);
        for (i, r) in self.transitions.iter().enumerate() {
            if !states.contains_key(r.from.as_str()) || !states.contains_key(r.to.as_str()) {
                v.push(format!("rule {i}: unknown state"));
            }
            if !tape_ok(r.input, &self.input_alphabet) {
                v.push(format!("rule {i}: input symbol {:?}", r.input));
            }
            if !tape_ok(r.advice, &self.advice_alphabet) {
                v.push(format!("rule {i}: advice symbol {:?}", r.advice));
            }
            if r.work != WILDCARD && !self.work_alphabet.contains(&r.work) {
                v.push(format!("rule {i}: work symbol {:?}", r.work));
            }
            let write_ok = self.work_alphabet.contains(&r.write) || (r.write == WILDCARD && r.work == WILDCARD);
            if !write_ok {
                v.push(format!("rule {i}: written symbol {:?}", r.write));
            }
            if let Some(g) = &r.garbage {
                if !self.garbage_alphabet.contains(g) {
                    v.push(format!("rule {i}: garbage symbol {g:?}"));
                }
            }
            for d in [r.d_input, r.d_work, r.d_advice] {
                if !(-1..=1).contains(&d) {
                    v.push(format!("rule {i}: direction {d}"));
                }
            }
            if !(r.weight.re.is_finite() && r.weight.im.is_finite()) {
                v.push(format!("rule {i}: non-finite weight"));
            }
        }
        v
    }
}

/// Advice for one input length: a string, or a normalized superposition of
/// strings run as a decoherent mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind", content = "value")]
pub enum Advice {
    Classical(String),
    Quantum(Vec<AdviceBranch>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdviceBranch {
    #[serde(with = "crate::linalg::cjson")]
    pub amplitude: C64,
    pub advice: String,
}

impl Advice {
    pub fn longest(&self) -> usize {
        match self {
            Advice::Classical(s) => s.chars().count(),
            Advice::Quantum(b) => b.iter().map(|b| b.advice.chars().count()).max().unwrap_or(0),
        }
    }
}

/// Length-indexed advice table with an optional entry for every other
/// length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AdviceFn {
    pub by_length: BTreeMap<usize, Advice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Advice>,
    /// Human-readable bound on `|h(l)|`.
    #[serde(default)]
    pub size_bound: String,
}

impl AdviceFn {
    pub fn constant(advice: Advice) -> Self {
        let size_bound = format!("{}", advice.longest());
        AdviceFn { by_length: BTreeMap::new(), default: Some(advice), size_bound }
    }

    pub fn classical(w: &str) -> Self {
        AdviceFn::constant(Advice::Classical(w.to_string()))
    }

    pub fn get(&self, len: usize) -> Option<&Advice> {
        self.by_length.get(&len).or(self.default.as_ref())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { offset: e.column(), message: e.to_string() })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("advice serializes")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QtmRunStats {
    #[serde(flatten)]
    pub stats: RunStats,
    /// Largest work cell index any branch visited.
    pub space_used: usize,
    /// `space_used` after each step.
    #[serde(skip)]
    pub space_trace: Vec<usize>,
}

pub(crate) const KEEP: u8 = u8::MAX;
const NONE: u32 = u32::MAX;
const PRUNE: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct QMove {
    pub(crate) to: u32,
    pub(crate) write: u8,
    /// 0 for none, `g + 1` otherwise.
    pub(crate) garbage: u16,
    pub(crate) d: [i8; 3],
    pub(crate) w: C64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Halt {
    No,
    Acc,
    Rej,
}

/// Dense rule table over `(state, input, work, advice)` symbol indices.
pub(crate) struct Compiled {
    pub(crate) names: Vec<String>,
    pub(crate) ins: Vec<char>,
    pub(crate) works: Vec<char>,
    pub(crate) advs: Vec<char>,
    pub(crate) blank: u8,
    pub(crate) halt: Vec<Halt>,
    pub(crate) initial: u32,
    pub(crate) space: usize,
    ranges: Vec<(u32, u32)>,
    moves: Vec<QMove>,
    /// Per `(state, input, advice)`: a single weight-1 move shared by every
    /// work symbol that leaves the cell unchanged.
    uniform: Vec<u32>,
}

impl Compiled {
    pub(crate) fn new(spec: &QtmSpec) -> Result<Self> {
        let v = spec.validate();
        if !v.is_empty() {
            return Err(Error::InvalidSpec(v));
        }
        let sidx: HashMap<&str, u32> = spec.states.iter().enumerate().map(|(i, s)| (s.as_str(), i as u32)).collect();
        let tape = |alpha: &[char]| {
            let mut t = vec![LEFT_END];
            t.extend(alpha);
            t.push(RIGHT_END);
            t
        };
        let (ins, advs, works) = (tape(&spec.input_alphabet), tape(&spec.advice_alphabet), spec.work_alphabet.clone());
        let (ni, nw, na) = (ins.len(), works.len(), advs.len());
        let n = spec.states.len();
        let pos = |alpha: &[char], c: char| alpha.iter().position(|&x| x == c);
        let expand = |alpha: &[char], c: char| -> Vec<usize> {
            if c == WILDCARD {
                (0..alpha.len()).collect()
            } else {
                vec![pos(alpha, c).expect("validated symbol")]
            }
        };
        let gidx: HashMap<&str, u16> =
            spec.garbage_alphabet.iter().enumerate().map(|(i, g)| (g.as_str(), i as u16 + 1)).collect();
        let key = |s: usize, i: usize, w: usize, a: usize| ((s * ni + i) * nw + w) * na + a;
        let mut best = vec![0u8; n * ni * nw * na];
        let mut hits: Vec<(usize, u8, u32)> = Vec::new();
        for (ri, r) in spec.transitions.iter().enumerate() {
            let s = sidx[r.from.as_str()] as usize;
            let spec_level = 1 + [r.input, r.work, r.advice].iter().filter(|&&c| c != WILDCARD).count() as u8;
            for i in expand(&ins, r.input) {
                for w in expand(&works, r.work) {
                    for a in expand(&advs, r.advice) {
                        let k = key(s, i, w, a);
                        best[k] = best[k].max(spec_level);
                        hits.push((k, spec_level, ri as u32));
                    }
                }
            }
        }
        hits.retain(|&(k, l, _)| best[k] == l);
        hits.sort_unstable();
        let mut ranges = vec![(0u32, 0u32); best.len()];
        let mut moves = Vec::with_capacity(hits.len());
        let mut j = 0;
        while j < hits.len() {
            let k = hits[j].0;
            let start = moves.len() as u32;
            while j < hits.len() && hits[j].0 == k {
                let r = &spec.transitions[hits[j].2 as usize];
                let write = if r.write == WILDCARD { KEEP } else { pos(&works, r.write).expect("validated") as u8 };
                moves.push(QMove {
                    to: sidx[r.to.as_str()],
                    write,
                    garbage: r.garbage.as_deref().map_or(0, |g| gidx[g]),
                    d: [r.d_input, r.d_work, r.d_advice],
                    w: r.weight,
                });
                j += 1;
            }
            ranges[k] = (start, moves.len() as u32);
        }
        let mut uniform = vec![NONE; n * ni * na];
        for s in 0..n {
            for i in 0..ni {
                for a in 0..na {
                    let mut shared: Option<u32> = None;
                    let mut ok = true;
                    for w in 0..nw {
                        let (lo, hi) = ranges[key(s, i, w, a)];
                        if hi != lo + 1 {
                            ok = false;
                            break;
                        }
                        let m = moves[lo as usize];
                        let same_cell = m.write == KEEP || m.write as usize == w;
                        if !same_cell || m.w != ONE {
                            ok = false;
                            break;
                        }
                        match shared {
                            None => shared = Some(lo),
                            Some(x) => {
                                let o = moves[x as usize];
                                if (o.to, o.garbage, o.d) != (m.to, m.garbage, m.d) {
                                    ok = false;
                                    break;
                                }
                            }
                        }
                    }
                    if ok {
                        uniform[(s * ni + i) * na + a] = shared.unwrap_or(NONE);
                    }
                }
            }
        }
        let mut halt = vec![Halt::No; n];
        for s in &spec.accepting {
            halt[sidx[s.as_str()] as usize] = Halt::Acc;
        }
        for s in &spec.rejecting {
            halt[sidx[s.as_str()] as usize] = Halt::Rej;
        }
        Ok(Compiled {
            names: spec.states.clone(),
            blank: pos(&works, spec.blank).expect("validated blank") as u8,
            ins,
            works,
            advs,
            halt,
            initial: sidx[spec.initial.as_str()],
            space: spec.space_bound,
            ranges,
            moves,
            uniform,
        })
    }

    pub(crate) fn moves_at(&self, s: u32, i: u8, w: u8, a: u8) -> &[QMove] {
        let (ni, nw, na) = (self.ins.len(), self.works.len(), self.advs.len());
        let k = ((s as usize * ni + i as usize) * nw + w as usize) * na + a as usize;
        let (lo, hi) = self.ranges[k];
        &self.moves[lo as usize..hi as usize]
    }

    fn uniform_at(&self, s: u32, i: u8, a: u8) -> Option<QMove> {
        let u = self.uniform[(s as usize * self.ins.len() + i as usize) * self.advs.len() + a as usize];
        (u != NONE).then(|| self.moves[u as usize])
    }

    pub(crate) fn tape(alpha: &[char], w: &str) -> Result<Vec<u8>> {
        let mut t = vec![0u8];
        for c in w.chars() {
            match alpha.iter().position(|&x| x == c) {
                Some(i) if i != 0 && i != alpha.len() - 1 => t.push(i as u8),
                _ => return Err(Error::UnknownSymbol(c)),
            }
        }
        t.push(alpha.len() as u8 - 1);
        Ok(t)
    }
}

/// Interned garbage strings; node 0 is empty.
#[derive(Default)]
struct Trie {
    nodes: Vec<(u32, u16)>,
    child: FxHashMap<(u32, u16), u32>,
}

impl Trie {
    fn new() -> Self {
        Trie { nodes: vec![(0, 0)], child: FxHashMap::default() }
    }

    fn push(&mut self, node: u32, sym: u16) -> u32 {
        if sym == 0 {
            return node;
        }
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

/// Classical part of a configuration; the work content is kept apart so
/// configurations differing only there move together.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Key {
    s: u32,
    t1: u32,
    t2: u32,
    t3: u32,
    z: u32,
}

type Cells = Box<[u8]>;

struct Runner<'a> {
    c: &'a Compiled,
    input: Vec<u8>,
    advice: Vec<u8>,
    trie: Trie,
    space_used: usize,
}

impl Runner<'_> {
    fn advance(&mut self, k: Key, m: &QMove, step: usize) -> Result<Key> {
        let t2 = k.t2 as i64 + m.d[1] as i64;
        if t2 < 1 || t2 > self.c.space as i64 {
            return Err(Error::SpaceOverflow {
                branch: format!(
                    "step {step}: state {} moves the work head to cell {t2} (bound {})",
                    self.c.names[k.s as usize], self.c.space
                ),
            });
        }
        self.space_used = self.space_used.max(t2 as usize);
        let (li, la) = (self.input.len() as i64, self.advice.len() as i64);
        Ok(Key {
            s: m.to,
            t1: (k.t1 as i64 + m.d[0] as i64).rem_euclid(li) as u32,
            t2: t2 as u32,
            t3: (k.t3 as i64 + m.d[2] as i64).rem_euclid(la) as u32,
            z: self.trie.push(k.z, m.garbage),
        })
    }

    fn run(mut self, opts: SimOptions) -> Result<QtmRunStats> {
        let c = self.c;
        let cells: Cells = vec![c.blank; c.space].into_boxed_slice();
        let mut first = Group::default();
        first.cells.insert(cells, ONE);
        first.mass = 1.0;
        let mut cur = vec![(Key { s: c.initial, t1: 0, t2: 1, t3: 0, z: 0 }, first)];
        self.space_used = 1;
        let mut out = QtmRunStats::default();
        let mut truncated = true;
        let mut index: FxHashMap<Key, usize> = FxHashMap::default();
        for t in 1..=opts.max_steps {
            let mut next: Vec<(Key, Group)> = Vec::with_capacity(cur.len());
            index.clear();
            for (k, group) in cur.drain(..) {
                let (i, a) = (self.input[k.t1 as usize], self.advice[k.t3 as usize]);
                if let Some(m) = c.uniform_at(k.s, i, a) {
                    let k2 = self.advance(k, &m, t)?;
                    match index.get(&k2) {
                        None => {
                            index.insert(k2, next.len());
                            next.push((k2, group));
                        }
                        Some(&j) => next[j].1.merge(group),
                    }
                    continue;
                }
                for (cell, amp) in group.cells {
                    let w = cell[k.t2 as usize - 1];
                    for m in c.moves_at(k.s, i, w, a) {
                        let v = amp * m.w;
                        if v.norm_sqr() < PRUNE {
                            continue;
                        }
                        let k2 = self.advance(k, m, t)?;
                        let mut cell2 = cell.clone();
                        if m.write != KEEP {
                            cell2[k.t2 as usize - 1] = m.write;
                        }
                        let j = *index.entry(k2).or_insert_with(|| {
                            next.push((k2, Group::default()));
                            next.len() - 1
                        });
                        let g = &mut next[j].1;
                        *g.cells.entry(cell2).or_insert(ZERO) += v;
                        g.stale = true;
                    }
                }
            }
            let (mut pa, mut pr, mut res) = (0.0, 0.0, 0.0);
            next.retain_mut(|(k, g)| {
                if g.stale {
                    g.cells.retain(|_, v| v.norm_sqr() >= PRUNE);
                    g.mass = g.cells.values().map(|v| v.norm_sqr()).sum();
                    g.stale = false;
                }
                match c.halt[k.s as usize] {
                    Halt::Acc => pa += g.mass,
                    Halt::Rej => pr += g.mass,
                    Halt::No => {
                        res += g.mass;
                        return !g.cells.is_empty();
                    }
                }
                false
            });
            out.stats.push_step(t, pa, pr, res);
            out.space_trace.push(self.space_used);
            cur = next;
            if res <= opts.residual_target {
                truncated = false;
                break;
            }
        }
        out.stats.finish(truncated);
        out.space_used = self.space_used;
        Ok(out)
    }
}

/// Work-tape contents sharing one classical configuration, with their total
/// squared norm. `stale` marks a mass that needs recomputing.
#[derive(Default)]
struct Group {
    cells: FxHashMap<Cells, C64>,
    mass: f64,
    stale: bool,
}

impl Group {
    fn merge(&mut self, other: Group) {
        for (cell, amp) in other.cells {
            *self.cells.entry(cell).or_insert(ZERO) += amp;
        }
        self.stale = true;
    }
}

/// A validated QTM with its rule table built, for repeated runs.
pub struct PreparedQtm {
    c: Compiled,
}

impl PreparedQtm {
    pub fn new(spec: &QtmSpec) -> Result<Self> {
        Ok(PreparedQtm { c: Compiled::new(spec)? })
    }

    /// Measure-many run on `x` with advice `advice(|x|)`.
    pub fn simulate(&self, x: &str, advice: &AdviceFn, opts: SimOptions) -> Result<QtmRunStats> {
        let c = &self.c;
        let len = x.chars().count();
        let a = advice.get(len).ok_or_else(|| Error::Invalid(format!("no advice for length {len}")))?;
        match a {
            Advice::Classical(w) => run_one(c, x, w, opts),
            Advice::Quantum(branches) => {
                let total: f64 = branches.iter().map(|b| b.amplitude.norm_sqr()).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Invalid(format!("quantum advice has norm {total}")));
                }
                let mut parts = Vec::new();
                let mut out = QtmRunStats::default();
                for b in branches {
                    let r = run_one(c, x, &b.advice, opts)?;
                    out.space_used = out.space_used.max(r.space_used);
                    if r.space_trace.len() > out.space_trace.len() {
                        let last = out.space_trace.last().copied().unwrap_or(0);
                        out.space_trace.resize(r.space_trace.len(), last);
                    }
                    let mut last = 0;
                    for (i, s) in out.space_trace.iter_mut().enumerate() {
                        last = r.space_trace.get(i).copied().unwrap_or(last);
                        *s = (*s).max(last);
                    }
                    parts.push((b.amplitude.norm_sqr(), r.stats));
                }
                out.stats = RunStats::mixture(&parts);
                Ok(out)
            }
        }
    }
}

/// Measure-many run on `x` with advice `advice(|x|)`.
pub fn simulate_qtm(spec: &QtmSpec, x: &str, advice: &AdviceFn, opts: SimOptions) -> Result<QtmRunStats> {
    PreparedQtm::new(spec)?.simulate(x, advice, opts)
}

fn run_one(c: &Compiled, x: &str, w: &str, opts: SimOptions) -> Result<QtmRunStats> {
    let runner = Runner {
        c,
        input: Compiled::tape(&c.ins, x)?,
        advice: Compiled::tape(&c.advs, w)?,
        trie: Trie::new(),
        space_used: 1,
    };
    runner.run(opts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", tag = "status")]
pub enum QtmWellFormedness {
    Ok { configurations: usize },
    /// Two configurations whose images are not orthogonal, or one
    /// configuration (`first == second`) whose image is not a unit vector.
    Witness { input: String, advice: String, first: String, second: String, overlap: f64 },
}

impl QtmWellFormedness {
    pub fn is_ok(&self) -> bool {
        matches!(self, QtmWellFormedness::Ok { .. })
    }
}

/// Configurations examined before giving up.
pub const WF_CONFIG_CAP: usize = 400_000;
const WF_TOL: f64 = 1e-9;

/// Checks that reachable configurations have orthonormal images, for every
/// input up to `max_len` and every advice sample. Reachability follows the
/// nonzero rules from the initial configuration; moves leaving the work
/// tape count toward the norm but not toward overlaps.
pub fn check_qtm_well_formed(spec: &QtmSpec, max_len: usize, advice_samples: &[String]) -> Result<QtmWellFormedness> {
    let c = Compiled::new(spec)?;
    let mut total = 0;
    let samples: Vec<String> = if advice_samples.is_empty() { vec![String::new()] } else { advice_samples.to_vec() };
    for x in crate::transforms::all_strings(&spec.input_alphabet, max_len) {
        for w in &samples {
            match wf_one(&c, &x, w, &mut total)? {
                None => {}
                Some(witness) => return Ok(witness),
            }
        }
    }
    Ok(QtmWellFormedness::Ok { configurations: total })
}

type Full = (Key, Cells);

fn wf_one(c: &Compiled, x: &str, w: &str, total: &mut usize) -> Result<Option<QtmWellFormedness>> {
    let mut r = Runner {
        c,
        input: Compiled::tape(&c.ins, x)?,
        advice: Compiled::tape(&c.advs, w)?,
        trie: Trie::new(),
        space_used: 1,
    };
    let start: Full = (Key { s: c.initial, t1: 0, t2: 1, t3: 0, z: 0 }, vec![c.blank; c.space].into_boxed_slice());
    let mut ids: HashMap<Full, usize> = HashMap::new();
    let mut confs: Vec<Full> = Vec::new();
    let mut queue = VecDeque::new();
    ids.insert(start.clone(), 0);
    confs.push(start.clone());
    queue.push_back(0usize);
    // target id → (source id, amplitude)
    let mut incoming: HashMap<usize, Vec<(usize, C64)>> = HashMap::new();
    let describe = |r: &Runner, f: &Full| {
        let (k, cells) = f;
        let y: String = cells.iter().map(|&i| r.c.works[i as usize]).collect();
        format!(
            "({}, t1={}, y={y}, t2={}, t3={}, z={:?})",
            r.c.names[k.s as usize],
            k.t1,
            k.t2,
            k.t3,
            r.trie.string(k.z)
        )
    };
    while let Some(id) = queue.pop_front() {
        let (k, cells) = confs[id].clone();
        if c.halt[k.s as usize] != Halt::No {
            continue;
        }
        let (i, a) = (r.input[k.t1 as usize], r.advice[k.t3 as usize]);
        let wsym = cells[k.t2 as usize - 1];
        let mut image: BTreeMap<usize, C64> = BTreeMap::new();
        let mut norm = 0.0;
        let mut outside = 0.0;
        for m in c.moves_at(k.s, i, wsym, a) {
            if m.w.norm_sqr() < PRUNE {
                continue;
            }
            let t2 = k.t2 as i64 + m.d[1] as i64;
            if t2 < 1 || t2 > c.space as i64 {
                outside += m.w.norm_sqr();
                continue;
            }
            let k2 = r.advance(k, m, 0)?;
            let mut cell2 = cells.clone();
            if m.write != KEEP {
                cell2[k.t2 as usize - 1] = m.write;
            }
            let f = (k2, cell2);
            let tid = match ids.get(&f) {
                Some(&t) => t,
                None => {
                    let t = confs.len();
                    if t >= WF_CONFIG_CAP {
                        return Err(Error::EnumerationTooLarge(t as f64));
                    }
                    ids.insert(f.clone(), t);
                    confs.push(f);
                    queue.push_back(t);
                    t
                }
            };
            *image.entry(tid).or_insert(ZERO) += m.w;
        }
        norm += outside;
        norm += image.values().map(|v| v.norm_sqr()).sum::<f64>();
        if (norm - 1.0).abs() > WF_TOL {
            let d = describe(&r, &confs[id]);
            return Ok(Some(QtmWellFormedness::Witness {
                input: x.into(),
                advice: w.into(),
                first: d.clone(),
                second: d,
                overlap: norm,
            }));
        }
        for (t, v) in image {
            incoming.entry(t).or_default().push((id, v));
        }
    }
    *total += confs.len();
    let mut overlaps: HashMap<(usize, usize), C64> = HashMap::new();
    for srcs in incoming.values() {
        for (x1, &(i, a)) in srcs.iter().enumerate() {
            for &(j, b) in &srcs[x1 + 1..] {
                let key = if i < j { (i, j) } else { (j, i) };
                let v = if i < j { a.conj() * b } else { b.conj() * a };
                *overlaps.entry(key).or_insert(ZERO) += v;
            }
        }
    }
    let mut bad: Vec<(&(usize, usize), &C64)> = overlaps.iter().filter(|(_, v)| v.norm() > WF_TOL).collect();
    bad.sort_by_key(|(k, _)| **k);
    Ok(bad.first().map(|(&(i, j), v)| QtmWellFormedness::Witness {
        input: x.into(),
        advice: w.into(),
        first: describe(&r, &confs[i]),
        second: describe(&r, &confs[j]),
        overlap: v.norm(),
    }))
}

/// Space-1 QTM over `{0,1}`: keeps the parity of the input in its single
/// work cell and, at `$`, accepts iff the parity equals the first advice
/// symbol. Advice `"0"` makes it accept exactly the even-parity inputs.
pub fn parity_qtm() -> QtmSpec {
    let mut q = QtmSpec::new(&['0', '1'], &['0', '1'], &['0', '1'], 1);
    q.states = ["start", "scan", "acc", "rej"].map(String::from).to_vec();
    q.initial = "start".into();
    q.accepting = vec!["acc".into()];
    q.rejecting = vec!["rej".into()];
    let t = &mut q.transitions;
    t.push(QtmRule::new("start", (LEFT_END, DEFAULT_BLANK, LEFT_END), "scan", '0', None, (1, 0, 1), ONE));
    for s in ['0', '1'] {
        for y in ['0', '1'] {
            let flip = if s == '1' { if y == '0' { '1' } else { '0' } } else { y };
            t.push(QtmRule::new("scan", (s, y, WILDCARD), "scan", flip, None, (1, 0, 0), ONE));
            t.push(QtmRule::new("scan", (RIGHT_END, y, s), if y == s { "acc" } else { "rej" }, y, None, (0, 0, 0), ONE));
        }
    }
    q
}

/// Accepts in its first step whatever it reads.
pub fn accept_qtm(input_alphabet: &[char]) -> QtmSpec {
    let mut q = QtmSpec::new(input_alphabet, &[], &['0', '1'], 1);
    q.states = vec!["start".into(), "acc".into()];
    q.initial = "start".into();
    q.accepting = vec!["acc".into()];
    q.transitions.push(QtmRule::new("start", (WILDCARD, WILDCARD, WILDCARD), "acc", WILDCARD, None, (0, 0, 0), ONE));
    q
}
