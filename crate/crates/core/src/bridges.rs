//! Compilers between advised QTMs and families of 2qfa's, and the
//! conversions between promise-problem families and parameterized problems.

use crate::linalg::{C64, ONE};
use crate::machines::{GarbageMode, HeadMode, Kind, MachineSpec, TransitionRule, LEFT_END, RIGHT_END};
use crate::problems::Membership;
use crate::qcompile::{encode_table, row_budget, Gate, Layout};
use crate::qtm::{Advice, AdviceBranch, AdviceFn, Compiled, Halt, QtmRule, QtmSpec, KEEP, WILDCARD};
use crate::sim::{QuantumTransitionTable, TableMachine};
use crate::transforms::all_strings;
use crate::{Error, Result};
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt::Write as _;
use std::sync::Arc;

/// Default cap on the number of 2qfa states [`qtm_to_qfa_family`] builds.
pub const DEFAULT_STATE_CAP: u64 = 1_000_000;

/// `|Q|(ℓ+1)(r+2)|Γ|^{ℓ+1}` for space `ℓ` and advice length `r`.
pub fn qtm_state_bound(qtm: &QtmSpec, advice_len: usize) -> f64 {
    let l = qtm.space_bound as f64;
    qtm.states.len() as f64 * (l + 1.0) * (advice_len as f64 + 2.0) * (qtm.work_alphabet.len() as f64).powf(l + 1.0)
}

/// The 2qfa `N_{n,l}` simulating `qtm` on inputs of length `l` with the
/// classical advice `advice(l)` built into its states `(q, k, y, t)`.
///
/// Moves that would leave the work tape are dropped, so the result matches
/// [`crate::qtm::simulate_qtm`] whenever the latter does not overflow.
pub fn qtm_to_qfa_family(qtm: &QtmSpec, advice: &AdviceFn, n: usize, l: usize, cap: Option<u64>) -> Result<MachineSpec> {
    match advice.get(l) {
        Some(Advice::Classical(w)) => qtm_with_advice(qtm, w, n, l, cap.unwrap_or(DEFAULT_STATE_CAP)),
        Some(Advice::Quantum(_)) => Err(Error::Invalid(format!("advice for length {l} is quantum"))),
        None => Err(Error::Invalid(format!("no advice for length {l}"))),
    }
}

fn qtm_with_advice(qtm: &QtmSpec, w: &str, _n: usize, _l: usize, cap: u64) -> Result<MachineSpec> {
    let c = Compiled::new(qtm)?;
    let adv = Compiled::tape(&c.advs, w)?;
    let garbage_mode = if qtm.garbage_alphabet.is_empty() { GarbageMode::None } else { GarbageMode::Flexible };
    let mut spec = MachineSpec::new(Kind::Qfa, HeadMode::TwoWay, garbage_mode, &qtm.input_alphabet);
    spec.garbage_alphabet = qtm.garbage_alphabet.clone();

    type Inner = (u32, u32, Box<[u8]>, u32);
    let name = |s: &Inner| {
        let y: String = s.2.iter().map(|&i| c.works[i as usize]).collect();
        format!("{}|{}|{}|{}", c.names[s.0 as usize], s.1, y, s.3)
    };
    let start: Inner = (c.initial, 1, vec![c.blank; c.space].into_boxed_slice(), 0);
    let mut ids: HashMap<Inner, usize> = HashMap::new();
    let mut order: Vec<Inner> = Vec::new();
    let mut queue = VecDeque::new();
    ids.insert(start.clone(), 0);
    order.push(start);
    queue.push_back(0usize);
    let mut rules: Vec<(usize, usize, usize, i8, Option<u16>, C64)> = Vec::new();
    while let Some(id) = queue.pop_front() {
        let (q, k, y, t) = order[id].clone();
        if c.halt[q as usize] != Halt::No {
            continue;
        }
        for sym in 0..c.ins.len() {
            let mut merged: BTreeMap<(usize, i8, u16), C64> = BTreeMap::new();
            for m in c.moves_at(q, sym as u8, y[k as usize - 1], adv[t as usize]) {
                let k2 = k as i64 + m.d[1] as i64;
                if k2 < 1 || k2 > c.space as i64 {
                    continue;
                }
                let mut y2 = y.clone();
                if m.write != KEEP {
                    y2[k as usize - 1] = m.write;
                }
                let t2 = (t as i64 + m.d[2] as i64).rem_euclid(adv.len() as i64) as u32;
                let target: Inner = (m.to, k2 as u32, y2, t2);
                let tid = match ids.get(&target) {
                    Some(&i) => i,
                    None => {
                        let i = order.len();
                        if i as u64 >= cap {
                            return Err(Error::CompilationTooLarge { states: i as u64 + 1, cap });
                        }
                        ids.insert(target.clone(), i);
                        order.push(target);
                        queue.push_back(i);
                        i
                    }
                };
                *merged.entry((tid, m.d[0], m.garbage)).or_insert(C64::new(0.0, 0.0)) += m.w;
            }
            for ((tid, d, g), wgt) in merged {
                if wgt.norm_sqr() > 0.0 {
                    rules.push((id, sym, tid, d, (g > 0).then(|| g - 1), wgt));
                }
            }
        }
    }
    spec.states = order.iter().map(name).collect();
    spec.initial = spec.states[0].clone();
    for (i, s) in order.iter().enumerate() {
        match c.halt[s.0 as usize] {
            Halt::Acc => spec.accepting.push(spec.states[i].clone()),
            Halt::Rej => spec.rejecting.push(spec.states[i].clone()),
            Halt::No => {}
        }
    }
    for (from, sym, to, d, g, wgt) in rules {
        let garbage = g.map(|g| qtm.garbage_alphabet[g as usize].as_str());
        spec.transitions.push(TransitionRule::new(&spec.states[from], c.ins[sym], &spec.states[to], d, garbage, wgt));
    }
    Ok(spec)
}

/// 2sqfa for a QTM with quantum advice: one table per advice branch, with
/// the branch amplitudes. Returns the skeleton (the first branch's machine)
/// and the table superposition.
pub fn qtm_qadvice_to_sqfa(
    qtm: &QtmSpec,
    advice: &AdviceFn,
    n: usize,
    l: usize,
    cap: Option<u64>,
) -> Result<(MachineSpec, QuantumTransitionTable)> {
    let branches = match advice.get(l) {
        Some(Advice::Quantum(b)) => b.clone(),
        Some(Advice::Classical(w)) => vec![AdviceBranch { amplitude: ONE, advice: w.clone() }],
        None => return Err(Error::Invalid(format!("no advice for length {l}"))),
    };
    if branches.is_empty() {
        return Err(Error::Invalid("quantum advice has no branches".into()));
    }
    let cap = cap.unwrap_or(DEFAULT_STATE_CAP);
    let mut entries = Vec::new();
    for b in &branches {
        let m = qtm_with_advice(qtm, &b.advice, n, l, cap)?;
        entries.push((b.amplitude, TableMachine::Spec(m)));
    }
    let skeleton = match &entries[0].1 {
        TableMachine::Spec(m) => m.clone(),
        TableMachine::Encoded(_) => unreachable!("entries are built as specs"),
    };
    Ok((skeleton, QuantumTransitionTable::new(entries)))
}

/// How the interpreter picks the block of the advice to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockSelector {
    /// Always block `n` (1-based).
    Fixed(usize),
    /// Block `|x|`; the empty input is rejected.
    InputLength,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QfaToQtmParams {
    /// Number of blocks `n̄` in every advice string.
    pub nbar: usize,
    /// Error bound ε of the source machines.
    pub error_bound: f64,
    /// Per-row synthesis accuracy; `None` takes the budget from
    /// [`row_budget`] separately for every length in `lengths`.
    pub row_eps: Option<f64>,
    /// Budgeted 2qfa steps per tape cell.
    pub steps_per_cell: usize,
    pub lengths: Vec<usize>,
    pub selector: BlockSelector,
}

impl QfaToQtmParams {
    pub fn new(nbar: usize, error_bound: f64, selector: BlockSelector) -> Self {
        QfaToQtmParams { nbar, error_bound, row_eps: None, steps_per_cell: 4, lengths: Vec::new(), selector }
    }
}

#[derive(Clone, Debug)]
pub struct QfaToQtm {
    pub qtm: QtmSpec,
    pub advice: AdviceFn,
    /// `½(½ − ε)`.
    pub alpha: f64,
    /// Row accuracy used for each advice length (`None` for the default).
    pub row_eps: BTreeMap<Option<usize>, f64>,
}

/// Advice alphabet of the interpreter.
pub const ADVICE_SYMBOLS: [char; 5] = ['1', '#', '2', '3', '4'];

/// `1#⟨T_1⟩##11#⟨T_2⟩##…##1^{n̄}#⟨T_{n̄}⟩`.
pub fn assemble_advice(tables: &[String]) -> String {
    let mut out = String::new();
    for (i, t) in tables.iter().enumerate() {
        if i > 0 {
            out.push_str("##");
        }
        out.extend(std::iter::repeat_n('1', i + 1));
        out.push('#');
        out.push_str(t);
    }
    out
}

/// Compiles `family(1..=n̄)` into an advised QTM that reads the encoded
/// transition table of the selected machine from its advice and runs it
/// gate by gate on a work-tape register.
///
/// Each simulated step scans the selected block with the input head fixed,
/// applies the gates of the row matching the current state and input
/// symbol, reads the register out into the next state, head move and
/// garbage symbol, and rewinds the advice to the block header. Register
/// codes outside the layout, or moves the source machine's head or garbage
/// mode forbids, reject. A missing block rejects.
pub fn qfa_family_to_qtm(family: &dyn Fn(usize) -> Result<MachineSpec>, params: &QfaToQtmParams) -> Result<QfaToQtm> {
    if params.nbar == 0 {
        return Err(Error::Invalid("need at least one block".into()));
    }
    if let BlockSelector::Fixed(n) = params.selector {
        if n == 0 || n > params.nbar {
            return Err(Error::Invalid(format!("block {n} outside 1..={}", params.nbar)));
        }
    }
    let machines: Vec<MachineSpec> = (1..=params.nbar).map(family).collect::<Result<_>>()?;
    let sigma = machines[0].input_alphabet.clone();
    for m in &machines {
        m.expect_kind(Kind::Qfa)?;
        if m.input_alphabet != sigma {
            return Err(Error::Invalid("family members use different input alphabets".into()));
        }
    }
    let alpha = 0.5 * (0.5 - params.error_bound);
    let mut row_eps = BTreeMap::new();
    let mut advice = AdviceFn { by_length: BTreeMap::new(), default: None, size_bound: String::new() };
    let mut longest = 0;
    let build = |eps: &dyn Fn(&MachineSpec) -> Result<f64>| -> Result<(String, f64)> {
        let mut tables = Vec::new();
        let mut smallest = f64::INFINITY;
        for m in &machines {
            let e = eps(m)?;
            smallest = smallest.min(e);
            tables.push(encode_table(m, e)?.text);
        }
        Ok((assemble_advice(&tables), smallest))
    };
    match params.row_eps {
        Some(e) => {
            let (h, used) = build(&|_| Ok(e))?;
            longest = h.len();
            row_eps.insert(None, used);
            advice.default = Some(Advice::Classical(h));
        }
        None => {
            if params.lengths.is_empty() {
                return Err(Error::Invalid("no lengths to build advice for".into()));
            }
            for &l in &params.lengths {
                let steps = params.steps_per_cell.max(1) * (l + 2);
                let (h, used) = build(&|m| Ok(row_budget(m, params.error_bound, steps, 1.0)?.1))?;
                longest = longest.max(h.len());
                row_eps.insert(Some(l), used);
                advice.by_length.insert(l, Advice::Classical(h));
            }
        }
    }
    advice.size_bound = format!("{longest}");
    let qtm = Interpreter::new(&machines, params.selector).build()?;
    Ok(QfaToQtm { qtm, advice, alpha, row_eps })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Lab {
    /// Scanning past block `b` (1-based).
    Skip(u16),
    /// Looking for the row of state `q`.
    Q(u16),
    /// Inside the matched row, gates applied.
    Active,
    /// Past the matched row.
    Cleared,
}

/// Position in the table grammar. `C*` follow a gate code (the number of
/// `#` read so far), `L` a longer run past the first row separator, `S` the
/// start of a block body; the digit is the run length mod 3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Ps {
    C0,
    C1,
    C2,
    C3,
    L(u8),
    S(u8),
    /// `k` unary digits; `amb` when they may open the next block instead.
    Ones(u8, bool),
    OnesHash(u8, bool),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Prev {
    Code,
    NonCode,
    HashAfterNonCode,
    HashAfterCode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Ctl {
    Init,
    Zero(u8),
    Home(u8),
    LenCheck,
    Dec { b: u16, at_body: bool },
    Seek { b: u16, target: bool },
    P { blk: u16, lab: Lab, r: u16, ps: Ps },
    /// Walking to wire `k`; `rem` cells to go.
    Go { blk: u16, r: u16, g: u8, k: u8, rem: u8 },
    Ctrl { blk: u16, r: u16, k: u8, bit: u8 },
    /// Returning home; at cell `1 + left`.
    Ret { blk: u16, r: u16, left: u8 },
    /// Passing over a gate that does not apply, for as many steps as
    /// applying it would take.
    Idle { blk: u16, lab: Lab, r: u16, n: u8 },
    Load { blk: u16, skip: u8, i: u8, code: u16 },
    Back { blk: u16, skip: u8, p: u16, left: u8 },
    Rw { blk: u16, skip: u8, p: u16, prev: Prev },
    RwHash { blk: u16, p: u16 },
    Acc,
    Rej,
    /// Halting state `p` of block `blk`, entered with the move that led there
    /// so that distinct halting configurations stay distinct.
    Halt { blk: u16, p: u16, accept: bool },
    /// Rejection on a register code outside the layout.
    Void { code: u16 },
}

enum Ev {
    Go(Ps),
    Place(u8, Gate),
    BlockEnd(u8),
    Eof,
    Bad,
}

struct Interpreter<'a> {
    machines: &'a [MachineSpec],
    layouts: Vec<Layout>,
    halts: Vec<Vec<Halt>>,
    sigma: Vec<char>,
    width: usize,
    selector: BlockSelector,
}

struct Out {
    read: (char, char, char),
    to: Ctl,
    write: char,
    garbage: Option<String>,
    dirs: (i8, i8, i8),
    w: C64,
}

fn out(read: (char, char, char), to: Ctl, write: char, dirs: (i8, i8, i8)) -> Out {
    Out { read, to, write, garbage: None, dirs, w: ONE }
}

const ANY: char = WILDCARD;
const BIT: [char; 2] = ['0', '1'];
const HOME: char = 'h';

fn is_code(c: char) -> bool {
    matches!(c, '2' | '3' | '4')
}

/// One parser step on advice symbol `c`: whether a row boundary was passed
/// and what the symbol means.
fn parse(ps: Ps, c: char, width: usize) -> (bool, Ev) {
    use Ps::*;
    match c {
        '#' => match ps {
            C0 => (false, Ev::Go(C1)),
            C1 => (false, Ev::Go(C2)),
            C2 => (false, Ev::Go(C3)),
            C3 => (true, Ev::Go(L(1))),
            L(m) => ((m + 1) % 3 == 0, Ev::Go(L((m + 1) % 3))),
            S(m) => ((m + 1) % 3 == 0, Ev::Go(S((m + 1) % 3))),
            Ones(k, amb) => (false, Ev::Go(OnesHash(k, amb))),
            OnesHash(_, true) => (false, Ev::BlockEnd(1)),
            OnesHash(_, false) => (false, Ev::Bad),
        },
        '2' | '3' | '4' => {
            let g = Gate::from_code(c).expect("gate code");
            match ps {
                C3 | L(1) | S(1) => (false, Ev::Place(0, g)),
                OnesHash(k, _) => (false, Ev::Place(k, g)),
                _ => (false, Ev::Bad),
            }
        }
        '1' => match ps {
            C2 => (false, Ev::Go(Ones(1, true))),
            C3 => (true, Ev::Go(Ones(1, false))),
            L(0) | S(0) => (false, Ev::Go(Ones(1, false))),
            L(2) | S(2) => (false, Ev::BlockEnd(0)),
            Ones(k, amb) if (k as usize + 1) < width => (false, Ev::Go(Ones(k + 1, amb))),
            Ones(_, true) => (false, Ev::BlockEnd(0)),
            OnesHash(_, true) => (false, Ev::BlockEnd(1)),
            _ => (false, Ev::Bad),
        },
        '$' => match ps {
            C0 | L(0) | S(0) => (false, Ev::Eof),
            C3 => (true, Ev::Eof),
            OnesHash(_, true) => (false, Ev::BlockEnd(1)),
            _ => (false, Ev::Bad),
        },
        _ => (false, Ev::Bad),
    }
}

impl<'a> Interpreter<'a> {
    fn new(machines: &'a [MachineSpec], selector: BlockSelector) -> Self {
        let layouts: Vec<Layout> = machines.iter().map(Layout::for_spec).collect();
        let halts = machines
            .iter()
            .map(|m| {
                m.states
                    .iter()
                    .map(|s| {
                        if m.accepting.contains(s) {
                            Halt::Acc
                        } else if m.rejecting.contains(s) {
                            Halt::Rej
                        } else {
                            Halt::No
                        }
                    })
                    .collect()
            })
            .collect();
        let width = layouts.iter().map(Layout::qubits).max().unwrap_or(1);
        Interpreter { machines, layouts, halts, sigma: machines[0].input_alphabet.clone(), width, selector }
    }

    fn nsym(&self) -> usize {
        self.sigma.len() + 2
    }

    fn tape_symbol(&self, s: usize) -> char {
        if s == 0 {
            LEFT_END
        } else if s == self.nsym() - 1 {
            RIGHT_END
        } else {
            self.sigma[s - 1]
        }
    }

    fn initial(&self, blk: u16) -> u16 {
        let m = &self.machines[blk as usize];
        m.states.iter().position(|s| *s == m.initial).expect("validated initial") as u16
    }

    fn nblocks(&self) -> u16 {
        self.machines.len() as u16
    }

    fn body_target(&self, b: u16) -> Ctl {
        let blk = b - 1;
        Ctl::P { blk, lab: Lab::Q(self.initial(blk)), r: 0, ps: Ps::S(0) }
    }

    /// State after the last move home during initialization.
    fn start_search(&self) -> Ctl {
        match self.selector {
            BlockSelector::Fixed(_) => Ctl::Dec { b: 1, at_body: false },
            BlockSelector::InputLength => Ctl::LenCheck,
        }
    }

    fn rules(&self, c: Ctl) -> Vec<Out> {
        let w = self.width as u8;
        match c {
            Ctl::Acc | Ctl::Rej | Ctl::Halt { .. } | Ctl::Void { .. } => Vec::new(),
            Ctl::Init => {
                let din = if self.selector == BlockSelector::InputLength { 1 } else { 0 };
                vec![out((ANY, ANY, ANY), Ctl::Zero(0), HOME, (din, 1, 1))]
            }
            Ctl::Zero(i) => {
                if i + 1 < w {
                    vec![out((ANY, ANY, ANY), Ctl::Zero(i + 1), '0', (0, 1, 0))]
                } else {
                    vec![out((ANY, ANY, ANY), Ctl::Home(w - 1), '0', (0, -1, 0))]
                }
            }
            Ctl::Home(left) => {
                let to = if left == 1 { self.start_search() } else { Ctl::Home(left - 1) };
                vec![out((ANY, ANY, ANY), to, ANY, (0, -1, 0))]
            }
            Ctl::LenCheck => {
                let mut v = vec![out((RIGHT_END, ANY, ANY), Ctl::Rej, ANY, (0, 0, 0))];
                for &s in &self.sigma {
                    v.push(out((s, ANY, ANY), Ctl::Dec { b: 1, at_body: false }, ANY, (1, 0, 0)));
                }
                v
            }
            Ctl::Dec { b, at_body } => {
                let next = |target: bool| {
                    if at_body {
                        if target {
                            self.body_target(b)
                        } else {
                            Ctl::P { blk: 0, lab: Lab::Skip(b), r: 0, ps: Ps::S(0) }
                        }
                    } else {
                        Ctl::Seek { b, target }
                    }
                };
                match self.selector {
                    BlockSelector::Fixed(n) => vec![out((ANY, ANY, ANY), next(b as usize == n), ANY, (0, 0, 0))],
                    BlockSelector::InputLength => {
                        // The input head sits on cell b+1; `$` there means |x| = b.
                        let mut v = vec![out((RIGHT_END, ANY, ANY), next(true), ANY, (1, 0, 0))];
                        for &s in &self.sigma {
                            v.push(out((s, ANY, ANY), next(false), ANY, (1, 0, 0)));
                        }
                        v
                    }
                }
            }
            Ctl::Seek { b, target } => {
                let body = if target {
                    self.body_target(b)
                } else {
                    Ctl::P { blk: 0, lab: Lab::Skip(b), r: 0, ps: Ps::S(0) }
                };
                vec![
                    out((ANY, ANY, '1'), c, ANY, (0, 0, 1)),
                    out((ANY, ANY, '#'), body, ANY, (0, 0, 1)),
                    out((ANY, ANY, ANY), Ctl::Rej, ANY, (0, 0, 0)),
                ]
            }
            Ctl::P { blk, lab, r, ps } => self.parse_rules(blk, lab, r, ps),
            Ctl::Go { blk, r, g, k, rem } => {
                if rem > 0 {
                    return vec![out((ANY, ANY, ANY), Ctl::Go { blk, r, g, k, rem: rem - 1 }, ANY, (0, 1, 0))];
                }
                let gate = Gate::from_code(g as char).expect("gate code");
                let back = if k == 0 {
                    (Ctl::P { blk, lab: Lab::Active, r, ps: Ps::C0 }, (0, -1, 1))
                } else {
                    (Ctl::Ret { blk, r, left: k }, (0, -1, 0))
                };
                let h = C64::new(FRAC_1_SQRT_2, 0.0);
                match gate {
                    Gate::H => vec![
                        Out { w: h, ..out((ANY, '0', ANY), back.0, '0', back.1) },
                        Out { w: h, ..out((ANY, '0', ANY), back.0, '1', back.1) },
                        Out { w: h, ..out((ANY, '1', ANY), back.0, '0', back.1) },
                        Out { w: -h, ..out((ANY, '1', ANY), back.0, '1', back.1) },
                    ],
                    Gate::T => vec![
                        out((ANY, '0', ANY), back.0, '0', back.1),
                        Out { w: C64::from_polar(1.0, FRAC_PI_4), ..out((ANY, '1', ANY), back.0, '1', back.1) },
                    ],
                    Gate::I => vec![out((ANY, ANY, ANY), back.0, ANY, back.1)],
                    Gate::Cnot => (0..2u8)
                        .map(|bit| out((ANY, BIT[bit as usize], ANY), Ctl::Ctrl { blk, r, k, bit }, BIT[bit as usize], (0, 1, 0)))
                        .collect(),
                }
            }
            Ctl::Ctrl { blk, r, k, bit } => {
                let to = Ctl::Ret { blk, r, left: k + 1 };
                (0..2usize).map(|t| out((ANY, BIT[t], ANY), to, BIT[t ^ bit as usize], (0, -1, 0))).collect()
            }
            Ctl::Ret { blk, r, left } => {
                if left == 1 {
                    vec![out((ANY, ANY, ANY), Ctl::P { blk, lab: Lab::Active, r, ps: Ps::C0 }, ANY, (0, -1, 1))]
                } else {
                    vec![out((ANY, ANY, ANY), Ctl::Ret { blk, r, left: left - 1 }, ANY, (0, -1, 0))]
                }
            }
            Ctl::Idle { blk, lab, r, n } => {
                if n == 1 {
                    vec![out((ANY, ANY, ANY), Ctl::P { blk, lab, r, ps: Ps::C0 }, ANY, (0, 0, 1))]
                } else {
                    vec![out((ANY, ANY, ANY), Ctl::Idle { blk, lab, r, n: n - 1 }, ANY, (0, 0, 0))]
                }
            }
            Ctl::Load { blk, skip, i, code } => self.load_rules(blk, skip, i, code),
            Ctl::Back { blk, skip, p, left } => {
                let to = if left == 1 { Ctl::Rw { blk, skip, p, prev: Prev::Code } } else { Ctl::Back { blk, skip, p, left: left - 1 } };
                vec![out((ANY, ANY, ANY), to, ANY, (0, -1, 0))]
            }
            Ctl::Rw { blk, skip, p, prev } => {
                let mut v = Vec::new();
                for a in ['1', '#', '2', '3', '4', RIGHT_END] {
                    let r = match a {
                        '1' if prev == Prev::HashAfterNonCode => {
                            if skip == 0 {
                                out((ANY, ANY, a), Ctl::RwHash { blk, p }, ANY, (0, 0, 1))
                            } else {
                                out((ANY, ANY, a), Ctl::Rw { blk, skip: skip - 1, p, prev: Prev::NonCode }, ANY, (0, 0, -1))
                            }
                        }
                        '#' => {
                            let prev = if prev == Prev::Code { Prev::HashAfterCode } else { Prev::HashAfterNonCode };
                            out((ANY, ANY, a), Ctl::Rw { blk, skip, p, prev }, ANY, (0, 0, -1))
                        }
                        _ => {
                            let prev = if is_code(a) { Prev::Code } else { Prev::NonCode };
                            out((ANY, ANY, a), Ctl::Rw { blk, skip, p, prev }, ANY, (0, 0, -1))
                        }
                    };
                    v.push(r);
                }
                v.push(out((ANY, ANY, LEFT_END), Ctl::Rej, ANY, (0, 0, 0)));
                v
            }
            Ctl::RwHash { blk, p } => vec![
                out((ANY, ANY, '#'), Ctl::P { blk, lab: Lab::Q(p), r: 0, ps: Ps::S(0) }, ANY, (0, 0, 1)),
                out((ANY, ANY, ANY), Ctl::Rej, ANY, (0, 0, 0)),
            ],
        }
    }

    fn parse_rules(&self, blk: u16, lab: Lab, r: u16, ps: Ps) -> Vec<Out> {
        let mut v = Vec::new();
        let nrows = match lab {
            Lab::Skip(_) => u16::MAX,
            _ => (self.machines[blk as usize].states.len() * self.nsym()) as u16,
        };
        let w_blk = match lab {
            Lab::Skip(_) => self.width,
            _ => self.layouts[blk as usize].qubits(),
        };
        for a in ['1', '#', '2', '3', '4', RIGHT_END, LEFT_END] {
            let (inc, ev) = parse(ps, a, self.width);
            let (mut lab, mut r) = (lab, r);
            if inc {
                match lab {
                    Lab::Active => (lab, r) = (Lab::Cleared, 0),
                    Lab::Q(_) => {
                        r += 1;
                        if r >= nrows {
                            v.push(out((ANY, ANY, a), Ctl::Rej, ANY, (0, 0, 0)));
                            continue;
                        }
                    }
                    Lab::Skip(_) | Lab::Cleared => {}
                }
            }
            let load = |skip: u8| out((ANY, ANY, a), Ctl::Load { blk, skip, i: 0, code: 0 }, ANY, (0, 1, 0));
            match ev {
                Ev::Go(ps2) => v.push(out((ANY, ANY, a), Ctl::P { blk, lab, r, ps: ps2 }, ANY, (0, 0, 1))),
                Ev::Bad => v.push(out((ANY, ANY, a), Ctl::Rej, ANY, (0, 0, 0))),
                Ev::Eof | Ev::BlockEnd(_) => {
                    let skip = if let Ev::BlockEnd(k) = ev { k } else { 0 };
                    match lab {
                        Lab::Skip(b) if b < self.nblocks() && matches!(ev, Ev::BlockEnd(_)) => v.push(out(
                            (ANY, ANY, a),
                            Ctl::Dec { b: b + 1, at_body: skip == 1 },
                            ANY,
                            (0, 0, 0),
                        )),
                        Lab::Active | Lab::Cleared => v.push(load(skip)),
                        _ => v.push(out((ANY, ANY, a), Ctl::Rej, ANY, (0, 0, 0))),
                    }
                }
                Ev::Place(k, g) => {
                    let fits = (k as usize) + g.width() <= w_blk;
                    let exec = Ctl::Go { blk, r, g: g.code() as u8, k, rem: k };
                    // Steps from reading the code to the next advice symbol.
                    let dur = 2 * k + if g == Gate::Cnot { 4 } else { 2 };
                    let idle = Ctl::Idle { blk, lab, r, n: dur - 1 };
                    match lab {
                        Lab::Skip(_) => v.push(out((ANY, ANY, a), Ctl::P { blk, lab, r, ps: Ps::C0 }, ANY, (0, 0, 1))),
                        Lab::Active if fits => v.push(out((ANY, ANY, a), exec, ANY, (0, 1, 0))),
                        Lab::Active => v.push(out((ANY, ANY, a), Ctl::Rej, ANY, (0, 0, 0))),
                        Lab::Cleared => v.push(out((ANY, ANY, a), idle, ANY, (0, 0, 0))),
                        Lab::Q(q) => {
                            for s in 0..self.nsym() {
                                let sym = self.tape_symbol(s);
                                if r as usize == q as usize * self.nsym() + s && fits {
                                    v.push(out((sym, ANY, a), exec, ANY, (0, 1, 0)));
                                } else {
                                    v.push(out((sym, ANY, a), idle, ANY, (0, 0, 0)));
                                }
                            }
                        }
                    }
                }
            }
        }
        v
    }

    fn load_rules(&self, blk: u16, skip: u8, i: u8, code: u16) -> Vec<Out> {
        let layout = self.layouts[blk as usize];
        let m = &self.machines[blk as usize];
        let w = layout.qubits() as u8;
        let mut v = Vec::new();
        for bit in 0..2u16 {
            let code2 = code * 2 + bit;
            let read = (ANY, BIT[bit as usize], ANY);
            if i + 1 < w {
                v.push(out(read, Ctl::Load { blk, skip, i: i + 1, code: code2 }, '0', (0, 1, 0)));
                continue;
            }
            let decoded = layout.decode(code2 as usize).filter(|&(_, d, g)| {
                m.head_mode.allows(d)
                    && match m.garbage_mode {
                        GarbageMode::None => g.is_none(),
                        GarbageMode::Rigid => g.is_some() == (d == 1),
                        GarbageMode::Flexible => true,
                    }
            });
            let Some((p, d, g)) = decoded else {
                v.push(out(read, Ctl::Void { code: code2 }, '0', (0, 0, 0)));
                continue;
            };
            let garbage = g.map(|g| m.garbage_alphabet[g as usize].clone());
            let (to, dw) = match self.halts[blk as usize][p] {
                Halt::No => (Ctl::Back { blk, skip, p: p as u16, left: w - 1 }, -1),
                h => (Ctl::Halt { blk, p: p as u16, accept: h == Halt::Acc }, 0),
            };
            v.push(Out { garbage, ..out(read, to, '0', (d, dw, 0)) });
        }
        v
    }

    fn build(&self) -> Result<QtmSpec> {
        let mut garbage: Vec<String> = Vec::new();
        for m in self.machines {
            for g in &m.garbage_alphabet {
                if !garbage.contains(g) {
                    garbage.push(g.clone());
                }
            }
        }
        let mut qtm = QtmSpec::new(&self.sigma, &['0', '1', HOME], &ADVICE_SYMBOLS, self.width + 1);
        qtm.garbage_alphabet = garbage;
        let mut ids: HashMap<Ctl, usize> = HashMap::new();
        let mut order = vec![Ctl::Init, Ctl::Acc, Ctl::Rej];
        for (i, c) in order.iter().enumerate() {
            ids.insert(*c, i);
        }
        let mut edges: Vec<(usize, Out)> = Vec::new();
        let mut next = 0;
        while next < order.len() {
            let c = order[next];
            for o in self.rules(c) {
                if !ids.contains_key(&o.to) {
                    ids.insert(o.to, order.len());
                    order.push(o.to);
                }
                edges.push((next, o));
            }
            next += 1;
        }
        qtm.states = order.iter().map(ctl_name).collect();
        qtm.initial = qtm.states[0].clone();
        for (c, name) in order.iter().zip(&qtm.states) {
            match c {
                Ctl::Acc | Ctl::Halt { accept: true, .. } => qtm.accepting.push(name.clone()),
                Ctl::Rej | Ctl::Halt { accept: false, .. } | Ctl::Void { .. } => qtm.rejecting.push(name.clone()),
                _ => {}
            }
        }
        for (from, o) in edges {
            qtm.transitions.push(QtmRule {
                weight: o.w,
                ..QtmRule::new(
                    &qtm.states[from],
                    o.read,
                    &qtm.states[ids[&o.to]],
                    o.write,
                    o.garbage.as_deref(),
                    o.dirs,
                    ONE,
                )
            });
        }
        Ok(qtm)
    }
}

fn ctl_name(c: &Ctl) -> String {
    let lab = |l: &Lab| match l {
        Lab::Skip(b) => format!("s{b}"),
        Lab::Q(q) => format!("q{q}"),
        Lab::Active => "a".to_string(),
        Lab::Cleared => "x".to_string(),
    };
    let ps = |p: &Ps| match p {
        Ps::C0 => "c0".to_string(),
        Ps::C1 => "c1".to_string(),
        Ps::C2 => "c2".to_string(),
        Ps::C3 => "c3".to_string(),
        Ps::L(m) => format!("l{m}"),
        Ps::S(m) => format!("b{m}"),
        Ps::Ones(k, amb) => format!("o{k}{}", if *amb { "?" } else { "" }),
        Ps::OnesHash(k, amb) => format!("o{k}#{}", if *amb { "?" } else { "" }),
    };
    let mut s = String::new();
    let _ = match c {
        Ctl::Init => write!(s, "init"),
        Ctl::Acc => write!(s, "acc"),
        Ctl::Rej => write!(s, "rej"),
        Ctl::Halt { blk, p, accept } => write!(s, "{}.{blk}.{p}", if *accept { "acc" } else { "rej" }),
        Ctl::Void { code } => write!(s, "rej.c{code}"),
        Ctl::Zero(i) => write!(s, "zero.{i}"),
        Ctl::Home(l) => write!(s, "home.{l}"),
        Ctl::LenCheck => write!(s, "len"),
        Ctl::Dec { b, at_body } => write!(s, "dec.{b}.{}", u8::from(*at_body)),
        Ctl::Seek { b, target } => write!(s, "seek.{b}.{}", u8::from(*target)),
        Ctl::P { blk, lab: l, r, ps: p } => write!(s, "p.{blk}.{}.{r}.{}", lab(l), ps(p)),
        Ctl::Go { blk, r, g, k, rem } => write!(s, "go.{blk}.{r}.{}.{k}.{rem}", *g as char),
        Ctl::Ctrl { blk, r, k, bit } => write!(s, "ctrl.{blk}.{r}.{k}.{bit}"),
        Ctl::Ret { blk, r, left } => write!(s, "ret.{blk}.{r}.{left}"),
        Ctl::Idle { blk, lab: l, r, n } => write!(s, "idle.{blk}.{}.{r}.{n}", lab(l)),
        Ctl::Load { blk, skip, i, code } => write!(s, "load.{blk}.{skip}.{i}.{code}"),
        Ctl::Back { blk, skip, p, left } => write!(s, "back.{blk}.{skip}.{p}.{left}"),
        Ctl::Rw { blk, skip, p, prev } => {
            let pv = match prev {
                Prev::Code => "c",
                Prev::NonCode => "n",
                Prev::HashAfterNonCode => "hn",
                Prev::HashAfterCode => "hc",
            };
            write!(s, "rw.{blk}.{skip}.{p}.{pv}")
        }
        Ctl::RwHash { blk, p } => write!(s, "rwh.{blk}.{p}"),
    };
    s
}

/// Membership oracle `(n, x) ↦ class of x at level n`.
pub type MembershipFn = Arc<dyn Fn(u64, &str) -> Membership + Send + Sync>;

/// Polynomial with nonnegative integer coefficients, lowest degree first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial(pub Vec<u64>);

impl Polynomial {
    pub fn eval(&self, n: u64) -> u64 {
        self.0.iter().rev().fold(0u64, |acc, &c| acc.saturating_mul(n).saturating_add(c))
    }
}

/// A family `{(L_n⁺, L_n⁻)}` of promise problems.
#[derive(Clone)]
pub struct ProblemFamily {
    pub name: String,
    pub description: String,
    pub input_alphabet: Vec<char>,
    pub membership: MembershipFn,
    pub ceiling: Option<Polynomial>,
}

impl std::fmt::Debug for ProblemFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemFamily")
            .field("name", &self.name)
            .field("input_alphabet", &self.input_alphabet)
            .field("ceiling", &self.ceiling)
            .finish_non_exhaustive()
    }
}

impl ProblemFamily {
    pub fn classify(&self, n: u64, x: &str) -> Membership {
        (self.membership)(n, x)
    }

    /// A family from the zoo oracles in [`crate::problems::oracle_membership`].
    pub fn from_zoo(name: &str, input_alphabet: &[char]) -> Result<Self> {
        crate::problems::oracle_membership(name, 1, "")?;
        let owned = name.to_string();
        Ok(ProblemFamily {
            name: name.to_string(),
            description: format!("zoo family {name}"),
            input_alphabet: input_alphabet.to_vec(),
            membership: Arc::new(move |n, x| {
                crate::problems::oracle_membership(&owned, n, x).unwrap_or(Membership::Unpromised)
            }),
            ceiling: None,
        })
    }
}

/// A language over `alphabet` together with a size parameter.
#[derive(Clone)]
pub struct ParameterizedProblem {
    pub name: String,
    pub alphabet: Vec<char>,
    pub language: Arc<dyn Fn(&str) -> bool + Send + Sync>,
    pub size: Arc<dyn Fn(&str) -> u64 + Send + Sync>,
}

impl std::fmt::Debug for ParameterizedProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParameterizedProblem")
            .field("name", &self.name)
            .field("alphabet", &self.alphabet)
            .finish_non_exhaustive()
    }
}

impl ParameterizedProblem {
    pub fn contains(&self, w: &str) -> bool {
        (self.language)(w)
    }

    pub fn size_of(&self, w: &str) -> u64 {
        (self.size)(w)
    }
}

/// Level `n` holds the strings of size `n`, split by the language.
pub fn induce_family(problem: &ParameterizedProblem) -> ProblemFamily {
    let p = problem.clone();
    ProblemFamily {
        name: format!("family({})", problem.name),
        description: format!("levels of {} by size parameter", problem.name),
        input_alphabet: problem.alphabet.clone(),
        membership: Arc::new(move |n, x| {
            if p.size_of(x) != n {
                Membership::Unpromised
            } else if p.contains(x) {
                Membership::Positive
            } else {
                Membership::Negative
            }
        }),
        ceiling: None,
    }
}

/// Separator between the unary level and the instance.
pub const LEVEL_SEPARATOR: char = '#';

/// `1^n#x` with the level in unary, or `None` if `w` is not of that shape
/// over `sigma`.
pub fn split_level<'a>(w: &'a str, sigma: &[char]) -> Option<(u64, &'a str)> {
    let (z, x) = w.split_once(LEVEL_SEPARATOR)?;
    if !z.chars().all(|c| c == '1') || !x.chars().all(|c| sigma.contains(&c)) {
        return None;
    }
    Some((z.len() as u64, x))
}

/// `(K, m′)` over `Σ ∪ {#}`: `1^n#x` is in `K` iff `x ∈ L_n⁺`, every other
/// string is outside; `m′(1^n#x) = n` and `m′(w) = |w|` otherwise.
pub fn induce_parameterized(family: &ProblemFamily) -> Result<ParameterizedProblem> {
    let sigma = family.input_alphabet.clone();
    if sigma.contains(&LEVEL_SEPARATOR) {
        return Err(Error::Invalid(format!("input alphabet already uses {LEVEL_SEPARATOR:?}")));
    }
    let mut alphabet = sigma.clone();
    alphabet.push(LEVEL_SEPARATOR);
    let (f, s1, s2) = (family.membership.clone(), sigma.clone(), sigma);
    Ok(ParameterizedProblem {
        name: format!("param({})", family.name),
        alphabet,
        language: Arc::new(move |w| match split_level(w, &s1) {
            Some((n, x)) => f(n, x) == Membership::Positive,
            None => false,
        }),
        size: Arc::new(move |w| match split_level(w, &s2) {
            Some((n, _)) => n,
            None => w.chars().count() as u64,
        }),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CeilingCheck {
    Ok { checked: usize },
    Counterexample { n: u64, x: String },
}

/// Checks `L_n⁺ ∪ L_n⁻ ⊆ Σ^{≤ r(n)}` for `n ≤ max_n` over strings up to
/// `max_len`, returning the first violation in order of `n`, then length.
pub fn check_polynomial_ceiling(family: &ProblemFamily, r: &Polynomial, max_n: u64, max_len: usize) -> CeilingCheck {
    let strings = all_strings(&family.input_alphabet, max_len);
    let mut checked = 0;
    for n in 0..=max_n {
        let bound = r.eval(n);
        for x in &strings {
            checked += 1;
            if x.chars().count() as u64 > bound && family.classify(n, x) != Membership::Unpromised {
                return CeilingCheck::Counterexample { n, x: x.clone() };
            }
        }
    }
    CeilingCheck::Ok { checked }
}
