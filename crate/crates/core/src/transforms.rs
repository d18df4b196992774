//! Machine-to-machine constructions with semantic-preservation contracts.

use crate::linalg::{ceil_log2, haar_orthogonal, C64};
use crate::machines::{
    GarbageMode, Halt, HeadMode, Kind, MachineSpec, TransitionRule, RIGHT_END,
};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::{BTreeMap, HashMap, VecDeque};

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Re-encodes a flexible-garbage qfa over binary garbage. An emission of
/// `ξ` with code `b₁…b_r` writes `b₁` on the original move and enters
/// `(p, b₂…b_r)`; each such state writes its first bit without moving and
/// drops it, returning to `p` when nothing is left. Keeping the unwritten
/// suffix in the state keeps every step injective. Machines with at most
/// two garbage symbols are returned unchanged.
pub fn reduce_garbage_alphabet(spec: &MachineSpec) -> Result<MachineSpec> {
    spec.expect_kind(Kind::Qfa)?;
    spec.index()?;
    let k = spec.garbage_alphabet.len();
    if k <= 2 {
        return Ok(spec.clone());
    }
    let r = ceil_log2(k);
    let code = |g: usize| -> String { (0..r).map(|i| if (g >> (r - 1 - i)) & 1 == 1 { '1' } else { '0' }).collect() };
    let pending = |p: &str, rest: &str| if rest.is_empty() { p.to_string() } else { format!("{p}·{rest}") };
    let mut out = spec.clone();
    out.garbage_mode = GarbageMode::Flexible;
    out.garbage_alphabet = vec!["0".into(), "1".into()];
    out.head_mode = match spec.head_mode {
        HeadMode::OneWay => HeadMode::OneFiveWay,
        h => h,
    };
    out.transitions.clear();
    let mut chains: BTreeMap<(String, String), ()> = BTreeMap::new();
    for t in &spec.transitions {
        match &t.garbage {
            None => out.transitions.push(t.clone()),
            Some(g) => {
                let gi = spec.garbage_alphabet.iter().position(|x| x == g).expect("validated");
                let bits = code(gi);
                let target = pending(&t.to, &bits[1..]);
                out.transitions.push(TransitionRule::new(&t.from, t.read, &target, t.dir, Some(&bits[..1]), t.weight));
                for i in 1..r {
                    chains.insert((t.to.clone(), bits[i..].to_string()), ());
                }
            }
        }
    }
    let syms = spec.tape_symbols();
    for (p, rest) in chains.into_keys() {
        let name = pending(&p, &rest);
        out.states.push(name.clone());
        let next = pending(&p, &rest[1..]);
        for &s in &syms {
            out.transitions.push(TransitionRule::new(&name, s, &next, 0, Some(&rest[..1]), c(1.0)));
        }
    }
    Ok(out)
}

/// Compresses stationary chains of a halting 1.5dfa into single right moves.
pub fn collapse_stationary(spec: &MachineSpec) -> Result<MachineSpec> {
    spec.expect_kind(Kind::Dfa)?;
    let idx = spec.index()?;
    let syms = spec.tape_symbols();
    let mut out = spec.clone();
    out.head_mode = HeadMode::OneWay;
    out.transitions.clear();
    for q in 0..idx.n {
        if idx.halt[q] != Halt::No {
            continue;
        }
        for (s, &sym) in syms.iter().enumerate() {
            let mut cur = q;
            let mut seen = vec![false; idx.n];
            let target = loop {
                if idx.halt[cur] != Halt::No {
                    break Some(cur);
                }
                if seen[cur] {
                    return Err(Error::DivergingLoop { state: spec.states[q].clone(), symbol: sym });
                }
                seen[cur] = true;
                match idx.row(cur, s).first() {
                    None => break None,
                    Some(mv) if mv.dir == 0 => cur = mv.to,
                    Some(mv) if mv.dir == 1 => break Some(mv.to),
                    Some(_) => return Err(Error::Invalid("left move in a 1.5dfa".into())),
                }
            };
            if let Some(p) = target {
                out.transitions.push(TransitionRule::classical(&spec.states[q], sym, &spec.states[p], 1));
            }
        }
    }
    Ok(out)
}

/// Quantum lift of a pfa: amplitude `√p` and a garbage symbol naming the
/// rule taken, so no two paths ever interfere. Missing rows of non-halting
/// states lead to a fresh rejecting sink, matching the pfa convention.
pub fn lift_pfa_to_qfa(spec: &MachineSpec) -> Result<MachineSpec> {
    spec.expect_kind(Kind::Pfa)?;
    let idx = spec.index()?;
    let mut out = spec.clone();
    out.kind = Kind::Qfa;
    out.garbage_mode = GarbageMode::Flexible;
    out.transitions.clear();
    out.garbage_alphabet.clear();
    let mut count: HashMap<&str, usize> = HashMap::new();
    for t in &spec.transitions {
        let i = count.entry(t.from.as_str()).or_default();
        let g = format!("{}#{}", t.from, i);
        *i += 1;
        out.garbage_alphabet.push(g.clone());
        out.transitions.push(TransitionRule::new(&t.from, t.read, &t.to, t.dir, Some(&g), c(t.weight.re.sqrt())));
    }
    let sink = fresh_name(&spec.states, "⊥");
    let mut used_sink = false;
    for (q, name) in spec.states.iter().enumerate() {
        if idx.halt[q] != Halt::No {
            continue;
        }
        for (s, &sym) in spec.tape_symbols().iter().enumerate() {
            if idx.row(q, s).is_empty() {
                let g = format!("{name}#{sym}");
                out.garbage_alphabet.push(g.clone());
                out.transitions.push(TransitionRule::new(name, sym, &sink, 1, Some(&g), c(1.0)));
                used_sink = true;
            }
        }
    }
    if used_sink {
        out.states.push(sink.clone());
        out.rejecting.push(sink);
    }
    Ok(out)
}

fn fresh_name(states: &[String], base: &str) -> String {
    let mut name = base.to_string();
    while states.contains(&name) {
        name.push('\'');
    }
    name
}

/// Unbounded-error pfa for a one-way nfa: branches uniformly over the
/// nondeterministic choices and turns every path that would not accept into
/// a fair coin at the right endmarker. Acceptance probability exceeds 1/2
/// exactly when some path accepts.
pub fn lift_nfa_to_pfa(spec: &MachineSpec) -> Result<MachineSpec> {
    spec.expect_kind(Kind::Nfa)?;
    if spec.head_mode != HeadMode::OneWay {
        return Err(Error::Invalid("nfa lift needs a one-way machine".into()));
    }
    let idx = spec.index()?;
    let dead = fresh_name(&spec.states, "dead");
    let acc = fresh_name(&[spec.states.clone(), vec![dead.clone()]].concat(), "A");
    let rej = fresh_name(&[spec.states.clone(), vec![dead.clone(), acc.clone()]].concat(), "R");
    let mut out = MachineSpec::new(Kind::Pfa, HeadMode::OneWay, GarbageMode::None, &spec.input_alphabet);
    out.states = spec.states.clone();
    out.states.extend([dead.clone(), acc.clone(), rej.clone()]);
    out.accepting = spec.accepting.clone();
    out.accepting.push(acc.clone());
    out.rejecting = vec![rej.clone()];
    out.initial = match idx.halt[idx.initial] {
        Halt::Rej => dead.clone(),
        _ => spec.initial.clone(),
    };
    let syms = spec.tape_symbols();
    let mut rows: Vec<(String, char, BTreeMap<String, f64>)> = Vec::new();
    for q in 0..idx.n {
        if idx.halt[q] != Halt::No {
            continue;
        }
        for (s, &sym) in syms.iter().enumerate() {
            let row = idx.row(q, s);
            let mut dist: BTreeMap<String, f64> = BTreeMap::new();
            let last = sym == RIGHT_END;
            if row.is_empty() {
                if last {
                    *dist.entry(acc.clone()).or_default() += 0.5;
                    *dist.entry(rej.clone()).or_default() += 0.5;
                } else {
                    *dist.entry(dead.clone()).or_default() += 1.0;
                }
            }
            let b = row.len() as f64;
            for mv in row {
                match (idx.halt[mv.to], last) {
                    (Halt::Acc, _) => *dist.entry(spec.states[mv.to].clone()).or_default() += 1.0 / b,
                    (_, true) => {
                        *dist.entry(acc.clone()).or_default() += 0.5 / b;
                        *dist.entry(rej.clone()).or_default() += 0.5 / b;
                    }
                    (Halt::Rej, false) => *dist.entry(dead.clone()).or_default() += 1.0 / b,
                    (Halt::No, false) => *dist.entry(spec.states[mv.to].clone()).or_default() += 1.0 / b,
                }
            }
            rows.push((spec.states[q].clone(), sym, dist));
        }
    }
    for &sym in &syms {
        let mut dist = BTreeMap::new();
        if sym == RIGHT_END {
            dist.insert(acc.clone(), 0.5);
            dist.insert(rej.clone(), 0.5);
        } else {
            dist.insert(dead.clone(), 1.0);
        }
        rows.push((dead.clone(), sym, dist));
    }
    for (from, sym, dist) in rows {
        for (to, p) in dist {
            out.transitions.push(TransitionRule::new(&from, sym, &to, 1, None, c(p)));
        }
    }
    Ok(out)
}

fn require_rigid(spec: &MachineSpec) -> Result<()> {
    let ok = spec.kind == Kind::Qfa
        && spec.head_mode == HeadMode::OneWay
        && spec.garbage_mode == GarbageMode::Rigid
        && spec.transitions.iter().all(|t| t.weight.im == 0.0);
    if ok {
        Ok(())
    } else {
        Err(Error::RigidRequired)
    }
}

/// Path-pair sampling scale: the largest ℓ1 row norm, at least 1.
pub fn rigid_scale(spec: &MachineSpec) -> Result<f64> {
    require_rigid(spec)?;
    let idx = spec.index()?;
    let mut b: f64 = 1.0;
    for q in 0..idx.n {
        for s in 0..idx.nsym {
            b = b.max(idx.row(q, s).iter().map(|m| m.weight.re.abs()).sum());
        }
    }
    Ok(b)
}

/// Factor `B^{-2(|x|+2)}` relating the pair pfa's bias to `p⁺ − p⁻`.
pub fn rigid_zeta(spec: &MachineSpec, input_len: usize) -> Result<f64> {
    Ok(rigid_scale(spec)?.powi(-2 * (input_len as i32 + 2)))
}

/// One-way pfa simulating two computation paths of a rigid real 1qfa in
/// lockstep. Pairs that halt together in the same state with the same
/// garbage count as agreement: in an accepting state, equal signs push
/// toward acceptance and opposite signs toward rejection; in a rejecting
/// state the roles swap. Everything else is a fair coin. The result accepts
/// with probability `1/2 + ζ·(p⁺ − p⁻)` where `p⁺ − p⁻ = (p_acc − p_rej)/2`
/// and `ζ` is [`rigid_zeta`].
pub fn rigid_qfa_to_pfa(spec: &MachineSpec, eps: f64) -> Result<MachineSpec> {
    require_rigid(spec)?;
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::Invalid(format!("error bound {eps} outside [0, 1/2)")));
    }
    let idx = spec.index()?;
    let b2 = rigid_scale(spec)?.powi(2);
    let syms = spec.tape_symbols();
    let name = |q1: usize, q2: usize, neg: bool| {
        format!("⟨{},{},{}⟩", spec.states[q1], spec.states[q2], if neg { '-' } else { '+' })
    };
    let (acc, rej, wp, wm) = ("A".to_string(), "R".to_string(), "W+".to_string(), "W-".to_string());
    let mut out = MachineSpec::new(Kind::Pfa, HeadMode::OneWay, GarbageMode::None, &spec.input_alphabet);
    out.accepting = vec![acc.clone()];
    out.rejecting = vec![rej.clone()];
    out.states = vec![acc.clone(), rej.clone(), wp.clone(), wm.clone()];
    let mut rows: Vec<(String, char, BTreeMap<String, f64>)> = Vec::new();
    // Waiting states carry an agreed outcome to the end, paying 1/B² per
    // step so every pair is weighted by B^{-2(|x|+2)} regardless of when
    // it halted.
    for (w, fin) in [(&wp, &acc), (&wm, &rej)] {
        for &sym in &syms {
            let mut d = BTreeMap::new();
            let stay = if sym == RIGHT_END { fin.clone() } else { w.clone() };
            *d.entry(stay).or_insert(0.0) += 1.0 / b2;
            *d.entry(acc.clone()).or_insert(0.0) += 0.5 * (1.0 - 1.0 / b2);
            *d.entry(rej.clone()).or_insert(0.0) += 0.5 * (1.0 - 1.0 / b2);
            rows.push((w.clone(), sym, d));
        }
    }
    out.initial = match idx.halt[idx.initial] {
        Halt::Acc => wp.clone(),
        Halt::Rej => wm.clone(),
        Halt::No => name(idx.initial, idx.initial, false),
    };
    if idx.halt[idx.initial] == Halt::No {
        let start = (idx.initial, idx.initial, false);
        let mut seen: HashMap<(usize, usize, bool), ()> = HashMap::from([(start, ())]);
        let mut queue = VecDeque::from([start]);
        while let Some((q1, q2, neg)) = queue.pop_front() {
            out.states.push(name(q1, q2, neg));
            for (s, &sym) in syms.iter().enumerate() {
                let last = sym == RIGHT_END;
                let mut d: BTreeMap<String, f64> = BTreeMap::new();
                let mut neutral = 1.0;
                for m1 in idx.row(q1, s) {
                    for m2 in idx.row(q2, s) {
                        let pr = m1.weight.re.abs() * m2.weight.re.abs() / b2;
                        if m1.garbage != m2.garbage {
                            continue;
                        }
                        let sign = neg ^ (m1.weight.re < 0.0) ^ (m2.weight.re < 0.0);
                        let good = match (idx.halt[m1.to], idx.halt[m2.to]) {
                            (Halt::No, Halt::No) if !last => {
                                let key = (m1.to, m2.to, sign);
                                if seen.insert(key, ()).is_none() {
                                    queue.push_back(key);
                                }
                                *d.entry(name(m1.to, m2.to, sign)).or_insert(0.0) += pr;
                                neutral -= pr;
                                continue;
                            }
                            (Halt::Acc, Halt::Acc) if m1.to == m2.to => !sign,
                            (Halt::Rej, Halt::Rej) if m1.to == m2.to => sign,
                            _ => continue,
                        };
                        let target = match (good, last) {
                            (true, true) => &acc,
                            (false, true) => &rej,
                            (true, false) => &wp,
                            (false, false) => &wm,
                        };
                        *d.entry(target.clone()).or_insert(0.0) += pr;
                        neutral -= pr;
                    }
                }
                let neutral = neutral.max(0.0);
                *d.entry(acc.clone()).or_insert(0.0) += neutral / 2.0;
                *d.entry(rej.clone()).or_insert(0.0) += neutral / 2.0;
                rows.push((name(q1, q2, neg), sym, d));
            }
        }
    }
    for (from, sym, d) in rows {
        for (to, p) in d {
            if p > 0.0 {
                out.transitions.push(TransitionRule::new(&from, sym, &to, 1, None, c(p)));
            }
        }
    }
    Ok(out)
}

/// Sign decomposition of a rigid real 1qfa's halting amplitudes. Paths are
/// grouped by final surface configuration (halting step, state, garbage);
/// `f₊`/`f₋` sum the magnitudes of positive/negative path amplitudes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SignDecomposition {
    /// `½ Σ_{z acc} (f₊² + f₋²)`.
    pub acc_plus: f64,
    /// `Σ_{z acc} f₊ f₋`.
    pub acc_minus: f64,
    pub rej_plus: f64,
    pub rej_minus: f64,
    /// `Σ_{z acc} (f₊ − f₋)²`.
    pub p_acc: f64,
    pub p_rej: f64,
    /// `acc_plus + rej_minus`.
    pub p_plus: f64,
    /// `acc_minus + rej_plus`; `p_plus − p_minus = (p_acc − p_rej)/2`.
    pub p_minus: f64,
}

pub const ENUMERATION_LIMIT: f64 = 1e7;

pub fn compute_sign_decomposition(spec: &MachineSpec, x: &str) -> Result<SignDecomposition> {
    require_rigid(spec)?;
    let idx = spec.index()?;
    let tape = idx.tape(x)?;
    let branching = idx.rows.iter().map(Vec::len).max().unwrap_or(1).max(1) as f64;
    let paths = branching.powi(tape.len() as i32);
    if paths > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge(paths));
    }
    // (step, state, garbage) -> (f₊, f₋)
    let mut groups: HashMap<(usize, usize, Vec<u16>), (f64, f64)> = HashMap::new();
    let mut stack: Vec<(usize, usize, f64, Vec<u16>)> = Vec::new();
    match idx.halt[idx.initial] {
        Halt::No => stack.push((0, idx.initial, 1.0, Vec::new())),
        _ => {
            groups.insert((0, idx.initial, Vec::new()), (1.0, 0.0));
        }
    }
    while let Some((t, q, amp, garbage)) = stack.pop() {
        if t == tape.len() {
            continue;
        }
        for mv in idx.row(q, tape[t]) {
            let a = amp * mv.weight.re;
            if a == 0.0 {
                continue;
            }
            let mut g = garbage.clone();
            g.extend(mv.garbage);
            if idx.halt[mv.to] == Halt::No {
                stack.push((t + 1, mv.to, a, g));
            } else {
                let e = groups.entry((t + 1, mv.to, g)).or_default();
                if a > 0.0 {
                    e.0 += a;
                } else {
                    e.1 -= a;
                }
            }
        }
    }
    let mut d = SignDecomposition::default();
    for ((_, q, _), (fp, fm)) in groups {
        let (plus, minus, p) = (0.5 * (fp * fp + fm * fm), fp * fm, (fp - fm) * (fp - fm));
        if idx.halt[q] == Halt::Acc {
            d.acc_plus += plus;
            d.acc_minus += minus;
            d.p_acc += p;
        } else {
            d.rej_plus += plus;
            d.rej_minus += minus;
            d.p_rej += p;
        }
    }
    d.p_plus = d.acc_plus + d.rej_minus;
    d.p_minus = d.acc_minus + d.rej_plus;
    Ok(d)
}

fn names(n: usize, prefix: &str) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Random 1.5dfa that halts on every input: stationary moves only go to
/// later states, and every state moves to a halting state on `$`.
pub fn random_one_five_dfa<R: Rng + ?Sized>(rng: &mut R, n: usize, sigma: &[char]) -> MachineSpec {
    let mut s = MachineSpec::new(Kind::Dfa, HeadMode::OneFiveWay, GarbageMode::None, sigma);
    s.states = names(n, "q");
    s.states.extend(["acc".to_string(), "rej".to_string()]);
    s.initial = "q0".into();
    s.accepting = vec!["acc".into()];
    s.rejecting = vec!["rej".into()];
    for q in 0..n {
        for &sym in s.tape_symbols().iter() {
            let roll: f64 = rng.random();
            let from = format!("q{q}");
            if roll < 0.05 {
                continue;
            }
            if roll < 0.4 && q + 1 < n {
                let p = rng.random_range(q + 1..n);
                s.transitions.push(TransitionRule::classical(&from, sym, &format!("q{p}"), 0));
            } else if sym == RIGHT_END {
                let h = if rng.random_bool(0.5) { "acc" } else { "rej" };
                s.transitions.push(TransitionRule::classical(&from, sym, h, 1));
            } else {
                let p = rng.random_range(0..n + 2);
                s.transitions.push(TransitionRule::classical(&from, sym, &s.states[p].clone(), 1));
            }
        }
    }
    s
}

/// Random one-way pfa with `n` working states plus `acc`/`rej`.
pub fn random_pfa<R: Rng + ?Sized>(rng: &mut R, n: usize, sigma: &[char]) -> MachineSpec {
    let mut s = MachineSpec::new(Kind::Pfa, HeadMode::OneWay, GarbageMode::None, sigma);
    s.states = names(n, "q");
    s.states.extend(["acc".to_string(), "rej".to_string()]);
    s.initial = "q0".into();
    s.accepting = vec!["acc".into()];
    s.rejecting = vec!["rej".into()];
    let all = s.states.clone();
    for q in 0..n {
        for &sym in s.tape_symbols().iter() {
            let k = rng.random_range(1..=3usize);
            let mut targets = all.clone();
            targets.shuffle(rng);
            let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = w.iter().sum();
            for (t, wi) in targets.iter().take(k).zip(w) {
                s.transitions.push(TransitionRule::new(&format!("q{q}"), sym, t, 1, None, c(wi / total)));
            }
        }
    }
    s
}

/// Random one-way nfa; rows may be empty.
pub fn random_nfa<R: Rng + ?Sized>(rng: &mut R, n: usize, sigma: &[char]) -> MachineSpec {
    let mut s = MachineSpec::new(Kind::Nfa, HeadMode::OneWay, GarbageMode::None, sigma);
    s.states = names(n, "q");
    s.states.extend(["acc".to_string(), "rej".to_string()]);
    s.initial = "q0".into();
    s.accepting = vec!["acc".into()];
    s.rejecting = vec!["rej".into()];
    let all = s.states.clone();
    for q in 0..n {
        for &sym in s.tape_symbols().iter() {
            let k = rng.random_range(0..=2usize);
            let mut targets = all.clone();
            targets.shuffle(rng);
            for t in targets.iter().take(k) {
                s.transitions.push(TransitionRule::classical(&format!("q{q}"), sym, t, 1));
            }
        }
    }
    s
}

/// Random rigid real 1qfa. With `dyadic`, each column has two entries
/// `±1/√2` on disjoint (state, garbage) slots; otherwise columns come from a
/// Haar orthogonal matrix.
pub fn random_rigid_qfa<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    n_acc: usize,
    n_rej: usize,
    sigma: &[char],
    garbage: usize,
    dyadic: bool,
) -> MachineSpec {
    let mut s = MachineSpec::new(Kind::Qfa, HeadMode::OneWay, GarbageMode::Rigid, sigma);
    s.states = names(n, "q");
    s.states.extend(names(n_acc, "a"));
    s.states.extend(names(n_rej, "r"));
    s.initial = "q0".into();
    s.accepting = names(n_acc, "a");
    s.rejecting = names(n_rej, "r");
    s.garbage_alphabet = names(garbage.max(1), "g");
    let slots: Vec<(usize, usize)> =
        (0..s.states.len()).flat_map(|p| (0..s.garbage_alphabet.len()).map(move |g| (p, g))).collect();
    assert!(slots.len() >= 2 * n, "not enough (state, garbage) slots");
    for &sym in s.tape_symbols().iter() {
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::new();
        if dyadic {
            let mut sl: Vec<usize> = (0..slots.len()).collect();
            sl.shuffle(rng);
            let h = std::f64::consts::FRAC_1_SQRT_2;
            for q in 0..n {
                let sg = |r: &mut R| if r.random_bool(0.5) { h } else { -h };
                cols.push(vec![(sl[2 * q], sg(rng)), (sl[2 * q + 1], sg(rng))]);
            }
        } else {
            let o = haar_orthogonal(slots.len(), rng);
            for q in 0..n {
                cols.push((0..slots.len()).map(|i| (i, o[(i, q)].re)).filter(|(_, w)| w.abs() > 1e-12).collect());
            }
        }
        for (q, col) in cols.into_iter().enumerate() {
            for (slot, w) in col {
                let (p, g) = slots[slot];
                s.transitions.push(TransitionRule::new(
                    &format!("q{q}"),
                    sym,
                    &s.states[p].clone(),
                    1,
                    Some(&s.garbage_alphabet[g].clone()),
                    c(w),
                ));
            }
        }
    }
    s
}

/// Every string over `sigma` of length at most `max_len`, shortest first.
pub fn all_strings(sigma: &[char], max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        layer = layer.iter().flat_map(|w| sigma.iter().map(move |&a| format!("{w}{a}"))).collect();
        out.extend(layer.iter().cloned());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machines::{run_dfa, run_nfa, run_pfa, PfaOptions, Verdict};
    use crate::sim::{check_well_formed, random_simple_qfa, simulate_1qfa, simulate_2qfa, SimOptions};
    use crate::stats::{decide, Criterion, Decision};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_garbage_is_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_simple_qfa(&mut rng, 4, 1, 1, &['a'], 2, HeadMode::TwoWay, GarbageMode::Flexible);
        assert_eq!(reduce_garbage_alphabet(&s).unwrap(), s);
    }

    /// One-way flexible-garbage machine whose `$` row sends each working
    /// state to accept/reject under its own garbage symbol, so every path
    /// halts by the last step.
    fn halting_one_way(rng: &mut ChaCha8Rng) -> MachineSpec {
        let mut s = random_simple_qfa(rng, 6, 1, 1, &['a', 'b'], 4, HeadMode::OneWay, GarbageMode::Flexible);
        s.transitions.retain(|t| t.read != RIGHT_END);
        let acc = s.accepting[0].clone();
        let rej = s.rejecting[0].clone();
        let working: Vec<String> =
            s.states.iter().filter(|q| !s.accepting.contains(q) && !s.rejecting.contains(q)).cloned().collect();
        for (i, q) in working.iter().enumerate() {
            let th: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let g = s.garbage_alphabet[i].clone();
            s.transitions.push(TransitionRule::new(q, RIGHT_END, &acc, 1, Some(&g), c(th.cos())));
            s.transitions.push(TransitionRule::new(q, RIGHT_END, &rej, 1, Some(&g), c(th.sin())));
        }
        s
    }

    #[test]
    fn garbage_reduction_preserves_totals() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..4 {
            let s = halting_one_way(&mut rng);
            assert!(check_well_formed(&s, 2).unwrap().is_ok());
            let t = reduce_garbage_alphabet(&s).unwrap();
            assert!(t.validate().is_valid());
            assert_eq!(t.garbage_alphabet, vec!["0", "1"]);
            assert!(t.states.len() <= 6 * 5 * 3);
            let wf = check_well_formed(&t, 2).unwrap();
            assert!(wf.is_ok(), "trial {trial}: {wf:?}");
            for x in all_strings(&['a', 'b'], 5) {
                let a = simulate_1qfa(&s, &x).unwrap();
                let opts = SimOptions { max_steps: 2 * (x.len() + 2), residual_target: 1e-14 };
                let b = simulate_2qfa(&t, &x, opts).unwrap();
                assert!((a.p_acc + a.p_rej - 1.0).abs() < 1e-9);
                assert!((a.p_acc - b.p_acc).abs() < 1e-9, "{x}");
                assert!((a.p_rej - b.p_rej).abs() < 1e-9, "{x}");
            }
        }
    }

    #[test]
    fn garbage_reduction_state_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n = rng.random_range(3..8);
            let k = rng.random_range(3..9);
            let s = random_simple_qfa(&mut rng, n, 1, 1, &['a'], k, HeadMode::TwoWay, GarbageMode::Flexible);
            let t = reduce_garbage_alphabet(&s).unwrap();
            assert!(t.states.len() <= 3 * n * k * ceil_log2(k));
            assert_eq!(reduce_garbage_alphabet(&t).unwrap(), t);
        }
    }

    #[test]
    fn stationary_chain_collapses() {
        let mut s = MachineSpec::new(Kind::Dfa, HeadMode::OneFiveWay, GarbageMode::None, &['a']);
        s.states = ["q", "p1", "p2", "p", "acc"].map(String::from).to_vec();
        s.initial = "q".into();
        s.accepting = vec!["acc".into()];
        s.transitions = vec![
            TransitionRule::classical("q", 'a', "p1", 0),
            TransitionRule::classical("p1", 'a', "p2", 0),
            TransitionRule::classical("p2", 'a', "p", 1),
        ];
        let t = collapse_stationary(&s).unwrap();
        let from_q: Vec<_> = t.transitions.iter().filter(|r| r.from == "q").cloned().collect();
        assert_eq!(from_q, vec![TransitionRule::classical("q", 'a', "p", 1)]);
        assert_eq!(t.head_mode, HeadMode::OneWay);
    }

    #[test]
    fn stationary_cycle_is_reported() {
        let mut s = MachineSpec::new(Kind::Dfa, HeadMode::OneFiveWay, GarbageMode::None, &['a']);
        s.states = vec!["q".into(), "p".into()];
        s.initial = "q".into();
        s.transitions = vec![TransitionRule::classical("q", 'a', "p", 0), TransitionRule::classical("p", 'a', "q", 0)];
        assert!(matches!(collapse_stationary(&s), Err(Error::DivergingLoop { .. })));
    }

    #[test]
    fn no_stationary_rules_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = random_one_five_dfa(&mut rng, 4, &['a', 'b']);
        s.transitions.retain(|t| t.dir == 1);
        s.head_mode = HeadMode::OneWay;
        assert_eq!(collapse_stationary(&s).unwrap(), s);
    }

    #[test]
    fn random_one_five_dfas_keep_their_language() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let s = random_one_five_dfa(&mut rng, 5, &['a', 'b']);
            let t = collapse_stationary(&s).unwrap();
            assert!(t.validate().is_valid());
            for x in all_strings(&['a', 'b'], 8) {
                let a = run_dfa(&s, &x).unwrap();
                assert_ne!(a, Verdict::Undefined);
                assert_eq!(a, run_dfa(&t, &x).unwrap(), "{x}");
            }
        }
    }

    fn coin() -> MachineSpec {
        let mut s = MachineSpec::new(Kind::Pfa, HeadMode::OneWay, GarbageMode::None, &['a']);
        s.states = ["q", "acc", "rej"].map(String::from).to_vec();
        s.initial = "q".into();
        s.accepting = vec!["acc".into()];
        s.rejecting = vec!["rej".into()];
        s.transitions = vec![
            TransitionRule::new("q", '¢', "acc", 1, None, c(0.5)),
            TransitionRule::new("q", '¢', "rej", 1, None, c(0.5)),
        ];
        s
    }

    #[test]
    fn fair_coin_lift() {
        let q = lift_pfa_to_qfa(&coin()).unwrap();
        let st = simulate_1qfa(&q, "aa").unwrap();
        assert!((st.p_acc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn random_pfa_lift_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            let p = random_pfa(&mut rng, 5, &['a', 'b']);
            let q = lift_pfa_to_qfa(&p).unwrap();
            assert!(q.validate().is_valid());
            for x in all_strings(&['a', 'b'], 6) {
                let a = run_pfa(&p, &x, PfaOptions::default()).unwrap();
                let b = simulate_1qfa(&q, &x).unwrap();
                assert!((a.p_acc - b.p_acc).abs() < 1e-9 && (a.p_rej - b.p_rej).abs() < 1e-9);
                for (u, v) in a.per_step.iter().zip(&b.per_step) {
                    assert!((u.p_acc - v.p_acc).abs() < 1e-9 && (u.residual - v.residual).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn missing_pfa_rows_reject_in_the_lift() {
        let mut p = coin();
        p.transitions.clear();
        let q = lift_pfa_to_qfa(&p).unwrap();
        assert_eq!(simulate_1qfa(&q, "a").unwrap().p_rej, 1.0);
    }

    #[test]
    fn nfa_lift_extremes() {
        let mut all = MachineSpec::new(Kind::Nfa, HeadMode::OneWay, GarbageMode::None, &['a', 'b']);
        all.states = vec!["q".into(), "acc".into()];
        all.initial = "q".into();
        all.accepting = vec!["acc".into()];
        for sym in all.tape_symbols() {
            let to = if sym == RIGHT_END { "acc" } else { "q" };
            all.transitions.push(TransitionRule::classical("q", sym, to, 1));
        }
        let mut none = all.clone();
        none.transitions.clear();
        let (pa, pn) = (lift_nfa_to_pfa(&all).unwrap(), lift_nfa_to_pfa(&none).unwrap());
        for x in all_strings(&['a', 'b'], 3) {
            assert!(run_pfa(&pa, &x, PfaOptions::default()).unwrap().p_acc > 0.5);
            let st = run_pfa(&pn, &x, PfaOptions::default()).unwrap();
            assert_eq!(st.p_acc, 0.5);
            assert_eq!(decide(&st, Criterion::UnboundedError), Decision::Reject);
        }
    }

    #[test]
    fn random_nfa_lift_decides_like_the_nfa() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = random_nfa(&mut rng, 4, &['a', 'b']);
            let p = lift_nfa_to_pfa(&n).unwrap();
            assert!(p.validate().is_valid(), "{:?}", p.validate());
            for x in all_strings(&['a', 'b'], 6) {
                let want = run_nfa(&n, &x).unwrap() == Verdict::Accept;
                let st = run_pfa(&p, &x, PfaOptions::default()).unwrap();
                assert!((st.p_acc + st.p_rej - 1.0).abs() < 1e-12);
                assert_eq!(decide(&st, Criterion::UnboundedError) == Decision::Accept, want, "{x}");
            }
        }
    }

    #[test]
    fn rigid_requirement() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_simple_qfa(&mut rng, 3, 1, 1, &['a'], 2, HeadMode::OneWay, GarbageMode::Flexible);
        assert_eq!(rigid_qfa_to_pfa(&s, 0.2), Err(Error::RigidRequired));
        let mut r = random_rigid_qfa(&mut rng, 3, 1, 1, &['a'], 2, true);
        r.transitions[0].weight = C64::new(0.0, FRAC_1_SQRT);
        assert_eq!(compute_sign_decomposition(&r, "a"), Err(Error::RigidRequired));
    }

    const FRAC_1_SQRT: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn sign_identity_on_random_rigid_machines() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for dyadic in [true, false] {
            for _ in 0..5 {
                let s = random_rigid_qfa(&mut rng, 3, 1, 1, &['a', 'b'], 2, dyadic);
                assert!(check_well_formed(&s, 2).unwrap().is_ok());
                let len = if dyadic { 5 } else { 2 };
                for x in all_strings(&['a', 'b'], len) {
                    let d = compute_sign_decomposition(&s, &x).unwrap();
                    let st = simulate_1qfa(&s, &x).unwrap();
                    assert!((d.p_acc - st.p_acc).abs() < 1e-9);
                    assert!((d.p_rej - st.p_rej).abs() < 1e-9);
                    assert!((d.acc_plus - d.acc_minus - d.p_acc / 2.0).abs() < 1e-9);
                    assert!((d.p_plus - d.p_minus - (d.p_acc - d.p_rej) / 2.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn cancelling_paths() {
        let h = FRAC_1_SQRT;
        let mut s = MachineSpec::new(Kind::Qfa, HeadMode::OneWay, GarbageMode::Rigid, &['a']);
        s.states = ["q", "p", "acc", "rej"].map(String::from).to_vec();
        s.initial = "q".into();
        s.accepting = vec!["acc".into()];
        s.rejecting = vec!["rej".into()];
        s.garbage_alphabet = vec!["g".into()];
        let t = &mut s.transitions;
        t.push(TransitionRule::new("q", '¢', "q", 1, Some("g"), c(h)));
        t.push(TransitionRule::new("q", '¢', "p", 1, Some("g"), c(h)));
        t.push(TransitionRule::new("p", '¢', "q", 1, Some("g"), c(h)));
        t.push(TransitionRule::new("p", '¢', "p", 1, Some("g"), c(-h)));
        t.push(TransitionRule::new("q", '$', "acc", 1, Some("g"), c(h)));
        t.push(TransitionRule::new("q", '$', "rej", 1, Some("g"), c(h)));
        t.push(TransitionRule::new("p", '$', "acc", 1, Some("g"), c(-h)));
        t.push(TransitionRule::new("p", '$', "rej", 1, Some("g"), c(h)));
        let d = compute_sign_decomposition(&s, "").unwrap();
        assert!(d.p_acc.abs() < 1e-15);
        assert!((d.acc_plus - 0.25).abs() < 1e-15 && (d.acc_minus - 0.25).abs() < 1e-15);
        assert!((d.p_rej - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_pfa_bias_matches_sign_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let s = random_rigid_qfa(&mut rng, 3, 1, 1, &['a', 'b'], 2, true);
            let d = rigid_qfa_to_pfa(&s, 0.25).unwrap();
            assert!(d.validate().is_valid(), "{:?}", d.validate());
            for x in all_strings(&['a', 'b'], 4) {
                let sd = compute_sign_decomposition(&s, &x).unwrap();
                let st = run_pfa(&d, &x, PfaOptions::default()).unwrap();
                assert!((st.p_acc + st.p_rej - 1.0).abs() < 1e-9);
                let zeta = rigid_zeta(&s, x.len()).unwrap();
                assert!((st.p_acc - 0.5 - zeta * (sd.p_plus - sd.p_minus)).abs() < 1e-12, "{x}");
            }
        }
    }

    #[test]
    fn positive_machine_has_no_negative_part() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_pfa(&mut rng, 3, &['a']);
        let mut q = lift_pfa_to_qfa(&p).unwrap();
        // Pfa lifts write garbage on every step, so they are rigid one-way machines.
        q.garbage_mode = GarbageMode::Rigid;
        for x in all_strings(&['a'], 4) {
            let d = compute_sign_decomposition(&q, &x).unwrap();
            assert_eq!(d.acc_minus, 0.0);
            let pf = run_pfa(&p, &x, PfaOptions::default()).unwrap();
            let dd = run_pfa(&rigid_qfa_to_pfa(&q, 0.0).unwrap(), &x, PfaOptions::default()).unwrap();
            let sign = |v: f64| if v > 1e-12 { 1 } else if v < -1e-12 { -1 } else { 0 };
            assert_eq!(sign(dd.p_acc - 0.5), sign(pf.p_acc - pf.p_rej));
        }
    }

    #[test]
    fn enumeration_guard() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = random_rigid_qfa(&mut rng, 3, 1, 1, &['a'], 3, false);
        let x = "a".repeat(30);
        assert!(matches!(compute_sign_decomposition(&s, &x), Err(Error::EnumerationTooLarge(_))));
    }
}
