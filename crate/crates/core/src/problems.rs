//! Reference families: membership oracles, promised-instance generators and
//! the automata that solve them.
//!
//! Families whose natural index sits inside a tower (`2^{2^n}`-long inputs)
//! take a direct scale parameter instead; see [`oracle_membership`] for the
//! per-family meaning of `n`.

use crate::linalg::{complete_basis, C64};
use crate::machines::{GarbageMode, HeadMode, Kind, MachineSpec, TransitionRule, LEFT_END, RIGHT_END};
use crate::sim::simulate_1qfa;
use crate::stats::Criterion;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Membership {
    Positive,
    Negative,
    Unpromised,
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Largest prime `p <= m`.
pub fn largest_prime_leq(m: u64) -> Result<u64> {
    if m < 2 {
        return Err(Error::PrUndefined(m));
    }
    (2..=m).rev().find(|&p| is_prime(p)).ok_or(Error::PrUndefined(m))
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// States used by [`build_mod_qfa`] per rotation component.
pub const MOD_STATES_PER_COMPONENT: usize = 4;
/// `c'` in the `c'·⌈log2 p⌉` state bound met by [`build_mod_qfa_auto`].
pub const MOD_STATE_FACTOR: usize = 8;
const MOD_ATTEMPTS: u64 = 4000;

/// Most rotation components [`build_mod_qfa_auto`] will try for modulus `p`.
pub fn max_mod_components(p: u64) -> usize {
    2 * crate::linalg::ceil_log2(p as usize).max(1)
}

/// [`build_mod_qfa`] with the smallest `k` in `1..=max_mod_components(p)`
/// that verifies.
pub fn build_mod_qfa_auto(p: u64, seed: u64, eps_target: f64) -> Result<MachineSpec> {
    let mut best = f64::INFINITY;
    for k in 1..=max_mod_components(p) {
        match build_mod_qfa(p, k, seed, eps_target) {
            Ok(spec) => return Ok(spec),
            Err(Error::VerificationFailed { best: b }) => best = best.min(b),
            Err(e) => return Err(e),
        }
    }
    Err(Error::VerificationFailed { best })
}

fn mod_worst(p: u64, angles: &[u64]) -> f64 {
    let k = angles.len() as f64;
    (1..p)
        .map(|j| {
            let s: f64 = angles.iter().map(|&a| (2.0 * PI * ((a * j) % p) as f64 / p as f64).cos()).sum();
            (s / k).powi(2)
        })
        .fold(0.0, f64::max)
}

/// One-way qfa over `{a, b}` accepting `a^j b^m` with certainty when `p | j`.
///
/// Each of the `k` components is a plane rotated by `2π a_i / p` per `a`;
/// `¢` spreads the start evenly over the components and `$` measures the
/// projection back onto that even state. Multipliers `a_i` are drawn from
/// `seed` and redrawn until every non-multiple is accepted with probability
/// at most `eps_target`.
pub fn build_mod_qfa(p: u64, k: usize, seed: u64, eps_target: f64) -> Result<MachineSpec> {
    if !is_prime(p) {
        return Err(Error::Invalid(format!("{p} is not prime")));
    }
    if k == 0 {
        return Err(Error::Invalid("need at least one rotation component".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..MOD_ATTEMPTS {
        let angles: Vec<u64> = (0..k).map(|_| rng.random_range(1..p)).collect();
        let worst = mod_worst(p, &angles);
        best = best.min(worst);
        if worst > eps_target {
            continue;
        }
        let spec = mod_machine(p, &angles);
        let measured = (1..=3 * p)
            .filter(|j| j % p != 0)
            .map(|j| simulate_1qfa(&spec, &format!("{}b", "a".repeat(j as usize))).map(|s| s.p_acc))
            .try_fold(0.0f64, |m, r| r.map(|v| m.max(v)))?;
        if measured <= eps_target + 1e-12 {
            return Ok(spec);
        }
        best = best.min(measured);
    }
    Err(Error::VerificationFailed { best })
}

fn mod_machine(p: u64, angles: &[u64]) -> MachineSpec {
    let k = angles.len();
    let mut spec = MachineSpec::new(Kind::Qfa, HeadMode::OneWay, GarbageMode::None, &['a', 'b']);
    let work: Vec<String> = (0..k).map(|i| format!("u{i}")).chain((0..k).map(|i| format!("v{i}"))).collect();
    let halt: Vec<String> = std::iter::once("acc".to_string()).chain((1..2 * k).map(|i| format!("rej{i}"))).collect();
    spec.states = work.iter().chain(&halt).cloned().collect();
    spec.initial = work[0].clone();
    spec.accepting = vec![halt[0].clone()];
    spec.rejecting = halt[1..].to_vec();

    let even: Vec<C64> = (0..2 * k).map(|i| if i < k { c(1.0 / (k as f64).sqrt()) } else { c(0.0) }).collect();
    let basis = complete_basis(vec![even], 2 * k);
    let t = &mut spec.transitions;
    // ¢: source i goes to basis column i.
    for (src, col) in basis.iter().enumerate() {
        for (dst, w) in col.iter().enumerate() {
            if w.norm() > 1e-14 {
                t.push(TransitionRule::new(&work[src], LEFT_END, &work[dst], 1, None, *w));
            }
        }
    }
    for (i, &a) in angles.iter().enumerate() {
        let th = 2.0 * PI * a as f64 / p as f64;
        let (u, v) = (&work[i], &work[k + i]);
        t.push(TransitionRule::new(u, 'a', u, 1, None, c(th.cos())));
        t.push(TransitionRule::new(u, 'a', v, 1, None, c(th.sin())));
        t.push(TransitionRule::new(v, 'a', u, 1, None, c(-th.sin())));
        t.push(TransitionRule::new(v, 'a', v, 1, None, c(th.cos())));
        t.push(TransitionRule::new(u, 'b', u, 1, None, c(1.0)));
        t.push(TransitionRule::new(v, 'b', v, 1, None, c(1.0)));
    }
    // $: project onto basis vector j and halt in halt[j].
    for (j, b) in basis.iter().enumerate() {
        for (src, w) in b.iter().enumerate() {
            if w.norm() > 1e-14 {
                t.push(TransitionRule::new(&work[src], RIGHT_END, &halt[j], 1, None, w.conj()));
            }
        }
    }
    spec
}

/// 1.5-way qfa separating `a^i b^i` from `a^i b^j`, `i != j`.
///
/// `N` paths start in superposition. Path `k` lingers `k` extra steps on
/// every `a` and `N-1-k` on every `b`, so all paths reach `$` together iff
/// `i = j`. A Fourier transform at `$` then sends the aligned superposition
/// to the accepting state; unaligned paths are accepted with probability
/// `1/N` in total. Uses `N + Σ max(k, N-1-k) + N + 1` states.
pub fn build_eq_qfa15(n: usize) -> Result<MachineSpec> {
    if n < 2 {
        return Err(Error::Invalid("precision must be at least 2".into()));
    }
    let mut spec = MachineSpec::new(Kind::Qfa, HeadMode::OneFiveWay, GarbageMode::None, &['a', 'b']);
    let r = |k: usize| format!("r{k}");
    let w = |k: usize, i: usize| format!("w{k}_{i}");
    let chain = |k: usize| k.max(n - 1 - k);
    let halt: Vec<String> = std::iter::once("acc".to_string()).chain((1..n).map(|j| format!("rej{j}"))).collect();
    spec.states.push("s".into());
    for k in 0..n {
        spec.states.push(r(k));
        for i in 0..chain(k) {
            spec.states.push(w(k, i));
        }
    }
    spec.states.extend(halt.iter().cloned());
    spec.initial = "s".into();
    spec.accepting = vec![halt[0].clone()];
    spec.rejecting = halt[1..].to_vec();

    let amp = c(1.0 / (n as f64).sqrt());
    let mut start = vec![c(0.0)];
    start.extend(std::iter::repeat_n(amp, n));
    let basis = complete_basis(vec![start], n + 1);
    let head: Vec<String> = std::iter::once("s".to_string()).chain((0..n).map(r)).collect();
    let t = &mut spec.transitions;
    for (src, col) in basis.iter().enumerate() {
        for (dst, x) in col.iter().enumerate() {
            if x.norm() > 1e-14 {
                t.push(TransitionRule::new(&head[src], LEFT_END, &head[dst], 1, None, *x));
            }
        }
    }
    for (sym, wait) in [('a', (0..n).collect::<Vec<_>>()), ('b', (0..n).map(|k| n - 1 - k).collect())] {
        t.push(TransitionRule::new("s", sym, "s", 1, None, c(1.0)));
        for k in 0..n {
            let d = wait[k];
            if d == 0 {
                t.push(TransitionRule::new(&r(k), sym, &r(k), 1, None, c(1.0)));
            } else {
                t.push(TransitionRule::new(&r(k), sym, &w(k, d - 1), 0, None, c(1.0)));
                t.push(TransitionRule::new(&w(k, 0), sym, &r(k), 1, None, c(1.0)));
            }
            for i in 1..chain(k) {
                let to = if i < d { w(k, i - 1) } else { w(k, i) };
                t.push(TransitionRule::new(&w(k, i), sym, &to, 0, None, c(1.0)));
            }
            if d == 0 && chain(k) > 0 {
                t.push(TransitionRule::new(&w(k, 0), sym, &w(k, 0), 0, None, c(1.0)));
            }
        }
    }
    for k in 0..n {
        for i in 0..chain(k) {
            t.push(TransitionRule::new(&w(k, i), LEFT_END, &w(k, i), 0, None, c(1.0)));
            t.push(TransitionRule::new(&w(k, i), RIGHT_END, &w(k, i), 0, None, c(1.0)));
        }
        for (j, h) in halt.iter().enumerate() {
            let ph = 2.0 * PI * (j * k) as f64 / n as f64;
            t.push(TransitionRule::new(&r(k), RIGHT_END, h, 1, None, C64::from_polar(1.0 / (n as f64).sqrt(), ph)));
        }
    }
    t.push(TransitionRule::new("s", RIGHT_END, "s", 1, None, c(1.0)));
    Ok(spec)
}

/// Two-state rotation over `{0, 1}`: `0` turns by `θ`, `1` by `-θ`, and `$`
/// accepts the rotated component, so the accepting amplitude is
/// `sin((#0 - #1)θ)`. Meant for the nondeterministic criterion.
pub fn build_neq_nqfa(theta: f64) -> MachineSpec {
    let mut spec = MachineSpec::new(Kind::Qfa, HeadMode::OneWay, GarbageMode::None, &['0', '1']);
    spec.states = ["r0", "r1", "acc", "rej"].map(String::from).to_vec();
    spec.initial = "r0".into();
    spec.accepting = vec!["acc".into()];
    spec.rejecting = vec!["rej".into()];
    let t = &mut spec.transitions;
    t.push(TransitionRule::new("r0", LEFT_END, "r0", 1, None, c(1.0)));
    t.push(TransitionRule::new("r1", LEFT_END, "r1", 1, None, c(1.0)));
    for (sym, th) in [('0', theta), ('1', -theta)] {
        t.push(TransitionRule::new("r0", sym, "r0", 1, None, c(th.cos())));
        t.push(TransitionRule::new("r0", sym, "r1", 1, None, c(th.sin())));
        t.push(TransitionRule::new("r1", sym, "r0", 1, None, c(-th.sin())));
        t.push(TransitionRule::new("r1", sym, "r1", 1, None, c(th.cos())));
    }
    t.push(TransitionRule::new("r0", RIGHT_END, "rej", 1, None, c(1.0)));
    t.push(TransitionRule::new("r1", RIGHT_END, "acc", 1, None, c(1.0)));
    spec
}

/// One-way pfa for the trio family at block width `n`, with `4n + 3` states.
///
/// Each block `#x x y` is read with a position counter. While the second
/// copy of `x` passes, one position `j` is chosen uniformly (position `c` is
/// taken with probability `1/(n-c+1)`), its bit is carried for `n-1` more
/// symbols and compared with `y_j`. A strict difference halts with the
/// matching verdict; a tie skips to the next block. If no block decides, the
/// machine accepts at `$`, so only negative instances can err, and only when
/// every block ties.
pub fn build_trio_pfa(n: usize) -> Result<MachineSpec> {
    if n < 2 {
        return Err(Error::Invalid("trio needs n >= 2".into()));
    }
    let mut spec = MachineSpec::new(Kind::Pfa, HeadMode::OneWay, GarbageMode::None, &['0', '1', '#']);
    let scan = |i: usize| format!("s{i}");
    let carry = |b: u8, r: usize| format!("c{b}_{r}");
    spec.states.push("skip".into());
    spec.states.extend((1..=2 * n).map(scan));
    for b in 0..2 {
        spec.states.extend((0..n).map(|r| carry(b, r)));
    }
    spec.states.extend(["acc".to_string(), "rej".to_string()]);
    spec.initial = "skip".into();
    spec.accepting = vec!["acc".into()];
    spec.rejecting = vec!["rej".into()];
    let t = &mut spec.transitions;
    let one = c(1.0);
    t.push(TransitionRule::new("skip", LEFT_END, "skip", 1, None, one));
    t.push(TransitionRule::new("skip", '#', &scan(1), 1, None, one));
    for b in ['0', '1'] {
        t.push(TransitionRule::new("skip", b, "skip", 1, None, one));
    }
    t.push(TransitionRule::new("skip", RIGHT_END, "acc", 1, None, one));
    for i in 1..=n {
        for b in ['0', '1'] {
            t.push(TransitionRule::new(&scan(i), b, &scan(i + 1), 1, None, one));
        }
    }
    for pos in 1..=n {
        let pick = 1.0 / (n - pos + 1) as f64;
        for (bi, b) in ['0', '1'].into_iter().enumerate() {
            t.push(TransitionRule::new(&scan(n + pos), b, &carry(bi as u8, n - 1), 1, None, c(pick)));
            if pos < n {
                t.push(TransitionRule::new(&scan(n + pos), b, &scan(n + pos + 1), 1, None, c(1.0 - pick)));
            }
        }
    }
    for bi in 0..2u8 {
        for r in 1..n {
            for b in ['0', '1'] {
                t.push(TransitionRule::new(&carry(bi, r), b, &carry(bi, r - 1), 1, None, one));
            }
        }
        for (yi, y) in ['0', '1'].into_iter().enumerate() {
            let to = match (bi as usize).cmp(&yi) {
                std::cmp::Ordering::Less => "acc",
                std::cmp::Ordering::Greater => "rej",
                std::cmp::Ordering::Equal => "skip",
            };
            t.push(TransitionRule::new(&carry(bi, 0), y, to, 1, None, one));
        }
    }
    Ok(spec)
}

/// Error bound `(1 - 1/n)^{n²}` met by [`build_trio_pfa`].
pub fn trio_error_bound(n: usize) -> f64 {
    (1.0 - 1.0 / n as f64).powi((n * n) as i32)
}

/// Primes used by [`build_ds_pfa`] for target `m`: the run of consecutive
/// primes with the fewest total states whose exact worst-case error on
/// `0^i`, `i <= m²`, `i != m`, is at most `1/4`.
pub fn ds_primes(m: usize) -> Vec<u64> {
    let primes: Vec<u64> = (2..).filter(|&p| is_prime(p)).take(64).collect();
    let mut best: Option<(u64, Vec<u64>)> = None;
    for start in 0..primes.len() {
        for k in 1..=16.min(primes.len() - start) {
            let set = &primes[start..start + k];
            let cost: u64 = set.iter().sum();
            if best.as_ref().is_some_and(|(b, _)| *b <= cost) {
                break;
            }
            if ds_worst_error(m, set) <= 0.25 {
                best = Some((cost, set.to_vec()));
                break;
            }
        }
    }
    best.expect("large primes always separate").1
}

fn ds_worst_error(m: usize, primes: &[u64]) -> f64 {
    (0..=m * m)
        .filter(|&i| i != m)
        .map(|i| {
            let hits = primes.iter().filter(|&&p| i as u64 % p == m as u64 % p).count();
            hits as f64 / primes.len() as f64
        })
        .fold(0.0, f64::max)
}

/// Two-way coin-tossing pfa over `{0}` accepting `0^m`. A fair choice among
/// the primes of [`ds_primes`] is made at `¢`, the head sweeps right counting
/// modulo the chosen prime, and `$` accepts iff the count matches `m`.
pub fn build_ds_pfa(m: usize) -> Result<MachineSpec> {
    if m < 2 {
        return Err(Error::Invalid("target count must be at least 2".into()));
    }
    let primes = ds_primes(m);
    let mut spec = MachineSpec::new(Kind::Pfa, HeadMode::TwoWay, GarbageMode::None, &['0']);
    let st = |p: u64, r: u64| format!("p{p}_{r}");
    spec.states.push("start".into());
    for &p in &primes {
        spec.states.extend((0..p).map(|r| st(p, r)));
    }
    spec.states.extend(["acc".to_string(), "rej".to_string()]);
    spec.initial = "start".into();
    spec.accepting = vec!["acc".into()];
    spec.rejecting = vec!["rej".into()];
    let share = c(1.0 / primes.len() as f64);
    let t = &mut spec.transitions;
    for &p in &primes {
        t.push(TransitionRule::new("start", LEFT_END, &st(p, 0), 1, None, share));
        for r in 0..p {
            t.push(TransitionRule::new(&st(p, r), '0', &st(p, (r + 1) % p), 1, None, c(1.0)));
            let to = if r == m as u64 % p { "acc" } else { "rej" };
            t.push(TransitionRule::new(&st(p, r), RIGHT_END, to, 1, None, c(1.0)));
        }
    }
    Ok(spec)
}

/// Names accepted by [`oracle_membership`].
pub const FAMILIES: [&str; 6] = ["mod", "eq", "neq", "trio", "ds", "lnh"];

/// Brute-force classification of `x` at level `n`.
///
/// - `mod`: `p = pr(n)`, instances `a^j b^m` with `1 <= j, m < 2^n`;
///   positive iff `p` divides `j`.
/// - `eq`: `a^n b^n` positive; `a^i b^j` with `i != j`, `i + j = 2n` negative.
/// - `neq`: words over `{0,1}` of length `n`; positive iff the counts differ.
/// - `trio`: `n²` blocks `#x x y` with `x, y` in `{0,1}^n`. Positive iff every
///   block has `x < y` bitwise (`x <= y`, `x != y`), negative iff every block
///   has `x > y`; anything else is outside the promise.
/// - `ds`: `0^n` positive, `0^i` with `i <= n²`, `i != n` negative.
/// - `lnh`: a language, so `n` is ignored and malformed words are negative.
pub fn oracle_membership(name: &str, n: u64, x: &str) -> Result<Membership> {
    use Membership::*;
    let yes = |b: bool| if b { Positive } else { Negative };
    Ok(match name {
        "mod" => {
            let p = largest_prime_leq(n)?;
            match split_ab(x) {
                Some((j, m)) if j >= 1 && m >= 1 && fits_below_pow2(j, n) && fits_below_pow2(m, n) => {
                    yes(j as u64 % p == 0)
                }
                _ => Unpromised,
            }
        }
        "eq" => match split_ab(x) {
            Some((i, j)) if i == j && i as u64 == n => Positive,
            Some((i, j)) if i != j && (i + j) as u64 == 2 * n => Negative,
            _ => Unpromised,
        },
        "neq" => {
            if x.chars().count() as u64 != n || !x.chars().all(|ch| ch == '0' || ch == '1') {
                Unpromised
            } else {
                let zeros = x.chars().filter(|&ch| ch == '0').count();
                yes(2 * zeros as u64 != n)
            }
        }
        "trio" => trio_class(n as usize, x),
        "ds" => {
            if !x.chars().all(|ch| ch == '0') {
                Unpromised
            } else {
                let i = x.len() as u64;
                if i == n {
                    Positive
                } else if i <= n * n {
                    Negative
                } else {
                    Unpromised
                }
            }
        }
        "lnh" => yes(lnh_member(x)),
        other => return Err(Error::UnknownFamily(other.to_string())),
    })
}

fn fits_below_pow2(v: usize, n: u64) -> bool {
    n >= 64 || (v as u64) < (1u64 << n)
}

/// `a^i b^j` as `(i, j)`.
fn split_ab(x: &str) -> Option<(usize, usize)> {
    let i = x.chars().take_while(|&ch| ch == 'a').count();
    let rest = &x[i..];
    rest.chars().all(|ch| ch == 'b').then_some((i, rest.len()))
}

fn trio_class(n: usize, x: &str) -> Membership {
    let Some(blocks) = x.strip_prefix('#').map(|r| r.split('#').collect::<Vec<_>>()) else {
        return Membership::Unpromised;
    };
    if n == 0 || blocks.len() != n * n {
        return Membership::Unpromised;
    }
    let (mut all_lt, mut all_gt) = (true, true);
    for b in blocks {
        if b.len() != 3 * n || !b.chars().all(|ch| ch == '0' || ch == '1') {
            return Membership::Unpromised;
        }
        let (x1, rest) = b.split_at(n);
        let (x2, y) = rest.split_at(n);
        if x1 != x2 {
            return Membership::Unpromised;
        }
        let pairs: Vec<(char, char)> = x1.chars().zip(y.chars()).collect();
        let lt = pairs.iter().any(|(a, b)| a < b);
        let gt = pairs.iter().any(|(a, b)| a > b);
        all_lt &= lt && !gt;
        all_gt &= gt && !lt;
    }
    match (all_lt, all_gt) {
        (true, false) => Membership::Positive,
        (false, true) => Membership::Negative,
        _ => Membership::Unpromised,
    }
}

/// `0^x 1 0^{y_1} 1 ... 0^{y_k} 1` with all runs nonempty and some prefix sum
/// of the `y_i` equal to `x`.
pub fn lnh_member(w: &str) -> bool {
    let Some(body) = w.strip_suffix('1') else {
        return false;
    };
    let runs: Vec<&str> = body.split('1').collect();
    if runs.len() < 2 || runs.iter().any(|r| r.is_empty() || !r.chars().all(|ch| ch == '0')) {
        return false;
    }
    let x = runs[0].len();
    let mut sum = 0;
    for r in &runs[1..] {
        sum += r.len();
        if sum == x {
            return true;
        }
        if sum > x {
            return false;
        }
    }
    false
}

/// Promised instances of `name` at level `n`, in a fixed order. `cap` bounds
/// the count for families whose promise set is large; trio instances beyond
/// the cap are sampled from `seed`.
pub fn promised_instances(name: &str, n: u64, cap: usize, seed: u64) -> Result<Vec<String>> {
    let mut out = Vec::new();
    match name {
        "mod" => {
            let top = if n >= 6 { 63 } else { (1usize << n) - 1 };
            'outer: for j in 1..=top {
                for m in 1..=top.min(3) {
                    if out.len() >= cap {
                        break 'outer;
                    }
                    out.push(format!("{}{}", "a".repeat(j), "b".repeat(m)));
                }
            }
        }
        "eq" => {
            for i in 0..=2 * n as usize {
                out.push(format!("{}{}", "a".repeat(i), "b".repeat(2 * n as usize - i)));
            }
        }
        "neq" => {
            out = crate::transforms::all_strings(&['0', '1'], n as usize)
                .into_iter()
                .filter(|w| w.len() as u64 == n)
                .collect();
        }
        "ds" => out = (0..=(n * n) as usize).map(|i| "0".repeat(i)).collect(),
        "trio" => {
            let n = n as usize;
            let strict: Vec<(u32, u32)> = (0..1u32 << n)
                .flat_map(|x| (0..1u32 << n).map(move |y| (x, y)))
                .filter(|&(x, y)| x != y && x & y == x)
                .collect();
            let nb = n * n;
            let total = (strict.len() as f64).powi(nb as i32);
            let bits = |v: u32| -> String { (0..n).map(|i| if v >> (n - 1 - i) & 1 == 1 { '1' } else { '0' }).collect() };
            let render = |pick: &[usize], flip: bool| -> String {
                let mut s = String::new();
                for &k in pick {
                    let (x, y) = strict[k];
                    let (x, y) = if flip { (y, x) } else { (x, y) };
                    s.push('#');
                    s.push_str(&bits(x));
                    s.push_str(&bits(x));
                    s.push_str(&bits(y));
                }
                s
            };
            if 2.0 * total <= cap as f64 {
                let mut idx = vec![0usize; nb];
                loop {
                    out.push(render(&idx, false));
                    out.push(render(&idx, true));
                    let mut d = 0;
                    while d < nb {
                        idx[d] += 1;
                        if idx[d] < strict.len() {
                            break;
                        }
                        idx[d] = 0;
                        d += 1;
                    }
                    if d == nb {
                        break;
                    }
                }
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                while out.len() < cap {
                    let pick: Vec<usize> = (0..nb).map(|_| rng.random_range(0..strict.len())).collect();
                    out.push(render(&pick, out.len() % 2 == 1));
                }
            }
        }
        "lnh" => {
            out = crate::transforms::all_strings(&['0', '1'], (n as usize).min(14));
        }
        other => return Err(Error::UnknownFamily(other.to_string())),
    }
    out.truncate(cap);
    Ok(out)
}

/// Parameters handed to a zoo builder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZooParams {
    pub n: u64,
    pub seed: u64,
    /// Target error; `None` picks the entry's default.
    pub eps: Option<f64>,
}

pub struct ZooEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub input_alphabet: &'static [char],
    pub default_n: u64,
    pub default_eps: f64,
    pub state_bound: &'static str,
    pub error_bound: &'static str,
    /// `None` for oracle-only families.
    pub build: Option<fn(&ZooParams) -> Result<MachineSpec>>,
    pub criterion: fn(&ZooParams) -> Criterion,
}

fn build_mod(p: &ZooParams) -> Result<MachineSpec> {
    let q = largest_prime_leq(p.n)?;
    build_mod_qfa_auto(q, p.seed, p.eps.unwrap_or(0.125))
}

fn build_eq(p: &ZooParams) -> Result<MachineSpec> {
    build_eq_qfa15((1.0 / p.eps.unwrap_or(0.25)).ceil().max(2.0) as usize)
}

/// The registered families.
pub fn zoo() -> Vec<ZooEntry> {
    vec![
        ZooEntry {
            name: "mod",
            description: "a^j b^m with j a multiple of pr(n)",
            input_alphabet: &['a', 'b'],
            default_n: 5,
            default_eps: 0.125,
            state_bound: "4k states, k <= 2 ceil(log2 p) rotation components",
            error_bound: "one-sided, eps on non-multiples (default 1/8)",
            build: Some(build_mod),
            criterion: |p| Criterion::BoundedError(p.eps.unwrap_or(0.125)),
        },
        ZooEntry {
            name: "eq",
            description: "a^n b^n against a^i b^j with i != j and i + j = 2n",
            input_alphabet: &['a', 'b'],
            default_n: 4,
            default_eps: 0.25,
            state_bound: "O(N^2) for precision N = ceil(1/eps)",
            error_bound: "1/N on negatives, exact on positives",
            build: Some(build_eq),
            criterion: |p| {
                let n = (1.0 / p.eps.unwrap_or(0.25)).ceil().max(2.0);
                Criterion::BoundedError(1.0 / n)
            },
        },
        ZooEntry {
            name: "neq",
            description: "length-n binary words with unequal symbol counts",
            input_alphabet: &['0', '1'],
            default_n: 4,
            default_eps: 0.0,
            state_bound: "4",
            error_bound: "exact under the nondeterministic criterion",
            build: Some(|_| Ok(build_neq_nqfa(1.0))),
            criterion: |_| Criterion::NondetQuantum,
        },
        ZooEntry {
            name: "trio",
            description: "n^2 blocks #xxy, all x < y bitwise against all x > y",
            input_alphabet: &['0', '1', '#'],
            default_n: 2,
            default_eps: 0.0625,
            state_bound: "4n + 3",
            error_bound: "(1 - 1/n)^(n^2), negatives only",
            build: Some(|p| build_trio_pfa(p.n as usize)),
            criterion: |p| Criterion::BoundedError(trio_error_bound(p.n as usize)),
        },
        ZooEntry {
            name: "ds",
            description: "0^n against 0^i with i <= n^2, i != n",
            input_alphabet: &['0'],
            default_n: 4,
            default_eps: 0.25,
            state_bound: "3 + sum of the chosen primes",
            error_bound: "1/4",
            build: Some(|p| build_ds_pfa(p.n as usize)),
            criterion: |_| Criterion::BoundedError(0.25),
        },
        ZooEntry {
            name: "lnh",
            description: "0^x 1 0^y1 1 ... 0^yk 1 with x equal to a prefix sum of the y's",
            input_alphabet: &['0', '1'],
            default_n: 8,
            default_eps: 0.0,
            state_bound: "none (oracle only)",
            error_bound: "none (oracle only)",
            build: None,
            criterion: |_| Criterion::UnboundedError,
        },
    ]
}

pub fn zoo_entry(name: &str) -> Result<ZooEntry> {
    zoo().into_iter().find(|e| e.name == name).ok_or_else(|| Error::UnknownFamily(name.to_string()))
}

/// Builds the reference machine for `name`.
pub fn build_zoo(name: &str, params: &ZooParams) -> Result<MachineSpec> {
    match zoo_entry(name)?.build {
        Some(f) => f(params),
        None => Err(Error::Invalid(format!("family {name:?} has no reference machine"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machines::{run_pfa, PfaOptions};
    use crate::sim::{check_well_formed, simulate_2qfa, SimOptions};
    use crate::stats::{decide, Decision};

    fn sieve_largest(m: usize) -> usize {
        let mut is = vec![true; m + 1];
        is[0] = false;
        is[1] = false;
        let mut i = 2;
        while i * i <= m {
            if is[i] {
                let mut k = i * i;
                while k <= m {
                    is[k] = false;
                    k += i;
                }
            }
            i += 1;
        }
        (0..=m).rev().find(|&k| is[k]).unwrap()
    }

    #[test]
    fn primes() {
        assert_eq!(largest_prime_leq(2).unwrap(), 2);
        assert_eq!(largest_prime_leq(10).unwrap(), 7);
        assert_eq!(largest_prime_leq(1 << 16).unwrap(), sieve_largest(1 << 16) as u64);
        assert_eq!(largest_prime_leq(1 << 16).unwrap(), 65521);
        assert_eq!(largest_prime_leq(1), Err(Error::PrUndefined(1)));
        for m in 2..500 {
            assert_eq!(largest_prime_leq(m as u64).unwrap(), sieve_largest(m) as u64);
        }
    }

    #[test]
    fn mod_machine_accepts_multiples_and_bounds_the_rest() {
        for p in [5u64, 7, 31] {
            let spec = build_mod_qfa_auto(p, 0, 0.125).unwrap();
            let l = crate::linalg::ceil_log2(p as usize);
            assert!(spec.states.len() <= MOD_STATE_FACTOR * l, "p={p}: {} states", spec.states.len());
            let mut worst: f64 = 0.0;
            for j in 1..=3 * p {
                let st = simulate_1qfa(&spec, &format!("{}bb", "a".repeat(j as usize))).unwrap();
                assert!((st.p_acc + st.p_rej - 1.0).abs() < 1e-9);
                if j % p == 0 {
                    assert!((st.p_acc - 1.0).abs() < 1e-9, "p={p} j={j}");
                } else {
                    worst = worst.max(st.p_acc);
                }
            }
            assert!(worst <= 0.125 + 1e-12, "p={p} worst {worst}");
        }
    }

    #[test]
    fn mod_machine_is_well_formed() {
        let spec = build_mod_qfa(5, 2, 3, 0.125).unwrap();
        assert!(check_well_formed(&spec, 3).unwrap().is_ok());
    }

    #[test]
    fn mod_budget_exhaustion_reports_best() {
        match build_mod_qfa(31, 1, 0, 0.01) {
            Err(Error::VerificationFailed { best }) => assert!(best > 0.01),
            other => panic!("{other:?}"),
        }
        assert!(build_mod_qfa(6, 2, 0, 0.1).is_err());
    }

    fn eq_run(spec: &MachineSpec, x: &str) -> crate::RunStats {
        simulate_2qfa(spec, x, SimOptions { max_steps: 400, residual_target: 1e-14 }).unwrap()
    }

    /// Amplitude path sum: every path is classical except for the initial
    /// split and the final Fourier step, so arrival times decide the result.
    fn eq_oracle(n: usize, i: usize, j: usize) -> f64 {
        let mut arrivals: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for k in 0..n {
            let t = 1 + i * (k + 1) + j * (n - k);
            arrivals.entry(t).or_default().push(k);
        }
        arrivals
            .values()
            .map(|ks| {
                let amp: f64 = ks.len() as f64 / n as f64;
                amp * amp
            })
            .sum()
    }

    #[test]
    fn eq_machine() {
        let spec = build_eq_qfa15(4).unwrap();
        assert!((eq_run(&spec, "ab").p_acc - 1.0).abs() < 1e-9);
        assert!(eq_run(&spec, "aab").p_rej >= 0.75 - 1e-12);
        assert!((eq_run(&spec, "").p_acc - 1.0).abs() < 1e-9);
        for total in 0..=16usize {
            for i in 0..=total {
                let st = eq_run(&spec, &format!("{}{}", "a".repeat(i), "b".repeat(total - i)));
                assert!((st.p_acc - eq_oracle(4, i, total - i)).abs() < 1e-9);
                if i * 2 == total {
                    assert!((st.p_acc - 1.0).abs() < 1e-9);
                } else {
                    assert!(st.p_rej >= 0.75 - 1e-9, "{i} {total}");
                }
            }
        }
        assert!(check_well_formed(&spec, 3).unwrap().is_ok());
    }

    #[test]
    fn neq_machine() {
        let spec = build_neq_nqfa(1.0);
        assert!(simulate_1qfa(&spec, "01").unwrap().p_acc <= 1e-12);
        let st = simulate_1qfa(&spec, "0").unwrap();
        assert!((st.p_acc - 1f64.sin().powi(2)).abs() < 1e-12);
        assert!((st.p_acc - 0.70807).abs() < 1e-5);
        for w in crate::transforms::all_strings(&['0', '1'], 10) {
            let d = w.chars().filter(|&ch| ch == '0').count() as i64 * 2 - w.len() as i64;
            let st = simulate_1qfa(&spec, &w).unwrap();
            assert_eq!(decide(&st, Criterion::NondetQuantum) == Decision::Accept, d != 0, "{w}");
        }
    }

    #[test]
    fn trio_exhaustive_at_two() {
        let spec = build_trio_pfa(2).unwrap();
        assert!(spec.states.len() <= 11);
        let bound = trio_error_bound(2);
        assert_eq!(bound, 0.0625);
        let inputs = promised_instances("trio", 2, usize::MAX, 0).unwrap();
        assert_eq!(inputs.len(), 2 * 5usize.pow(4));
        let mut worst: f64 = 0.0;
        for x in &inputs {
            let st = run_pfa(&spec, x, PfaOptions::default()).unwrap();
            let err = match oracle_membership("trio", 2, x).unwrap() {
                Membership::Positive => st.p_rej,
                Membership::Negative => st.p_acc,
                Membership::Unpromised => unreachable!(),
            };
            worst = worst.max(err);
        }
        assert!(worst <= bound + 1e-12, "{worst}");
    }

    #[test]
    fn trio_sampled_at_three() {
        let spec = build_trio_pfa(3).unwrap();
        assert!(spec.states.len() <= 15);
        for x in promised_instances("trio", 3, 200, 11).unwrap() {
            let st = run_pfa(&spec, &x, PfaOptions::default()).unwrap();
            let class = oracle_membership("trio", 3, &x).unwrap();
            let err = if class == Membership::Positive { st.p_rej } else { st.p_acc };
            assert!(err <= trio_error_bound(3) + 1e-12);
        }
    }

    #[test]
    fn trio_oracle_edges() {
        assert_eq!(oracle_membership("trio", 2, "#000001").unwrap(), Membership::Unpromised);
        let pos = "#000001#000001#000001#010111";
        assert_eq!(oracle_membership("trio", 2, pos).unwrap(), Membership::Positive);
        let mixed = "#000001#000001#000001#010110";
        assert_eq!(oracle_membership("trio", 2, mixed).unwrap(), Membership::Unpromised);
        assert_eq!(oracle_membership("trio", 2, "#000101#000001#000001#010111").unwrap(), Membership::Unpromised);
    }

    #[test]
    fn ds_machine() {
        for m in 2..=8 {
            let spec = build_ds_pfa(m).unwrap();
            for i in 0..=m * m {
                let st = run_pfa(&spec, &"0".repeat(i), PfaOptions::default()).unwrap();
                if i == m {
                    assert!(st.p_acc >= 0.75 - 1e-12);
                } else {
                    assert!(st.p_rej >= 0.75 - 1e-12, "m={m} i={i}");
                }
            }
        }
        let spec = build_ds_pfa(4).unwrap();
        assert!(run_pfa(&spec, "0000", PfaOptions::default()).unwrap().p_acc >= 0.75);
        assert!(run_pfa(&spec, "000000", PfaOptions::default()).unwrap().p_rej >= 0.75);
        assert!(run_pfa(&spec, "", PfaOptions::default()).unwrap().p_rej >= 0.75);
        let power = run_pfa(&spec, "0000", PfaOptions { power_steps: Some(1_000_000), residual_target: 1e-15 }).unwrap();
        let exact = run_pfa(&spec, "0000", PfaOptions::default()).unwrap();
        assert!((power.p_acc - exact.p_acc).abs() < 1e-6);
    }

    #[test]
    fn oracles() {
        assert_eq!(oracle_membership("mod", 5, "aaabb").unwrap(), Membership::Negative);
        assert_eq!(oracle_membership("mod", 5, "aaaaab").unwrap(), Membership::Positive);
        assert_eq!(oracle_membership("mod", 5, "ba").unwrap(), Membership::Unpromised);
        assert_eq!(oracle_membership("neq", 4, "0011").unwrap(), Membership::Negative);
        assert_eq!(oracle_membership("neq", 4, "0111").unwrap(), Membership::Positive);
        assert_eq!(oracle_membership("eq", 2, "aabb").unwrap(), Membership::Positive);
        assert_eq!(oracle_membership("eq", 2, "abbb").unwrap(), Membership::Negative);
        assert_eq!(oracle_membership("eq", 2, "abb").unwrap(), Membership::Unpromised);
        assert_eq!(oracle_membership("ds", 3, "000").unwrap(), Membership::Positive);
        assert_eq!(oracle_membership("ds", 3, &"0".repeat(10)).unwrap(), Membership::Unpromised);
        assert!(matches!(oracle_membership("nope", 1, ""), Err(Error::UnknownFamily(_))));
        assert!(matches!(oracle_membership("mod", 1, "ab"), Err(Error::PrUndefined(1))));
    }

    /// Independent reading: choose the number of leading y-runs directly.
    fn lnh_brute(w: &str) -> bool {
        let parts: Vec<&str> = w.split('1').collect();
        if parts.len() < 3 || !parts.last().unwrap().is_empty() {
            return false;
        }
        let runs = &parts[..parts.len() - 1];
        if runs.iter().any(|r| r.is_empty()) {
            return false;
        }
        (2..=runs.len()).any(|l| runs[1..l].iter().map(|r| r.len()).sum::<usize>() == runs[0].len())
    }

    #[test]
    fn lnh_oracle() {
        assert!(!lnh_member("0010011"));
        assert!(lnh_member("001001"));
        assert!(lnh_member("0010101"));
        assert!(!lnh_member("0001001"));
        for w in crate::transforms::all_strings(&['0', '1'], 12) {
            assert_eq!(lnh_member(&w), lnh_brute(&w), "{w}");
        }
    }

    #[test]
    fn zoo_machines_agree_with_oracles() {
        for e in zoo() {
            let Some(build) = e.build else { continue };
            let params = ZooParams { n: e.default_n, seed: 0, eps: None };
            let spec = build(&params).unwrap();
            assert!(spec.validate().is_valid(), "{}", e.name);
            let crit = (e.criterion)(&params);
            for x in promised_instances(e.name, e.default_n, 400, 1).unwrap() {
                let want = oracle_membership(e.name, e.default_n, &x).unwrap();
                let st = match spec.kind {
                    Kind::Pfa => run_pfa(&spec, &x, PfaOptions::default()).unwrap(),
                    _ => simulate_2qfa(&spec, &x, SimOptions { max_steps: 2000, residual_target: 1e-14 }).unwrap(),
                };
                let got = decide(&st, crit);
                let expect = if want == Membership::Positive { Decision::Accept } else { Decision::Reject };
                assert_eq!(got, expect, "{} on {x}", e.name);
            }
        }
        assert!(build_zoo("lnh", &ZooParams { n: 3, seed: 0, eps: None }).is_err());
    }
}
