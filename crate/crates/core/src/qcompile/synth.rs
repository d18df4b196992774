//! Circuits preparing the column `Σ δ(q,σ|p,d,ξ)|p,d,ξ⟩` from `|0…0⟩`.
//!
//! The state is prepared directly: a uniformly controlled R_y tree fixes the
//! magnitudes, a uniformly controlled R_z stage fixes relative phases, and
//! each rotation is replaced by an `{H,T}` word. Global phase is tracked
//! exactly (every word has phase in multiples of π/8) and corrected at the
//! end, so the circuit output matches the column vector itself.

use super::gates::{Circuit, Gate};
use super::sk::{sk_approx, sk_approx_parity, t_parity, word_matrix};
use crate::linalg::{ceil_log2, dist, CMat, C64, ZERO};
use crate::machines::{Halt, Indexed, MachineSpec};
use crate::{Error, Result};
use std::f64::consts::PI;

/// Register layout `|p⟩|d⟩|ξ⟩`: `r1` state bits, two direction bits
/// (`10` = −1, `11` = 0, `01` = +1, `00` unused) and `r2` garbage bits
/// (0 = λ).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub r1: usize,
    pub r2: usize,
    pub states: usize,
    pub garbage: usize,
}

impl Layout {
    pub fn new(states: usize, garbage: usize) -> Self {
        let r1 = ceil_log2(states).max(1);
        let r2 = if garbage == 0 { 0 } else { ceil_log2(garbage + 1) };
        Layout { r1, r2, states, garbage }
    }

    pub fn for_spec(spec: &MachineSpec) -> Self {
        Layout::new(spec.states.len(), spec.garbage_alphabet.len())
    }

    pub fn qubits(&self) -> usize {
        self.r1 + 2 + self.r2
    }

    pub fn index(&self, p: usize, dir: i8, garbage: Option<u16>) -> usize {
        let d = match dir {
            -1 => 0b10,
            0 => 0b11,
            _ => 0b01,
        };
        let g = garbage.map_or(0, |g| g as usize + 1);
        (p << (2 + self.r2)) | (d << self.r2) | g
    }

    /// Inverse of [`Layout::index`]; `None` for padding and out-of-range codes.
    pub fn decode(&self, i: usize) -> Option<(usize, i8, Option<u16>)> {
        let g = i & ((1 << self.r2) - 1);
        let d = (i >> self.r2) & 0b11;
        let p = i >> (self.r2 + 2);
        let dir = match d {
            0b10 => -1,
            0b11 => 0,
            0b01 => 1,
            _ => return None,
        };
        if p >= self.states || g > self.garbage {
            return None;
        }
        Some((p, dir, if g == 0 { None } else { Some(g as u16 - 1) }))
    }
}

/// The column for `(q, σ)`. A norm deficit (rows of halting states, or
/// missing rows) is placed on the unused index 0.
pub fn target_column(idx: &Indexed, layout: &Layout, q: usize, s: usize) -> Result<Vec<C64>> {
    let mut v = vec![ZERO; 1 << layout.qubits()];
    if idx.halt[q] == Halt::No {
        for m in idx.row(q, s) {
            v[layout.index(m.to, m.dir, m.garbage)] += m.weight;
        }
    }
    let n2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
    if n2 > 1.0 + 1e-9 {
        return Err(Error::NotIsometric(n2.sqrt()));
    }
    v[0] += C64::new((1.0 - n2).max(0.0).sqrt(), 0.0);
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Ry(usize, f64),
    Rz(usize, f64),
    Cnot(usize, usize),
}

fn ry(t: f64) -> CMat {
    let (s, c) = (t / 2.0).sin_cos();
    CMat::from_rows(&[vec![C64::new(c, 0.0), C64::new(-s, 0.0)], vec![C64::new(s, 0.0), C64::new(c, 0.0)]])
}

fn rz(t: f64) -> CMat {
    CMat::from_rows(&[vec![C64::from_polar(1.0, -t / 2.0), ZERO], vec![ZERO, C64::from_polar(1.0, t / 2.0)]])
}

const ANGLE_TOL: f64 = 1e-12;

/// Angles indexed by prefix value; `None` marks prefixes carrying no
/// amplitude, where any angle will do.
type Angles = Vec<Option<f64>>;

/// Uniformly controlled rotation on `target` with controls `0..target`,
/// reduced to the fewest controls the cared-for angles depend on. Returns
/// the angle actually applied for every prefix, free ones included.
fn uniformly_controlled(ops: &mut Vec<Op>, target: usize, angles: &Angles, z: bool) -> Vec<f64> {
    let mut controls: Vec<usize> = (0..target).collect();
    let mut table = angles.clone();
    // Greedily drop controls the angle function does not depend on.
    let mut pos = 0;
    while pos < controls.len() {
        let m = controls.len();
        let bit = 1usize << (m - 1 - pos);
        let consistent = (0..table.len()).filter(|i| i & bit == 0).all(|i| match (table[i], table[i | bit]) {
            (Some(a), Some(b)) => (a - b).abs() <= ANGLE_TOL,
            _ => true,
        });
        if consistent {
            let merged: Angles = (0..table.len())
                .filter(|i| i & bit == 0)
                .map(|i| table[i].or(table[i | bit]))
                .collect();
            // Re-index: drop the bit at `pos`.
            let mut next = vec![None; merged.len()];
            for (k, i) in (0..table.len()).filter(|i| i & bit == 0).enumerate() {
                let hi = (i >> (m - pos)) << (m - 1 - pos);
                let lo = i & (bit - 1);
                next[hi | lo] = merged[k];
            }
            table = next;
            controls.remove(pos);
        } else {
            pos += 1;
        }
    }
    let alpha: Vec<f64> = table.iter().map(|a| a.unwrap_or(0.0)).collect();
    let m = controls.len();
    let applied = (0..angles.len())
        .map(|i| {
            let r = controls.iter().fold(0, |r, &c| (r << 1) | ((i >> (target - 1 - c)) & 1));
            alpha[r]
        })
        .collect();
    if alpha.iter().all(|a| a.abs() <= ANGLE_TOL) {
        return applied;
    }
    let n = 1usize << m;
    let rot = |t: f64| if z { Op::Rz(target, t) } else { Op::Ry(target, t) };
    if m == 0 {
        ops.push(rot(alpha[0]));
        return applied;
    }
    for j in 0..n {
        let g = j ^ (j >> 1);
        let beta: f64 = alpha
            .iter()
            .enumerate()
            .map(|(s, a)| if (s & g).count_ones() % 2 == 0 { *a } else { -*a })
            .sum::<f64>()
            / n as f64;
        if beta.abs() > ANGLE_TOL {
            ops.push(rot(beta));
        }
        let flip = if j + 1 == n { m - 1 } else { (j + 1).trailing_zeros() as usize };
        let c = controls[m - 1 - flip];
        if ops.last() == Some(&Op::Cnot(c, target)) {
            ops.pop();
        } else {
            ops.push(Op::Cnot(c, target));
        }
    }
    applied
}

/// Ideal rotation/CNOT sequence preparing `v` (unit norm) from `|0…0⟩`,
/// exact including global phase.
fn prepare_ops(v: &[C64], qubits: usize) -> Vec<Op> {
    let real = v.iter().all(|x| x.im.abs() <= 1e-15);
    let mut ops = Vec::new();
    // Masses of every prefix, level by level.
    let mass_at = |len: usize| -> Vec<f64> {
        let mut m = vec![0.0; 1 << len];
        for (i, x) in v.iter().enumerate() {
            m[i >> (qubits - len)] += x.norm_sqr();
        }
        m
    };
    let mut phase_ops = Vec::new();
    for l in 0..qubits {
        let parent = mass_at(l);
        let last = l + 1 == qubits;
        let child = mass_at(l + 1);
        let angles: Angles = (0..1usize << l)
            .map(|s| {
                if parent[s] <= 1e-30 {
                    return None;
                }
                Some(if last && real {
                    2.0 * v[2 * s + 1].re.atan2(v[2 * s].re)
                } else {
                    2.0 * child[2 * s + 1].sqrt().atan2(child[2 * s].sqrt())
                })
            })
            .collect();
        uniformly_controlled(&mut ops, l, &angles, false);
    }
    let mut gamma = 0.0;
    if !real {
        // Phase stage, peeling one wire at a time from the least significant.
        let mut phases: Vec<Option<f64>> = v.iter().map(|x| (x.norm_sqr() > 1e-30).then(|| x.arg())).collect();
        for t in (0..qubits).rev() {
            let half = phases.len() / 2;
            let angles: Angles = (0..half)
                .map(|s| match (phases[2 * s], phases[2 * s + 1]) {
                    (Some(a), Some(b)) => Some(b - a),
                    _ => None,
                })
                .collect();
            let mut stage = Vec::new();
            let applied = uniformly_controlled(&mut stage, t, &angles, true);
            // Rz(θ) shifts the 0 branch by −θ/2 and the 1 branch by +θ/2.
            let parent = (0..half)
                .map(|s| match (phases[2 * s], phases[2 * s + 1]) {
                    (Some(a), Some(b)) => Some((a + b) / 2.0),
                    (Some(a), None) => Some(a + applied[s] / 2.0),
                    (None, Some(b)) => Some(b - applied[s] / 2.0),
                    (None, None) => None,
                })
                .collect();
            phase_ops.push(stage);
            phases = parent;
        }
        gamma = phases[0].unwrap_or(0.0);
    }
    // Stages were produced last-wire first; any order is valid since they
    // are all diagonal.
    for stage in phase_ops.into_iter().rev() {
        ops.extend(stage);
    }
    if gamma.abs() > ANGLE_TOL {
        ops.insert(0, Op::Rz(0, -2.0 * gamma));
    }
    ops
}

fn push_cnot(c: &mut Circuit, control: usize, target: usize) {
    if control + 1 == target {
        c.push(control, Gate::Cnot);
        return;
    }
    if target + 1 == control {
        c.push(target, Gate::H);
        c.push(control, Gate::H);
        c.push(target, Gate::Cnot);
        c.push(target, Gate::H);
        c.push(control, Gate::H);
        return;
    }
    // Walk the control next to the target with swaps, then undo.
    let swap = |c: &mut Circuit, k: usize| {
        push_cnot(c, k, k + 1);
        push_cnot(c, k + 1, k);
        push_cnot(c, k, k + 1);
    };
    assert!(control < target, "controls precede targets in prepared circuits");
    for k in control..target - 1 {
        swap(c, k);
    }
    c.push(target - 1, Gate::Cnot);
    for k in (control..target - 1).rev() {
        swap(c, k);
    }
}

/// Removes adjacent identical self-inverse placements.
fn peephole(c: &mut Circuit) {
    let mut out: Vec<super::gates::Placement> = Vec::with_capacity(c.placements.len());
    for p in c.placements.drain(..) {
        if matches!(p.gate, Gate::H | Gate::Cnot) && out.last() == Some(&p) {
            out.pop();
        } else {
            out.push(p);
        }
    }
    c.placements = out;
}

#[derive(Clone, Debug)]
pub struct Synthesis {
    pub circuit: Circuit,
    /// `‖C|0…0⟩ − v‖`.
    pub error: f64,
    pub rotations: usize,
    /// Two-level factor count bound `2^{r−1}(2^r − 1)` for `r` qubits.
    pub two_level_bound: usize,
}

fn phase_units(target: &CMat, word: &[Gate]) -> i64 {
    let w = word_matrix(word);
    let tr = target.adjoint() * w;
    let a = (tr[(0, 0)] + tr[(1, 1)]).arg();
    ((a / (PI / 8.0)).round() as i64).rem_euclid(16)
}

/// Lowers ideal ops to gates with per-rotation accuracy `eps_rot`.
fn lower(ops: &[Op], qubits: usize, eps_rot: f64) -> Option<Circuit> {
    let mats: Vec<Option<CMat>> = ops
        .iter()
        .map(|op| match *op {
            Op::Ry(_, t) => Some(ry(t)),
            Op::Rz(_, t) => Some(rz(t)),
            Op::Cnot(..) => None,
        })
        .collect();
    let mut words: Vec<Option<Vec<Gate>>> =
        mats.iter().map(|m| m.as_ref().map(|m| sk_approx(m, eps_rot))).collect();
    let mut units: Vec<i64> = mats
        .iter()
        .zip(&words)
        .map(|(m, w)| match (m, w) {
            (Some(m), Some(w)) => phase_units(m, w),
            _ => 0,
        })
        .collect();
    let mut total: i64 = units.iter().sum::<i64>().rem_euclid(16);
    if total % 2 == 1 {
        // An odd multiple of π/8 cannot be undone exactly; re-synthesize
        // one rotation in the other T-parity class.
        let mut fixed = false;
        if let Some(j) = mats.iter().position(Option::is_some) {
            let m = mats[j].as_ref().expect("rotation");
            let want = 1 - t_parity(words[j].as_ref().expect("word"));
            let w = sk_approx_parity(m, eps_rot, want);
            let u = phase_units(m, &w);
            total = (total - units[j] + u).rem_euclid(16);
            units[j] = u;
            words[j] = Some(w);
            fixed = total % 2 == 0;
        }
        if !fixed {
            return None;
        }
    }
    let mut c = Circuit::new(qubits);
    for (op, w) in ops.iter().zip(&words) {
        match *op {
            Op::Cnot(a, b) => push_cnot(&mut c, a, b),
            Op::Ry(t, _) | Op::Rz(t, _) => {
                for &g in w.as_ref().expect("rotation word") {
                    c.push(t, g);
                }
            }
        }
    }
    // Undo e^{iπ·total/8} with ω^m, ω = e^{iπ/4} = (T X T X), X = H T^4 H.
    let m = ((16 - total) / 2).rem_euclid(8);
    for _ in 0..m {
        for g in [Gate::T, Gate::H, Gate::T, Gate::T, Gate::T, Gate::T, Gate::H] {
            c.push(0, g);
        }
        for g in [Gate::T, Gate::H, Gate::T, Gate::T, Gate::T, Gate::T, Gate::H] {
            c.push(0, g);
        }
    }
    peephole(&mut c);
    Some(c)
}

/// Circuit on `qubits` wires whose output is within `eps` of the unit
/// vector `v`.
pub fn prepare_state(v: &[C64], qubits: usize, eps: f64) -> Result<Synthesis> {
    let n: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotIsometric(n));
    }
    let v: Vec<C64> = v.iter().map(|x| x / n).collect();
    let ops = prepare_ops(&v, qubits);
    let rotations = ops.iter().filter(|o| !matches!(o, Op::Cnot(..))).count();
    let r = qubits;
    let two_level_bound = (1usize << r.saturating_sub(1)) * ((1usize << r) - 1);
    let mut best = f64::INFINITY;
    let mut eps_rot = (eps / (2.0 * rotations.max(1) as f64)).min(0.5);
    for _ in 0..6 {
        if let Some(circuit) = lower(&ops, qubits, eps_rot) {
            let error = dist(&circuit.output(), &v);
            if error <= eps {
                return Ok(Synthesis { circuit, error, rotations, two_level_bound });
            }
            best = best.min(error);
        }
        eps_rot /= 2.0;
    }
    Err(Error::VerificationFailed { best })
}

pub fn synthesize_report(spec: &MachineSpec, q: &str, sigma: char, eps: f64) -> Result<Synthesis> {
    let idx = spec.index()?;
    let qi = spec
        .states
        .iter()
        .position(|s| s == q)
        .ok_or_else(|| Error::Invalid(format!("unknown state {q:?}")))?;
    let si = idx.symbol(sigma).ok_or(Error::UnknownSymbol(sigma))?;
    let layout = Layout::for_spec(spec);
    let v = target_column(&idx, &layout, qi, si)?;
    prepare_state(&v, layout.qubits(), eps)
}

/// Circuit `C` with `‖C|0…0⟩ − V_{q,σ}|0…0⟩‖ ≤ eps`.
pub fn synthesize_transition_circuit(spec: &MachineSpec, q: &str, sigma: char, eps: f64) -> Result<Circuit> {
    synthesize_report(spec, q, sigma, eps).map(|s| s.circuit)
}

/// Statevector of the ideal (unapproximated) preparation, for tests.
#[cfg(test)]
fn ideal_output(ops: &[Op], qubits: usize) -> Vec<C64> {
    let mut v = vec![ZERO; 1 << qubits];
    v[0] = crate::linalg::ONE;
    for op in ops {
        match *op {
            Op::Ry(t, a) | Op::Rz(t, a) => {
                let m = if matches!(op, Op::Ry(..)) { ry(a) } else { rz(a) };
                let bit = 1 << (qubits - 1 - t);
                for i in 0..v.len() {
                    if i & bit == 0 {
                        let (x, y) = (v[i], v[i | bit]);
                        v[i] = m[(0, 0)] * x + m[(0, 1)] * y;
                        v[i | bit] = m[(1, 0)] * x + m[(1, 1)] * y;
                    }
                }
            }
            Op::Cnot(c, t) => {
                let (cb, tb) = (1 << (qubits - 1 - c), 1 << (qubits - 1 - t));
                for i in 0..v.len() {
                    if i & cb != 0 && i & tb == 0 {
                        v.swap(i, i | tb);
                    }
                }
            }
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machines::{GarbageMode, HeadMode, Kind, TransitionRule};
    use crate::linalg::{haar_unitary, ONE};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn machine(rules: &[(&str, &str, i8, f64)]) -> MachineSpec {
        let mut s = MachineSpec::new(Kind::Qfa, HeadMode::TwoWay, GarbageMode::None, &['a']);
        s.states = vec!["q0".into(), "q1".into(), "acc".into(), "rej".into()];
        s.initial = "q0".into();
        s.accepting = vec!["acc".into()];
        s.rejecting = vec!["rej".into()];
        for &(f, t, d, w) in rules {
            s.transitions.push(TransitionRule::new(f, 'a', t, d, None, C64::new(w, 0.0)));
        }
        s
    }

    #[test]
    fn layout_round_trip() {
        let l = Layout::new(5, 2);
        assert_eq!((l.r1, l.r2, l.qubits()), (3, 2, 7));
        for p in 0..5 {
            for d in [-1, 0, 1] {
                for g in [None, Some(0), Some(1)] {
                    assert_eq!(l.decode(l.index(p, d, g)), Some((p, d, g)));
                }
            }
        }
        assert_eq!(l.decode(0), None);
    }

    #[test]
    fn ideal_preparation_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=4 {
            let v = haar_unitary(1 << n, &mut rng).column(0);
            let ops = prepare_ops(&v, n);
            assert!(dist(&ideal_output(&ops, n), &v) < 1e-10, "n = {n}");
            let mut real: Vec<C64> = v.iter().map(|x| C64::new(x.re, 0.0)).collect();
            let nr = crate::linalg::norm(&real);
            real.iter_mut().for_each(|x| *x /= nr);
            let ops = prepare_ops(&real, n);
            assert!(dist(&ideal_output(&ops, n), &real) < 1e-10);
        }
    }

    #[test]
    fn sparse_targets_use_few_rotations() {
        let mut v = vec![ZERO; 16];
        v[5] = ONE;
        let ops = prepare_ops(&v, 4);
        assert_eq!(ops.iter().filter(|o| !matches!(o, Op::Cnot(..))).count(), 2);
        assert!(dist(&ideal_output(&ops, 4), &v) < 1e-12);
    }

    #[test]
    fn sparse_complex_phases_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..=5 {
            for _ in 0..20 {
                let mut v: Vec<C64> = (0..1usize << n)
                    .map(|_| {
                        if rng.random_bool(0.4) {
                            C64::from_polar(rng.random_range(0.1..1.0), rng.random_range(-PI..PI))
                        } else {
                            ZERO
                        }
                    })
                    .collect();
                v[0] = C64::from_polar(0.3, 1.0);
                let nv = crate::linalg::norm(&v);
                v.iter_mut().for_each(|x| *x /= nv);
                let ops = prepare_ops(&v, n);
                assert!(dist(&ideal_output(&ops, n), &v) < 1e-10, "n = {n}");
            }
        }
    }

    #[test]
    fn identity_column_gives_empty_circuit() {
        let s = machine(&[]);
        let syn = synthesize_report(&s, "acc", 'a', 1e-3).unwrap();
        assert!(syn.circuit.is_empty());
        assert_eq!(syn.error, 0.0);
    }

    #[test]
    fn basis_move_is_synthesized() {
        let s = machine(&[("q0", "q1", 1, 1.0)]);
        let syn = synthesize_report(&s, "q0", 'a', 1e-3).unwrap();
        assert!(syn.error <= 1e-3);
        let layout = Layout::for_spec(&s);
        let out = syn.circuit.output();
        assert!((out[layout.index(1, 1, None)] - ONE).norm() <= 1e-3);
    }

    #[test]
    fn hadamard_split_uses_h() {
        let h = FRAC_1_SQRT_2;
        let s = machine(&[("q0", "q0", 1, h), ("q0", "q1", 1, h)]);
        for eps in [0.1, 1e-2, 1e-4] {
            let syn = synthesize_report(&s, "q0", 'a', eps).unwrap();
            assert!(syn.error <= eps);
            assert!(syn.circuit.placements.iter().any(|p| p.gate == Gate::H));
        }
    }

    #[test]
    fn complex_random_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=4 {
            let v = haar_unitary(1 << n, &mut rng).column(0);
            let syn = prepare_state(&v, n, 1e-2).unwrap();
            assert!(syn.error <= 1e-2);
        }
    }

    #[test]
    fn overfull_column_is_rejected() {
        let s = machine(&[("q0", "q0", 1, 0.9), ("q0", "q1", 1, 0.9)]);
        assert!(matches!(synthesize_report(&s, "q0", 'a', 1e-2), Err(Error::NotIsometric(_))));
    }

    #[test]
    fn long_range_cnot() {
        for (c, t) in [(0, 3), (0, 1), (2, 1), (1, 3)] {
            let mut circ = Circuit::new(4);
            push_cnot(&mut circ, c, t);
            let u = circ.unitary();
            let (cb, tb) = (1 << (3 - c), 1 << (3 - t));
            for j in 0..16 {
                let i = if j & cb != 0 { j ^ tb } else { j };
                assert!((u[(i, j)] - ONE).norm() < 1e-12, "cnot {c}->{t}");
            }
        }
    }
}
