//! The universal gate set and circuits built from it.

use crate::linalg::{CMat, C64, ONE, ZERO};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    I,
    Cnot,
    H,
    /// The π/8 gate `diag(1, e^{iπ/4})`.
    T,
}

impl Gate {
    pub fn code(self) -> char {
        match self {
            Gate::I => '1',
            Gate::Cnot => '2',
            Gate::H => '3',
            Gate::T => '4',
        }
    }

    pub fn from_code(c: char) -> Option<Gate> {
        match c {
            '1' => Some(Gate::I),
            '2' => Some(Gate::Cnot),
            '3' => Some(Gate::H),
            '4' => Some(Gate::T),
            _ => None,
        }
    }

    /// Wires covered by the gate.
    pub fn width(self) -> usize {
        if self == Gate::Cnot {
            2
        } else {
            1
        }
    }

    pub fn matrix(self) -> CMat {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            Gate::I => CMat::identity(2),
            Gate::H => CMat::from_rows(&[vec![h, h], vec![h, -h]]),
            Gate::T => CMat::from_rows(&[vec![ONE, ZERO], vec![ZERO, C64::from_polar(1.0, FRAC_PI_4)]]),
            Gate::Cnot => {
                let mut m = CMat::zeros(4, 4);
                m[(0, 0)] = ONE;
                m[(1, 1)] = ONE;
                m[(2, 3)] = ONE;
                m[(3, 2)] = ONE;
                m
            }
        }
    }
}

/// `I^{⊗offset} ⊗ gate ⊗ I^{⊗rest}`. A CNOT controls on wire `offset` and
/// targets `offset + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub offset: usize,
    pub gate: Gate,
}

/// Gate placements applied in list order. Wire 0 is the most significant
/// bit of a basis index.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circuit {
    pub qubits: usize,
    pub placements: Vec<Placement>,
}

impl Circuit {
    pub fn new(qubits: usize) -> Self {
        Circuit { qubits, placements: Vec::new() }
    }

    pub fn push(&mut self, offset: usize, gate: Gate) {
        debug_assert!(offset + gate.width() <= self.qubits);
        self.placements.push(Placement { offset, gate });
    }

    pub fn fits(&self) -> bool {
        self.placements.iter().all(|p| p.offset + p.gate.width() <= self.qubits)
    }

    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    pub fn apply(&self, state: &mut [C64]) {
        for p in &self.placements {
            apply_gate(state, self.qubits, p.offset, p.gate);
        }
    }

    /// `C|0…0⟩`.
    pub fn output(&self) -> Vec<C64> {
        let mut v = vec![ZERO; 1 << self.qubits];
        v[0] = ONE;
        self.apply(&mut v);
        v
    }

    pub fn unitary(&self) -> CMat {
        let d = 1 << self.qubits;
        let mut m = CMat::zeros(d, d);
        for j in 0..d {
            let mut v = vec![ZERO; d];
            v[j] = ONE;
            self.apply(&mut v);
            for (i, x) in v.into_iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        m
    }
}

pub fn apply_gate(state: &mut [C64], qubits: usize, offset: usize, gate: Gate) {
    let bit = 1usize << (qubits - 1 - offset);
    match gate {
        Gate::I => {}
        Gate::H => {
            let s = FRAC_1_SQRT_2;
            for i in 0..state.len() {
                if i & bit == 0 {
                    let (a, b) = (state[i], state[i | bit]);
                    state[i] = (a + b) * s;
                    state[i | bit] = (a - b) * s;
                }
            }
        }
        Gate::T => {
            let w = C64::from_polar(1.0, FRAC_PI_4);
            for (i, x) in state.iter_mut().enumerate() {
                if i & bit != 0 {
                    *x *= w;
                }
            }
        }
        Gate::Cnot => {
            let tgt = bit >> 1;
            for i in 0..state.len() {
                if i & bit != 0 && i & tgt == 0 {
                    state.swap(i, i | tgt);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gates_are_unitary() {
        for g in [Gate::I, Gate::Cnot, Gate::H, Gate::T] {
            assert!(g.matrix().unitarity_defect() < 1e-12);
            assert_eq!(Gate::from_code(g.code()), Some(g));
        }
        assert_eq!(Gate::from_code('9'), None);
    }

    #[test]
    fn placement_matches_kronecker_product() {
        // I ⊗ CNOT on three wires, then H on wire 0.
        let mut c = Circuit::new(3);
        c.push(1, Gate::Cnot);
        c.push(0, Gate::H);
        let expect = &Gate::H.matrix().kron(&CMat::identity(4)) * &CMat::identity(2).kron(&Gate::Cnot.matrix());
        assert!(c.unitary().sub(&expect).max_abs() < 1e-12);
    }

    #[test]
    fn t_to_the_eighth_is_identity() {
        let mut c = Circuit::new(1);
        for _ in 0..8 {
            c.push(0, Gate::T);
        }
        assert!(c.unitary().sub(&CMat::identity(2)).max_abs() < 1e-12);
    }
}
