//! Finite automata with garbage tapes, advised quantum Turing machines, and
//! the gate-level pipeline connecting them.
//!
//! The crate is organised bottom-up:
//!
//! - [`machines`]: the JSON machine model and classical runners.
//! - [`sim`]: measure-many quantum engines (exact and garbage-traced).
//! - [`transforms`]: machine-to-machine constructions.
//! - [`qcompile`]: gate synthesis and the transition-table string format.
//! - [`qtm`]: advised quantum Turing machines.
//! - [`bridges`]: QTM/QFA compilers and family/parameterized-problem plumbing.
//! - [`problems`]: reference families, oracles and automata.

pub mod error;
pub mod linalg;
pub mod machines;
pub mod problems;
pub mod qtm;
pub mod bridges;
pub mod qcompile;
pub mod sim;
pub mod transforms;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::C64;
pub use machines::{
    run_dfa, run_nfa, run_pfa, validate_spec, GarbageMode, HeadMode, Kind, MachineSpec, PfaOptions,
    TransitionRule, ValidationReport, Verdict,
};
pub use stats::{decide, Criterion, Decision, RunStats, StepStat};
pub use qtm::{simulate_qtm, Advice, AdviceFn, QtmRule, QtmRunStats, QtmSpec};
pub use bridges::{qfa_family_to_qtm, qtm_to_qfa_family, BlockSelector, QfaToQtm, QfaToQtmParams};
pub use sim::SimOptions;
pub use problems::{Membership, ZooParams};
