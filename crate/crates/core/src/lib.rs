//! Bounded δ-complete reachability checking for nonlinear hybrid
//! automata.
//!
//! A model is unrolled along every admissible mode path up to a jump
//! bound `k`, each path becomes a conjunctive real constraint system
//! with ODE flow constraints, and a branch-and-prune interval solver
//! either refutes the system or finds a point certifying its
//! δ-weakening. The answer is `safe` or `δ-unsafe` with a witness
//! trajectory.

// `!(a <= b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Interval keeps named arithmetic methods next to the operator impls.
#![allow(clippy::should_implement_trait)]

pub mod automaton;
pub mod checker;
pub mod enclosure;
pub mod encoder;
pub mod expr;
pub mod formula;
pub mod interval;
pub mod parse;
pub mod reference;
pub mod sentence;
pub mod solver;

pub use automaton::{parse_model, HybridAutomaton, Jump, Mode, ModePath, ModelError, StateVar};
pub use formula::{Atom, Formula, Rel, Term};
pub use interval::{Interval, IntervalBox};
