//! Solver terms and the SMT-LIB 2 process client.

pub mod sexp;
mod solver;
mod term;

pub use solver::{solver_available, SatResult, SolverConfig, SolverError, SolverSession, Value};
pub use term::{quote_symbol, rebuild, Node, Op, Sort, Term, PRELUDE};
