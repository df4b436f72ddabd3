//! Probabilistic computation tree logic on DTMCs: syntax, parsing, and exact
//! checking backed by qualitative graph analysis and Gauss-Seidel iteration.

mod ast;
mod check;
mod parser;
mod solver;

pub use ast::{Comparator, PathFormula, ProbBound, Property, StateFormula};
pub use check::{check, check_with, CheckResult};
pub use parser::parse_property;
pub use solver::{
    bounded_until_probability, prob01, seq_probability, until_probability,
    until_probability_with, Solution, SolverOptions, SolverStats,
};
