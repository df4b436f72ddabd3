use log::warn;
use serde::Serialize;

use super::ast::{PathFormula, ProbBound, Property, StateFormula};
use super::solver::{
    bounded_globally_rows, bounded_until_rows, next_rows, seq_rows, until_rows, Solution,
    SolverOptions, SolverStats,
};
use crate::error::Result;
use crate::model::Dtmc;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    /// Probability of the path formula from the initial state.
    pub probability: f64,
    /// Comparison verdict for bounded properties, `None` for `=?` queries.
    pub satisfied: Option<bool>,
    #[serde(skip)]
    pub state_values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub warnings: Vec<String>,
}

struct Checker<'a> {
    dtmc: &'a Dtmc,
    warnings: Vec<String>,
}

impl Checker<'_> {
    fn states(&mut self, f: &StateFormula) -> Vec<bool> {
        let n = self.dtmc.num_states();
        match f {
            StateFormula::True => vec![true; n],
            StateFormula::False => vec![false; n],
            StateFormula::Label(l) => {
                if !self.dtmc.has_label(l) {
                    let msg = format!("label \"{l}\" does not occur in the model; treating it as empty");
                    warn!("{msg}");
                    if !self.warnings.contains(&msg) {
                        self.warnings.push(msg);
                    }
                }
                self.dtmc.label_mask(l)
            }
            StateFormula::Not(a) => self.states(a).into_iter().map(|x| !x).collect(),
            StateFormula::And(a, b) => {
                let (a, b) = (self.states(a), self.states(b));
                a.into_iter().zip(b).map(|(x, y)| x && y).collect()
            }
            StateFormula::Or(a, b) => {
                let (a, b) = (self.states(a), self.states(b));
                a.into_iter().zip(b).map(|(x, y)| x || y).collect()
            }
        }
    }

    fn exact(values: Vec<f64>) -> Solution {
        Solution {
            values,
            stats: SolverStats::default(),
        }
    }

    fn path(&mut self, path: &PathFormula, opts: SolverOptions) -> Result<Solution> {
        let rows = self.dtmc.rows();
        let all = vec![true; self.dtmc.num_states()];
        Ok(match path {
            PathFormula::Next(f) => {
                let target = self.states(f);
                Self::exact(next_rows(rows, &target))
            }
            PathFormula::Until { left, right, bound } => {
                let (a, b) = (self.states(left), self.states(right));
                match bound {
                    Some(k) => Self::exact(bounded_until_rows(rows, &a, &b, *k)),
                    None => until_rows(rows, &a, &b, opts)?,
                }
            }
            PathFormula::Eventually { target, bound } => {
                let b = self.states(target);
                match bound {
                    Some(k) => Self::exact(bounded_until_rows(rows, &all, &b, *k)),
                    None => until_rows(rows, &all, &b, opts)?,
                }
            }
            PathFormula::Globally { invariant, bound } => {
                let inv = self.states(invariant);
                match bound {
                    Some(k) => Self::exact(bounded_globally_rows(rows, &inv, *k)),
                    None => {
                        let bad: Vec<bool> = inv.iter().map(|x| !x).collect();
                        let mut sol = until_rows(rows, &all, &bad, opts)?;
                        for v in &mut sol.values {
                            *v = 1.0 - *v;
                        }
                        sol
                    }
                }
            }
            PathFormula::Seq(first, second) => {
                let (a, b) = (self.states(first), self.states(second));
                seq_rows(rows, &a, &b, opts)?
            }
        })
    }
}

/// Checks a property on `dtmc`, reporting the value at the initial state.
///
/// Labels missing from the chain denote the empty set; each one produces a
/// warning instead of an error.
pub fn check(dtmc: &Dtmc, property: &Property) -> Result<CheckResult> {
    check_with(dtmc, property, SolverOptions::default())
}

pub fn check_with(dtmc: &Dtmc, property: &Property, opts: SolverOptions) -> Result<CheckResult> {
    let mut checker = Checker {
        dtmc,
        warnings: Vec::new(),
    };
    let sol = checker.path(&property.path, opts)?;
    let probability = sol.values[0];
    let satisfied = match property.bound {
        ProbBound::Query => None,
        ProbBound::Compare(cmp, threshold) => Some(cmp.holds(probability, threshold)),
    };
    Ok(CheckResult {
        probability,
        satisfied,
        state_values: sol.values,
        iterations: sol.stats.iterations,
        residual: sol.stats.residual,
        warnings: checker.warnings,
    })
}
