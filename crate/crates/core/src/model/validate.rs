use std::collections::{HashSet, VecDeque};

use serde::Serialize;

use super::{EnvironmentModel, StateVector, PROB_TOLERANCE};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub states: usize,
    pub transitions: usize,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Explores the full MDP (every available action) breadth-first from the
/// initial state and reports structural problems.
///
/// Transitions are counted as (state, action, successor) triples. Exceeding
/// `max_states` is reported as [`Error::LimitExceeded`], not as a violation.
pub fn validate_model(env: &dyn EnvironmentModel, max_states: usize) -> Result<ValidationReport> {
    let dim = env.feature_schema().len();
    let mut report = ValidationReport::default();
    let mut seen: HashSet<StateVector> = HashSet::new();
    let mut queue = VecDeque::new();

    let initial = env.initial();
    seen.insert(initial.clone());
    queue.push_back(initial);

    while let Some(state) = queue.pop_front() {
        if state.dim() != dim {
            report.violations.push(format!(
                "state {state} has {} features, expected {dim}",
                state.dim()
            ));
        }
        let actions = env.available_actions(&state);
        if actions.is_empty() {
            report.violations.push(format!("deadlock at state {state}"));
            continue;
        }
        for action in actions {
            let dist = match env.successors(&state, action) {
                Ok(d) => d,
                Err(e) => {
                    report.violations.push(format!(
                        "bad distribution at state {state}, action `{}`: {e}",
                        env.action_name(action)
                    ));
                    continue;
                }
            };
            let total = dist.total();
            if (total - 1.0).abs() > PROB_TOLERANCE {
                report.violations.push(format!(
                    "distribution at state {state}, action `{}` sums to {total}",
                    env.action_name(action)
                ));
            }
            for (target, _) in dist.iter() {
                report.transitions += 1;
                if !seen.contains(target) {
                    if seen.len() >= max_states {
                        return Err(Error::LimitExceeded {
                            states: seen.len(),
                            transitions: report.transitions,
                            max_states,
                            max_transitions: usize::MAX,
                        });
                    }
                    seen.insert(target.clone());
                    queue.push_back(target.clone());
                }
            }
        }
    }
    report.states = seen.len();

    if let Some(declared) = env.declared_states() {
        for s in declared {
            if !seen.contains(&s) {
                report
                    .violations
                    .push(format!("declared state {s} is unreachable"));
            }
        }
    }
    Ok(report)
}
