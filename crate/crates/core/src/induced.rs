//! Construction of the Markov chain induced by a policy on an environment.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::model::{ActionId, Distribution, Dtmc, EnvironmentModel, ExplicitModel, StateVector};
use crate::policy::NeuralPolicy;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildLimits {
    pub max_states: usize,
    pub max_transitions: usize,
}

impl Default for BuildLimits {
    fn default() -> Self {
        BuildLimits {
            max_states: 1_000_000,
            max_transitions: 5_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuildStats {
    pub states: usize,
    pub transitions: usize,
    pub duration: Duration,
}

#[derive(Clone, Debug)]
pub struct BuildResult {
    pub dtmc: Dtmc,
    pub state_index: HashMap<StateVector, usize>,
    /// Action the policy picked in each state, by state index.
    pub choices: Vec<ActionId>,
    pub stats: BuildStats,
}

/// Breadth-first expansion of the states reachable under the policy.
///
/// Every dequeued state is expanded only through the action the policy
/// selects among the available ones. New states get indices in encounter
/// order, so index 0 is the initial state. Hitting a limit is an error; a
/// truncated chain would give wrong probabilities.
pub fn build_induced_dtmc(
    env: &dyn EnvironmentModel,
    policy: &NeuralPolicy,
    limits: BuildLimits,
) -> Result<BuildResult> {
    policy.check_schema(env)?;
    let start = Instant::now();

    let initial = env.initial();
    let mut states = vec![initial.clone()];
    let mut state_index = HashMap::from([(initial, 0usize)]);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut choices = Vec::new();
    let mut transitions = 0usize;

    let mut next = 0;
    while next < states.len() {
        let state = states[next].clone();
        next += 1;

        let available = env.available_actions(&state);
        if available.is_empty() {
            return Err(Error::InvalidModel(format!("deadlock at state {state}")));
        }
        let action = policy.select_action(&state, &available)?;
        let dist = env.successors(&state, action)?;

        let mut row = Vec::with_capacity(dist.len());
        for (target, p) in dist.iter() {
            let idx = match state_index.get(target) {
                Some(&i) => i,
                None => {
                    let i = states.len();
                    states.push(target.clone());
                    state_index.insert(target.clone(), i);
                    i
                }
            };
            row.push((idx, p));
        }
        transitions += row.len();
        if states.len() > limits.max_states || transitions > limits.max_transitions {
            return Err(Error::LimitExceeded {
                states: states.len(),
                transitions,
                max_states: limits.max_states,
                max_transitions: limits.max_transitions,
            });
        }
        rows.push(row);
        labels.push(env.labels(&state));
        choices.push(action);
    }

    let stats = BuildStats {
        states: states.len(),
        transitions,
        duration: start.elapsed(),
    };
    let dtmc = Dtmc::new(states, labels, rows)?;
    Ok(BuildResult {
        dtmc,
        state_index,
        choices,
        stats,
    })
}

impl BuildResult {
    /// The chain as an explicit model with a single action `pi` per state.
    pub fn to_explicit_model(&self, features: Vec<String>) -> Result<ExplicitModel> {
        let dtmc = &self.dtmc;
        let states = (0..dtmc.num_states())
            .map(|i| {
                let support = dtmc
                    .row(i)
                    .iter()
                    .map(|&(t, p)| (dtmc.state(t).clone(), p))
                    .collect();
                Ok((
                    dtmc.state(i).clone(),
                    dtmc.labels(i).clone(),
                    vec![(0, Distribution::new(support)?)],
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        ExplicitModel::from_parts(
            features,
            vec!["pi".to_string()],
            dtmc.state(0).clone(),
            states,
        )
    }
}
