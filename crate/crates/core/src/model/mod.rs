//! Core model types: factored states, distributions, the lazily expandable
//! environment interface, explicit models and induced Markov chains.

mod dtmc;
mod explicit;
mod validate;

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dtmc::Dtmc;
pub use explicit::{load_explicit_model, ExplicitModel, StateParts};
pub use validate::{validate_model, ValidationReport};

/// Tolerance on the sum of a distribution's probabilities.
pub const PROB_TOLERANCE: f64 = 1e-9;

/// Index into an environment's action schema.
pub type ActionId = usize;

pub type LabelSet = BTreeSet<String>;

/// A factored state: one integer per feature, in schema order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(pub Vec<i64>);

impl StateVector {
    pub fn new(features: impl Into<Vec<i64>>) -> Self {
        StateVector(features.into())
    }

    pub fn features(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<i64>> for StateVector {
    fn from(v: Vec<i64>) -> Self {
        StateVector(v)
    }
}

impl<const N: usize> From<[i64; N]> for StateVector {
    fn from(v: [i64; N]) -> Self {
        StateVector(v.to_vec())
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "]")
    }
}

/// A finite probability distribution over successor states.
///
/// Construction checks that every probability is positive, that no target
/// appears twice and that the probabilities sum to one within
/// [`PROB_TOLERANCE`]. The support order is preserved as given.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    support: Vec<(StateVector, f64)>,
}

impl Distribution {
    pub fn new(support: Vec<(StateVector, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidModel("empty distribution".into()));
        }
        let mut seen = HashSet::with_capacity(support.len());
        let mut sum = 0.0;
        for (target, p) in &support {
            if !(*p > 0.0 && *p <= 1.0 + PROB_TOLERANCE) {
                return Err(Error::InvalidModel(format!(
                    "probability {p} of target {target} is outside (0, 1]"
                )));
            }
            if !seen.insert(target) {
                return Err(Error::InvalidModel(format!(
                    "duplicate target {target} in distribution"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidModel(format!(
                "distribution sums to {sum}, expected 1"
            )));
        }
        Ok(Distribution { support })
    }

    /// Dirac distribution on `target`.
    pub fn point(target: StateVector) -> Self {
        Distribution {
            support: vec![(target, 1.0)],
        }
    }

    pub fn support(&self) -> &[(StateVector, f64)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StateVector, f64)> {
        self.support.iter().map(|(s, p)| (s, *p))
    }

    pub fn total(&self) -> f64 {
        self.support.iter().map(|(_, p)| p).sum()
    }
}

/// A lazily expandable MDP.
///
/// Implementations must be pure: equal inputs always give identical outputs,
/// including the order of distribution supports. `successors` is defined
/// exactly for the actions returned by `available_actions`.
pub trait EnvironmentModel: Send + Sync {
    fn feature_schema(&self) -> &[String];

    fn action_schema(&self) -> &[String];

    fn initial(&self) -> StateVector;

    /// Available actions in ascending schema order.
    fn available_actions(&self, state: &StateVector) -> Vec<ActionId>;

    fn successors(&self, state: &StateVector, action: ActionId) -> Result<Distribution>;

    fn labels(&self, state: &StateVector) -> LabelSet;

    /// Stored for completeness; the property checker never reads it.
    fn reward(&self, _state: &StateVector, _action: ActionId) -> f64 {
        0.0
    }

    /// States declared up front, if the model has an explicit state list.
    fn declared_states(&self) -> Option<Vec<StateVector>> {
        None
    }

    fn action_name(&self, action: ActionId) -> &str {
        &self.action_schema()[action]
    }

    fn action_id(&self, name: &str) -> Option<ActionId> {
        self.action_schema().iter().position(|a| a == name)
    }
}
