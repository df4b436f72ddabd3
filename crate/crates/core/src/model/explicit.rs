use std::collections::{BTreeMap, HashMap};

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use super::{ActionId, Distribution, EnvironmentModel, LabelSet, StateVector, PROB_TOLERANCE};
use crate::error::{Error, Result};

/// Probability as written in a model document: a number or a string holding
/// either a decimal or an exact fraction `num/den`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum ProbDoc {
    Num(f64),
    Text(String),
}

impl ProbDoc {
    fn value(&self) -> std::result::Result<f64, String> {
        match self {
            ProbDoc::Num(p) => Ok(*p),
            ProbDoc::Text(text) => parse_probability(text),
        }
    }
}

fn parse_probability(text: &str) -> std::result::Result<f64, String> {
    let text = text.trim();
    match text.split_once('/') {
        Some((num, den)) => {
            let num: u64 = num
                .trim()
                .parse()
                .map_err(|_| format!("bad fraction numerator in `{text}`"))?;
            let den: u64 = den
                .trim()
                .parse()
                .map_err(|_| format!("bad fraction denominator in `{text}`"))?;
            if den == 0 {
                return Err(format!("zero denominator in `{text}`"));
            }
            Ok(num as f64 / den as f64)
        }
        None => text
            .parse::<f64>()
            .map_err(|_| format!("`{text}` is not a probability")),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub(crate) struct EdgeDoc {
    pub to: Vec<i64>,
    pub p: ProbDoc,
}

#[derive(Clone, Debug, Deserialize)]
pub(crate) struct StateDoc {
    pub s: Vec<i64>,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub act: BTreeMap<String, Vec<EdgeDoc>>,
    #[serde(default)]
    pub rew: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ModelDoc {
    #[serde(default)]
    pub features: Option<Vec<String>>,
    pub actions: Vec<String>,
    pub initial: Vec<i64>,
    pub states: Vec<StateDoc>,
}

#[derive(Clone, Debug, PartialEq)]
struct StateEntry {
    state: StateVector,
    labels: LabelSet,
    /// Ascending by action id.
    actions: Vec<(ActionId, Distribution)>,
    rewards: Vec<(ActionId, f64)>,
}

/// A declared state with its labels and per-action distributions.
pub type StateParts = (StateVector, LabelSet, Vec<(ActionId, Distribution)>);

/// An MDP given as an explicit table of states and transitions.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitModel {
    features: Vec<String>,
    actions: Vec<String>,
    initial: StateVector,
    states: Vec<StateEntry>,
    index: HashMap<StateVector, usize>,
}

/// Parses and validates an explicit model document.
pub fn load_explicit_model(text: &str) -> Result<ExplicitModel> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(Error::from_json)?;
    ExplicitModel::from_doc(doc)
}

impl ExplicitModel {
    pub(crate) fn from_doc(doc: ModelDoc) -> Result<Self> {
        let dim = doc.initial.len();
        let features = match doc.features {
            Some(f) => f,
            None => (0..dim).map(|i| format!("f{i}")).collect(),
        };
        if features.len() != dim {
            return Err(Error::Semantic(format!(
                "initial state has {dim} features but {} are declared",
                features.len()
            )));
        }
        if doc.actions.is_empty() {
            return Err(Error::Semantic("action schema is empty".into()));
        }
        let action_ids: HashMap<&str, ActionId> = doc
            .actions
            .iter()
            .enumerate()
            .map(|(i, a)| (a.as_str(), i))
            .collect();
        if action_ids.len() != doc.actions.len() {
            return Err(Error::Semantic("duplicate action name in schema".into()));
        }

        let mut index = HashMap::with_capacity(doc.states.len());
        for (i, st) in doc.states.iter().enumerate() {
            let sv = StateVector(st.s.clone());
            if sv.dim() != dim {
                return Err(Error::Semantic(format!(
                    "state {sv} has {} features, expected {dim}",
                    sv.dim()
                )));
            }
            if index.insert(sv.clone(), i).is_some() {
                return Err(Error::Semantic(format!("state {sv} is declared twice")));
            }
        }
        let initial = StateVector(doc.initial);
        if !index.contains_key(&initial) {
            return Err(Error::Semantic(format!(
                "initial state {initial} is not declared"
            )));
        }

        let mut states = Vec::with_capacity(doc.states.len());
        for st in doc.states {
            let sv = StateVector(st.s);
            if st.act.is_empty() {
                return Err(Error::Semantic(format!("state {sv} has no actions")));
            }
            let mut actions = Vec::with_capacity(st.act.len());
            for (name, edges) in st.act {
                let id = *action_ids.get(name.as_str()).ok_or_else(|| {
                    Error::Semantic(format!("state {sv} uses undeclared action `{name}`"))
                })?;
                let dist = edges_to_distribution(&sv, &name, edges, &index)?;
                actions.push((id, dist));
            }
            actions.sort_by_key(|(id, _)| *id);
            let mut rewards = Vec::with_capacity(st.rew.len());
            for (name, r) in st.rew {
                let id = *action_ids.get(name.as_str()).ok_or_else(|| {
                    Error::Semantic(format!("reward for undeclared action `{name}` in {sv}"))
                })?;
                rewards.push((id, r));
            }
            rewards.sort_by_key(|(id, _)| *id);
            states.push(StateEntry {
                state: sv,
                labels: st.labels.into_iter().collect(),
                actions,
                rewards,
            });
        }

        Ok(ExplicitModel {
            features,
            actions: doc.actions,
            initial,
            states,
            index,
        })
    }

    /// Builds a model from already validated parts. Every distribution
    /// target must be among `states`.
    pub fn from_parts(
        features: Vec<String>,
        actions: Vec<String>,
        initial: StateVector,
        states: Vec<StateParts>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(states.len());
        let mut entries = Vec::with_capacity(states.len());
        for (i, (state, labels, mut acts)) in states.into_iter().enumerate() {
            if index.insert(state.clone(), i).is_some() {
                return Err(Error::InvalidModel(format!("state {state} is declared twice")));
            }
            acts.sort_by_key(|(id, _)| *id);
            entries.push(StateEntry {
                state,
                labels,
                actions: acts,
                rewards: Vec::new(),
            });
        }
        if !index.contains_key(&initial) {
            return Err(Error::InvalidModel(format!(
                "initial state {initial} is not declared"
            )));
        }
        for e in &entries {
            for (_, d) in &e.actions {
                if let Some((to, _)) = d.iter().find(|(to, _)| !index.contains_key(*to)) {
                    return Err(Error::InvalidModel(format!(
                        "state {} references unknown state {to}",
                        e.state
                    )));
                }
            }
        }
        Ok(ExplicitModel {
            features,
            actions,
            initial,
            states: entries,
            index,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    fn entry(&self, state: &StateVector) -> Option<&StateEntry> {
        self.index.get(state).map(|&i| &self.states[i])
    }

    /// Serializes to the explicit model document format. Probabilities are
    /// written as floats; loading the output reproduces this model exactly.
    pub fn to_document(&self) -> String {
        let out = OutModel {
            features: &self.features,
            actions: &self.actions,
            initial: &self.initial.0,
            states: self
                .states
                .iter()
                .map(|e| OutState {
                    s: &e.state.0,
                    labels: e.labels.iter().map(String::as_str).collect(),
                    act: OrderedActs(
                        e.actions
                            .iter()
                            .map(|(id, d)| (self.actions[*id].as_str(), d))
                            .collect(),
                    ),
                    rew: OrderedRewards(
                        e.rewards
                            .iter()
                            .map(|(id, r)| (self.actions[*id].as_str(), *r))
                            .collect(),
                    ),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&out).expect("model serialization is infallible")
    }
}

fn edges_to_distribution(
    state: &StateVector,
    action: &str,
    edges: Vec<EdgeDoc>,
    index: &HashMap<StateVector, usize>,
) -> Result<Distribution> {
    let mut support = Vec::with_capacity(edges.len());
    let mut sum = 0.0;
    for edge in edges {
        let p = edge
            .p
            .value()
            .map_err(|m| Error::Semantic(format!("state {state}, action `{action}`: {m}")))?;
        let to = StateVector(edge.to);
        if !index.contains_key(&to) {
            return Err(Error::Semantic(format!(
                "state {state}, action `{action}` references unknown state {to}"
            )));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Semantic(format!(
                "state {state}, action `{action}`: probability {p} of {to} is outside (0, 1]"
            )));
        }
        sum += p;
        support.push((to, p));
    }
    if (sum - 1.0).abs() > PROB_TOLERANCE {
        return Err(Error::Semantic(format!(
            "state {state}, action `{action}`: distribution sums to {sum}, expected 1"
        )));
    }
    Distribution::new(support)
        .map_err(|e| Error::Semantic(format!("state {state}, action `{action}`: {e}")))
}

impl EnvironmentModel for ExplicitModel {
    fn feature_schema(&self) -> &[String] {
        &self.features
    }

    fn action_schema(&self) -> &[String] {
        &self.actions
    }

    fn initial(&self) -> StateVector {
        self.initial.clone()
    }

    fn available_actions(&self, state: &StateVector) -> Vec<ActionId> {
        self.entry(state)
            .map(|e| e.actions.iter().map(|(id, _)| *id).collect())
            .unwrap_or_default()
    }

    fn successors(&self, state: &StateVector, action: ActionId) -> Result<Distribution> {
        let entry = self
            .entry(state)
            .ok_or_else(|| Error::InvalidModel(format!("state {state} is not declared")))?;
        entry
            .actions
            .iter()
            .find(|(id, _)| *id == action)
            .map(|(_, d)| d.clone())
            .ok_or_else(|| {
                Error::InvalidModel(format!(
                    "action `{}` is not available in state {state}",
                    self.actions.get(action).map(String::as_str).unwrap_or("?")
                ))
            })
    }

    fn labels(&self, state: &StateVector) -> LabelSet {
        self.entry(state).map(|e| e.labels.clone()).unwrap_or_default()
    }

    fn reward(&self, state: &StateVector, action: ActionId) -> f64 {
        self.entry(state)
            .and_then(|e| e.rewards.iter().find(|(id, _)| *id == action))
            .map(|(_, r)| *r)
            .unwrap_or(0.0)
    }

    fn declared_states(&self) -> Option<Vec<StateVector>> {
        Some(self.states.iter().map(|e| e.state.clone()).collect())
    }
}

// Output-side mirror of the document, keeping action maps in schema order.

#[derive(Serialize)]
pub(crate) struct OutModel<'a> {
    pub features: &'a [String],
    pub actions: &'a [String],
    pub initial: &'a [i64],
    pub states: Vec<OutState<'a>>,
}

#[derive(Serialize)]
pub(crate) struct OutState<'a> {
    pub s: &'a [i64],
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<&'a str>,
    pub act: OrderedActs<'a>,
    #[serde(skip_serializing_if = "OrderedRewards::is_empty")]
    pub rew: OrderedRewards<'a>,
}

pub(crate) struct OrderedActs<'a>(pub Vec<(&'a str, &'a Distribution)>);

impl Serialize for OrderedActs<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (name, dist) in &self.0 {
            let edges: Vec<OutEdge> = dist
                .iter()
                .map(|(to, p)| OutEdge { to: &to.0, p })
                .collect();
            map.serialize_entry(name, &edges)?;
        }
        map.end()
    }
}

pub(crate) struct OrderedRewards<'a>(pub Vec<(&'a str, f64)>);

impl OrderedRewards<'_> {
    fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Serialize for OrderedRewards<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (name, r) in &self.0 {
            map.serialize_entry(name, r)?;
        }
        map.end()
    }
}

#[derive(Serialize)]
struct OutEdge<'a> {
    to: &'a [i64],
    p: f64,
}
