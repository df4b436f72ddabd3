use std::collections::BTreeSet;

use super::{LabelSet, StateVector, PROB_TOLERANCE};
use crate::error::{Error, Result};

/// An explicit discrete-time Markov chain with dense state indices.
///
/// Index 0 is the initial state. Each row is a sparse distribution over
/// state indices, kept in the order the successors were produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Dtmc {
    states: Vec<StateVector>,
    labels: Vec<LabelSet>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Dtmc {
    pub fn new(
        states: Vec<StateVector>,
        labels: Vec<LabelSet>,
        rows: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::InvalidModel("a DTMC needs at least one state".into()));
        }
        if labels.len() != n || rows.len() != n {
            return Err(Error::InvalidModel(format!(
                "{n} states but {} label sets and {} rows",
                labels.len(),
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::InvalidModel(format!("state {i} has an empty row")));
            }
            let mut sum = 0.0;
            let mut seen = BTreeSet::new();
            for &(t, p) in row {
                if t >= n {
                    return Err(Error::InvalidModel(format!(
                        "state {i} references missing state {t}"
                    )));
                }
                if p.is_nan() || p <= 0.0 || !seen.insert(t) {
                    return Err(Error::InvalidModel(format!(
                        "state {i} has an invalid entry ({t}, {p})"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > PROB_TOLERANCE {
                return Err(Error::InvalidModel(format!(
                    "row of state {i} sums to {sum}"
                )));
            }
        }
        Ok(Dtmc {
            states,
            labels,
            rows,
        })
    }

    /// Chain over anonymous states `[0], [1], ...`, handy for fixtures.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, labels: Vec<Vec<&str>>) -> Result<Self> {
        let states = (0..rows.len() as i64).map(|i| StateVector(vec![i])).collect();
        let labels = labels
            .into_iter()
            .map(|ls| ls.into_iter().map(str::to_owned).collect())
            .collect();
        Dtmc::new(states, labels, rows)
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn state(&self, i: usize) -> &StateVector {
        &self.states[i]
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn labels(&self, i: usize) -> &LabelSet {
        &self.labels[i]
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    /// All atomic propositions used by at least one state.
    pub fn alphabet(&self) -> BTreeSet<&str> {
        self.labels
            .iter()
            .flat_map(|ls| ls.iter().map(String::as_str))
            .collect()
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.labels.iter().any(|ls| ls.contains(label))
    }

    /// Membership vector of the states carrying `label`.
    pub fn label_mask(&self, label: &str) -> Vec<bool> {
        self.labels.iter().map(|ls| ls.contains(label)).collect()
    }
}
