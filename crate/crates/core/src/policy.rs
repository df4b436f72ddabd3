//! Feed-forward policy networks.
//!
//! A policy is a stack of affine layers with rectifier activations between
//! them; the last layer is affine only and yields one logit per action.
//! Action selection takes the maximal logit among the available actions,
//! breaking ties toward the smallest schema index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionId, EnvironmentModel, StateVector};

/// Dense row-major matrix. Row `i` holds the incoming weights of neuron `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// From nested rows; `None` if the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        Some(Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// Row-major iterator over `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.data
            .iter()
            .enumerate()
            .map(move |(k, &v)| (k / self.cols, k % self.cols, v))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Self {
        Layer { weights, bias }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeuralPolicy {
    features: Vec<String>,
    actions: Vec<String>,
    layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyDoc {
    features: Vec<String>,
    actions: Vec<String>,
    layers: Vec<LayerDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

/// Parses a policy document and checks the layer dimension chain.
pub fn load_policy(text: &str) -> Result<NeuralPolicy> {
    let doc: PolicyDoc = serde_json::from_str(text).map_err(Error::from_json)?;
    let mut layers = Vec::with_capacity(doc.layers.len());
    for (i, l) in doc.layers.into_iter().enumerate() {
        let weights = Matrix::from_rows(&l.w).ok_or_else(|| Error::DimensionMismatch {
            layer: i + 1,
            expected: "rectangular weight matrix".into(),
            found: "rows of differing length".into(),
        })?;
        layers.push(Layer::new(weights, l.b));
    }
    NeuralPolicy::new(doc.features, doc.actions, layers)
}

impl NeuralPolicy {
    pub fn new(features: Vec<String>, actions: Vec<String>, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::DimensionMismatch {
                layer: 0,
                expected: "at least one layer".into(),
                found: "none".into(),
            });
        }
        let mut width = features.len();
        for (i, layer) in layers.iter().enumerate() {
            let (rows, cols) = (layer.weights.rows(), layer.weights.cols());
            if rows == 0 || cols != width {
                return Err(Error::DimensionMismatch {
                    layer: i + 1,
                    expected: format!("weights with {width} columns"),
                    found: format!("{rows}x{cols}"),
                });
            }
            if layer.bias.len() != rows {
                return Err(Error::DimensionMismatch {
                    layer: i + 1,
                    expected: format!("bias of length {rows}"),
                    found: format!("length {}", layer.bias.len()),
                });
            }
            width = rows;
        }
        if width != actions.len() {
            return Err(Error::DimensionMismatch {
                layer: layers.len(),
                expected: format!("{} outputs (one per action)", actions.len()),
                found: format!("{width} outputs"),
            });
        }
        Ok(NeuralPolicy {
            features,
            actions,
            layers,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.features
    }

    pub fn action_names(&self) -> &[String] {
        &self.actions
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.features.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f == name)
    }

    pub fn to_document(&self) -> String {
        let doc = PolicyDoc {
            features: self.features.clone(),
            actions: self.actions.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerDoc {
                    w: l.weights.to_rows(),
                    b: l.bias.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("policy serialization is infallible")
    }

    /// Fails unless feature and action schemas equal the environment's.
    pub fn check_schema(&self, env: &dyn EnvironmentModel) -> Result<()> {
        if self.features != env.feature_schema() {
            return Err(Error::SchemaMismatch(format!(
                "policy features {:?} differ from environment features {:?}",
                self.features,
                env.feature_schema()
            )));
        }
        if self.actions != env.action_schema() {
            return Err(Error::SchemaMismatch(format!(
                "policy actions {:?} differ from environment actions {:?}",
                self.actions,
                env.action_schema()
            )));
        }
        Ok(())
    }

    /// Network output on a factored state. Features enter as reals, unscaled.
    pub fn forward(&self, state: &StateVector) -> Result<Vec<f64>> {
        if state.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                layer: 0,
                expected: format!("input of length {}", self.input_dim()),
                found: format!("length {}", state.dim()),
            });
        }
        let input: Vec<f64> = state.features().iter().map(|&f| f as f64).collect();
        Ok(self.forward_real(&input))
    }

    /// Forward pass on a real-valued input of length `input_dim`.
    ///
    /// Zero weights contribute nothing, not even a signed zero, so a pruned
    /// input column makes the output exactly independent of that input.
    pub fn forward_real(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.input_dim(), "input dimension");
        let last = self.layers.len() - 1;
        let mut x = input.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut out = layer.bias.clone();
            for (i, acc) in out.iter_mut().enumerate() {
                for (&w, &xi) in layer.weights.row(i).iter().zip(&x) {
                    if w != 0.0 {
                        *acc += w * xi;
                    }
                }
                if k != last {
                    *acc = acc.max(0.0);
                }
            }
            x = out;
        }
        x
    }

    pub fn select_action(&self, state: &StateVector, available: &[ActionId]) -> Result<ActionId> {
        let logits = self.forward(state)?;
        masked_argmax(&logits, available)
    }
}

/// Index of the largest logit among `available`; ties go to the smallest
/// index. `available` need not be sorted.
pub fn masked_argmax(logits: &[f64], available: &[ActionId]) -> Result<ActionId> {
    let mut best: Option<ActionId> = None;
    for &a in available {
        let value = *logits.get(a).ok_or_else(|| {
            Error::SchemaMismatch(format!("action index {a} outside {} logits", logits.len()))
        })?;
        best = match best {
            None => Some(a),
            Some(b) => {
                let bv = logits[b];
                if value > bv || (value == bv && a < b) {
                    Some(a)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.ok_or_else(|| Error::InvalidModel("no available action to select".into()))
}
