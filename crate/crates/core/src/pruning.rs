//! Pruning operators and the masks recording which connections they removed.
//!
//! Layers and matrix coordinates are 1-based throughout: `(k, i, j)` names
//! the weight from neuron `j` of layer `k - 1` into neuron `i` of layer `k`.
//! Fractions are taken of the layer's currently nonzero weights.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::NeuralPolicy;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum PruneSpec {
    L1 { layer: usize, fraction: f64 },
    Random { layer: usize, fraction: f64, seed: u64 },
    Feature { feature: String },
}

impl PruneSpec {
    pub fn method_name(&self) -> &'static str {
        match self {
            PruneSpec::L1 { .. } => "l1",
            PruneSpec::Random { .. } => "random",
            PruneSpec::Feature { .. } => "feature",
        }
    }

    pub fn validate(&self, policy: &NeuralPolicy) -> Result<()> {
        match self {
            PruneSpec::L1 { layer, fraction } | PruneSpec::Random { layer, fraction, .. } => {
                if *layer < 1 || *layer > policy.depth() {
                    return Err(Error::InvalidPruneSpec(format!(
                        "layer {layer} outside 1..={}",
                        policy.depth()
                    )));
                }
                if !(0.0..=1.0).contains(fraction) {
                    return Err(Error::InvalidPruneSpec(format!(
                        "fraction {fraction} outside [0, 1]"
                    )));
                }
                Ok(())
            }
            PruneSpec::Feature { feature } => policy
                .feature_index(feature)
                .map(|_| ())
                .ok_or_else(|| Error::UnknownFeature(feature.clone())),
        }
    }
}

/// 1-based `(layer, row, column)`.
pub type Coord = (usize, usize, usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneMask {
    pub spec: PruneSpec,
    pub zeroed: BTreeSet<Coord>,
}

impl PruneMask {
    pub fn len(&self) -> usize {
        self.zeroed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeroed.is_empty()
    }

    pub fn to_document(&self) -> String {
        serde_json::to_string_pretty(self).expect("mask serialization is infallible")
    }

    pub fn from_document(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(Error::from_json)
    }
}

/// Number of weights to prune: `p * n` rounded half up, at most `n`.
pub fn prune_count(fraction: f64, nonzero: usize) -> usize {
    ((fraction * nonzero as f64 + 0.5).floor() as usize).min(nonzero)
}

/// Copy of `policy` with every masked weight set to zero.
pub fn apply_mask(policy: &NeuralPolicy, zeroed: &BTreeSet<Coord>) -> Result<NeuralPolicy> {
    let mut out = policy.clone();
    let layers = out.layers_mut();
    for &(k, i, j) in zeroed {
        let layer = k
            .checked_sub(1)
            .and_then(|k| layers.get_mut(k))
            .ok_or_else(|| Error::InvalidPruneSpec(format!("mask layer {k} out of range")))?;
        if i < 1 || j < 1 || i > layer.weights.rows() || j > layer.weights.cols() {
            return Err(Error::InvalidPruneSpec(format!(
                "mask coordinate ({k},{i},{j}) out of range"
            )));
        }
        layer.weights.set(i - 1, j - 1, 0.0);
    }
    Ok(out)
}

fn nonzero_entries(policy: &NeuralPolicy, layer: usize) -> Vec<(usize, usize, f64)> {
    policy.layers()[layer - 1]
        .weights
        .entries()
        .filter(|&(_, _, w)| w != 0.0)
        .collect()
}

fn finish(policy: &NeuralPolicy, spec: PruneSpec, zeroed: BTreeSet<Coord>) -> Result<(NeuralPolicy, PruneMask)> {
    let pruned = apply_mask(policy, &zeroed)?;
    Ok((pruned, PruneMask { spec, zeroed }))
}

/// Zeroes the `round_half_up(p * n)` smallest-magnitude nonzero weights of
/// layer `layer`; equal magnitudes go in (row, column) order.
pub fn l1_prune(policy: &NeuralPolicy, layer: usize, fraction: f64) -> Result<(NeuralPolicy, PruneMask)> {
    let spec = PruneSpec::L1 { layer, fraction };
    spec.validate(policy)?;
    let mut entries = nonzero_entries(policy, layer);
    let count = prune_count(fraction, entries.len());
    entries.sort_by(|a, b| {
        a.2.abs()
            .total_cmp(&b.2.abs())
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    let zeroed = entries[..count]
        .iter()
        .map(|&(i, j, _)| (layer, i + 1, j + 1))
        .collect();
    finish(policy, spec, zeroed)
}

/// Zeroes `round_half_up(p * n)` nonzero weights of `layer` drawn uniformly
/// without replacement by a ChaCha8 generator seeded with `seed`.
pub fn random_prune(
    policy: &NeuralPolicy,
    layer: usize,
    fraction: f64,
    seed: u64,
) -> Result<(NeuralPolicy, PruneMask)> {
    let spec = PruneSpec::Random {
        layer,
        fraction,
        seed,
    };
    spec.validate(policy)?;
    let entries = nonzero_entries(policy, layer);
    let count = prune_count(fraction, entries.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zeroed = rand::seq::index::sample(&mut rng, entries.len(), count)
        .into_iter()
        .map(|idx| {
            let (i, j, _) = entries[idx];
            (layer, i + 1, j + 1)
        })
        .collect();
    finish(policy, spec, zeroed)
}

/// Cuts every outgoing connection of the named input feature, i.e. zeroes
/// its whole column in the first layer.
pub fn feature_prune(policy: &NeuralPolicy, feature: &str) -> Result<(NeuralPolicy, PruneMask)> {
    let spec = PruneSpec::Feature {
        feature: feature.to_string(),
    };
    spec.validate(policy)?;
    let col = policy.feature_index(feature).expect("validated");
    let rows = policy.layers()[0].weights.rows();
    let zeroed = (1..=rows).map(|i| (1, i, col + 1)).collect();
    finish(policy, spec, zeroed)
}

pub fn prune(policy: &NeuralPolicy, spec: &PruneSpec) -> Result<(NeuralPolicy, PruneMask)> {
    match spec {
        PruneSpec::L1 { layer, fraction } => l1_prune(policy, *layer, *fraction),
        PruneSpec::Random {
            layer,
            fraction,
            seed,
        } => random_prune(policy, *layer, *fraction, *seed),
        PruneSpec::Feature { feature } => feature_prune(policy, feature),
    }
}
