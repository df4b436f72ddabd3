//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safeprune::model::{load_explicit_model, Dtmc, ExplicitModel};
use safeprune::pctl::StateFormula;
use safeprune::policy::{Layer, Matrix, NeuralPolicy};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

pub fn fixture_model(name: &str) -> ExplicitModel {
    load_explicit_model(&fixture_text(name)).unwrap()
}

pub const AVOID_3X3: &str =
    "builtin:avoidance?width=3&height=3&agent_start=1,1&obstacle_start=2,2&obstacle_move_prob=0.5";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random chain over labels `a` and `b`: up to `max_states` states, each
/// with 1..=3 distinct successors and weights drawn from 1..=9.
pub fn random_dtmc(rng: &mut ChaCha8Rng, max_states: usize) -> Dtmc {
    let n = rng.gen_range(1..=max_states);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.gen_range(1..=3.min(n));
        let mut targets = BTreeSet::new();
        while targets.len() < k {
            targets.insert(rng.gen_range(0..n));
        }
        let weights: Vec<u32> = (0..k).map(|_| rng.gen_range(1..=9)).collect();
        let total: u32 = weights.iter().sum();
        rows.push(
            targets
                .into_iter()
                .zip(weights)
                .map(|(t, w)| (t, w as f64 / total as f64))
                .collect(),
        );
        let mut l = Vec::new();
        if rng.gen_bool(0.4) {
            l.push("a");
        }
        if rng.gen_bool(0.3) {
            l.push("b");
        }
        labels.push(l);
    }
    Dtmc::from_rows(rows, labels).unwrap()
}

pub fn random_state_formula(rng: &mut ChaCha8Rng, depth: u32) -> String {
    let leaf = depth == 0 || rng.gen_bool(0.5);
    if leaf {
        return match rng.gen_range(0..6) {
            0 => "true".into(),
            1 => "false".into(),
            2 | 3 => "\"a\"".into(),
            _ => "\"b\"".into(),
        };
    }
    match rng.gen_range(0..3) {
        0 => format!("!{}", random_state_formula(rng, depth - 1)),
        1 => format!(
            "({} & {})",
            random_state_formula(rng, depth - 1),
            random_state_formula(rng, depth - 1)
        ),
        _ => format!(
            "({} | {})",
            random_state_formula(rng, depth - 1),
            random_state_formula(rng, depth - 1)
        ),
    }
}

pub fn eval_state(f: &StateFormula, labels: &BTreeSet<String>) -> bool {
    match f {
        StateFormula::True => true,
        StateFormula::False => false,
        StateFormula::Label(l) => labels.contains(l),
        StateFormula::Not(a) => !eval_state(a, labels),
        StateFormula::And(a, b) => eval_state(a, labels) && eval_state(b, labels),
        StateFormula::Or(a, b) => eval_state(a, labels) || eval_state(b, labels),
    }
}

/// Sums the probability of every path of exactly `k` steps from `s` whose
/// state sequence satisfies `accept`. Paths are enumerated one by one.
pub fn enumerate_paths(dtmc: &Dtmc, s: usize, k: u64, accept: &dyn Fn(&[usize]) -> bool) -> f64 {
    fn go(
        dtmc: &Dtmc,
        path: &mut Vec<usize>,
        prob: f64,
        left: u64,
        accept: &dyn Fn(&[usize]) -> bool,
    ) -> f64 {
        if left == 0 {
            return if accept(path) { prob } else { 0.0 };
        }
        let last = *path.last().unwrap();
        let mut total = 0.0;
        for &(t, p) in dtmc.row(last) {
            path.push(t);
            total += go(dtmc, path, prob * p, left - 1, accept);
            path.pop();
        }
        total
    }
    go(dtmc, &mut vec![s], 1.0, k, accept)
}

/// Probability that a path from `s` satisfies `a U<=k b`, by enumeration
/// that stops as soon as the outcome of a path prefix is decided.
pub fn until_by_paths(dtmc: &Dtmc, s: usize, a: &[bool], b: &[bool], k: u64) -> f64 {
    if b[s] {
        return 1.0;
    }
    if !a[s] || k == 0 {
        return 0.0;
    }
    dtmc.row(s)
        .iter()
        .map(|&(t, p)| p * until_by_paths(dtmc, t, a, b, k - 1))
        .sum()
}

/// Probability that the first `k + 1` states from `s` all satisfy `inv`.
pub fn globally_by_paths(dtmc: &Dtmc, s: usize, inv: &[bool], k: u64) -> f64 {
    if !inv[s] {
        return 0.0;
    }
    if k == 0 {
        return 1.0;
    }
    dtmc.row(s)
        .iter()
        .map(|&(t, p)| p * globally_by_paths(dtmc, t, inv, k - 1))
        .sum()
}

fn forward_reach(dtmc: &Dtmc, from: usize, through: &dyn Fn(usize) -> bool) -> HashSet<usize> {
    let mut seen = HashSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(s) = queue.pop_front() {
        if !through(s) {
            continue;
        }
        for &(t, _) in dtmc.row(s) {
            if seen.insert(t) {
                queue.push_back(t);
            }
        }
    }
    seen
}

/// States with probability exactly zero for `a U b`: no `a`-path reaches `b`.
pub fn prob0_oracle(dtmc: &Dtmc, a: &[bool], b: &[bool]) -> Vec<bool> {
    (0..dtmc.num_states())
        .map(|s| {
            !forward_reach(dtmc, s, &|u| a[u] && !b[u])
                .into_iter()
                .any(|u| b[u])
        })
        .collect()
}

/// States with probability exactly one for `a U b`: every state reachable
/// while staying in `a` and outside `b` can still reach `b`, and no path
/// leaves `a` without meeting `b`.
pub fn prob1_oracle(dtmc: &Dtmc, a: &[bool], b: &[bool]) -> Vec<bool> {
    let zero = prob0_oracle(dtmc, a, b);
    (0..dtmc.num_states())
        .map(|s| {
            forward_reach(dtmc, s, &|u| a[u] && !b[u])
                .into_iter()
                .all(|u| !zero[u])
        })
        .collect()
}

/// Dense policy with weights drawn from [-1, 1].
pub fn random_policy(rng: &mut ChaCha8Rng, features: &[&str], actions: &[&str], hidden: &[usize]) -> NeuralPolicy {
    let mut dims = vec![features.len()];
    dims.extend_from_slice(hidden);
    dims.push(actions.len());
    let layers = dims
        .windows(2)
        .map(|w| {
            let rows: Vec<Vec<f64>> = (0..w[1])
                .map(|_| (0..w[0]).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let bias = (0..w[1]).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Layer::new(Matrix::from_rows(&rows).unwrap(), bias)
        })
        .collect();
    NeuralPolicy::new(
        features.iter().map(|s| s.to_string()).collect(),
        actions.iter().map(|s| s.to_string()).collect(),
        layers,
    )
    .unwrap()
}

/// Plain dense evaluation: ReLU on hidden layers, affine output.
pub fn reference_forward(policy: &NeuralPolicy, input: &[i64]) -> Vec<f64> {
    let mut x: Vec<f64> = input.iter().map(|&v| v as f64).collect();
    let depth = policy.layers().len();
    for (i, layer) in policy.layers().iter().enumerate() {
        let w = layer.weights.to_rows();
        let mut y: Vec<f64> = w
            .iter()
            .zip(&layer.bias)
            .map(|(row, b)| row.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() + b)
            .collect();
        if i + 1 < depth {
            for v in &mut y {
                *v = v.max(0.0);
            }
        }
        x = y;
    }
    x
}

/// First maximum among `available`, in the order given.
pub fn reference_choice(logits: &[f64], available: &[usize]) -> usize {
    let mut best = available[0];
    for &a in &available[1..] {
        if logits[a] > logits[best] {
            best = a;
        }
    }
    best
}

/// Taxi rules written out independently of the library: returns the next
/// state for every available action, in action order.
pub struct TaxiRules {
    pub width: i64,
    pub height: i64,
    pub max_fuel: i64,
    pub station: (i64, i64),
    pub spawn: (i64, i64),
    pub destination: (i64, i64),
    pub jobs_target: i64,
}

impl Default for TaxiRules {
    fn default() -> Self {
        TaxiRules {
            width: 4,
            height: 4,
            max_fuel: 8,
            station: (3, 0),
            spawn: (0, 3),
            destination: (3, 3),
            jobs_target: 2,
        }
    }
}

impl TaxiRules {
    pub fn initial(&self) -> Vec<i64> {
        vec![0, 0, self.max_fuel, 0, 0]
    }

    pub fn moves(&self, s: &[i64]) -> Vec<(usize, Vec<i64>)> {
        let (x, y, fuel, on, jobs) = (s[0], s[1], s[2], s[3], s[4]);
        if fuel == 0 {
            return (0..7).map(|a| (a, s.to_vec())).collect();
        }
        let mut out = Vec::new();
        for (a, (dx, dy)) in [(0, 1), (0, -1), (1, 0), (-1, 0)].into_iter().enumerate() {
            let (nx, ny) = (x + dx, y + dy);
            if nx >= 0 && ny >= 0 && nx < self.width && ny < self.height {
                out.push((a, vec![nx, ny, fuel - 1, on, jobs]));
            }
        }
        if (x, y) == self.spawn && on == 0 {
            out.push((4, vec![x, y, fuel, 1, jobs]));
        }
        if (x, y) == self.destination && on == 1 {
            out.push((5, vec![x, y, fuel, 0, (jobs + 1).min(self.jobs_target)]));
        }
        if (x, y) == self.station {
            out.push((6, vec![x, y, self.max_fuel, on, jobs]));
        }
        out
    }
}

/// Every MDP state reachable from the initial state under any action.
pub fn taxi_reachable_all(rules: &TaxiRules) -> HashSet<Vec<i64>> {
    let mut seen = HashSet::from([rules.initial()]);
    let mut queue = VecDeque::from([rules.initial()]);
    while let Some(s) = queue.pop_front() {
        for (_, t) in rules.moves(&s) {
            if seen.insert(t.clone()) {
                queue.push_back(t);
            }
        }
    }
    seen
}

/// States reachable when `policy` picks the action in each state.
pub fn taxi_reachable_under(rules: &TaxiRules, policy: &NeuralPolicy) -> HashSet<Vec<i64>> {
    let mut seen = HashSet::from([rules.initial()]);
    let mut queue = VecDeque::from([rules.initial()]);
    while let Some(s) = queue.pop_front() {
        let moves = rules.moves(&s);
        let available: Vec<usize> = moves.iter().map(|(a, _)| *a).collect();
        let choice = reference_choice(&reference_forward(policy, &s), &available);
        let next = moves.into_iter().find(|(a, _)| *a == choice).unwrap().1;
        if seen.insert(next.clone()) {
            queue.push_back(next);
        }
    }
    seen
}

/// Avoidance dynamics written out independently: the agent moves (or
/// stays), then the obstacle steps toward it along x first with
/// probability `p`.
pub fn avoidance_step(agent: (i64, i64), obstacle: (i64, i64), p: f64) -> Vec<((i64, i64), f64)> {
    let dx = (agent.0 - obstacle.0).signum();
    let dy = (agent.1 - obstacle.1).signum();
    let moved = if dx != 0 {
        (obstacle.0 + dx, obstacle.1)
    } else {
        (obstacle.0, obstacle.1 + dy)
    };
    if moved == obstacle {
        vec![(obstacle, 1.0)]
    } else {
        vec![(moved, p), (obstacle, 1.0 - p)]
    }
}

/// `P[G<=k !collision]` on the 3x3 avoidance fixture for a deterministic
/// agent rule, by explicit enumeration of every obstacle coin sequence.
pub fn avoidance_safe_prob(
    agent: (i64, i64),
    obstacle: (i64, i64),
    k: u32,
    rule: &dyn Fn((i64, i64), (i64, i64)) -> (i64, i64),
) -> f64 {
    if agent == obstacle {
        return 0.0;
    }
    if k == 0 {
        return 1.0;
    }
    let next_agent = rule(agent, obstacle);
    avoidance_step(next_agent, obstacle, 0.5)
        .into_iter()
        .map(|(o, p)| p * avoidance_safe_prob(next_agent, o, k - 1, rule))
        .sum()
}
