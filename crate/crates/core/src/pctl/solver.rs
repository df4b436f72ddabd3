//! Graph and numeric kernels over sparse transition rows.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::Dtmc;

pub type Rows = [Vec<(usize, f64)>];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Stop once a sweep changes no value by more than this.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-10,
            max_sweeps: 1_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolverStats {
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub values: Vec<f64>,
    pub stats: SolverStats,
}

fn predecessors(rows: &Rows) -> Vec<Vec<usize>> {
    let mut pred = vec![Vec::new(); rows.len()];
    for (s, row) in rows.iter().enumerate() {
        for &(t, _) in row {
            pred[t].push(s);
        }
    }
    pred
}

/// Backward closure of `seed` through predecessors satisfying `through`.
fn backward_closure(pred: &[Vec<usize>], seed: &[bool], through: impl Fn(usize) -> bool) -> Vec<bool> {
    let mut mark = seed.to_vec();
    let mut queue: VecDeque<usize> = (0..seed.len()).filter(|&s| seed[s]).collect();
    while let Some(s) = queue.pop_front() {
        for &p in &pred[s] {
            if !mark[p] && through(p) {
                mark[p] = true;
                queue.push_back(p);
            }
        }
    }
    mark
}

/// States where `a U b` holds with probability exactly 0 and exactly 1.
pub(crate) fn prob01_rows(rows: &Rows, a: &[bool], b: &[bool]) -> (Vec<bool>, Vec<bool>) {
    let pred = predecessors(rows);
    let can_reach = backward_closure(&pred, b, |s| a[s]);
    let prob0: Vec<bool> = can_reach.iter().map(|&r| !r).collect();
    let may_fail = backward_closure(&pred, &prob0, |s| a[s] && !b[s]);
    let prob1 = may_fail.iter().map(|&f| !f).collect();
    (prob0, prob1)
}

pub(crate) fn until_rows(rows: &Rows, a: &[bool], b: &[bool], opts: SolverOptions) -> Result<Solution> {
    let (prob0, prob1) = prob01_rows(rows, a, b);
    let n = rows.len();
    let mut x: Vec<f64> = prob1.iter().map(|&one| if one { 1.0 } else { 0.0 }).collect();
    let maybe: Vec<usize> = (0..n).filter(|&s| !prob0[s] && !prob1[s]).collect();
    if maybe.is_empty() {
        return Ok(Solution {
            values: x,
            stats: SolverStats::default(),
        });
    }

    let mut iterations = 0;
    let mut delta = f64::INFINITY;
    while iterations < opts.max_sweeps {
        iterations += 1;
        delta = 0.0;
        for &s in &maybe {
            let mut diag = 0.0;
            let mut acc = 0.0;
            for &(t, p) in &rows[s] {
                if t == s {
                    diag += p;
                } else {
                    acc += p * x[t];
                }
            }
            let new = acc / (1.0 - diag);
            delta = delta.max((new - x[s]).abs());
            x[s] = new;
        }
        if delta <= opts.tolerance {
            break;
        }
    }
    let residual = maybe
        .iter()
        .map(|&s| {
            let px: f64 = rows[s].iter().map(|&(t, p)| p * x[t]).sum();
            (x[s] - px).abs()
        })
        .fold(0.0, f64::max);
    if delta > opts.tolerance {
        return Err(Error::NoConvergence {
            iterations,
            residual: residual.max(delta),
        });
    }
    for &s in &maybe {
        x[s] = x[s].clamp(0.0, 1.0);
    }
    Ok(Solution {
        values: x,
        stats: SolverStats {
            iterations,
            residual,
        },
    })
}

pub(crate) fn bounded_until_rows(rows: &Rows, a: &[bool], b: &[bool], k: u64) -> Vec<f64> {
    let mut x: Vec<f64> = b.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    let mut next = x.clone();
    for _ in 0..k {
        for s in 0..rows.len() {
            next[s] = if b[s] {
                1.0
            } else if !a[s] {
                0.0
            } else {
                rows[s].iter().map(|&(t, p)| p * x[t]).sum()
            };
        }
        std::mem::swap(&mut x, &mut next);
    }
    x
}

/// Probability of staying in `inv` for the first `k` steps (k + 1 states).
pub(crate) fn bounded_globally_rows(rows: &Rows, inv: &[bool], k: u64) -> Vec<f64> {
    let mut x: Vec<f64> = inv.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    let mut next = x.clone();
    for _ in 0..k {
        for s in 0..rows.len() {
            next[s] = if inv[s] {
                rows[s].iter().map(|&(t, p)| p * x[t]).sum()
            } else {
                0.0
            };
        }
        std::mem::swap(&mut x, &mut next);
    }
    x
}

pub(crate) fn next_rows(rows: &Rows, target: &[bool]) -> Vec<f64> {
    rows.iter()
        .map(|row| row.iter().filter(|&&(t, _)| target[t]).map(|&(_, p)| p).sum())
        .collect()
}

const Q_START: usize = 0;
const Q_SEEN_FIRST: usize = 1;
const Q_ACCEPT: usize = 2;

/// Monitor for "first a, then (at the same time or later) b".
fn monitor_step(q: usize, a: bool, b: bool) -> usize {
    match q {
        Q_START if a && b => Q_ACCEPT,
        Q_START if a => Q_SEEN_FIRST,
        Q_START => Q_START,
        Q_SEEN_FIRST if b => Q_ACCEPT,
        Q_SEEN_FIRST => Q_SEEN_FIRST,
        _ => Q_ACCEPT,
    }
}

/// Reachability of the accepting monitor state in the product of the chain
/// with the three-state sequencing monitor. The monitor reads the label of
/// each state as it is entered, starting with the state itself.
pub(crate) fn seq_rows(rows: &Rows, a: &[bool], b: &[bool], opts: SolverOptions) -> Result<Solution> {
    let n = rows.len();
    let idx = |s: usize, q: usize| s * 3 + q;
    let mut product = Vec::with_capacity(3 * n);
    let mut accept = Vec::with_capacity(3 * n);
    for row in rows {
        for q in 0..3 {
            product.push(
                row.iter()
                    .map(|&(t, p)| (idx(t, monitor_step(q, a[t], b[t])), p))
                    .collect::<Vec<_>>(),
            );
            accept.push(q == Q_ACCEPT);
        }
    }
    let all = vec![true; 3 * n];
    let sol = until_rows(&product, &all, &accept, opts)?;
    let values = (0..n)
        .map(|s| sol.values[idx(s, monitor_step(Q_START, a[s], b[s]))])
        .collect();
    Ok(Solution {
        values,
        stats: sol.stats,
    })
}

/// Prob0 and Prob1 sets of `a U b` on `dtmc`, by graph analysis alone.
pub fn prob01(dtmc: &Dtmc, a: &[bool], b: &[bool]) -> (Vec<bool>, Vec<bool>) {
    prob01_rows(dtmc.rows(), a, b)
}

/// Per-state probability of `a U b`: exact 0/1 on the qualitative sets,
/// Gauss-Seidel on the remaining states.
pub fn until_probability(dtmc: &Dtmc, a: &[bool], b: &[bool]) -> Result<Solution> {
    until_rows(dtmc.rows(), a, b, SolverOptions::default())
}

pub fn until_probability_with(dtmc: &Dtmc, a: &[bool], b: &[bool], opts: SolverOptions) -> Result<Solution> {
    until_rows(dtmc.rows(), a, b, opts)
}

/// Per-state probability of `a U<=k b`.
pub fn bounded_until_probability(dtmc: &Dtmc, a: &[bool], b: &[bool], k: u64) -> Vec<f64> {
    bounded_until_rows(dtmc.rows(), a, b, k)
}

/// Per-state probability of eventually reaching `a` and, from there on,
/// eventually `b`.
pub fn seq_probability(dtmc: &Dtmc, a: &[bool], b: &[bool]) -> Result<Solution> {
    seq_rows(dtmc.rows(), a, b, SolverOptions::default())
}
