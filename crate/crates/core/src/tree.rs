//! Exhaustive enumeration of stopping rules on the non-recombining `±Δx`
//! walk, for at most two layers and five steps. Each subtree's set of
//! attainable expected payoffs is built explicitly, so the maximum is taken
//! over every adapted rule rather than by dynamic programming.

use crate::error::{Error, Result};
use crate::grid::{Partition, SpaceTimeGrid};
use crate::layers::{increment_table, potential_table};
use crate::marginals::MarginalFamily;
use rayon::prelude::*;
use std::collections::HashMap;

pub const MAX_DEPTH: usize = 5;

/// Payoff sets keyed by `(lattice offset, remaining steps)`.
type Sets = HashMap<(i64, usize), Vec<f64>>;

struct Walk<'a> {
    centre: usize,
    u0: &'a [f64],
    inc: &'a [f64],
    nx: usize,
}

impl Walk<'_> {
    fn idx(&self, k: i64) -> usize {
        (self.centre as i64 + k) as usize
    }

    fn u0(&self, k: i64) -> f64 {
        self.u0[self.idx(k)]
    }

    fn inc(&self, j: usize, k: i64) -> f64 {
        self.inc[j * self.nx + self.idx(k)]
    }

    /// Single-layer rules: stop now for `U0 + ΔU_1`, or branch.
    fn first_layer(&self, k: i64, r: usize, memo: &mut Sets) -> Vec<f64> {
        if let Some(v) = memo.get(&(k, r)) {
            return v.clone();
        }
        let out = if r == 0 {
            vec![self.u0(k)]
        } else {
            let left = self.first_layer(k - 1, r - 1, memo);
            let right = self.first_layer(k + 1, r - 1, memo);
            let mut v = Vec::with_capacity(1 + left.len() * right.len());
            v.push(self.u0(k) + self.inc(1, k));
            for &a in &left {
                for &b in &right {
                    v.push(0.5 * (a + b));
                }
            }
            v
        };
        memo.insert((k, r), out.clone());
        out
    }

    /// Two-layer rules before the first stop: stop now and continue with any
    /// single-layer rule collecting `ΔU_2` here, or branch.
    fn second_layer(&self, k: i64, r: usize, memo1: &mut Sets, memo2: &mut Sets) -> Vec<f64> {
        if let Some(v) = memo2.get(&(k, r)) {
            return v.clone();
        }
        let out = if r == 0 {
            vec![self.u0(k)]
        } else {
            let after = self.first_layer(k, r, memo1);
            let left = self.second_layer(k - 1, r - 1, memo1, memo2);
            let right = self.second_layer(k + 1, r - 1, memo1, memo2);
            let d = self.inc(2, k);
            let mut v: Vec<f64> = after.iter().map(|&a| a + d).collect();
            for &a in &left {
                for &b in &right {
                    v.push(0.5 * (a + b));
                }
            }
            v
        };
        memo2.insert((k, r), out.clone());
        out
    }
}

fn max_pair_mean(left: &[f64], right: &[f64]) -> f64 {
    left.par_iter()
        .map(|&a| right.iter().fold(f64::NEG_INFINITY, |m, &b| m.max(0.5 * (a + b))))
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// Best expected payoff at `(s_layer, t = depth·Δt, x = 0)` over all adapted
/// stopping rules. The root's rule set is streamed, never stored.
pub fn tree_oracle(
    family: &MarginalFamily,
    partition: &Partition,
    grid: &SpaceTimeGrid,
    depth: usize,
    layer: usize,
) -> Result<f64> {
    if depth > MAX_DEPTH {
        return Err(Error::Resource(format!("tree depth {depth} exceeds {MAX_DEPTH}")));
    }
    if partition.len() > 2 || layer > partition.len() {
        return Err(Error::Resource(format!(
            "tree oracle supports at most two layers, got {} (layer {layer})",
            partition.len()
        )));
    }
    if grid.centre <= depth {
        return Err(Error::Domain("grid too narrow for the requested depth".into()));
    }
    let pots = potential_table(family, partition, grid)?;
    let inc = increment_table(&pots, partition, grid)?;
    let walk = Walk { centre: grid.centre, u0: &pots[0], inc: &inc, nx: grid.nx() };
    let (mut memo1, mut memo2) = (Sets::new(), Sets::new());
    if depth == 0 || layer == 0 {
        return Ok(walk.u0(0));
    }
    let r = depth - 1;
    Ok(match layer {
        1 => {
            let left = walk.first_layer(-1, r, &mut memo1);
            let right = walk.first_layer(1, r, &mut memo1);
            (walk.u0(0) + walk.inc(1, 0)).max(max_pair_mean(&left, &right))
        }
        _ => {
            let left = walk.second_layer(-1, r, &mut memo1, &mut memo2);
            let right = walk.second_layer(1, r, &mut memo1, &mut memo2);
            let after = walk.first_layer(0, depth, &mut memo1);
            let d = walk.inc(2, 0);
            let stop = after.iter().fold(f64::NEG_INFINITY, |m, &a| m.max(a + d));
            stop.max(max_pair_mean(&left, &right))
        }
    })
}

/// Number of single-layer stopping rules on a tree of the given depth.
pub fn rule_count(depth: usize) -> u64 {
    (0..depth).fold(1, |s, _| 1 + s * s)
}
