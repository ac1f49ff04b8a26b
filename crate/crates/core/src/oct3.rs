//! Exact optimal depth-3 trees by root-feature decomposition.
//!
//! Fixing the root feature `i` splits the node into two halves whose
//! depth-2 subtrees are independent, so the depth-3 optimum is
//! `min_i [oct2(half 0) + oct2(half 1)]`. This avoids materializing the
//! cubic cost tensor of the direct formulation.

use serde::{Deserialize, Serialize};

use crate::data::BinaryDataset;
use crate::loss::{build_cost_table, LeafCostTable, LossKind};
use crate::oct2::{best_root, root_options, Oct2Config, RootOptions};
use crate::{Error, Result};

/// Largest feature count accepted by [`brute_force_oct3`] (`p⁷` trees).
pub const BRUTE_FORCE_MAX_FEATURES: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Oct3Solution {
    pub root: usize,
    /// Split features of the depth-1 nodes (left, right).
    pub level2: [usize; 2],
    /// Split features of the four depth-2 nodes, left to right.
    pub level3: [usize; 4],
    pub objective: f64,
    /// Loss components of the eight leaves, left to right.
    pub leaf_costs: [f64; 8],
}

/// Per-root candidates of one half and its cost table (none if empty).
type Half = (Vec<Option<RootOptions>>, Option<LeafCostTable>);

/// Depth-2 candidates of one half, or `None` if the half admits no tree.
fn half_options(
    ds: &BinaryDataset,
    half: &[usize],
    loss: LossKind,
    norm_n: usize,
    cfg: &Oct2Config,
) -> Option<Half> {
    let p = ds.n_features();
    if half.is_empty() {
        // every tree scores 0 on no data
        let ok = cfg.n_int == 0 && cfg.n_leaf == 0;
        return ok.then(|| (vec![Some(RootOptions::empty(p)); p], None));
    }
    let table = build_cost_table(ds, half, loss, norm_n);
    let opts = root_options(&table, cfg);
    opts.iter()
        .any(Option::is_some)
        .then_some((opts, Some(table)))
}

fn half_min(opts: &[Option<RootOptions>]) -> f64 {
    opts.iter()
        .flatten()
        .map(RootOptions::min)
        .reduce(f64::min)
        .expect("feasible half")
}

fn leaf_costs(table: &Option<LeafCostTable>, j: usize, k: usize, l: usize) -> [f64; 4] {
    match table {
        None => [0.0; 4],
        Some(t) => [
            t.cost(j, k, false, false),
            t.cost(j, k, false, true),
            t.cost(j, l, true, false),
            t.cost(j, l, true, true),
        ],
    }
}

/// Solves the depth-3 problem on `subset` (non-empty). Size constraints are
/// applied level-wise: `n_int` to the nodes at depths 1 and 2, `n_leaf` to
/// the leaves. Returns `None` when no tree satisfies them.
///
/// The objective of a tree is `(left half) + (right half)` with each half
/// summed as in [`solve_oct2`](crate::oct2::solve_oct2). Coordinates are fixed in the order
/// `root, level2[0], level2[1], level3[0..4]`, each time taking the
/// smallest index that can still reach the optimum; since rounded addition
/// is monotone this reproduces enumeration order exactly.
pub fn solve_oct3(
    ds: &BinaryDataset,
    subset: &[usize],
    loss: LossKind,
    cfg: &Oct2Config,
) -> Option<Oct3Solution> {
    let norm = subset.len();
    let mut best: Option<(f64, usize, [Half; 2])> = None;
    for i in 0..ds.n_features() {
        let (ones, zeros): (Vec<usize>, Vec<usize>) = subset.iter().partition(|&&t| ds.value(t, i));
        if cfg.n_int > zeros.len().min(ones.len()) {
            continue;
        }
        let Some(l) = half_options(ds, &zeros, loss, norm, cfg) else {
            continue;
        };
        let Some(r) = half_options(ds, &ones, loss, norm, cfg) else {
            continue;
        };
        let objective = half_min(&l.0) + half_min(&r.0);
        if best.as_ref().is_none_or(|b| objective < b.0) {
            best = Some((objective, i, [l, r]));
        }
    }
    let (target, root, [(lo, lt), (ro, rt)]) = best?;
    let b_min = half_min(&ro);
    let (jl, _) = best_root(&lo, |a| a + b_min).filter(|(_, v)| *v == target)?;
    let a_min = lo[jl].as_ref()?.min();
    let jr = ro
        .iter()
        .position(|o| o.as_ref().is_some_and(|o| a_min + o.min() == target))?;
    let b_jr = ro[jr].as_ref()?.min();
    let (k1, k2, a) = lo[jl].as_ref()?.select(|a| a + b_jr, target)?;
    let (k3, k4, b) = ro[jr].as_ref()?.select(|b| a + b, target)?;
    let mut costs = [0.0; 8];
    costs[..4].copy_from_slice(&leaf_costs(&lt, jl, k1, k2));
    costs[4..].copy_from_slice(&leaf_costs(&rt, jr, k3, k4));
    Some(Oct3Solution {
        root,
        level2: [jl, jr],
        level3: [k1, k2, k3, k4],
        objective: a + b,
        leaf_costs: costs,
    })
}

/// Enumerates all `p⁷` depth-3 trees, routing datapoints directly. Ties go
/// to the lexicographically smallest `(root, level2, level3)` tuple.
pub fn brute_force_oct3(
    ds: &BinaryDataset,
    subset: &[usize],
    loss: LossKind,
) -> Result<Oct3Solution> {
    let p = ds.n_features();
    if p > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::InvalidArgument(format!(
            "brute-force depth-3 search limited to {BRUTE_FORCE_MAX_FEATURES} features, got {p}"
        )));
    }
    let norm = subset.len();
    let n_classes = ds.n_classes();
    let mut leaves = vec![vec![0usize; n_classes]; 8];
    let mut best: Option<Oct3Solution> = None;
    let total = p.pow(7);
    for code in 0..total {
        // digits, most significant first: i, jL, jR, k1, k2, k3, k4
        let mut f = [0usize; 7];
        let mut rest = code;
        for d in (0..7).rev() {
            f[d] = rest % p;
            rest /= p;
        }
        for leaf in leaves.iter_mut() {
            leaf.iter_mut().for_each(|c| *c = 0);
        }
        for &t in subset {
            let a = ds.value(t, f[0]) as usize;
            let b = ds.value(t, f[1 + a]) as usize;
            let c = ds.value(t, f[3 + 2 * a + b]) as usize;
            leaves[4 * a + 2 * b + c][ds.label(t)] += 1;
        }
        let c: [f64; 8] = std::array::from_fn(|t| loss.leaf_cost(&leaves[t], norm));
        let objective = ((c[0] + c[1]) + (c[2] + c[3])) + ((c[4] + c[5]) + (c[6] + c[7]));
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(Oct3Solution {
                root: f[0],
                level2: [f[1], f[2]],
                level3: [f[3], f[4], f[5], f[6]],
                objective,
                leaf_costs: c,
            });
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("no features".into()))
}
