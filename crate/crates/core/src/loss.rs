//! Leaf-rule counting and per-leaf loss components.
//!
//! For a node subset, a leaf decision rule `{x_j = r AND x_k = s}` selects
//! the datapoints that would reach one leaf of a depth-2 tree rooted at the
//! node. [`build_cost_table`] evaluates the loss component of all `4·p²`
//! rules at once so the depth-2 problem can be solved by table lookups.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitset::BitSet;
use crate::data::BinaryDataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Misclassification,
    Gini,
}

impl LossKind {
    /// Loss contributed by a leaf holding `per_class` datapoints, normalized
    /// by `norm_n`. An empty leaf contributes 0.
    #[inline]
    pub fn leaf_cost(self, per_class: &[usize], norm_n: usize) -> f64 {
        debug_assert!(norm_n >= 1);
        let total: usize = per_class.iter().sum();
        if total == 0 {
            return 0.0;
        }
        let norm = norm_n as f64;
        match self {
            LossKind::Misclassification => {
                let max = per_class.iter().copied().max().unwrap_or(0);
                (total - max) as f64 / norm
            }
            LossKind::Gini => {
                // t (1 - sum (c/t)^2) = (t^2 - sum c^2) / t, numerator exact
                let sum_sq: u64 = per_class.iter().map(|&c| (c as u64) * (c as u64)).sum();
                let t = total as u64;
                ((t * t - sum_sq) as f64 / t as f64) / norm
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Misclassification => "misclassification",
            LossKind::Gini => "gini",
        }
    }
}

/// Datapoints of a subset satisfying one leaf decision rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleCounts {
    pub total: usize,
    pub per_class: Vec<usize>,
}

/// Counts the subset datapoints with `x_j = r AND x_k = s`, per class.
pub fn rule_counts(
    ds: &BinaryDataset,
    subset: &[usize],
    j: usize,
    k: usize,
    r: bool,
    s: bool,
) -> RuleCounts {
    let mut per_class = vec![0; ds.n_classes()];
    for &i in subset {
        if ds.value(i, j) == r && ds.value(i, k) == s {
            per_class[ds.label(i)] += 1;
        }
    }
    RuleCounts {
        total: per_class.iter().sum(),
        per_class,
    }
}

pub fn leaf_cost(counts: &RuleCounts, norm_n: usize, loss: LossKind) -> f64 {
    loss.leaf_cost(&counts.per_class, norm_n)
}

/// Index of the first maximum, i.e. majority label with lowest-id tie-break.
pub fn majority(per_class: &[usize]) -> usize {
    let mut best = 0;
    for (c, &v) in per_class.iter().enumerate() {
        if v > per_class[best] {
            best = c;
        }
    }
    best
}

/// Datapoints misclassified by the majority label.
pub fn misclassified(per_class: &[usize]) -> usize {
    let total: usize = per_class.iter().sum();
    total - per_class.iter().copied().max().unwrap_or(0)
}

/// A node subset re-packed into dense bitsets: bit `t` of each column is the
/// feature value of the `t`-th subset datapoint.
pub(crate) struct PackedSubset {
    pub columns: Vec<BitSet>,
    pub class_masks: Vec<BitSet>,
    pub class_totals: Vec<usize>,
    /// `ones[j][c]`: datapoints of class `c` with `x_j = 1`.
    pub ones: Vec<Vec<usize>>,
    pub len: usize,
}

impl PackedSubset {
    pub fn new(ds: &BinaryDataset, subset: &[usize]) -> Self {
        let m = subset.len();
        let full = m == ds.n() && subset.iter().enumerate().all(|(t, &i)| t == i);
        let columns: Vec<BitSet> = if full {
            (0..ds.n_features()).map(|j| ds.column(j).clone()).collect()
        } else {
            ds.gather_columns(subset)
        };
        let mut class_masks = vec![BitSet::new(m); ds.n_classes()];
        let mut class_totals = vec![0; ds.n_classes()];
        for (t, &i) in subset.iter().enumerate() {
            let c = ds.label(i);
            class_masks[c].insert(t);
            class_totals[c] += 1;
        }
        let ones = columns
            .iter()
            .map(|col| class_masks.iter().map(|mask| col.and_count(mask)).collect())
            .collect();
        PackedSubset {
            columns,
            class_masks,
            class_totals,
            ones,
            len: m,
        }
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    /// `x_j AND class c` for every class, reused across the pairs of row `j`.
    pub fn row_masks(&self, j: usize) -> Vec<BitSet> {
        self.class_masks
            .iter()
            .map(|m| self.columns[j].and(m))
            .collect()
    }

    /// Per-class counts of the four cells `(x_j, x_k) ∈ {0,1}²`, indexed
    /// `2r + s`. `masks` comes from [`PackedSubset::row_masks`]`(j)`.
    pub fn pair_counts(&self, masks: &[BitSet], j: usize, k: usize, out: &mut [Vec<usize>; 4]) {
        for (c, mask) in masks.iter().enumerate() {
            let oj = self.ones[j][c];
            let both = if j == k {
                oj
            } else {
                mask.and_count(&self.columns[k])
            };
            let ok = self.ones[k][c];
            out[3][c] = both;
            out[2][c] = oj - both;
            out[1][c] = ok - both;
            out[0][c] = self.class_totals[c] + both - oj - ok;
        }
    }
}

/// Precomputed loss components `cost[j][k][r][s]` and the counts needed for
/// minimum node-size constraints, for one node subset.
#[derive(Clone, Debug)]
pub struct LeafCostTable {
    pub p: usize,
    pub norm_n: usize,
    pub subset_len: usize,
    pub loss: LossKind,
    cost: Vec<f64>,
    /// `n_root[j]`: datapoints with `x_j = 0`.
    pub n_root: Vec<usize>,
    /// Row-major `p × p`: datapoints with `x_j = 0 AND x_k = 0`.
    pub n_pair0: Vec<usize>,
    /// Row-major `p × p`: datapoints with `x_j = 1 AND x_l = 1`.
    pub n_pair1: Vec<usize>,
}

impl LeafCostTable {
    #[inline]
    pub fn cost(&self, j: usize, k: usize, r: bool, s: bool) -> f64 {
        self.cost[((j * self.p + k) << 2) | ((r as usize) << 1) | s as usize]
    }

    #[inline]
    pub fn pair0(&self, j: usize, k: usize) -> usize {
        self.n_pair0[j * self.p + k]
    }

    #[inline]
    pub fn pair1(&self, j: usize, l: usize) -> usize {
        self.n_pair1[j * self.p + l]
    }
}

/// Builds the cost table of `subset` (non-empty). Rows `j` are filled
/// independently, so the result does not depend on the thread count.
pub fn build_cost_table(
    ds: &BinaryDataset,
    subset: &[usize],
    loss: LossKind,
    norm_n: usize,
) -> LeafCostTable {
    let packed = PackedSubset::new(ds, subset);
    cost_table_from_packed(&packed, loss, norm_n)
}

/// Cell costs and pair counts of every `k >= j`, for one root `j`.
type CostRow = (Vec<[f64; 4]>, Vec<[usize; 2]>);

pub(crate) fn cost_table_from_packed(
    packed: &PackedSubset,
    loss: LossKind,
    norm_n: usize,
) -> LeafCostTable {
    let p = packed.n_features();
    let n_classes = packed.class_totals.len();
    // Cell (r, s) of the pair (j, k) is cell (s, r) of (k, j), so only
    // k >= j is counted.
    let rows: Vec<CostRow> = (0..p)
        .into_par_iter()
        .map(|j| {
            let mut cells: [Vec<usize>; 4] = std::array::from_fn(|_| vec![0; n_classes]);
            let mut cost = Vec::with_capacity(p - j);
            let mut pairs = Vec::with_capacity(p - j);
            let masks = packed.row_masks(j);
            for k in j..p {
                packed.pair_counts(&masks, j, k, &mut cells);
                cost.push(std::array::from_fn(|t| loss.leaf_cost(&cells[t], norm_n)));
                pairs.push([cells[0].iter().sum(), cells[3].iter().sum()]);
            }
            (cost, pairs)
        })
        .collect();

    let mut cost = vec![0.0; 4 * p * p];
    let mut n_pair0 = vec![0; p * p];
    let mut n_pair1 = vec![0; p * p];
    for (j, (c, pairs)) in rows.into_iter().enumerate() {
        for (off, (cell, [z, o])) in c.into_iter().zip(pairs).enumerate() {
            let k = j + off;
            let (a, b) = (j * p + k, k * p + j);
            cost[4 * a..4 * a + 4].copy_from_slice(&cell);
            cost[4 * b..4 * b + 4].copy_from_slice(&[cell[0], cell[2], cell[1], cell[3]]);
            n_pair0[a] = z;
            n_pair0[b] = z;
            n_pair1[a] = o;
            n_pair1[b] = o;
        }
    }
    let n_root = packed
        .ones
        .iter()
        .map(|o| packed.len - o.iter().sum::<usize>())
        .collect();
    LeafCostTable {
        p,
        norm_n,
        subset_len: packed.len,
        loss,
        cost,
        n_root,
        n_pair0,
        n_pair1,
    }
}
