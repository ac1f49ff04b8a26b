//! Exact optimal depth-2 classification trees.
//!
//! The depth-2 problem picks one `z1[j][k]` (root `j`, left child `k`) and
//! one `z2[j][l]` (root `j`, right child `l`) with the root shared between
//! them. Every column of the constraint matrix has at most two nonzeros and
//! admits a row partition with equal sums, so the matrix is totally
//! unimodular and the LP relaxation is integral ([`check_tu_dantzig`]
//! verifies this). With the root fixed, the left and right choices decouple,
//! which gives the `O(p²)` scan in [`solve_oct2`].

use serde::{Deserialize, Serialize};

use crate::data::BinaryDataset;
use crate::loss::{LeafCostTable, LossKind};

/// Minimum node sizes for the depth-2 subproblem.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Oct2Config {
    /// Minimum datapoints in each depth-1 node.
    pub n_int: usize,
    /// Minimum datapoints in each leaf.
    pub n_leaf: usize,
    /// Accept subtrees that do not lower a node's misclassification when
    /// rolling (disables premature termination).
    pub allow_no_improvement: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Oct2Solution {
    pub root: usize,
    pub left: usize,
    pub right: usize,
    pub objective: f64,
    /// `c[j][k][0][0], c[j][k][0][1], c[j][l][1][0], c[j][l][1][1]`
    pub leaf_costs: [f64; 4],
}

impl Oct2Solution {
    /// The 0/1 assignment of the `2p²` variables encoded by this solution,
    /// in [`ConstraintMatrix`] column order.
    pub fn z_assignment(&self, p: usize) -> Vec<u8> {
        let mut z = vec![0; 2 * p * p];
        z[self.root * p + self.left] = 1;
        z[p * p + self.root * p + self.right] = 1;
        z
    }
}

fn internal_ok(table: &LeafCostTable, cfg: &Oct2Config, j: usize) -> bool {
    let zeros = table.n_root[j];
    cfg.n_int <= zeros.min(table.subset_len - zeros)
}

fn left_ok(table: &LeafCostTable, cfg: &Oct2Config, j: usize, k: usize) -> bool {
    let n00 = table.pair0(j, k);
    cfg.n_leaf <= n00.min(table.n_root[j] - n00)
}

fn right_ok(table: &LeafCostTable, cfg: &Oct2Config, j: usize, l: usize) -> bool {
    let n11 = table.pair1(j, l);
    let ones = table.subset_len - table.n_root[j];
    cfg.n_leaf <= n11.min(ones - n11)
}

/// Per-root candidate sums: `left[k] = c[j][k][0][0] + c[j][k][0][1]` and
/// `right[l] = c[j][l][1][0] + c[j][l][1][1]`, `None` where a size
/// constraint fails.
#[derive(Clone, Debug)]
pub(crate) struct RootOptions {
    pub left: Vec<Option<f64>>,
    pub right: Vec<Option<f64>>,
    pub left_min: f64,
    pub right_min: f64,
}

impl RootOptions {
    /// Smallest achievable objective with this root.
    pub fn min(&self) -> f64 {
        self.left_min + self.right_min
    }

    /// Lexicographically smallest `(k, l)` whose objective `v` satisfies
    /// `outer(v) == target`. `outer` must be non-decreasing, which makes
    /// `outer(left_min + right_min)` the smallest reachable outer value, so
    /// each coordinate can be fixed in turn.
    pub fn select(&self, outer: impl Fn(f64) -> f64, target: f64) -> Option<(usize, usize, f64)> {
        let k = self
            .left
            .iter()
            .position(|v| v.is_some_and(|v| outer(v + self.right_min) == target))?;
        let lv = self.left[k].expect("feasible");
        let l = self
            .right
            .iter()
            .position(|v| v.is_some_and(|v| outer(lv + v) == target))?;
        Some((k, l, lv + self.right[l].expect("feasible")))
    }

    /// Options of an empty subset: every tree scores 0.
    pub fn empty(p: usize) -> Self {
        RootOptions {
            left: vec![Some(0.0); p],
            right: vec![Some(0.0); p],
            left_min: 0.0,
            right_min: 0.0,
        }
    }
}

fn min_of(v: &[Option<f64>]) -> Option<f64> {
    v.iter().flatten().copied().reduce(f64::min)
}

pub(crate) fn root_options(table: &LeafCostTable, cfg: &Oct2Config) -> Vec<Option<RootOptions>> {
    let p = table.p;
    (0..p)
        .map(|j| {
            if !internal_ok(table, cfg, j) {
                return None;
            }
            let left: Vec<Option<f64>> = (0..p)
                .map(|k| {
                    left_ok(table, cfg, j, k)
                        .then(|| table.cost(j, k, false, false) + table.cost(j, k, false, true))
                })
                .collect();
            let right: Vec<Option<f64>> = (0..p)
                .map(|l| {
                    right_ok(table, cfg, j, l)
                        .then(|| table.cost(j, l, true, false) + table.cost(j, l, true, true))
                })
                .collect();
            Some(RootOptions {
                left_min: min_of(&left)?,
                right_min: min_of(&right)?,
                left,
                right,
            })
        })
        .collect()
}

/// Smallest objective over all roots and the first root attaining it.
pub(crate) fn best_root(
    opts: &[Option<RootOptions>],
    outer: impl Fn(f64) -> f64,
) -> Option<(usize, f64)> {
    let best = opts
        .iter()
        .flatten()
        .map(|o| outer(o.min()))
        .reduce(f64::min)?;
    let j = opts
        .iter()
        .position(|o| o.as_ref().is_some_and(|o| outer(o.min()) == best))?;
    Some((j, best))
}

/// Solves the depth-2 problem over a cost table. Returns `None` when the
/// size constraints leave no feasible tree. Ties are broken towards the
/// lexicographically smallest `(root, left, right)`, comparing objectives
/// summed as `(c00 + c01) + (c10 + c11)` exactly as enumeration does.
pub fn solve_oct2(table: &LeafCostTable, cfg: &Oct2Config) -> Option<Oct2Solution> {
    let opts = root_options(table, cfg);
    let (j, best) = best_root(&opts, |v| v)?;
    let (k, l, objective) = opts[j].as_ref()?.select(|v| v, best)?;
    Some(Oct2Solution {
        root: j,
        left: k,
        right: l,
        objective,
        leaf_costs: [
            table.cost(j, k, false, false),
            table.cost(j, k, false, true),
            table.cost(j, l, true, false),
            table.cost(j, l, true, true),
        ],
    })
}

/// Enumerates every `(root, left, right)` triple, evaluating each tree by
/// routing the datapoints directly. Normalizes by the subset size.
pub fn brute_force_oct2(
    ds: &BinaryDataset,
    subset: &[usize],
    loss: LossKind,
    cfg: &Oct2Config,
) -> Option<Oct2Solution> {
    let p = ds.n_features();
    let norm = subset.len();
    let n_classes = ds.n_classes();
    let mut best: Option<Oct2Solution> = None;
    let mut leaves = vec![vec![0usize; n_classes]; 4];
    for j in 0..p {
        for k in 0..p {
            for l in 0..p {
                for leaf in leaves.iter_mut() {
                    leaf.iter_mut().for_each(|c| *c = 0);
                }
                for &i in subset {
                    let idx = if ds.value(i, j) {
                        2 + ds.value(i, l) as usize
                    } else {
                        ds.value(i, k) as usize
                    };
                    leaves[idx][ds.label(i)] += 1;
                }
                let size: Vec<usize> = leaves.iter().map(|c| c.iter().sum()).collect();
                if cfg.n_int > (size[0] + size[1]).min(size[2] + size[3])
                    || cfg.n_leaf > size[0].min(size[1])
                    || cfg.n_leaf > size[2].min(size[3])
                {
                    continue;
                }
                let c: [f64; 4] = std::array::from_fn(|t| loss.leaf_cost(&leaves[t], norm));
                let objective = (c[0] + c[1]) + (c[2] + c[3]);
                if best.as_ref().is_none_or(|b| objective < b.objective) {
                    best = Some(Oct2Solution {
                        root: j,
                        left: k,
                        right: l,
                        objective,
                        leaf_costs: c,
                    });
                }
            }
        }
    }
    best
}

/// Row of the depth-2 constraint matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintRow {
    /// Exactly one `z1` is set.
    OneLeft,
    /// Exactly one `z2` is set.
    OneRight,
    /// `Σ_k z1[j][k] − Σ_l z2[j][l] = 0` for root feature `j`.
    SharedRoot(usize),
}

/// Dense `{−1, 0, +1}` constraint matrix of the depth-2 problem. Columns
/// `0..p²` are `z1[j][k]` at `j·p + k`, columns `p²..2p²` are `z2[j][l]`.
#[derive(Clone, Debug)]
pub struct ConstraintMatrix {
    pub p: usize,
    pub rows: Vec<ConstraintRow>,
    pub n_cols: usize,
    entries: Vec<i8>,
}

impl ConstraintMatrix {
    pub fn new(p: usize) -> Self {
        let n_cols = 2 * p * p;
        let mut rows = vec![ConstraintRow::OneLeft, ConstraintRow::OneRight];
        rows.extend((0..p).map(ConstraintRow::SharedRoot));
        let mut entries = vec![0i8; rows.len() * n_cols];
        for j in 0..p {
            for k in 0..p {
                let z1 = j * p + k;
                let z2 = p * p + j * p + k;
                entries[z1] = 1;
                entries[n_cols + z2] = 1;
                entries[(2 + j) * n_cols + z1] = 1;
                entries[(2 + j) * n_cols + z2] = -1;
            }
        }
        ConstraintMatrix {
            p,
            rows,
            n_cols,
            entries,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.n_cols + col]
    }

    pub fn rhs(&self) -> Vec<i64> {
        self.rows
            .iter()
            .map(|r| match r {
                ConstraintRow::OneLeft | ConstraintRow::OneRight => 1,
                ConstraintRow::SharedRoot(_) => 0,
            })
            .collect()
    }

    /// Whether `z` satisfies every equality row.
    pub fn is_satisfied(&self, z: &[u8]) -> bool {
        let rhs = self.rhs();
        (0..self.n_rows()).all(|r| {
            let lhs: i64 = (0..self.n_cols)
                .map(|c| self.get(r, c) as i64 * z[c] as i64)
                .sum();
            lhs == rhs[r]
        })
    }
}

/// Outcome of checking Dantzig's sufficient conditions for total
/// unimodularity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TuCheck {
    /// All conditions hold; the row partition is the witness.
    Holds {
        m1: Vec<usize>,
        m2: Vec<usize>,
    },
    Violated {
        column: usize,
        reason: String,
    },
}

impl TuCheck {
    pub fn holds(&self) -> bool {
        matches!(self, TuCheck::Holds { .. })
    }
}

/// Checks (i) entries in `{−1,0,1}`, (ii) at most two nonzeros per column,
/// (iii) equal row sums over `m1` and its complement for two-nonzero columns.
pub fn dantzig_conditions(m: &ConstraintMatrix, m1: &[usize]) -> TuCheck {
    let in_m1: Vec<bool> = (0..m.n_rows()).map(|r| m1.contains(&r)).collect();
    for col in 0..m.n_cols {
        let mut nonzeros = 0;
        let (mut s1, mut s2) = (0i64, 0i64);
        for (row, &first) in in_m1.iter().enumerate() {
            let v = m.get(row, col);
            if !(-1..=1).contains(&v) {
                return TuCheck::Violated {
                    column: col,
                    reason: format!("entry {v} in row {row}"),
                };
            }
            if v != 0 {
                nonzeros += 1;
                if first {
                    s1 += v as i64;
                } else {
                    s2 += v as i64;
                }
            }
        }
        if nonzeros > 2 {
            return TuCheck::Violated {
                column: col,
                reason: format!("{nonzeros} nonzero entries"),
            };
        }
        if nonzeros == 2 && s1 != s2 {
            return TuCheck::Violated {
                column: col,
                reason: format!("partition sums {s1} != {s2}"),
            };
        }
    }
    TuCheck::Holds {
        m1: m1.to_vec(),
        m2: (0..m.n_rows()).filter(|r| !m1.contains(r)).collect(),
    }
}

/// Builds the constraint matrix for `p` features and checks it under the
/// partition `M1 = {one-left row}`, `M2 = everything else`.
pub fn check_tu_dantzig(p: usize) -> TuCheck {
    let m = ConstraintMatrix::new(p);
    dantzig_conditions(&m, &[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{random_binary, table1, table1_one_hot};
    use crate::loss::build_cost_table;
    use proptest::prelude::*;

    fn solve(ds: &BinaryDataset, loss: LossKind, cfg: &Oct2Config) -> Option<Oct2Solution> {
        let all = ds.all_indices();
        solve_oct2(&build_cost_table(ds, &all, loss, all.len()), cfg)
    }

    #[test]
    fn table1_objectives() {
        for ds in [table1(), table1_one_hot()] {
            let g = solve(&ds, LossKind::Gini, &Oct2Config::default()).unwrap();
            assert_eq!(g.objective, 0.25);
            let m = solve(&ds, LossKind::Misclassification, &Oct2Config::default()).unwrap();
            assert_eq!(m.objective, 0.25);
            let b = brute_force_oct2(
                &ds,
                &ds.all_indices(),
                LossKind::Gini,
                &Oct2Config::default(),
            )
            .unwrap();
            assert_eq!(b, g);
        }
    }

    #[test]
    fn single_feature_is_degenerate_stump() {
        let ds = BinaryDataset::from_rows(
            &[vec![false], vec![false], vec![true], vec![true]],
            vec![0, 1, 1, 1],
            vec!["a".into(), "b".into()],
            vec!["f".into()],
        )
        .unwrap();
        let s = solve(&ds, LossKind::Misclassification, &Oct2Config::default()).unwrap();
        assert_eq!((s.root, s.left, s.right), (0, 0, 0));
        // the stump on f leaves one error in the x=0 side
        assert_eq!(s.objective, 0.25);
        let b = brute_force_oct2(
            &ds,
            &ds.all_indices(),
            LossKind::Misclassification,
            &Oct2Config::default(),
        );
        assert_eq!(b.unwrap(), s);
    }

    #[test]
    fn infeasible_under_size_constraints() {
        let ds = table1();
        let cfg = Oct2Config {
            n_int: 3,
            ..Default::default()
        };
        assert!(solve(&ds, LossKind::Gini, &cfg).is_none());
        assert!(brute_force_oct2(&ds, &ds.all_indices(), LossKind::Gini, &cfg).is_none());
        let cfg = Oct2Config {
            n_leaf: 2,
            ..Default::default()
        };
        assert!(solve(&ds, LossKind::Gini, &cfg).is_none());
    }

    #[test]
    fn tu_small_cases() {
        assert!(check_tu_dantzig(1).holds());
        match check_tu_dantzig(3) {
            TuCheck::Holds { m1, m2 } => {
                assert_eq!(m1, vec![0]);
                assert_eq!(m2, (1..5).collect::<Vec<_>>());
            }
            v => panic!("{v:?}"),
        }
        assert!(check_tu_dantzig(20).holds());
    }

    #[test]
    fn tu_check_detects_bad_partition() {
        let m = ConstraintMatrix::new(2);
        // putting row (1d, j=0) on the M1 side unbalances z1[0][*] columns
        assert!(!dantzig_conditions(&m, &[0, 2]).holds());
    }

    #[allow(clippy::needless_range_loop)]
    fn det(mut a: Vec<Vec<f64>>) -> f64 {
        let n = a.len();
        let mut d = 1.0;
        for c in 0..n {
            let Some(piv) = (c..n).find(|&r| a[r][c].abs() > 1e-9) else {
                return 0.0;
            };
            if piv != c {
                a.swap(piv, c);
                d = -d;
            }
            d *= a[c][c];
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
        d
    }

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        if n < k {
            return vec![];
        }
        let mut out = subsets(n - 1, k);
        for mut s in subsets(n - 1, k - 1) {
            s.push(n - 1);
            out.push(s);
        }
        out
    }

    /// Every square submatrix has determinant in {−1, 0, 1}.
    #[test]
    fn tu_by_exhaustive_minors() {
        for p in 1..=2 {
            let m = ConstraintMatrix::new(p);
            for size in 1..=m.n_rows().min(m.n_cols) {
                for rows in subsets(m.n_rows(), size) {
                    for cols in subsets(m.n_cols, size) {
                        let sub = rows
                            .iter()
                            .map(|&r| cols.iter().map(|&c| m.get(r, c) as f64).collect())
                            .collect();
                        let d = det(sub).round();
                        assert!(
                            (-1.0..=1.0).contains(&d),
                            "p={p} rows={rows:?} cols={cols:?} det={d}"
                        );
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force(seed in any::<u64>(), n in 1usize..48, p in 1usize..7, classes in 1usize..4,
                               n_int in 0usize..4, n_leaf in 0usize..3) {
            let ds = random_binary(seed, n, p, classes);
            let cfg = Oct2Config { n_int, n_leaf, ..Default::default() };
            for loss in [LossKind::Misclassification, LossKind::Gini] {
                let fast = solve(&ds, loss, &cfg);
                let slow = brute_force_oct2(&ds, &ds.all_indices(), loss, &cfg);
                prop_assert_eq!(&fast, &slow);
                if let Some(s) = fast {
                    let m = ConstraintMatrix::new(p);
                    prop_assert!(m.is_satisfied(&s.z_assignment(p)));
                    let sum = (s.leaf_costs[0] + s.leaf_costs[1]) + (s.leaf_costs[2] + s.leaf_costs[3]);
                    prop_assert_eq!(s.objective, sum);
                }
            }
        }

        #[test]
        fn never_worse_than_baseline(seed in any::<u64>(), n in 1usize..48, p in 1usize..6) {
            let ds = random_binary(seed, n, p, 3);
            for loss in [LossKind::Misclassification, LossKind::Gini] {
                let s = solve(&ds, loss, &Oct2Config::default()).unwrap();
                let base = loss.leaf_cost(&ds.class_counts(&ds.all_indices()), n);
                prop_assert!(s.objective <= base + 1e-12);
            }
        }

        #[test]
        fn scaling_norm_keeps_an_optimum(seed in any::<u64>(), n in 1usize..40, p in 1usize..6, scale in 2usize..5) {
            let ds = random_binary(seed, n, p, 2);
            let all = ds.all_indices();
            for loss in [LossKind::Misclassification, LossKind::Gini] {
                let base = build_cost_table(&ds, &all, loss, n);
                let scaled = build_cost_table(&ds, &all, loss, n * scale);
                let a = solve_oct2(&base, &Oct2Config::default()).unwrap();
                let b = solve_oct2(&scaled, &Oct2Config::default()).unwrap();
                let b_in_base = base.cost(b.root, b.left, false, false) + base.cost(b.root, b.left, false, true)
                    + base.cost(b.root, b.right, true, false) + base.cost(b.root, b.right, true, true);
                prop_assert!((b_in_base - a.objective).abs() < 1e-12);
            }
        }
    }
}
