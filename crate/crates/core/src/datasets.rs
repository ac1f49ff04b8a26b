//! Small built-in datasets and seeded generators.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{read_csv, BinaryDataset, RawDataset};

/// Four datapoints, three binary features, classes A and B.
pub const TABLE1_CSV: &str = "x1,x2,x3,y\n1,0,1,A\n1,0,0,B\n0,0,1,B\n1,1,1,B\n";

/// Tic-tac-toe endgame boards (958 rows, label column `class`).
pub const TIC_TAC_TOE_CSV: &str = include_str!("../data/tic-tac-toe.csv");

/// The four-row example with its three features used as-is.
pub fn table1() -> BinaryDataset {
    let rows = [[1, 0, 1], [1, 0, 0], [0, 0, 1], [1, 1, 1]];
    BinaryDataset::from_rows(
        &rows
            .iter()
            .map(|r| r.iter().map(|&b| b == 1).collect())
            .collect::<Vec<_>>(),
        vec![0, 1, 1, 1],
        vec!["A".into(), "B".into()],
        vec!["x1".into(), "x2".into(), "x3".into()],
    )
    .expect("static dataset")
}

/// The four-row example after one-hot encoding (six columns).
pub fn table1_one_hot() -> BinaryDataset {
    let raw = read_csv(TABLE1_CSV.as_bytes(), Some("y"), b',').expect("static csv");
    crate::data::binarize(&raw, Default::default())
        .expect("static dataset")
        .0
}

pub fn tic_tac_toe() -> RawDataset {
    read_csv(TIC_TAC_TOE_CSV.as_bytes(), Some("class"), b',').expect("bundled csv")
}

/// Uniform random binary features and labels.
pub fn random_binary(seed: u64, n: usize, p: usize, classes: usize) -> BinaryDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<bool>> = (0..n)
        .map(|_| (0..p).map(|_| rng.gen_bool(0.5)).collect())
        .collect();
    let labels = (0..n).map(|_| rng.gen_range(0..classes)).collect();
    BinaryDataset::from_rows(
        &rows,
        labels,
        (0..classes).map(|c| format!("c{c}")).collect(),
        (0..p).map(|j| format!("f{j}")).collect(),
    )
    .expect("generated dataset")
}

/// Fair-coin features with binary labels from a random depth-3 tree,
/// each label flipped with probability `noise`.
pub fn planted_tree(seed: u64, n: usize, p: usize, noise: f64) -> BinaryDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // heap order: node t has children 2t+1, 2t+2; leaves 7..15
    let splits: Vec<usize> = (0..7).map(|_| rng.gen_range(0..p)).collect();
    let leaf_label = |leaf: usize| leaf % 2;
    let mut columns = vec![crate::bitset::BitSet::new(n); p];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        for col in columns.iter_mut() {
            if rng.gen_bool(0.5) {
                col.insert(i);
            }
        }
        let mut t = 0;
        while t < 7 {
            t = 2 * t + 1 + columns[splits[t]].contains(i) as usize;
        }
        let mut y = leaf_label(t - 7);
        if rng.gen_bool(noise) {
            y = 1 - y;
        }
        labels.push(y);
    }
    BinaryDataset::from_columns(
        columns,
        labels,
        vec!["0".into(), "1".into()],
        (0..p).map(|j| format!("f{j}")).collect(),
    )
    .expect("generated dataset")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monks {
    /// `a1 = a2 or a5 = 1`
    One,
    /// exactly two attributes take their first value
    Two,
}

const MONKS_VALUES: [usize; 6] = [3, 3, 2, 3, 4, 2];

impl Monks {
    pub fn name(self) -> &'static str {
        match self {
            Monks::One => "monks-1",
            Monks::Two => "monks-2",
        }
    }

    fn label(self, a: &[usize; 6]) -> bool {
        match self {
            Monks::One => a[0] == a[1] || a[4] == 1,
            Monks::Two => a.iter().filter(|&&v| v == 1).count() == 2,
        }
    }

    /// Rows drawn for the training part of the original benchmark.
    fn train_rows(self) -> usize {
        match self {
            Monks::One => 124,
            Monks::Two => 169,
        }
    }
}

/// All 432 attribute combinations in lexicographic order.
fn monks_grid() -> Vec<[usize; 6]> {
    let mut out = Vec::with_capacity(432);
    let mut a = [1usize; 6];
    loop {
        out.push(a);
        let mut d = 5;
        loop {
            if a[d] < MONKS_VALUES[d] {
                a[d] += 1;
                break;
            }
            a[d] = 1;
            if d == 0 {
                return out;
            }
            d -= 1;
        }
    }
}

/// Regenerates a MONK's problem from its defining rule: the complete
/// 432-point attribute grid followed by a noise-free sample drawn without
/// replacement (124 rows for problem 1, 169 for problem 2) with `seed`.
pub fn monks(problem: Monks, seed: u64) -> RawDataset {
    let grid = monks_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extra = sample(&mut rng, grid.len(), problem.train_rows());
    let rows: Vec<[usize; 6]> = grid
        .iter()
        .copied()
        .chain(extra.iter().map(|i| grid[i]))
        .collect();
    let mut header: Vec<String> = (1..=6).map(|i| format!("a{i}")).collect();
    header.push("class".into());
    let records = rows
        .iter()
        .map(|a| {
            let mut rec: Vec<String> = a.iter().map(|v| v.to_string()).collect();
            rec.push((problem.label(a) as u8).to_string());
            rec
        })
        .collect();
    RawDataset::from_records(header, records, Some("class")).expect("generated dataset")
}
