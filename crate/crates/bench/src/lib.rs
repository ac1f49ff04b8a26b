//! Fixtures shared by the criterion benchmarks.

use rolltree::experiment::timing_dataset;
use rolltree::BinaryDataset;

pub const SEED: u64 = 20;

/// Feature counts for the cost-table scaling benchmark.
pub const FEATURE_SWEEP: [usize; 3] = [32, 64, 128];

pub fn synthetic(n: usize, p: usize) -> BinaryDataset {
    timing_dataset(n, p, SEED)
}
