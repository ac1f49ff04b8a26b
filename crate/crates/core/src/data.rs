//! Tabular input, binarization and stratified folds.
//!
//! Raw CSV columns are either numeric (every value parses as a number) or
//! categorical. [`binarize`] turns them into one-hot binary columns: numeric
//! columns with few distinct values are treated as categories, the rest are
//! cut at sample quantiles first. The fitted [`BinarizationSchema`] can be
//! serialized and re-applied to other files with the same columns.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::ops::Deref;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::{transpose64, BitSet};
use crate::{Error, Result};

/// One raw column. `numeric` is set when every value parses as a number.
#[derive(Clone, Debug, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub values: Vec<String>,
    pub numeric: Option<Vec<f64>>,
}

impl RawColumn {
    pub fn new(name: impl Into<String>, values: Vec<String>) -> Self {
        let numeric = values
            .iter()
            .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>();
        RawColumn {
            name: name.into(),
            values,
            numeric,
        }
    }

    pub fn is_numeric(&self) -> bool {
        self.numeric.is_some()
    }
}

/// Delimited-text dataset before binarization.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    /// Feature columns, label excluded.
    pub columns: Vec<RawColumn>,
    pub label_column: Option<String>,
    pub labels: Option<Vec<String>>,
    n_rows: usize,
}

impl RawDataset {
    /// Builds a dataset from a header and string records. When
    /// `label_column` is given it must name one of the header fields.
    pub fn from_records(
        header: Vec<String>,
        records: Vec<Vec<String>>,
        label_column: Option<&str>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (row, rec) in records.iter().enumerate() {
            if rec.len() != header.len() {
                return Err(Error::RaggedRow {
                    row: row + 1,
                    found: rec.len(),
                    expected: header.len(),
                });
            }
        }
        let label_idx = match label_column {
            Some(name) => Some(
                header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::MissingLabel(name.to_string()))?,
            ),
            None => None,
        };
        let n_rows = records.len();
        let mut by_col: Vec<Vec<String>> = vec![Vec::with_capacity(n_rows); header.len()];
        for rec in records {
            for (c, v) in rec.into_iter().enumerate() {
                by_col[c].push(v);
            }
        }
        let mut labels = None;
        let mut columns = Vec::with_capacity(header.len());
        for (c, (name, values)) in header.into_iter().zip(by_col).enumerate() {
            if Some(c) == label_idx {
                labels = Some(values);
            } else {
                columns.push(RawColumn::new(name, values));
            }
        }
        Ok(RawDataset {
            columns,
            label_column: label_column.map(str::to_string),
            labels,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn column(&self, name: &str) -> Option<&RawColumn> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Reads a delimited file with a header row. `label_column` must be present.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, delimiter: u8) -> Result<RawDataset> {
    let file = open(path.as_ref())?;
    read_csv(file, Some(label_column), delimiter)
}

/// Like [`load_csv`] but without a label column, for scoring.
pub fn load_unlabeled_csv(path: impl AsRef<Path>, delimiter: u8) -> Result<RawDataset> {
    let file = open(path.as_ref())?;
    read_csv(file, None, delimiter)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_csv<R: Read>(
    reader: R,
    label_column: Option<&str>,
    delimiter: u8,
) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        records.push(rec.iter().map(str::to_string).collect());
    }
    RawDataset::from_records(header, records, label_column)
}

/// Bit-valued feature matrix with integer class labels, stored column-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryDataset {
    columns: Vec<BitSet>,
    /// Row-major copy: `row_words[i * w + b]` holds features `64b..64b+64`
    /// of datapoint `i`, with `w = ceil(p / 64)`.
    row_words: Vec<u64>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    feature_names: Vec<String>,
}

fn transpose_blocks(columns: &[BitSet], n: usize) -> Vec<u64> {
    let p = columns.len();
    let w = p.div_ceil(64);
    let mut rows = vec![0u64; n * w];
    let mut block = [0u64; 64];
    for rb in 0..n.div_ceil(64) {
        for fb in 0..w {
            block.fill(0);
            for (c, col) in columns[64 * fb..p.min(64 * fb + 64)].iter().enumerate() {
                block[c] = col.words()[rb];
            }
            transpose64(&mut block);
            for (r, &word) in block.iter().enumerate().take(n - 64 * rb) {
                rows[(64 * rb + r) * w + fb] = word;
            }
        }
    }
    rows
}

impl BinaryDataset {
    pub fn from_columns(
        columns: Vec<BitSet>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if columns.is_empty() {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        if columns.len() != feature_names.len() {
            return Err(Error::InvalidDataset(format!(
                "{} columns but {} feature names",
                columns.len(),
                feature_names.len()
            )));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::InvalidDataset(format!(
                "column of length {} for {n} labels",
                c.len()
            )));
        }
        if class_names.is_empty() {
            return Err(Error::InvalidDataset("no classes".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_names.len()) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} outside [0, {})",
                class_names.len()
            )));
        }
        let row_words = transpose_blocks(&columns, n);
        Ok(BinaryDataset {
            columns,
            row_words,
            labels,
            class_names,
            feature_names,
        })
    }

    /// Columns restricted to `subset`: bit `t` of column `j` is
    /// `x[subset[t]][j]`.
    pub fn gather_columns(&self, subset: &[usize]) -> Vec<BitSet> {
        let p = self.columns.len();
        let w = p.div_ceil(64);
        let n_words = subset.len().div_ceil(64);
        let mut out = vec![vec![0u64; n_words]; p];
        let mut block = [0u64; 64];
        for (rb, chunk) in subset.chunks(64).enumerate() {
            for fb in 0..w {
                block.fill(0);
                for (r, &i) in chunk.iter().enumerate() {
                    block[r] = self.row_words[i * w + fb];
                }
                transpose64(&mut block);
                for (c, col) in out[64 * fb..p.min(64 * fb + 64)].iter_mut().enumerate() {
                    col[rb] = block[c];
                }
            }
        }
        out.into_iter()
            .map(|words| BitSet::from_words(words, subset.len()))
            .collect()
    }

    pub fn from_rows(
        rows: &[Vec<bool>],
        labels: Vec<usize>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let p = feature_names.len();
        if rows.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::InvalidDataset(format!(
                "row of length {} for {p} features",
                r.len()
            )));
        }
        let columns = (0..p)
            .map(|j| BitSet::from_fn(rows.len(), |i| rows[i][j]))
            .collect();
        Self::from_columns(columns, labels, class_names, feature_names)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    #[inline]
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> bool {
        self.columns[j].contains(i)
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn column(&self, j: usize) -> &BitSet {
        &self.columns[j]
    }

    pub fn row(&self, i: usize) -> Vec<bool> {
        (0..self.n_features()).map(|j| self.value(i, j)).collect()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.n()).collect()
    }

    pub fn class_counts(&self, indices: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &i in indices {
            counts[self.labels[i]] += 1;
        }
        counts
    }

    /// Writes the 0/1 matrix with a trailing label column.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push("label");
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<&str> = (0..self.n_features())
                .map(|j| if self.value(i, j) { "1" } else { "0" })
                .collect();
            rec.push(&self.class_names[self.labels[i]]);
            w.write_record(&rec)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv output>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Sorted, duplicate-free datapoint ids reaching one node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeSubset {
    indices: Vec<usize>,
    pub depth: usize,
}

impl NodeSubset {
    pub fn new(indices: Vec<usize>, n: usize, depth: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "subset indices must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::InvalidArgument(format!(
                    "subset index {last} out of range for {n} datapoints"
                )));
            }
        }
        Ok(NodeSubset { indices, depth })
    }

    pub fn full(ds: &BinaryDataset) -> Self {
        NodeSubset {
            indices: ds.all_indices(),
            depth: 0,
        }
    }

    pub fn into_indices(self) -> Vec<usize> {
        self.indices
    }
}

impl Deref for NodeSubset {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.indices
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinarizeOptions {
    /// Numeric columns with fewer distinct values than this are categorical.
    pub max_categorical_unique: usize,
    pub quantile_bins: usize,
}

impl Default for BinarizeOptions {
    fn default() -> Self {
        BinarizeOptions {
            max_categorical_unique: 7,
            quantile_bins: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Encoding {
    /// One column per category. Numeric categories are stored in canonical
    /// number formatting and matched numerically.
    Categorical {
        numeric: bool,
        categories: Vec<String>,
    },
    /// Bins `(-inf, b0), [b0, b1), ..., [b_last, inf)`.
    QuantileBinned { boundaries: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoding {
    pub name: String,
    #[serde(flatten)]
    pub encoding: Encoding,
    /// Emitted binary column indices, contiguous.
    pub columns: Vec<usize>,
}

impl FeatureEncoding {
    /// Position of `value` within this feature's emitted columns, or `None`
    /// for an unseen category.
    fn slot(&self, value: &str) -> Result<Option<usize>> {
        match &self.encoding {
            Encoding::Categorical {
                numeric: true,
                categories,
            } => Ok(value
                .parse::<f64>()
                .ok()
                .map(canonical_number)
                .and_then(|key| categories.iter().position(|c| *c == key))),
            Encoding::Categorical {
                numeric: false,
                categories,
            } => Ok(categories.iter().position(|c| c == value)),
            Encoding::QuantileBinned { boundaries } => {
                let x: f64 = value.parse().map_err(|_| {
                    Error::SchemaMismatch(format!(
                        "column `{}` expects numbers, found `{value}`",
                        self.name
                    ))
                })?;
                Ok(Some(boundaries.partition_point(|&b| b <= x)))
            }
        }
    }

    fn column_names(&self) -> Vec<String> {
        match &self.encoding {
            Encoding::Categorical { categories, .. } => categories
                .iter()
                .map(|c| format!("{}={c}", self.name))
                .collect(),
            Encoding::QuantileBinned { boundaries } => {
                let name = &self.name;
                let mut out = Vec::with_capacity(boundaries.len() + 1);
                match boundaries.first() {
                    None => out.push(format!("{name}=any")),
                    Some(b0) => out.push(format!("{name}<{b0}")),
                }
                for w in boundaries.windows(2) {
                    out.push(format!("{}<={name}<{}", w[0], w[1]));
                }
                if let Some(last) = boundaries.last() {
                    out.push(format!("{name}>={last}"));
                }
                out
            }
        }
    }
}

/// Fitted mapping from raw columns to binary columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarizationSchema {
    pub features: Vec<FeatureEncoding>,
    pub n_columns: usize,
}

impl BinarizationSchema {
    pub fn feature_names(&self) -> Vec<String> {
        self.features
            .iter()
            .flat_map(|f| f.column_names())
            .collect()
    }

    /// Encodes every row of `raw` into binary columns. Columns are looked up
    /// by name; extra raw columns are ignored.
    pub fn encode(&self, raw: &RawDataset) -> Result<Vec<BitSet>> {
        let n = raw.n_rows();
        let mut out = vec![BitSet::new(n); self.n_columns];
        for feat in &self.features {
            let col = raw.column(&feat.name).ok_or_else(|| {
                Error::SchemaMismatch(format!("input has no column `{}`", feat.name))
            })?;
            for (i, v) in col.values.iter().enumerate() {
                if let Some(slot) = feat.slot(v)? {
                    out[feat.columns[slot]].insert(i);
                }
            }
        }
        Ok(out)
    }

    /// Encodes a single record given as (column name, value) lookups.
    pub fn encode_record(&self, lookup: impl Fn(&str) -> Option<String>) -> Result<Vec<bool>> {
        let mut x = vec![false; self.n_columns];
        for feat in &self.features {
            let v = lookup(&feat.name).ok_or_else(|| {
                Error::SchemaMismatch(format!("record has no column `{}`", feat.name))
            })?;
            if let Some(slot) = feat.slot(&v)? {
                x[feat.columns[slot]] = true;
            }
        }
        Ok(x)
    }

    /// Binarizes a labeled raw dataset against fixed class names.
    pub fn apply(&self, raw: &RawDataset, class_names: &[String]) -> Result<BinaryDataset> {
        let labels = raw
            .labels
            .as_ref()
            .ok_or_else(|| Error::MissingLabel(raw.label_column.clone().unwrap_or_default()))?;
        let y = labels
            .iter()
            .map(|l| {
                class_names
                    .iter()
                    .position(|c| c == l)
                    .ok_or_else(|| Error::SchemaMismatch(format!("unknown class label `{l}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        BinaryDataset::from_columns(
            self.encode(raw)?,
            y,
            class_names.to_vec(),
            self.feature_names(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let schema: BinarizationSchema = serde_json::from_str(s)?;
        let total: usize = schema.features.iter().map(|f| f.columns.len()).sum();
        if total != schema.n_columns {
            return Err(Error::SchemaMismatch(format!(
                "schema lists {total} columns but n_columns = {}",
                schema.n_columns
            )));
        }
        Ok(schema)
    }
}

fn canonical_number(x: f64) -> String {
    // `{}` prints 1.0 as "1" and keeps the shortest round-trip form otherwise.
    format!("{x}")
}

/// Empirical quantile cut points of `values`, ties collapsed. May return
/// fewer than `bins - 1` boundaries.
fn quantile_boundaries(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let min = sorted[0];
    let mut out: Vec<f64> = (1..bins)
        .map(|q| sorted[(q * n / bins).min(n - 1)])
        .filter(|&b| b > min)
        .collect();
    out.dedup();
    out
}

/// Fits a [`BinarizationSchema`] on `raw` and returns the encoded dataset.
pub fn binarize(
    raw: &RawDataset,
    opts: BinarizeOptions,
) -> Result<(BinaryDataset, BinarizationSchema)> {
    if opts.quantile_bins < 2 {
        return Err(Error::InvalidArgument(
            "quantile_bins must be at least 2".into(),
        ));
    }
    if raw.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let labels = raw
        .labels
        .as_ref()
        .ok_or_else(|| Error::MissingLabel("<none>".into()))?;
    let class_names: Vec<String> = labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut features = Vec::with_capacity(raw.columns.len());
    let mut next_col = 0;
    for col in &raw.columns {
        let encoding = match &col.numeric {
            Some(nums) => {
                let distinct: BTreeMap<String, f64> =
                    nums.iter().map(|&x| (canonical_number(x), x)).collect();
                if distinct.len() < opts.max_categorical_unique {
                    let mut cats: Vec<(f64, String)> =
                        distinct.into_iter().map(|(s, x)| (x, s)).collect();
                    cats.sort_by(|a, b| a.0.total_cmp(&b.0));
                    Encoding::Categorical {
                        numeric: true,
                        categories: cats.into_iter().map(|(_, s)| s).collect(),
                    }
                } else {
                    Encoding::QuantileBinned {
                        boundaries: quantile_boundaries(nums, opts.quantile_bins),
                    }
                }
            }
            None => Encoding::Categorical {
                numeric: false,
                categories: col
                    .values
                    .iter()
                    .cloned()
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect(),
            },
        };
        let width = match &encoding {
            Encoding::Categorical { categories, .. } => categories.len(),
            Encoding::QuantileBinned { boundaries } => boundaries.len() + 1,
        };
        if width == 1 {
            warn!(
                "column `{}` is constant; emitting a single all-ones feature",
                col.name
            );
        }
        features.push(FeatureEncoding {
            name: col.name.clone(),
            encoding,
            columns: (next_col..next_col + width).collect(),
        });
        next_col += width;
    }
    let schema = BinarizationSchema {
        features,
        n_columns: next_col,
    };
    let ds = schema.apply(raw, &class_names)?;
    Ok((ds, schema))
}

/// Fold id per datapoint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified k-fold assignment: each class is shuffled with a seeded RNG
/// and dealt round-robin, the deal position carrying over between classes so
/// fold totals also stay balanced.
pub fn stratified_k_folds(ds: &BinaryDataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    let n = ds.n();
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "fold count {k} must lie in [2, {n}]"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.n_classes()];
    for i in 0..n {
        by_class[ds.label(i)].push(i);
    }
    if let Some(min) = by_class.iter().map(Vec::len).filter(|&c| c > 0).min() {
        if k > min {
            warn!("{k} folds exceed the smallest class size {min}; some folds miss that class");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; n];
    let mut next = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            fold_of[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldAssignment { fold_of, k, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn gathered_columns_match_lookup(seed in any::<u64>(), n in 1usize..300, p in 1usize..150, keep in 1usize..5) {
            let ds = crate::datasets::random_binary(seed, n, p, 2);
            let subset: Vec<usize> = (0..n).filter(|i| (i * 7 + seed as usize).is_multiple_of(keep)).collect();
            let cols = ds.gather_columns(&subset);
            for (j, col) in cols.iter().enumerate() {
                prop_assert_eq!(col, &BitSet::from_fn(subset.len(), |t| ds.value(subset[t], j)));
            }
        }
    }

    fn table1_csv() -> &'static str {
        "x1,x2,x3,y\n1,0,1,A\n1,0,0,B\n0,0,1,B\n1,1,1,B\n"
    }

    #[test]
    fn loads_table1() {
        let raw = read_csv(table1_csv().as_bytes(), Some("y"), b',').unwrap();
        assert_eq!(raw.n_rows(), 4);
        assert_eq!(raw.columns.len(), 3);
        assert!(raw.columns.iter().all(RawColumn::is_numeric));
        assert_eq!(raw.label_column.as_deref(), Some("y"));
    }

    #[test]
    fn single_row_file() {
        let raw = read_csv("a,y\n3,yes\n".as_bytes(), Some("y"), b',').unwrap();
        assert_eq!(raw.n_rows(), 1);
    }

    #[test]
    fn ragged_row_is_rejected() {
        let err = read_csv("a,b,y\n1,2,A\n1,B\n".as_bytes(), Some("y"), b',').unwrap_err();
        assert!(
            matches!(
                err,
                Error::RaggedRow {
                    row: 2,
                    found: 2,
                    expected: 3
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn missing_label_and_empty_and_missing_file() {
        assert!(matches!(
            read_csv("a,b\n1,2\n".as_bytes(), Some("y"), b','),
            Err(Error::MissingLabel(_))
        ));
        assert!(matches!(
            read_csv("a,y\n".as_bytes(), Some("y"), b','),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(
            load_csv("/nonexistent/file.csv", "y", b','),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn semicolon_delimiter() {
        let raw = read_csv("a;y\n1;A\n2;B\n".as_bytes(), Some("y"), b';').unwrap();
        assert_eq!(raw.columns[0].numeric, Some(vec![1.0, 2.0]));
    }

    #[test]
    fn table1_one_hot_reproduces_original_bits() {
        let raw = read_csv(table1_csv().as_bytes(), Some("y"), b',').unwrap();
        let (ds, schema) = binarize(&raw, BinarizeOptions::default()).unwrap();
        assert_eq!(ds.n_features(), 6);
        assert_eq!(schema.n_columns, 6);
        let original = [[1, 0, 1], [1, 0, 0], [0, 0, 1], [1, 1, 1]];
        for (i, row) in original.iter().enumerate() {
            for (j, &bit) in row.iter().enumerate() {
                // columns per feature: [x=0, x=1]
                assert_eq!(ds.value(i, 2 * j + 1), bit == 1);
                assert_eq!(ds.value(i, 2 * j), bit == 0);
            }
        }
        assert_eq!(ds.feature_names()[1], "x1=1");
        assert_eq!(ds.class_names(), &["A".to_string(), "B".to_string()]);
        assert_eq!(ds.labels(), &[0, 1, 1, 1]);
    }

    #[test]
    fn quartiles_of_a_ramp() {
        let values: Vec<String> = (1..=100).map(|v| v.to_string()).collect();
        let labels: Vec<String> = (1..=100).map(|v| (v % 2).to_string()).collect();
        let header = vec!["v".to_string(), "y".to_string()];
        let records = values
            .into_iter()
            .zip(labels)
            .map(|(a, b)| vec![a, b])
            .collect();
        let raw = RawDataset::from_records(header, records, Some("y")).unwrap();
        let (ds, schema) = binarize(&raw, BinarizeOptions::default()).unwrap();
        assert_eq!(ds.n_features(), 4);
        for j in 0..4 {
            assert_eq!(ds.column(j).count_ones(), 25);
        }
        match &schema.features[0].encoding {
            Encoding::QuantileBinned { boundaries } => assert_eq!(boundaries, &[26.0, 51.0, 76.0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn heavy_ties_merge_bins() {
        let mut vals: Vec<f64> = vec![0.0; 60];
        vals.extend((1..=40).map(f64::from));
        let b = quantile_boundaries(&vals, 4);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert!(b.len() < 3);
        assert!(b.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn constant_column_emits_one_feature() {
        let raw = read_csv("c,y\nk,A\nk,B\n".as_bytes(), Some("y"), b',').unwrap();
        let (ds, _) = binarize(&raw, BinarizeOptions::default()).unwrap();
        assert_eq!(ds.n_features(), 1);
        assert_eq!(ds.column(0).count_ones(), 2);
    }

    #[test]
    fn unseen_category_encodes_to_zeros() {
        let raw = read_csv("c,n,y\nred,1,A\nblue,2,B\n".as_bytes(), Some("y"), b',').unwrap();
        let (_, schema) = binarize(&raw, BinarizeOptions::default()).unwrap();
        let test = read_csv("c,n,y\ngreen,1.0,A\n".as_bytes(), Some("y"), b',').unwrap();
        let cols = schema.encode(&test).unwrap();
        // c=blue, c=red, n=1, n=2
        let row: Vec<bool> = cols.iter().map(|c| c.contains(0)).collect();
        assert_eq!(row, vec![false, false, true, false]);
    }

    #[test]
    fn schema_json_roundtrip_and_reapply() {
        let raw = read_csv(table1_csv().as_bytes(), Some("y"), b',').unwrap();
        let (ds, schema) = binarize(&raw, BinarizeOptions::default()).unwrap();
        let back = BinarizationSchema::from_json(&schema.to_json().unwrap()).unwrap();
        assert_eq!(back, schema);
        assert_eq!(back.apply(&raw, ds.class_names()).unwrap(), ds);
    }

    #[test]
    fn schema_mismatch_on_missing_column() {
        let raw = read_csv(table1_csv().as_bytes(), Some("y"), b',').unwrap();
        let (_, schema) = binarize(&raw, BinarizeOptions::default()).unwrap();
        let other = read_csv("x1,x2,y\n1,0,A\n".as_bytes(), Some("y"), b',').unwrap();
        assert!(matches!(
            schema.encode(&other),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn balanced_folds() {
        let rows: Vec<Vec<bool>> = (0..100).map(|i| vec![i % 3 == 0]).collect();
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let ds = BinaryDataset::from_rows(
            &rows,
            labels,
            vec!["a".into(), "b".into()],
            vec!["f".into()],
        )
        .unwrap();
        let folds = stratified_k_folds(&ds, 10, 7).unwrap();
        for f in 0..10 {
            let test = folds.test_indices(f);
            assert_eq!(ds.class_counts(&test), vec![5, 5]);
        }
        assert_eq!(folds, stratified_k_folds(&ds, 10, 7).unwrap());
    }

    #[test]
    fn table1_two_folds() {
        let raw = read_csv(table1_csv().as_bytes(), Some("y"), b',').unwrap();
        let (ds, _) = binarize(&raw, BinarizeOptions::default()).unwrap();
        let folds = stratified_k_folds(&ds, 2, 0).unwrap();
        assert_eq!(folds.fold_sizes(), vec![2, 2]);
        let with_a: Vec<usize> = (0..2)
            .filter(|&f| ds.class_counts(&folds.test_indices(f))[0] > 0)
            .collect();
        assert_eq!(with_a.len(), 1);
    }

    #[test]
    fn fold_count_bounds() {
        let ds = BinaryDataset::from_rows(
            &[vec![true], vec![false]],
            vec![0, 0],
            vec!["a".into()],
            vec!["f".into()],
        )
        .unwrap();
        assert!(stratified_k_folds(&ds, 1, 0).is_err());
        assert!(stratified_k_folds(&ds, 3, 0).is_err());
    }

    #[test]
    fn node_subset_validation() {
        assert!(NodeSubset::new(vec![0, 2, 5], 6, 0).is_ok());
        assert!(NodeSubset::new(vec![0, 2, 2], 6, 0).is_err());
        assert!(NodeSubset::new(vec![0, 6], 6, 0).is_err());
    }
}
