//! Cross-validation sweeps, win/tie counting and timing runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{stratified_k_folds, BinaryDataset};
use crate::datasets::planted_tree;
use crate::loss::LossKind;
use crate::oct2::Oct2Config;
use crate::rst::{rst_fit_subset, FitConfig};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "cart-m")]
    CartM,
    #[serde(rename = "cart-g")]
    CartG,
    #[serde(rename = "rst-m")]
    RstM,
    #[serde(rename = "rst-g")]
    RstG,
    #[serde(rename = "rst3-m")]
    Rst3M,
    #[serde(rename = "rst3-g")]
    Rst3G,
    #[serde(rename = "hybrid")]
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::CartM,
        Method::CartG,
        Method::RstM,
        Method::RstG,
        Method::Rst3M,
        Method::Rst3G,
        Method::Hybrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::CartM => "cart-m",
            Method::CartG => "cart-g",
            Method::RstM => "rst-m",
            Method::RstG => "rst-g",
            Method::Rst3M => "rst3-m",
            Method::Rst3G => "rst3-g",
            Method::Hybrid => "hybrid",
        }
    }

    pub fn config(self, d_max: usize, oct2_cfg: Oct2Config) -> FitConfig {
        use LossKind::{Gini, Misclassification as Mis};
        let cfg = match self {
            Method::CartM => FitConfig::cart(d_max, Mis),
            Method::CartG => FitConfig::cart(d_max, Gini),
            Method::RstM => FitConfig::rst(d_max, Mis),
            Method::RstG => FitConfig::rst(d_max, Gini),
            Method::Rst3M => FitConfig::rst3(d_max, Mis),
            Method::Rst3G => FitConfig::rst3(d_max, Gini),
            Method::Hybrid => FitConfig::hybrid(d_max),
        };
        cfg.with_oct2(oct2_cfg)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidArgument(format!(
                    "unknown method `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// One (dataset, method, depth, fold) fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub dataset: String,
    pub method: Method,
    pub depth: usize,
    pub fold: usize,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub seed: u64,
    pub folds: usize,
    pub oct2_cfg: Oct2Config,
    pub cells: Vec<CvCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub dataset: String,
    pub method: Method,
    pub depth: usize,
    pub mean_train: f64,
    pub mean_test: f64,
    pub folds_ok: usize,
    pub folds_failed: usize,
}

/// Fits every method at every depth on every fold of a seeded stratified
/// split. Cells run in parallel; the report lists them in
/// (method, depth, fold) order. A failing fit is recorded and the run
/// continues.
pub fn run_cv(
    dataset: &str,
    ds: &BinaryDataset,
    methods: &[Method],
    depths: &[usize],
    k: usize,
    seed: u64,
    oct2_cfg: Oct2Config,
) -> Result<CvReport> {
    let folds = stratified_k_folds(ds, k, seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..k)
        .map(|f| (folds.train_indices(f), folds.test_indices(f)))
        .collect();
    let jobs: Vec<(Method, usize, usize)> = methods
        .iter()
        .flat_map(|&m| {
            depths
                .iter()
                .flat_map(move |&d| (0..k).map(move |f| (m, d, f)))
        })
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(method, depth, fold)| {
            let (train, test) = &splits[fold];
            let start = Instant::now();
            let fitted = rst_fit_subset(ds, train, &method.config(depth, oct2_cfg));
            let secs = start.elapsed().as_secs_f64();
            let mut cell = CvCell {
                dataset: dataset.to_string(),
                method,
                depth,
                fold,
                train_accuracy: None,
                test_accuracy: None,
                fit_seconds: Some(secs),
                error: None,
            };
            match fitted {
                Ok(fit) => {
                    cell.train_accuracy = Some(fit.tree.accuracy(ds, train));
                    cell.test_accuracy = Some(fit.tree.accuracy(ds, test));
                }
                Err(e) => cell.error = Some(e.to_string()),
            }
            cell
        })
        .collect();
    Ok(CvReport {
        seed,
        folds: k,
        oct2_cfg,
        cells,
    })
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

impl CvReport {
    pub fn merge(&mut self, other: CvReport) {
        self.cells.extend(other.cells);
    }

    /// Drops wall-clock fields so reports compare and serialize
    /// reproducibly.
    pub fn without_timing(mut self) -> Self {
        for c in &mut self.cells {
            c.fit_seconds = None;
        }
        self
    }

    fn cells_of<'a>(
        &'a self,
        dataset: &'a str,
        method: Method,
        depth: usize,
    ) -> impl Iterator<Item = &'a CvCell> + 'a {
        self.cells
            .iter()
            .filter(move |c| c.dataset == dataset && c.method == method && c.depth == depth)
    }

    pub fn summaries(&self) -> Vec<CvSummary> {
        let mut keys: Vec<(String, Method, usize)> = self
            .cells
            .iter()
            .map(|c| (c.dataset.clone(), c.method, c.depth))
            .collect();
        keys.dedup();
        let mut seen = std::collections::HashSet::new();
        keys.retain(|k| seen.insert(k.clone()));
        keys.into_iter()
            .map(|(dataset, method, depth)| {
                let cells: Vec<&CvCell> = self.cells_of(&dataset, method, depth).collect();
                let train: Vec<f64> = cells.iter().filter_map(|c| c.train_accuracy).collect();
                let test: Vec<f64> = cells.iter().filter_map(|c| c.test_accuracy).collect();
                CvSummary {
                    mean_train: mean(&train),
                    mean_test: mean(&test),
                    folds_ok: test.len(),
                    folds_failed: cells.len() - test.len(),
                    dataset,
                    method,
                    depth,
                }
            })
            .collect()
    }

    pub fn mean_test(&self, dataset: &str, method: Method, depth: usize) -> f64 {
        let v: Vec<f64> = self
            .cells_of(dataset, method, depth)
            .filter_map(|c| c.test_accuracy)
            .collect();
        mean(&v)
    }

    pub fn mean_train(&self, dataset: &str, method: Method, depth: usize) -> f64 {
        let v: Vec<f64> = self
            .cells_of(dataset, method, depth)
            .filter_map(|c| c.train_accuracy)
            .collect();
        mean(&v)
    }

    /// Mean accuracies in percent, one row per (dataset, depth) and one
    /// column per method.
    pub fn accuracy_table(&self, test: bool) -> String {
        let summaries = self.summaries();
        let mut methods: Vec<Method> = summaries.iter().map(|s| s.method).collect();
        methods.sort();
        methods.dedup();
        let mut rows: BTreeMap<(String, usize), BTreeMap<Method, f64>> = BTreeMap::new();
        for s in &summaries {
            let v = if test { s.mean_test } else { s.mean_train };
            rows.entry((s.dataset.clone(), s.depth))
                .or_default()
                .insert(s.method, v);
        }
        let mut header = vec!["dataset".to_string(), "depth".to_string()];
        header.extend(methods.iter().map(|m| m.name().to_string()));
        let body = rows
            .iter()
            .map(|((ds, d), vals)| {
                let mut r = vec![ds.clone(), d.to_string()];
                r.extend(methods.iter().map(|m| match vals.get(m) {
                    Some(v) if v.is_finite() => format!("{:.1}", 100.0 * v),
                    _ => "-".to_string(),
                }));
                r
            })
            .collect::<Vec<_>>();
        render_table(&header, &body)
    }
}

/// Left-aligned first column, right-aligned rest, two-space gutters.
pub fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    for r in std::iter::once(header).chain(rows.iter().map(|r| r.as_slice())) {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinTieRow {
    pub depth: usize,
    pub method: Method,
    pub wins: usize,
    pub ties_for_best: usize,
    pub instances: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinTieTable {
    pub methods: Vec<Method>,
    pub rows: Vec<WinTieRow>,
    /// Instances per depth skipped because some method had no result.
    pub excluded: BTreeMap<usize, usize>,
}

/// Test accuracy rounded to four decimals, as an exact integer key.
fn rounded(acc: f64) -> i64 {
    (acc * 1e4).round() as i64
}

/// Counts, per depth, how often each method strictly beats all others on
/// test accuracy (a win) or shares the best value (a tie for best). An
/// instance is one (dataset, depth, fold).
pub fn win_tie(report: &CvReport, methods: &[Method]) -> WinTieTable {
    let mut instances: BTreeMap<(usize, String, usize), BTreeMap<Method, Option<f64>>> =
        BTreeMap::new();
    for c in &report.cells {
        if methods.contains(&c.method) {
            instances
                .entry((c.depth, c.dataset.clone(), c.fold))
                .or_default()
                .insert(c.method, c.test_accuracy);
        }
    }
    let mut table: BTreeMap<(usize, usize), WinTieRow> = BTreeMap::new();
    let mut excluded: BTreeMap<usize, usize> = BTreeMap::new();
    for ((depth, _, _), accs) in &instances {
        let vals: Option<Vec<i64>> = methods
            .iter()
            .map(|m| accs.get(m).copied().flatten().map(rounded))
            .collect();
        let Some(vals) = vals else {
            *excluded.entry(*depth).or_default() += 1;
            continue;
        };
        let best = *vals.iter().max().expect("at least one method");
        let sharers = vals.iter().filter(|&&v| v == best).count();
        for (mi, &m) in methods.iter().enumerate() {
            let row = table.entry((*depth, mi)).or_insert(WinTieRow {
                depth: *depth,
                method: m,
                wins: 0,
                ties_for_best: 0,
                instances: 0,
            });
            row.instances += 1;
            if vals[mi] == best {
                if sharers == 1 {
                    row.wins += 1;
                } else {
                    row.ties_for_best += 1;
                }
            }
        }
    }
    WinTieTable {
        methods: methods.to_vec(),
        rows: table.into_values().collect(),
        excluded,
    }
}

impl WinTieTable {
    pub fn row(&self, depth: usize, method: Method) -> Option<&WinTieRow> {
        self.rows
            .iter()
            .find(|r| r.depth == depth && r.method == method)
    }

    /// Columns `win/tie` per method, one row per depth.
    pub fn to_text(&self) -> String {
        let mut header = vec!["depth".to_string()];
        header.extend(self.methods.iter().map(|m| format!("{m} win/tie")));
        header.push("instances".into());
        let mut depths: Vec<usize> = self.rows.iter().map(|r| r.depth).collect();
        depths.dedup();
        let body: Vec<Vec<String>> = depths
            .iter()
            .map(|&d| {
                let mut r = vec![d.to_string()];
                let mut n = 0;
                for &m in &self.methods {
                    let row = self.row(d, m).expect("row per method");
                    n = row.instances;
                    r.push(format!("{}/{}", row.wins, row.ties_for_best));
                }
                r.push(n.to_string());
                r
            })
            .collect();
        let mut out = render_table(&header, &body);
        for (d, n) in &self.excluded {
            let _ = writeln!(
                out,
                "depth {d}: {n} instance(s) excluded for missing results"
            );
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub n: usize,
    pub p: usize,
    pub depth: usize,
    pub loss: LossKind,
    pub precompute_seconds: f64,
    pub solve_seconds: f64,
    pub total_seconds: f64,
    pub subproblems: usize,
    pub train_accuracy: f64,
}

/// Fair-coin features with labels from a planted depth-3 tree and 10%
/// label noise.
pub fn timing_dataset(n: usize, p: usize, seed: u64) -> BinaryDataset {
    planted_tree(seed, n, p, 0.1)
}

/// Times a two-step rolling fit of depth `depth` on a synthetic `n × p`
/// dataset, split into cost-table construction and solving.
pub fn timing_bench(
    n: usize,
    p: usize,
    depth: usize,
    loss: LossKind,
    seed: u64,
) -> Result<TimingReport> {
    let ds = timing_dataset(n, p, seed);
    timing_with(&ds, &FitConfig::rst(depth, loss))
}

/// Times one fit of `cfg` on all of `ds`.
pub fn timing_with(ds: &BinaryDataset, cfg: &FitConfig) -> Result<TimingReport> {
    let all = ds.all_indices();
    let start = Instant::now();
    let fit = rst_fit_subset(ds, &all, cfg)?;
    let total_seconds = start.elapsed().as_secs_f64();
    Ok(TimingReport {
        n: ds.n(),
        p: ds.n_features(),
        depth: cfg.d_max,
        loss: fit.report.loss,
        precompute_seconds: fit.report.stats.precompute_seconds,
        solve_seconds: fit.report.stats.solve_seconds,
        total_seconds,
        subproblems: fit.report.stats.subproblems,
        train_accuracy: fit.tree.accuracy(ds, &all),
    })
}
