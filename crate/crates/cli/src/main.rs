use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;

use rolltree::data::{binarize, load_csv, load_unlabeled_csv, BinarizeOptions};
use rolltree::datasets::{self, Monks};
use rolltree::experiment::{
    render_table, run_cv, timing_dataset, timing_with, win_tie, CvReport, Method,
};
use rolltree::rst::rst_fit_subset;
use rolltree::{BinaryDataset, DecisionTree, LossKind, Oct2Config, RawDataset};

#[derive(Parser, Debug)]
#[command(
    name = "rolltree",
    version,
    about = "Rolling-lookahead classification trees"
)]
struct Cli {
    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, global = true, env = "ROLLTREE_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One-hot encode a CSV into 0/1 columns.
    Binarize(BinarizeArgs),
    /// Fit a tree and write it as JSON.
    Fit(FitArgs),
    /// Predict labels for a CSV with a saved model.
    Predict(PredictArgs),
    /// Stratified k-fold cross-validation.
    Cv(CvArgs),
    /// Win/tie counts from one or more cv reports.
    Compare(CompareArgs),
    /// Time fits on a synthetic dataset.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long, required_unless_present = "builtin", conflicts_with = "builtin")]
    input: Option<PathBuf>,

    /// Name of the label column.
    #[arg(long, default_value = "class")]
    label: String,

    /// Use a bundled dataset instead of --input.
    #[arg(long, value_enum)]
    builtin: Option<Builtin>,

    #[arg(long, default_value_t = b',' as char)]
    delimiter: char,

    /// Bins per numeric column with many distinct values.
    #[arg(long, default_value_t = BinarizeOptions::default().quantile_bins)]
    quantile_bins: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Builtin {
    Toy,
    TicTacToe,
    Monks1,
    Monks2,
}

#[derive(Args, Debug, Clone, Copy)]
struct SizeArgs {
    /// Minimum datapoints in each depth-1 node of a lookahead subtree.
    #[arg(long, default_value_t = 0)]
    n_int: usize,

    /// Minimum datapoints in each leaf of a lookahead subtree.
    #[arg(long, default_value_t = 0)]
    n_leaf: usize,

    /// Keep rolling when a subtree does not reduce misclassification.
    #[arg(long)]
    allow_no_improvement: bool,
}

impl SizeArgs {
    fn oct2(self) -> Oct2Config {
        Oct2Config {
            n_int: self.n_int,
            n_leaf: self.n_leaf,
            allow_no_improvement: self.allow_no_improvement,
        }
    }
}

#[derive(Args, Debug)]
struct BinarizeArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Binary CSV destination (stdout if omitted).
    #[arg(long)]
    output: Option<PathBuf>,

    /// Where to write the encoding schema as JSON.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,

    #[arg(long, default_value = "rst-g")]
    method: Method,

    #[arg(long, default_value_t = 3)]
    depth: usize,

    #[command(flatten)]
    size: SizeArgs,

    /// Model JSON destination (stdout if omitted).
    #[arg(long)]
    output: Option<PathBuf>,

    /// Also print the tree.
    #[arg(long)]
    show: bool,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,

    #[arg(long)]
    input: PathBuf,

    /// Label column to score against; predictions only if omitted.
    #[arg(long)]
    label: Option<String>,

    #[arg(long, default_value_t = b',' as char)]
    delimiter: char,

    /// Predicted labels destination (stdout if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Methods to run, comma separated (all if omitted).
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,

    /// Depths to run, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 4, 5])]
    depth: Vec<usize>,

    #[arg(long, default_value_t = 10)]
    folds: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[command(flatten)]
    size: SizeArgs,

    /// Dataset name recorded in the report (defaults to the file stem).
    #[arg(long)]
    name: Option<String>,

    /// Keep per-fit wall-clock times in the report.
    #[arg(long)]
    timing: bool,

    /// Report JSON destination.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// cv report files.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,

    /// Methods to compare, comma separated (all present if omitted).
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,

    /// Win/tie table JSON destination.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 50_000)]
    n: usize,

    #[arg(long, default_value_t = 135)]
    p: usize,

    #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 6, 8])]
    depth: Vec<usize>,

    #[arg(long, default_value = "hybrid")]
    method: Method,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[command(flatten)]
    size: SizeArgs,

    /// Timing reports as JSON.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring thread pool")?;
    }
    match cli.command {
        Command::Binarize(a) => cmd_binarize(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn delimiter(c: char) -> Result<u8> {
    u8::try_from(c).map_err(|_| anyhow::anyhow!("delimiter must be a single ASCII character"))
}

impl DataArgs {
    fn load_raw(&self) -> Result<RawDataset> {
        Ok(match (self.builtin, &self.input) {
            (Some(Builtin::Toy), _) => {
                rolltree::data::read_csv(datasets::TABLE1_CSV.as_bytes(), Some("y"), b',')?
            }
            (Some(Builtin::TicTacToe), _) => datasets::tic_tac_toe(),
            (Some(Builtin::Monks1), _) => datasets::monks(Monks::One, 0),
            (Some(Builtin::Monks2), _) => datasets::monks(Monks::Two, 0),
            (None, Some(path)) => load_csv(path, &self.label, delimiter(self.delimiter)?)?,
            (None, None) => bail!("one of --input or --builtin is required"),
        })
    }

    fn load(&self) -> Result<(BinaryDataset, rolltree::BinarizationSchema)> {
        let raw = self.load_raw()?;
        let opts = BinarizeOptions {
            quantile_bins: self.quantile_bins,
            ..Default::default()
        };
        Ok(binarize(&raw, opts)?)
    }

    fn name(&self) -> String {
        match (self.builtin, &self.input) {
            (Some(b), _) => b.to_possible_value().expect("named").get_name().to_string(),
            (None, Some(p)) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "data".into()),
            (None, None) => "data".into(),
        }
    }
}

fn write_out(path: Option<&Path>, body: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, body).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())?;
            Ok(())
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn cmd_binarize(a: BinarizeArgs) -> Result<()> {
    let (ds, schema) = a.data.load()?;
    let mut buf = Vec::new();
    ds.write_csv(&mut buf)?;
    write_out(a.output.as_deref(), std::str::from_utf8(&buf)?)?;
    if let Some(path) = &a.schema {
        write_out(Some(path), &schema.to_json()?)?;
    }
    eprintln!("{} rows, {} binary features", ds.n(), ds.n_features());
    Ok(())
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let (ds, schema) = a.data.load()?;
    let cfg = a.method.config(a.depth, a.size.oct2());
    let all = ds.all_indices();
    let fit = rst_fit_subset(&ds, &all, &cfg)?;
    if fit.report.premature_at_root() {
        warn!("premature termination at root");
    }
    let tree = fit.tree.with_schema(Some(schema));
    let mut summary = String::new();
    summary.push_str(&format!("method: {}\n", a.method));
    summary.push_str(&format!("depth: {} (max {})\n", tree.depth(), a.depth));
    summary.push_str(&format!("leaves: {}\n", tree.n_leaves()));
    summary.push_str(&format!(
        "training accuracy: {:.3}\n",
        tree.accuracy(&ds, &all)
    ));
    if a.show {
        summary.push_str(&format!("{tree}"));
    }
    let json = tree.to_json()? + "\n";
    match &a.output {
        Some(path) => {
            write_out(Some(path), &json)?;
            print!("{summary}");
        }
        None => {
            write_out(None, &json)?;
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let tree = DecisionTree::from_json(&read_to_string(&a.model)?)
        .with_context(|| format!("cannot load model {}", a.model.display()))?;
    let delim = delimiter(a.delimiter)?;
    let raw = match &a.label {
        Some(label) => load_csv(&a.input, label, delim)?,
        None => load_unlabeled_csv(&a.input, delim)?,
    };
    let pred = tree.predict_raw(&raw)?;
    let names = tree.class_names();
    let mut body = String::from("prediction\n");
    for &c in &pred {
        body.push_str(&names[c]);
        body.push('\n');
    }
    write_out(a.output.as_deref(), &body)?;
    if let Some(truth) = &raw.labels {
        let hits = pred
            .iter()
            .zip(truth)
            .filter(|(&c, t)| names[c] == **t)
            .count();
        let acc = if pred.is_empty() {
            1.0
        } else {
            hits as f64 / pred.len() as f64
        };
        eprintln!("accuracy: {acc:.3} ({hits}/{})", pred.len());
    }
    Ok(())
}

fn cmd_cv(a: CvArgs) -> Result<()> {
    let (ds, _) = a.data.load()?;
    let methods = if a.method.is_empty() {
        Method::ALL.to_vec()
    } else {
        a.method.clone()
    };
    let name = a.name.clone().unwrap_or_else(|| a.data.name());
    let mut report = run_cv(
        &name,
        &ds,
        &methods,
        &a.depth,
        a.folds,
        a.seed,
        a.size.oct2(),
    )?;
    if !a.timing {
        report = report.without_timing();
    }
    for cell in report.cells.iter().filter(|c| c.error.is_some()) {
        warn!(
            "{} depth {} fold {}: {}",
            cell.method,
            cell.depth,
            cell.fold,
            cell.error.as_deref().unwrap_or_default()
        );
    }
    if let Some(path) = &a.output {
        write_out(Some(path), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    println!("training accuracy (%)\n{}", report.accuracy_table(false));
    println!("test accuracy (%)\n{}", report.accuracy_table(true));
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let mut merged: Option<CvReport> = None;
    for path in &a.input {
        let r: CvReport = serde_json::from_str(&read_to_string(path)?)
            .with_context(|| format!("{} is not a cv report", path.display()))?;
        match &mut merged {
            Some(m) => m.merge(r),
            None => merged = Some(r),
        }
    }
    let report = merged.expect("at least one input");
    let methods = if a.method.is_empty() {
        let mut m: Vec<Method> = report.cells.iter().map(|c| c.method).collect();
        m.sort();
        m.dedup();
        m
    } else {
        a.method.clone()
    };
    let table = win_tie(&report, &methods);
    print!("{}", table.to_text());
    if let Some(path) = &a.output {
        write_out(Some(path), &(serde_json::to_string_pretty(&table)? + "\n"))?;
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let ds = timing_dataset(a.n, a.p, a.seed);
    let mut reports = Vec::new();
    for &d in &a.depth {
        reports.push(timing_with(&ds, &a.method.config(d, a.size.oct2()))?);
    }
    let header: Vec<String> = [
        "depth",
        "loss",
        "precompute s",
        "solve s",
        "total s",
        "subproblems",
        "train acc",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.depth.to_string(),
                match r.loss {
                    LossKind::Gini => "gini".into(),
                    LossKind::Misclassification => "misclass".into(),
                },
                format!("{:.3}", r.precompute_seconds),
                format!("{:.3}", r.solve_seconds),
                format!("{:.3}", r.total_seconds),
                r.subproblems.to_string(),
                format!("{:.3}", r.train_accuracy),
            ]
        })
        .collect();
    println!("{} x {} ({})", a.n, a.p, a.method);
    print!("{}", render_table(&header, &rows));
    if let Some(path) = &a.output {
        write_out(
            Some(path),
            &(serde_json::to_string_pretty(&reports)? + "\n"),
        )?;
    }
    Ok(())
}
