use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use serde::{Deserialize, Serialize};

use mchl_core::arithmetic::{
    bench_factorize, memorize_table, prime_factorize, required_bucket_size, sidecar_path, BenchRow, Selectors,
    TableModel, DEFAULT_TEMPERATURE,
};
use mchl_core::ternary::MatrixFile;
use mchl_core::RngStream;

use crate::config::require;
use crate::digits::out_dir;
use crate::manifest::Manifest;

fn load_model(path: Option<PathBuf>) -> anyhow::Result<TableModel> {
    let path = require(path, "model")?;
    TableModel::load(&path).with_context(|| format!("loading table {}", path.display()))
}

#[derive(Args, Serialize, Deserialize)]
pub struct MemorizeArgs {
    /// Largest factor M.
    #[arg(long)]
    pub m: Option<usize>,
    /// Bucket size [default: smallest size that fits every product].
    #[arg(long)]
    pub h: Option<usize>,
    /// Neuron temperature [default: 0.01].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Matrix file to write; the sidecar goes next to it [default: <out-dir>/table-m<M>.twm].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn memorize(args: MemorizeArgs) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    let m = require(args.m, "m")?;
    let h = match args.h {
        Some(h) => h,
        None => required_bucket_size(m)?,
    };
    let tau = args.tau.unwrap_or(DEFAULT_TEMPERATURE);
    let model = memorize_table(m, h, tau)?;
    let path = args
        .out
        .clone()
        .unwrap_or_else(|| out_dir(args.out_dir.clone(), "tables").join(format!("table-m{m}.twm")));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    model.save(&path)?;

    let mut manifest = Manifest::new("memorize", None, serde_json::json!({ "m": m, "h": h, "tau": tau }))?;
    manifest.output(&path)?;
    manifest.output(&sidecar_path(&path))?;
    manifest.write(&path.with_extension("manifest.json"))?;

    let a = model.index_vector();
    writeln!(out, "M={m} H={h} trained_labels={}", model.trained_labels())?;
    let shown = a.len().min(50);
    let head: Vec<String> = a[..shown].iter().map(|x| x.to_string()).collect();
    writeln!(out, "A[1..={shown}] = {}", head.join(" "))?;
    writeln!(out, "max A = {}", a.iter().max().unwrap_or(&0))?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

#[derive(Args, Serialize, Deserialize)]
pub struct ProductArgs {
    /// Table matrix file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    pub a: Option<usize>,
    pub b: Option<usize>,
}

pub fn product(args: ProductArgs) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    let model = load_model(args.model)?;
    let c = model.query_product(require(args.a, "a")?, require(args.b, "b")?)?;
    writeln!(out, "{c}")?;
    Ok(())
}

#[derive(Args, Serialize, Deserialize)]
pub struct AliquotArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    pub n: Option<usize>,
}

pub fn aliquot(args: AliquotArgs) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    let model = load_model(args.model)?;
    let parts = model.aliquot_parts(require(args.n, "n")?)?;
    let list: Vec<String> = parts.divisors.iter().map(|d| d.to_string()).collect();
    writeln!(out, "{}", list.join(" "))?;
    Ok(())
}

#[derive(Args, Serialize, Deserialize)]
pub struct FactorizeArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    pub n: Option<usize>,
    /// Print every intermediate state.
    #[arg(long)]
    #[serde(default)]
    pub trace: bool,
}

pub fn factorize(args: FactorizeArgs) -> anyhow::Result<()> {
    let model = load_model(args.model)?;
    let ops = Selectors::build(&model);
    let f = prime_factorize(&model, &ops, require(args.n, "n")?)?;
    let mut out = std::io::stdout().lock();
    if args.trace {
        for (t, s) in f.trace.iter().enumerate() {
            let parts: Vec<String> = s
                .iter()
                .map(|(n, e)| if e == 1 { n.to_string() } else { format!("{n}:{e}") })
                .collect();
            writeln!(out, "a{t} = {{{}}}", parts.join(", "))?;
        }
    }
    let fixed = f.trace.last().expect("trace holds at least the start");
    writeln!(out, "{} = {}", f.n, fixed)?;
    writeln!(out, "iterations {}", f.iterations)?;
    Ok(())
}

#[derive(Args, Serialize, Deserialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Integers to sample [default: 25].
    #[arg(long)]
    pub count: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV file to write instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("n,mchl_iters,direct_divisions\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r.n, r.mchl_iters, r.direct_divisions));
    }
    s
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

pub fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    let model_path = require(args.model.clone(), "model")?;
    let model = load_model(args.model)?;
    let count = args.count.unwrap_or(25);
    let seed = args.seed.unwrap_or(0);
    let ops = Selectors::build(&model);
    let rows = bench_factorize(&model, &ops, count, &mut RngStream::new(seed))?;
    let csv = bench_csv(&rows);
    match &args.out {
        Some(path) => {
            fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            let mut manifest = Manifest::new("bench-factorize", Some(seed), serde_json::json!({ "count": count }))?;
            manifest.input("table", &model_path)?;
            manifest.output(path)?;
            manifest.write(&path.with_extension("manifest.json"))?;
        }
        None => write!(out, "{csv}")?,
    }
    if !rows.is_empty() {
        eprintln!(
            "median mchl_iters {} median direct_divisions {}",
            median(rows.iter().map(|r| r.mchl_iters as f64).collect()),
            median(rows.iter().map(|r| r.direct_divisions as f64).collect())
        );
    }
    Ok(())
}

#[derive(Args, Serialize, Deserialize)]
pub struct InfoArgs {
    /// Matrix file.
    pub path: Option<PathBuf>,
}

pub fn info(args: InfoArgs) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    let path = require(args.path, "path")?;
    let f = MatrixFile::load_path(&path).with_context(|| format!("loading {}", path.display()))?;
    writeln!(out, "rows {}", f.matrix.rows())?;
    writeln!(out, "cols {}", f.matrix.cols())?;
    writeln!(out, "labels {}", f.layout.labels())?;
    writeln!(out, "bucket_size {}", f.layout.bucket_size())?;
    writeln!(out, "nonzero {}", f.matrix.nonzero_count())?;
    writeln!(out, "packed_bytes {}", f.matrix.packed_bytes())?;
    let side = sidecar_path(&path);
    if side.exists() {
        writeln!(out, "sidecar {}", side.display())?;
    }
    Ok(())
}
