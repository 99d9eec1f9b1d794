use std::env;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use mchl_core::engine::{NeuronParams, UpdateParams};
use mchl_core::mnist::{
    evaluate_accuracy, train_stack, AccuracyPoint, FeatureSet, HiddenMode, Layer, LayerStack, MnistDataset, Split,
    TrainConfig,
};
use mchl_core::ternary::MatrixFile;

use crate::config::{require, UsageError};
use crate::manifest::Manifest;

pub const DATA_DIR_ENV: &str = "MCHL_DATA_DIR";
pub const OUT_DIR_ENV: &str = "MCHL_OUT_DIR";

const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hidden {
    Probability,
    Binary,
}

impl From<Hidden> for HiddenMode {
    fn from(h: Hidden) -> Self {
        match h {
            Hidden::Probability => HiddenMode::Probability,
            Hidden::Binary => HiddenMode::Binary,
        }
    }
}

#[derive(Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Directory holding the four IDX files [env: MCHL_DATA_DIR; default: data/mnist].
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Output directory [env: MCHL_OUT_DIR; default: runs/mnist].
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Bucket size of each layer, bottom first [default: 100].
    #[arg(long, value_delimiter = ',')]
    pub buckets: Option<Vec<usize>>,
    /// Maximum potentiation probability [default: 0.1].
    #[arg(long)]
    pub p_plus: Option<f64>,
    /// Maximum depression probability [default: 0.1].
    #[arg(long)]
    pub p_minus: Option<f64>,
    /// Neuron temperature [default: 1].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Training examples presented per layer [default: 60000].
    #[arg(long)]
    pub steps: Option<usize>,
    /// Steps between test evaluations, 0 for start and end only [default: 1000].
    #[arg(long)]
    pub eval_interval: Option<usize>,
    /// Evaluate on the first N test images only.
    #[arg(long)]
    pub eval_limit: Option<usize>,
    /// Train on the first N training images only.
    #[arg(long)]
    pub train_limit: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Representation handed to the next layer [default: probability].
    #[arg(long, value_enum)]
    pub hidden_mode: Option<Hidden>,
}

fn data_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data/mnist"))
}

pub fn out_dir(flag: Option<PathBuf>, default: &str) -> PathBuf {
    flag.or_else(|| env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(default)))
        .unwrap_or_else(|| Path::new("runs").join(default))
}

fn load(dir: &Path, split: Split, limit: Option<usize>, manifest: &mut Manifest) -> anyhow::Result<FeatureSet> {
    let (images, labels) = match split {
        Split::Train => (TRAIN_IMAGES, TRAIN_LABELS),
        Split::Test => (TEST_IMAGES, TEST_LABELS),
    };
    let (ip, lp) = (dir.join(images), dir.join(labels));
    let ds =
        MnistDataset::load_idx(&ip, &lp, split).with_context(|| format!("loading MNIST from {}", dir.display()))?;
    manifest.input(images, &ip)?;
    manifest.input(labels, &lp)?;
    Ok(match limit {
        Some(n) => ds.examples.head(n),
        None => ds.examples,
    })
}

pub fn write_curve(path: &Path, curve: &[AccuracyPoint]) -> anyhow::Result<()> {
    let mut out = String::from("step,layer,test_accuracy\n");
    for p in curve {
        out.push_str(&format!("{},{},{:.6}\n", p.step, p.layer, p.test_accuracy));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn train(args: TrainArgs) -> anyhow::Result<()> {
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        bucket_sizes: args.buckets.clone().unwrap_or(defaults.bucket_sizes),
        steps: args.steps.unwrap_or(defaults.steps),
        eval_interval: args.eval_interval.unwrap_or(defaults.eval_interval),
        eval_limit: args.eval_limit,
        update: UpdateParams::new(
            args.p_plus.unwrap_or(defaults.update.p_plus_max),
            args.p_minus.unwrap_or(defaults.update.p_minus_max),
        )?,
        temperature: args.tau.unwrap_or(defaults.temperature),
        seed: args.seed.unwrap_or(defaults.seed),
        hidden_mode: args.hidden_mode.map(HiddenMode::from).unwrap_or_default(),
        ..defaults
    };
    cfg.validate()?;
    let dir = data_dir(args.data_dir.clone());
    let out = out_dir(args.out_dir.clone(), "mnist");

    let mut manifest = Manifest::new("train-mnist", Some(cfg.seed), &cfg)?;
    manifest.params["train_limit"] = serde_json::to_value(args.train_limit)?;
    let train_set = load(&dir, Split::Train, args.train_limit, &mut manifest)?;
    let test_set = load(&dir, Split::Test, None, &mut manifest)?;

    let outcome = train_stack(&train_set, Some(&test_set), &cfg)?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    for (k, layer) in outcome.stack.layers().iter().enumerate() {
        let path = out.join(format!("layer{}.twm", k + 1));
        layer.weights.save_to_path(&layer.layout, &path)?;
        manifest.output(&path)?;
    }
    let csv = out.join("accuracy.csv");
    write_curve(&csv, &outcome.curve)?;
    manifest.output(&csv)?;
    manifest.write(&out.join("manifest.json"))?;

    let mut stdout = std::io::stdout().lock();
    for p in &outcome.curve {
        writeln!(
            stdout,
            "layer {} step {} test_accuracy {:.4}",
            p.layer, p.step, p.test_accuracy
        )?;
    }
    writeln!(stdout, "wrote {}", out.display())?;
    Ok(())
}

#[derive(Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Layer checkpoints, bottom first.
    #[arg(long = "checkpoint")]
    pub checkpoints: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Neuron temperature [default: 1].
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_enum)]
    pub hidden_mode: Option<Hidden>,
    #[arg(long)]
    pub eval_limit: Option<usize>,
}

pub fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    let paths = require(args.checkpoints, "checkpoint")?;
    if paths.is_empty() {
        return Err(UsageError::missing("checkpoint").into());
    }
    let neurons = NeuronParams::uniform(0.0, args.tau.unwrap_or(1.0))?;
    let layers = paths
        .iter()
        .map(|p| {
            let f = MatrixFile::load_path(p).with_context(|| format!("loading {}", p.display()))?;
            Ok(Layer {
                weights: f.matrix,
                layout: f.layout,
                neurons: neurons.clone(),
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let stack = LayerStack::new(layers, args.hidden_mode.map(HiddenMode::from).unwrap_or_default())?;
    let mut manifest = Manifest::new("eval-mnist", None, ())?;
    let test = load(&data_dir(args.data_dir), Split::Test, args.eval_limit, &mut manifest)?;
    writeln!(out, "test_accuracy {:.4}", evaluate_accuracy(&stack, &test)?)?;
    Ok(())
}
