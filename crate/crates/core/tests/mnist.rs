use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use mchl_core::engine::{BucketLayout, NeuronParams};
use mchl_core::mnist::{
    evaluate_accuracy, predict, train_stack, FeatureSet, Layer, LayerStack, MnistDataset, Split, TrainConfig,
};
use mchl_core::{RngStream, TernaryMatrix};

fn idx_images(images: &[Vec<u8>], side: u32) -> Vec<u8> {
    let mut out = Vec::new();
    for x in [0x803u32, images.len() as u32, side, side] {
        out.extend_from_slice(&x.to_be_bytes());
    }
    for img in images {
        out.extend_from_slice(img);
    }
    out
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&0x801u32.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Digit `d` lights up stripe `d` of a 10x10 image, with pixel noise.
fn stripes(n: usize, seed: u64) -> (Vec<Vec<u8>>, Vec<u8>) {
    let mut rng = RngStream::new(seed);
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let d = rng.index(10);
        let img = (0..100)
            .map(|p| {
                if p / 10 == d {
                    200 + rng.index(56) as u8
                } else {
                    rng.index(40) as u8
                }
            })
            .collect();
        images.push(img);
        labels.push(d as u8);
    }
    (images, labels)
}

#[test]
fn synthetic_idx_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, bytes: Vec<u8>| {
        let p = dir.path().join(name);
        std::fs::write(&p, bytes).unwrap();
        p
    };
    let (ti, tl) = stripes(2000, 1);
    let (ei, el) = stripes(500, 2);
    let train = MnistDataset::load_idx(
        write("ti", idx_images(&ti, 10)),
        write("tl", idx_labels(&tl)),
        Split::Train,
    )
    .unwrap()
    .examples;
    let test = MnistDataset::load_idx(
        write("ei", idx_images(&ei, 10)),
        write("el", idx_labels(&el)),
        Split::Test,
    )
    .unwrap()
    .examples;
    assert_eq!(train.dim(), 100);

    let cfg = TrainConfig {
        bucket_sizes: vec![8, 4],
        steps: 3000,
        eval_interval: 1000,
        ..TrainConfig::default()
    };
    let out = train_stack(&train, Some(&test), &cfg).unwrap();
    assert!(evaluate_accuracy(&out.stack, &test).unwrap() > 0.95);
    assert!(evaluate_accuracy(&out.stack.truncated(1).unwrap(), &test).unwrap() > 0.95);
    assert_eq!(out.curve.len(), 8);
    let again = train_stack(&train, Some(&test), &cfg).unwrap();
    assert_eq!(again.stack, out.stack);
    assert_eq!(again.curve, out.curve);
}

#[test]
fn accuracy_of_single_matching_example_is_one() {
    let layout = BucketLayout::new(10, 1).unwrap();
    let mut w = TernaryMatrix::new_zero(10, 4).unwrap();
    w.set(3, 0, 1).unwrap();
    let layer = Layer {
        weights: w,
        layout,
        neurons: NeuronParams::uniform(0.0, 1.0).unwrap(),
    };
    let stack = LayerStack::new(vec![layer], Default::default()).unwrap();
    let x = FeatureSet::new(4, vec![1.0, 0.0, 0.0, 0.0], vec![3]).unwrap();
    assert_eq!(predict(&stack, x.features(0)).unwrap(), 3);
    assert_eq!(evaluate_accuracy(&stack, &x).unwrap(), 1.0);
}

struct Data {
    train: FeatureSet,
    test: FeatureSet,
}

fn data_dir() -> PathBuf {
    std::env::var_os("MCHL_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn mnist() -> Option<&'static Data> {
    static DATA: OnceLock<Option<Data>> = OnceLock::new();
    DATA.get_or_init(|| {
        let dir = data_dir();
        let load = |i, l, s| {
            MnistDataset::load_idx(dir.join(i), dir.join(l), s)
                .ok()
                .map(|d| d.examples)
        };
        let data = Data {
            train: load("train-images-idx3-ubyte", "train-labels-idx1-ubyte", Split::Train)?,
            test: load("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", Split::Test)?,
        };
        Some(data)
    })
    .as_ref()
    .or_else(|| {
        eprintln!("MNIST files not found in {}; skipping", data_dir().display());
        None
    })
}

#[test]
fn zero_stack_predicts_the_first_class() {
    let Some(data) = mnist() else { return };
    let stack = LayerStack::zero(784, 10, &[100], &NeuronParams::uniform(0.0, 1.0).unwrap()).unwrap();
    let zeros = data.test.labels().iter().filter(|&&l| l == 0).count();
    assert_eq!(zeros, 980);
    let acc = evaluate_accuracy(&stack, &data.test).unwrap();
    assert_eq!(acc, zeros as f64 / data.test.len() as f64);
}

#[test]
fn deeper_stacks() {
    let Some(data) = mnist() else { return };
    let cfg = TrainConfig {
        bucket_sizes: vec![100, 50, 30],
        ..TrainConfig::default()
    };
    let out = train_stack(&data.train, None, &cfg).unwrap();
    let one_hidden = evaluate_accuracy(&out.stack.truncated(2).unwrap(), &data.test).unwrap();
    let two_hidden = evaluate_accuracy(&out.stack, &data.test).unwrap();
    assert!(two_hidden >= one_hidden - 0.005, "{two_hidden} vs {one_hidden}");

    // permuting rows within each bucket of the top matrix leaves predictions unchanged
    let top = out.stack.layers().last().unwrap();
    let h = top.layout.bucket_size();
    let mut rng = RngStream::new(5);
    let mut rows: Vec<Vec<i8>> = (0..top.weights.rows()).map(|i| top.weights.row(i)).collect();
    for bucket in rows.chunks_mut(h) {
        for k in (1..bucket.len()).rev() {
            bucket.swap(k, rng.index(k + 1));
        }
    }
    let flat: Vec<i8> = rows.concat();
    let mut layers = out.stack.layers().to_vec();
    let last = layers.last_mut().unwrap();
    last.weights = TernaryMatrix::from_rows(last.weights.rows(), last.weights.cols(), &flat).unwrap();
    let permuted = LayerStack::new(layers, out.stack.hidden_mode()).unwrap();
    let sample = data.test.head(1000);
    for i in 0..sample.len() {
        assert_eq!(
            predict(&permuted, sample.features(i)).unwrap(),
            predict(&out.stack, sample.features(i)).unwrap()
        );
    }
}
