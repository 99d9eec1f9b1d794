//! Bucketed digit classification trained greedily, one layer at a time.
//!
//! Each layer maps its input to `L * H` output neurons. During training the
//! neurons are stochastic; for evaluation and for feeding the next layer
//! they are replaced by deterministic sigmoids `1 / (1 + e^{(a - 2z)/τ})`,
//! and the score of a label is the summed output of its bucket.

mod idx;
mod train;

pub use idx::{parse_images, parse_labels, IMAGE_MAGIC, LABEL_MAGIC};
pub use train::{train_layer, train_stack, AccuracyPoint, TrainConfig, TrainOutcome};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{logistic, BucketLayout, NeuronParams};
use crate::ternary::{InputMask, TernaryMatrix};
use crate::{Error, Result};

pub const DIGITS: usize = 10;
pub const PIXELS: usize = 784;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Fixed-width real feature vectors in `[0, 1]` with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    values: Vec<f64>,
    labels: Vec<u8>,
}

impl FeatureSet {
    pub fn new(dim: usize, values: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if dim == 0 || values.len() != dim * labels.len() {
            return Err(Error::Dimension(format!(
                "{} values for {} examples of width {dim}",
                values.len(),
                labels.len()
            )));
        }
        if let Some(bad) = values.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Domain(format!("feature {bad} not in [0, 1]")));
        }
        Ok(FeatureSet { dim, values, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// The first `n` examples (all of them if `n >= len`).
    pub fn head(&self, n: usize) -> FeatureSet {
        let n = n.min(self.len());
        FeatureSet {
            dim: self.dim,
            values: self.values[..n * self.dim].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MnistDataset {
    pub split: Split,
    pub examples: FeatureSet,
}

/// What a hidden layer hands to the layer above it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HiddenMode {
    /// The firing probability `P(u2 = 1)` itself.
    #[default]
    Probability,
    /// That probability thresholded at 1/2.
    Binary,
}

impl HiddenMode {
    fn apply(self, outputs: &mut [f64]) {
        if self == HiddenMode::Binary {
            for x in outputs {
                *x = if *x > 0.5 { 1.0 } else { 0.0 };
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: TernaryMatrix,
    pub layout: BucketLayout,
    pub neurons: NeuronParams,
}

impl Layer {
    pub fn zero(inputs: usize, layout: BucketLayout, neurons: NeuronParams) -> Result<Self> {
        Ok(Layer {
            weights: TernaryMatrix::new_zero(layout.width(), inputs)?,
            layout,
            neurons,
        })
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        forward_deterministic(&self.weights, input, &self.neurons)
    }
}

/// Deterministic sigmoid outputs `1 / (1 + e^{(a - 2z)/τ})` with `z = w x`.
pub fn forward_deterministic(w: &TernaryMatrix, input: &[f64], np: &NeuronParams) -> Result<Vec<f64>> {
    np.check_width(w.rows())?;
    if input.len() != w.cols() {
        return Err(Error::Dimension(format!(
            "input of length {} for a {}x{} matrix",
            input.len(),
            w.rows(),
            w.cols()
        )));
    }
    let tau = np.temperature();
    let mask = InputMask::from_real(input);
    Ok((0..w.rows())
        .map(|i| {
            let z = w.row_dot_masked(i, input, &mask);
            logistic((2.0 * z - np.bias_at(i)) / tau)
        })
        .collect())
}

/// Per-label bucket sums of the outputs.
pub fn label_scores(outputs: &[f64], layout: &BucketLayout) -> Result<Vec<f64>> {
    if outputs.len() != layout.width() {
        return Err(Error::Dimension(format!(
            "{} outputs for a {}x{} layout",
            outputs.len(),
            layout.labels(),
            layout.bucket_size()
        )));
    }
    Ok(outputs
        .chunks_exact(layout.bucket_size())
        .map(|bucket| bucket.iter().sum())
        .collect())
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerStack {
    layers: Vec<Layer>,
    hidden_mode: HiddenMode,
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>, hidden_mode: HiddenMode) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::Dimension("a stack needs at least one layer".into()));
        };
        let labels = first.layout.labels();
        for pair in layers.windows(2) {
            if pair[1].weights.cols() != pair[0].layout.width() {
                return Err(Error::Dimension(format!(
                    "layer of width {} feeds a layer expecting {} inputs",
                    pair[0].layout.width(),
                    pair[1].weights.cols()
                )));
            }
        }
        if layers.iter().any(|l| l.layout.labels() != labels) {
            return Err(Error::Dimension("layers disagree on the label count".into()));
        }
        for l in &layers {
            l.neurons.check_width(l.layout.width())?;
        }
        Ok(LayerStack { layers, hidden_mode })
    }

    /// All-zero stack: `bucket_sizes[k]` is `H` of layer `k + 1`.
    pub fn zero(inputs: usize, labels: usize, bucket_sizes: &[usize], neurons: &NeuronParams) -> Result<Self> {
        let mut layers = Vec::with_capacity(bucket_sizes.len());
        let mut width = inputs;
        for &h in bucket_sizes {
            let layout = BucketLayout::new(labels, h)?;
            layers.push(Layer::zero(width, layout, neurons.clone())?);
            width = layout.width();
        }
        Self::new(layers, HiddenMode::default())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn hidden_mode(&self) -> HiddenMode {
        self.hidden_mode
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.cols()
    }

    /// The stack made of the first `depth` layers.
    pub fn truncated(&self, depth: usize) -> Result<LayerStack> {
        if depth == 0 || depth > self.layers.len() {
            return Err(Error::Dimension(format!(
                "depth {depth} for a {}-layer stack",
                self.layers.len()
            )));
        }
        Ok(LayerStack {
            layers: self.layers[..depth].to_vec(),
            hidden_mode: self.hidden_mode,
        })
    }

    pub fn output_layout(&self) -> &BucketLayout {
        &self.layers[self.layers.len() - 1].layout
    }

    /// Outputs of the top layer.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut x = input.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            x = layer.forward(&x)?;
            if k + 1 < self.layers.len() {
                self.hidden_mode.apply(&mut x);
            }
        }
        Ok(x)
    }

    pub fn scores(&self, input: &[f64]) -> Result<Vec<f64>> {
        label_scores(&self.forward(input)?, self.output_layout())
    }
}

pub fn predict(stack: &LayerStack, image: &[f64]) -> Result<usize> {
    Ok(argmax(&stack.scores(image)?))
}

/// Fraction of examples whose prediction equals the label.
pub fn evaluate_accuracy(stack: &LayerStack, data: &FeatureSet) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim() != stack.input_dim() {
        return Err(Error::Dimension(format!(
            "examples of width {} for a stack expecting {}",
            data.dim(),
            stack.input_dim()
        )));
    }
    let correct = (0..data.len())
        .into_par_iter()
        .map(|i| predict(stack, data.features(i)).map(|p| usize::from(p == data.label(i))))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(correct as f64 / data.len() as f64)
}

/// Runs every example through `layer`, producing the next layer's inputs.
pub fn hidden_features(layer: &Layer, data: &FeatureSet, mode: HiddenMode) -> Result<FeatureSet> {
    let width = layer.layout.width();
    let mut values = vec![0.0; data.len() * width];
    values
        .par_chunks_mut(width)
        .enumerate()
        .try_for_each(|(i, out)| -> Result<()> {
            out.copy_from_slice(&layer.forward(data.features(i))?);
            mode.apply(out);
            Ok(())
        })?;
    FeatureSet::new(width, values, data.labels().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn np() -> NeuronParams {
        NeuronParams::uniform(0.0, 1.0).unwrap()
    }

    #[test]
    fn zero_matrix_outputs_half() {
        let w = TernaryMatrix::new_zero(4, 3).unwrap();
        let out = forward_deterministic(&w, &[0.2, 0.9, 1.0], &np()).unwrap();
        assert_eq!(out, vec![0.5; 4]);
    }

    #[test]
    fn single_row_output() {
        let mut w = TernaryMatrix::new_zero(1, 784).unwrap();
        w.set(0, 0, 1).unwrap();
        let mut e1 = vec![0.0; 784];
        e1[0] = 1.0;
        let out = forward_deterministic(&w, &e1, &np()).unwrap();
        assert!((out[0] - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
        assert!(forward_deterministic(&w, &[0.0; 3], &np()).is_err());
    }

    #[test]
    fn outputs_are_monotone_in_aligned_pixels() {
        let w = TernaryMatrix::from_rows(2, 3, &[1, 0, -1, 1, 1, 0]).unwrap();
        let base = forward_deterministic(&w, &[0.3, 0.2, 0.1], &np()).unwrap();
        let more = forward_deterministic(&w, &[0.6, 0.2, 0.1], &np()).unwrap();
        assert!(more.iter().zip(&base).all(|(m, b)| m >= b));
    }

    #[test]
    fn scores_and_argmax() {
        let layout = BucketLayout::new(3, 4).unwrap();
        assert_eq!(label_scores(&[0.5; 12], &layout).unwrap(), vec![2.0; 3]);
        let one = BucketLayout::new(3, 1).unwrap();
        assert_eq!(label_scores(&[0.1, 0.7, 0.2], &one).unwrap(), vec![0.1, 0.7, 0.2]);
        let a = label_scores(&[0.1, 0.9, 0.3, 0.4, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0], &layout).unwrap();
        let b = label_scores(&[0.4, 0.3, 0.9, 0.1, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0], &layout).unwrap();
        assert_eq!(a, b);
        assert!(label_scores(&[0.5; 11], &layout).is_err());
        assert_eq!(argmax(&[0.1, 3.9, 1.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0, 2.0]), 0);
        assert_eq!(argmax(&[1.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn zero_stack_predicts_label_zero() {
        let stack = LayerStack::zero(6, 10, &[3, 2], &np()).unwrap();
        assert_eq!(predict(&stack, &[0.5; 6]).unwrap(), 0);
        let data = FeatureSet::new(6, vec![0.5; 12], vec![0, 4]).unwrap();
        assert_eq!(evaluate_accuracy(&stack, &data).unwrap(), 0.5);
        let empty = FeatureSet::new(6, vec![], vec![]).unwrap();
        assert!(matches!(evaluate_accuracy(&stack, &empty), Err(Error::EmptyDataset)));
    }

    #[test]
    fn stack_chain_is_checked() {
        let l1 = Layer::zero(4, BucketLayout::new(2, 3).unwrap(), np()).unwrap();
        let l2 = Layer::zero(5, BucketLayout::new(2, 1).unwrap(), np()).unwrap();
        assert!(LayerStack::new(vec![l1.clone(), l2], HiddenMode::Probability).is_err());
        let l3 = Layer::zero(6, BucketLayout::new(3, 1).unwrap(), np()).unwrap();
        assert!(LayerStack::new(vec![l1.clone(), l3], HiddenMode::Probability).is_err());
        assert!(LayerStack::new(vec![], HiddenMode::Probability).is_err());
        let ok = LayerStack::new(vec![l1], HiddenMode::Binary).unwrap();
        assert!(ok.truncated(2).is_err());
    }

    #[test]
    fn binary_mode_thresholds_hidden_outputs() {
        let w = TernaryMatrix::from_rows(2, 2, &[1, 0, -1, 0]).unwrap();
        let layer = Layer {
            weights: w,
            layout: BucketLayout::new(2, 1).unwrap(),
            neurons: np(),
        };
        let data = FeatureSet::new(2, vec![0.5, 0.0], vec![0]).unwrap();
        let p = hidden_features(&layer, &data, HiddenMode::Probability).unwrap();
        assert!(p.features(0)[0] > 0.5 && p.features(0)[1] < 0.5);
        let b = hidden_features(&layer, &data, HiddenMode::Binary).unwrap();
        assert_eq!(b.features(0), &[1.0, 0.0]);
    }
}
