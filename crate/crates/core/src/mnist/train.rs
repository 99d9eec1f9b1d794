use serde::{Deserialize, Serialize};

use super::{argmax, hidden_features, label_scores, FeatureSet, HiddenMode, Layer, LayerStack, DIGITS};
use crate::engine::{hebbian_step, make_write_vector, BucketLayout, NeuronParams, UpdateParams};
use crate::{Error, Result, RngStream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Bucket size `H` of each layer, bottom to top.
    pub bucket_sizes: Vec<usize>,
    pub labels: usize,
    /// Example presentations per layer.
    pub steps: usize,
    /// Evaluate every this many steps (0: only at the start and the end).
    pub eval_interval: usize,
    /// Evaluate on the first `n` test examples only.
    pub eval_limit: Option<usize>,
    pub update: UpdateParams,
    pub temperature: f64,
    pub seed: u64,
    pub hidden_mode: HiddenMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            bucket_sizes: vec![100],
            labels: DIGITS,
            steps: 60_000,
            eval_interval: 1_000,
            eval_limit: None,
            update: UpdateParams::new(0.1, 0.1).unwrap(),
            temperature: 1.0,
            seed: 0,
            hidden_mode: HiddenMode::Probability,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bucket_sizes.is_empty() {
            return Err(Error::Domain("at least one layer is required".into()));
        }
        for &h in &self.bucket_sizes {
            BucketLayout::new(self.labels, h)?;
        }
        self.update.validate()?;
        NeuronParams::uniform(0.0, self.temperature)?;
        Ok(())
    }

    pub fn neurons(&self) -> Result<NeuronParams> {
        NeuronParams::uniform(0.0, self.temperature)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPoint {
    pub step: usize,
    /// One-based index of the layer being trained.
    pub layer: usize,
    pub test_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub stack: LayerStack,
    pub curve: Vec<AccuracyPoint>,
}

fn layer_accuracy(layer: &Layer, data: &FeatureSet) -> Result<f64> {
    use rayon::prelude::*;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let correct = (0..data.len())
        .into_par_iter()
        .map(|i| -> Result<usize> {
            let scores = label_scores(&layer.forward(data.features(i))?, &layer.layout)?;
            Ok(usize::from(argmax(&scores) == data.label(i)))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(correct as f64 / data.len() as f64)
}

/// Presents `cfg.steps` examples to one layer.
///
/// Every step draws the example index, then the write-vector offset, then
/// runs [`hebbian_step`]. `eval` holds test examples already mapped to this
/// layer's input space; accuracy is logged at step 0, every
/// `cfg.eval_interval` steps and after the last step.
pub fn train_layer(
    layer: &mut Layer,
    train: &FeatureSet,
    eval: Option<&FeatureSet>,
    cfg: &TrainConfig,
    layer_number: usize,
    rng: &mut RngStream,
) -> Result<Vec<AccuracyPoint>> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train.dim() != layer.weights.cols() {
        return Err(Error::Dimension(format!(
            "examples of width {} for a layer expecting {}",
            train.dim(),
            layer.weights.cols()
        )));
    }
    let mut log = Vec::new();
    let mut record = |step: usize, layer: &Layer| -> Result<()> {
        if let Some(data) = eval {
            log.push(AccuracyPoint {
                step,
                layer: layer_number,
                test_accuracy: layer_accuracy(layer, data)?,
            });
        }
        Ok(())
    };
    record(0, layer)?;
    for step in 1..=cfg.steps {
        let k = rng.index(train.len());
        let v = make_write_vector(train.label(k), &layer.layout, rng)?;
        hebbian_step(
            &mut layer.weights,
            train.features(k),
            &v,
            &layer.neurons,
            &cfg.update,
            rng,
        )?;
        if step == cfg.steps || (cfg.eval_interval > 0 && step % cfg.eval_interval == 0) {
            record(step, layer)?;
        }
    }
    Ok(log)
}

/// Greedy layer-wise training: each layer is trained to completion, then
/// the whole training set is mapped through it to become the next layer's
/// input. A single random stream seeded with `cfg.seed` is used throughout.
pub fn train_stack(train: &FeatureSet, test: Option<&FeatureSet>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let neurons = cfg.neurons()?;
    let mut rng = RngStream::new(cfg.seed);
    let mut curve = Vec::new();
    let mut layers = Vec::new();

    let mut train_in = train.clone();
    let mut test_in = test.map(|t| match cfg.eval_limit {
        Some(n) => t.head(n),
        None => t.clone(),
    });
    for (k, &h) in cfg.bucket_sizes.iter().enumerate() {
        let layout = BucketLayout::new(cfg.labels, h)?;
        let mut layer = Layer::zero(train_in.dim(), layout, neurons.clone())?;
        curve.extend(train_layer(
            &mut layer,
            &train_in,
            test_in.as_ref(),
            cfg,
            k + 1,
            &mut rng,
        )?);
        if k + 1 < cfg.bucket_sizes.len() {
            train_in = hidden_features(&layer, &train_in, cfg.hidden_mode)?;
            test_in = test_in
                .map(|t| hidden_features(&layer, &t, cfg.hidden_mode))
                .transpose()?;
        }
        layers.push(layer);
    }
    Ok(TrainOutcome {
        stack: LayerStack::new(layers, cfg.hidden_mode)?,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mnist::evaluate_accuracy;

    /// Two well-separated synthetic classes on 8 inputs.
    fn toy(n: usize, seed: u64) -> FeatureSet {
        let mut rng = RngStream::new(seed);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for k in 0..n {
            let label = k % 2;
            for j in 0..8 {
                let on = (j < 4) == (label == 0);
                values.push(if on {
                    0.5 + 0.5 * rng.uniform()
                } else {
                    0.1 * rng.uniform()
                });
            }
            labels.push(label as u8);
        }
        FeatureSet::new(8, values, labels).unwrap()
    }

    fn cfg(steps: usize, buckets: Vec<usize>) -> TrainConfig {
        TrainConfig {
            bucket_sizes: buckets,
            labels: 2,
            steps,
            eval_interval: 50,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_steps_leave_the_layer_untouched() {
        let data = toy(20, 1);
        let out = train_stack(&data, Some(&data), &cfg(0, vec![3])).unwrap();
        assert_eq!(out.stack.layers()[0].weights.nonzero_count(), 0);
        assert_eq!(out.curve.len(), 1);
        assert_eq!(out.curve[0].step, 0);
    }

    #[test]
    fn learns_separable_classes() {
        let train = toy(400, 2);
        let test = toy(200, 3);
        let out = train_stack(&train, Some(&test), &cfg(300, vec![5, 3])).unwrap();
        assert!(evaluate_accuracy(&out.stack, &test).unwrap() > 0.95);
        let steps: Vec<(usize, usize)> = out.curve.iter().map(|p| (p.layer, p.step)).collect();
        assert_eq!(steps.first(), Some(&(1, 0)));
        assert_eq!(steps.last(), Some(&(2, 300)));
        assert_eq!(steps.len(), 2 * 7);
    }

    #[test]
    fn same_seed_same_matrices() {
        let train = toy(100, 4);
        let a = train_stack(&train, None, &cfg(100, vec![4, 2])).unwrap();
        let b = train_stack(&train, None, &cfg(100, vec![4, 2])).unwrap();
        assert_eq!(a.stack, b.stack);
        let mut other = cfg(100, vec![4, 2]);
        other.seed = 1;
        let c = train_stack(&train, None, &other).unwrap();
        assert_ne!(a.stack, c.stack);
    }

    #[test]
    fn writes_stay_in_touched_rows() {
        let data = toy(50, 6);
        let c = cfg(1, vec![40]);
        let layout = BucketLayout::new(2, 40).unwrap();
        let mut layer = Layer::zero(8, layout, c.neurons().unwrap()).unwrap();
        let mut rng = RngStream::new(9);
        let mut touched = std::collections::BTreeSet::new();
        for _ in 0..20 {
            let mut probe = rng.clone();
            let k = probe.index(data.len());
            let r = make_write_vector(data.label(k), &layout, &mut probe)
                .unwrap()
                .offset()
                .unwrap();
            touched.extend([r, 40 + r]);
            train_layer(&mut layer, &data, None, &c, 1, &mut rng).unwrap();
        }
        let nonzero: Vec<usize> = (0..80).filter(|&i| layer.weights.row_nonzero_count(i) > 0).collect();
        assert!(nonzero.iter().all(|i| touched.contains(i)));
        assert!(nonzero.len() <= touched.len().min(80));
    }

    #[test]
    fn saturated_updates_keep_fluctuating() {
        let data = toy(200, 7);
        let mut c = cfg(10_000, vec![4]);
        c.update = UpdateParams::new(1.0, 1.0).unwrap();
        let mut layer = Layer::zero(8, BucketLayout::new(2, 4).unwrap(), c.neurons().unwrap()).unwrap();
        let mut rng = RngStream::new(10);
        train_layer(&mut layer, &data, None, &c, 1, &mut rng).unwrap();
        for _ in 0..3 {
            let before = layer.weights.clone();
            train_layer(&mut layer, &data, None, &c, 1, &mut rng).unwrap();
            assert!(layer.weights.hamming_distance(&before).unwrap() > 0);
        }
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        let empty = FeatureSet::new(8, vec![], vec![]).unwrap();
        assert!(matches!(
            train_stack(&empty, None, &cfg(1, vec![2])),
            Err(Error::EmptyDataset)
        ));
        let data = toy(10, 5);
        let mut layer = Layer::zero(
            7,
            BucketLayout::new(2, 2).unwrap(),
            NeuronParams::uniform(0.0, 1.0).unwrap(),
        )
        .unwrap();
        let mut rng = RngStream::new(0);
        assert!(train_layer(&mut layer, &data, None, &cfg(1, vec![2]), 1, &mut rng).is_err());
        let bad = TrainConfig {
            bucket_sizes: vec![],
            ..cfg(1, vec![])
        };
        assert!(train_stack(&data, None, &bad).is_err());
    }
}
