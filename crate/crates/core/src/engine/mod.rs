//! The learning rule: a two-layer stochastic network whose ternary weights
//! move by one state at a time under a Hebbian, output-gated transition
//! probability.

mod prob;
mod step;
mod write;

pub use prob::{
    activation_prob, conditional_update_prob, energy, joint_output_distribution, logistic, marginal_update_prob,
    sample_output, MAX_ENUMERATED_NEURONS,
};
pub use step::{frozen_step, hebbian_step, StepReport, FROZEN_TOLERANCE};
pub use write::{make_write_vector, WriteVector};

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `labels` buckets of `bucket_size` neurons each, bucket `l` covering
/// indices `l * H .. (l + 1) * H`. Labels and offsets are zero-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketLayout {
    labels: usize,
    bucket_size: usize,
}

impl BucketLayout {
    pub fn new(labels: usize, bucket_size: usize) -> Result<Self> {
        if labels == 0 || bucket_size == 0 {
            return Err(Error::Domain(format!(
                "bucket layout {labels}x{bucket_size} must be at least 1x1"
            )));
        }
        labels
            .checked_mul(bucket_size)
            .ok_or_else(|| Error::Dimension("bucket layout overflows".into()))?;
        Ok(BucketLayout { labels, bucket_size })
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn bucket_size(&self) -> usize {
        self.bucket_size
    }

    /// Number of output neurons, `L * H`.
    pub fn width(&self) -> usize {
        self.labels * self.bucket_size
    }

    pub fn index(&self, label: usize, offset: usize) -> usize {
        debug_assert!(label < self.labels && offset < self.bucket_size);
        label * self.bucket_size + offset
    }

    pub fn bucket(&self, label: usize) -> Range<usize> {
        label * self.bucket_size..(label + 1) * self.bucket_size
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bias {
    Uniform(f64),
    PerNeuron(Vec<f64>),
}

/// Output-neuron bias `a` and temperature `τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    bias: Bias,
    temperature: f64,
}

impl NeuronParams {
    pub fn uniform(bias: f64, temperature: f64) -> Result<Self> {
        Self::new(Bias::Uniform(bias), temperature)
    }

    pub fn per_neuron(bias: Vec<f64>, temperature: f64) -> Result<Self> {
        Self::new(Bias::PerNeuron(bias), temperature)
    }

    pub fn new(bias: Bias, temperature: f64) -> Result<Self> {
        check_temperature(temperature)?;
        let finite = match &bias {
            Bias::Uniform(a) => a.is_finite(),
            Bias::PerNeuron(a) => a.iter().all(|x| x.is_finite()),
        };
        if !finite {
            return Err(Error::Domain("bias must be finite".into()));
        }
        Ok(NeuronParams { bias, temperature })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn bias(&self) -> &Bias {
        &self.bias
    }

    #[inline]
    pub fn bias_at(&self, neuron: usize) -> f64 {
        match &self.bias {
            Bias::Uniform(a) => *a,
            Bias::PerNeuron(a) => a[neuron],
        }
    }

    /// Checks that a per-neuron bias has one entry per output neuron.
    pub fn check_width(&self, neurons: usize) -> Result<()> {
        match &self.bias {
            Bias::PerNeuron(a) if a.len() != neurons => {
                Err(Error::Dimension(format!("{} biases for {neurons} neurons", a.len())))
            }
            _ => Ok(()),
        }
    }
}

pub(crate) fn check_temperature(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("temperature must be positive, got {tau}")));
    }
    Ok(())
}

/// Maximum potentiation / depression probabilities and the current-weight gate.
///
/// The gate `1 / (1 + exp(k (w v - w0)))` is ~1 when the weight can still
/// move in the direction of `v` and ~0 once it has saturated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateParams {
    pub p_plus_max: f64,
    pub p_minus_max: f64,
    pub gate_steepness: f64,
    pub gate_center: f64,
}

impl UpdateParams {
    pub const DEFAULT_STEEPNESS: f64 = 100.0;
    pub const DEFAULT_CENTER: f64 = 0.5;

    pub fn new(p_plus_max: f64, p_minus_max: f64) -> Result<Self> {
        let p = UpdateParams {
            p_plus_max,
            p_minus_max,
            gate_steepness: Self::DEFAULT_STEEPNESS,
            gate_center: Self::DEFAULT_CENTER,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("P+", self.p_plus_max), ("P-", self.p_minus_max)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("{name} max probability {p} not in [0, 1]")));
            }
        }
        if !self.gate_steepness.is_finite() || !self.gate_center.is_finite() {
            return Err(Error::Domain("gate parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Sampled output activity, entries in `{0, 1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryVector(Vec<u8>);

impl BinaryVector {
    pub fn new(values: Vec<u8>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|&&x| x > 1) {
            return Err(Error::Domain(format!("binary entry {bad}")));
        }
        Ok(BinaryVector(values))
    }

    pub fn zeros(len: usize) -> Self {
        BinaryVector(vec![0; len])
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
