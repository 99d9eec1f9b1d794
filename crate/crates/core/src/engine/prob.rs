use super::{check_temperature, BinaryVector, NeuronParams, UpdateParams};
use crate::ternary::TernaryMatrix;
use crate::{Error, Result, RngStream};

/// Upper bound on `N` for [`joint_output_distribution`].
pub const MAX_ENUMERATED_NEURONS: usize = 20;

/// `1 / (1 + e^{-s})` without overflow for any finite `s`.
#[inline]
pub fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Argument `(2z - a) / τ` of the firing probability.
#[inline]
pub(crate) fn drive(z: f64, bias: f64, tau: f64) -> f64 {
    (2.0 * z - bias) / tau
}

/// `P(u2 = 1 | z) = 1 / (1 + exp((a - 2z) / τ))`.
pub fn activation_prob(z: f64, bias: f64, tau: f64) -> Result<f64> {
    check_temperature(tau)?;
    if !z.is_finite() || !bias.is_finite() {
        return Err(Error::Domain(format!("non-finite input z={z}, a={bias}")));
    }
    Ok(logistic(drive(z, bias, tau)))
}

/// Network energy `-(2 u2 - 1)ᵀ w u1 + aᵀ u2`.
pub fn energy(u1: &[f64], u2: &BinaryVector, w: &TernaryMatrix, bias: &[f64]) -> Result<f64> {
    if u2.len() != w.rows() || bias.len() != w.rows() {
        return Err(Error::Dimension(format!(
            "u2 length {}, bias length {}, matrix has {} rows",
            u2.len(),
            bias.len(),
            w.rows()
        )));
    }
    let z = w.matvec(u1)?;
    Ok(z.iter()
        .zip(u2.as_slice())
        .zip(bias)
        .map(|((&zi, &si), &ai)| -(2.0 * si as f64 - 1.0) * zi + ai * si as f64)
        .sum())
}

/// Draws each output independently, one uniform per neuron in index order.
pub fn sample_output(z: &[f64], params: &NeuronParams, rng: &mut RngStream) -> Result<BinaryVector> {
    params.check_width(z.len())?;
    let tau = params.temperature();
    let out = z
        .iter()
        .enumerate()
        .map(|(i, &zi)| {
            let p = activation_prob(zi, params.bias_at(i), tau)?;
            Ok(u8::from(rng.uniform() < p))
        })
        .collect::<Result<Vec<u8>>>()?;
    Ok(BinaryVector(out))
}

fn check_weight(w: i64) -> Result<()> {
    if !(-1..=1).contains(&w) {
        return Err(Error::Domain(format!("weight {w} not ternary")));
    }
    Ok(())
}

fn check_synapse(w_t: i64, u1: f64, v: i64) -> Result<()> {
    check_weight(w_t)?;
    if !(0.0..=1.0).contains(&u1) {
        return Err(Error::Domain(format!("input activity {u1} not in [0, 1]")));
    }
    if !(-1..=1).contains(&v) {
        return Err(Error::Domain(format!("write value {v} not ternary")));
    }
    Ok(())
}

#[inline]
fn gate(w_t: f64, v: f64, p: &UpdateParams) -> f64 {
    // 1 / (1 + e^{k (w v - w0)})
    logistic(-p.gate_steepness * (w_t * v - p.gate_center))
}

/// `P(Δw = v | w_t, u1, v, u2)` for one synapse.
pub fn conditional_update_prob(w_t: i64, u1: f64, v: i64, u2: i64, p: &UpdateParams) -> Result<f64> {
    check_synapse(w_t, u1, v)?;
    if !(0..=1).contains(&u2) {
        return Err(Error::Domain(format!("output activity {u2} not binary")));
    }
    p.validate()?;
    if v == 0 {
        return Ok(0.0);
    }
    let (w, v, s) = (w_t as f64, v as f64, u2 as f64);
    let bracket = p.p_plus_max * (1.0 - s) * (v + 1.0) + p.p_minus_max * s * (v - 1.0);
    Ok(u1 * v * bracket / 2.0 * gate(w, v, p))
}

/// Update probability with the output activity marginalized out, per unit
/// of input activity: `marginal_update_prob = u1 * update_factor`.
#[inline]
pub(crate) fn update_factor(w_t: i8, v: i8, drive: f64, p: &UpdateParams) -> f64 {
    if v == 0 {
        return 0.0;
    }
    let (w, v) = (w_t as f64, v as f64);
    let fire = logistic(drive);
    let quiet = logistic(-drive);
    let bracket = p.p_plus_max * (v + 1.0) * quiet + p.p_minus_max * (v - 1.0) * fire;
    v * bracket / 2.0 * gate(w, v, p)
}

/// `P(Δw = v | w_t, u1, v)` with `u2` drawn from the firing probability at
/// input sum `z`. A single uniform per synapse suffices to sample it.
pub fn marginal_update_prob(w_t: i64, u1: f64, v: i64, z: f64, bias: f64, tau: f64, p: &UpdateParams) -> Result<f64> {
    check_synapse(w_t, u1, v)?;
    check_temperature(tau)?;
    p.validate()?;
    if !z.is_finite() || !bias.is_finite() {
        return Err(Error::Domain(format!("non-finite input z={z}, a={bias}")));
    }
    Ok(u1 * update_factor(w_t as i8, v as i8, drive(z, bias, tau), p))
}

/// Boltzmann distribution `P(u2 | u1) ∝ exp(-E(u1, u2) / τ)` over all `2^N`
/// output states. State `s` has `u2[i] = (s >> i) & 1`.
pub fn joint_output_distribution(w: &TernaryMatrix, u1: &[f64], params: &NeuronParams) -> Result<Vec<f64>> {
    let n = w.rows();
    if n > MAX_ENUMERATED_NEURONS {
        return Err(Error::Domain(format!(
            "{n} output neurons is too many to enumerate (max {MAX_ENUMERATED_NEURONS})"
        )));
    }
    params.check_width(n)?;
    let tau = params.temperature();
    let bias: Vec<f64> = (0..n).map(|i| params.bias_at(i)).collect();
    let mut logits = Vec::with_capacity(1 << n);
    for state in 0..1usize << n {
        let u2 = BinaryVector((0..n).map(|i| ((state >> i) & 1) as u8).collect());
        logits.push(-energy(u1, &u2, w, &bias)? / tau);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let partition: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|x| x / partition).collect())
}
