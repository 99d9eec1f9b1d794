use super::prob::{drive, update_factor};
use super::{NeuronParams, UpdateParams, WriteVector};
use crate::ternary::{InputMask, TernaryMatrix};
use crate::{Error, Result, RngStream};

/// Probabilities within this distance of 0 or 1 count as decided in a frozen step.
pub const FROZEN_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepReport {
    /// Transitions by +1.
    pub potentiated: usize,
    /// Transitions by -1.
    pub depressed: usize,
    /// Uniform draws consumed.
    pub draws: usize,
}

struct Prepared {
    active: Vec<usize>,
    /// `update_factor` for each active row, indexed by `w_t + 1`.
    factors: Vec<[f64; 3]>,
}

fn prepare(w: &TernaryMatrix, u1: &[f64], v: &WriteVector, np: &NeuronParams, up: &UpdateParams) -> Result<Prepared> {
    if u1.len() != w.cols() || v.len() != w.rows() {
        return Err(Error::Dimension(format!(
            "input length {}, write vector length {}, matrix {}x{}",
            u1.len(),
            v.len(),
            w.rows(),
            w.cols()
        )));
    }
    np.check_width(w.rows())?;
    up.validate()?;
    if let Some(bad) = u1.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Domain(format!("input activity {bad} not in [0, 1]")));
    }

    let active: Vec<usize> = (0..u1.len()).filter(|&j| u1[j] > 0.0).collect();
    let mask = InputMask::from_real(u1);
    let tau = np.temperature();
    // input sums come from the matrix as it was before this step
    let factors = v
        .entries()
        .iter()
        .map(|&(i, sign)| {
            let z = w.row_dot_masked(i, u1, &mask);
            let s = drive(z, np.bias_at(i), tau);
            [-1i8, 0, 1].map(|wt| update_factor(wt, sign, s, up))
        })
        .collect();
    Ok(Prepared { active, factors })
}

/// Applies one Markov transition driven by `(u1, v)`.
///
/// Only synapses with `v[i] != 0` and `u1[j] > 0` can move, so only those
/// consume a uniform draw. Each moves by `v[i]` with the marginal update
/// probability; a weight already at the end of its range stays put.
pub fn hebbian_step(
    w: &mut TernaryMatrix,
    u1: &[f64],
    v: &WriteVector,
    np: &NeuronParams,
    up: &UpdateParams,
    rng: &mut RngStream,
) -> Result<StepReport> {
    let prep = prepare(w, u1, v, np, up)?;
    let mut report = StepReport::default();
    for (&(i, sign), factor) in v.entries().iter().zip(&prep.factors) {
        for &j in &prep.active {
            let wt = w.value(i, j);
            let p = u1[j] * factor[(wt + 1) as usize];
            report.draws += 1;
            if rng.uniform() < p {
                apply(w, i, j, wt, sign, &mut report);
            }
        }
    }
    Ok(report)
}

/// The same transition for parameters where every update probability is
/// 0 or 1 (frozen neurons), taken without drawing random numbers.
pub fn frozen_step(
    w: &mut TernaryMatrix,
    u1: &[f64],
    v: &WriteVector,
    np: &NeuronParams,
    up: &UpdateParams,
) -> Result<StepReport> {
    let prep = prepare(w, u1, v, np, up)?;
    let mut report = StepReport::default();
    for (&(i, sign), factor) in v.entries().iter().zip(&prep.factors) {
        for &j in &prep.active {
            let wt = w.value(i, j);
            let p = u1[j] * factor[(wt + 1) as usize];
            if p >= 1.0 - FROZEN_TOLERANCE {
                apply(w, i, j, wt, sign, &mut report);
            } else if p > FROZEN_TOLERANCE {
                return Err(Error::NotDeterministic(p));
            }
        }
    }
    Ok(report)
}

#[inline]
fn apply(w: &mut TernaryMatrix, i: usize, j: usize, wt: i8, sign: i8, report: &mut StepReport) {
    let next = wt + sign;
    if !(-1..=1).contains(&next) {
        return;
    }
    w.put(i, j, next);
    if sign > 0 {
        report.potentiated += 1;
    } else {
        report.depressed += 1;
    }
}
