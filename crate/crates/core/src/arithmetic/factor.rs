use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TableModel;
use crate::{Error, Result, RngStream};

/// Exponent vector `a_t`, stored sparsely. Zero exponents are never kept.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorState {
    exponents: BTreeMap<usize, u64>,
}

impl FactorState {
    /// The initial state `{n: 1}`.
    pub fn of(n: usize) -> Self {
        let mut exponents = BTreeMap::new();
        if n > 0 {
            exponents.insert(n, 1);
        }
        FactorState { exponents }
    }

    pub fn from_exponents(pairs: impl IntoIterator<Item = (usize, u64)>) -> Self {
        let mut s = FactorState::default();
        for (n, e) in pairs {
            s.add(n, e);
        }
        s
    }

    fn add(&mut self, n: usize, e: u64) {
        if e > 0 {
            *self.exponents.entry(n).or_default() += e;
        }
    }

    pub fn exponent(&self, n: usize) -> u64 {
        self.exponents.get(&n).copied().unwrap_or(0)
    }

    /// Nonzero `(component, exponent)` pairs in ascending component order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.exponents.iter().map(|(&n, &e)| (n, e))
    }

    pub fn components(&self) -> Vec<usize> {
        self.exponents.keys().copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// `Π n^e`, or `None` on overflow.
    pub fn value(&self) -> Option<u128> {
        self.iter().try_fold(1u128, |acc, (n, e)| {
            let e = u32::try_from(e).ok()?;
            acc.checked_mul((n as u128).checked_pow(e)?)
        })
    }
}

/// Renders as `2^3 · 3 · 5 · 7`; the empty state renders as `1`.
impl fmt::Display for FactorState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "1");
        }
        for (k, (n, e)) in self.iter().enumerate() {
            if k > 0 {
                write!(f, " · ")?;
            }
            if e == 1 {
                write!(f, "{n}")?;
            } else {
                write!(f, "{n}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Selector operators of a trained table.
///
/// `T1` maps component `n` to the row of the `k`-th pair stored under `n`,
/// `k = max(A[n] - 1, 1)`; components are indexed over the full product
/// range `1..=M²`. `T2` folds the two input halves onto one `M`-vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selectors {
    m: usize,
    bucket_size: usize,
    /// Selected row per component, `None` where `A[n] = 0`.
    rows: Vec<Option<usize>>,
}

impl Selectors {
    pub fn build(model: &TableModel) -> Self {
        let rows = (1..=model.m() * model.m())
            .map(|n| match model.count(n) {
                0 => None,
                a => Some(model.row_of(n, (a as usize - 1).max(1))),
            })
            .collect();
        Selectors {
            m: model.m(),
            bucket_size: model.bucket_size(),
            rows,
        }
    }

    /// Number of components (columns of `T1`).
    pub fn components(&self) -> usize {
        self.rows.len()
    }

    pub fn t1_row(&self, n: usize) -> Option<usize> {
        if n == 0 {
            return None;
        }
        self.rows.get(n - 1).copied().flatten()
    }

    /// Slot `k` selected for component `n`.
    pub fn slot(&self, n: usize) -> Option<usize> {
        self.t1_row(n).map(|row| row % self.bucket_size + 1)
    }

    /// `T1[i, j]` with a zero-based row `i` and a one-based component `j`.
    pub fn t1(&self, i: usize, j: usize) -> u8 {
        u8::from(self.t1_row(j) == Some(i))
    }

    /// `T2[i, j]`, both one-based.
    pub fn t2(&self, i: usize, j: usize) -> u8 {
        u8::from(i >= 1 && i <= self.m && (j == i || j == i + self.m))
    }

    /// `T2 · z`.
    pub fn fold(&self, z: &[i64]) -> Result<Vec<i64>> {
        if z.len() != 2 * self.m {
            return Err(Error::Dimension(format!(
                "fold of length {} for M = {}",
                z.len(),
                self.m
            )));
        }
        Ok((0..self.m).map(|d| z[d] + z[self.m + d]).collect())
    }
}

pub fn build_selectors(model: &TableModel) -> Selectors {
    Selectors::build(model)
}

/// One cycle: select, read back through `wᵀ`, fold, drop the factor 1.
pub fn factorize_step(model: &TableModel, ops: &Selectors, state: &FactorState) -> Result<FactorState> {
    let mut u = Vec::with_capacity(state.exponents.len());
    for (n, e) in state.iter() {
        let row = ops.t1_row(n).ok_or(Error::Unfactorizable(n))?;
        let e = i64::try_from(e).map_err(|_| Error::Domain(format!("exponent {e} too large")))?;
        u.push((row, e));
    }
    let z = model.weights().transpose_matvec_sparse(&u)?;
    let folded = ops.fold(&z)?;
    Ok(FactorState::from_exponents(
        folded.iter().enumerate().skip(1).map(|(d, &x)| (d + 1, x as u64)),
    ))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factorization {
    pub n: usize,
    /// Prime to exponent.
    pub factors: BTreeMap<usize, u64>,
    /// Number of steps that changed the state.
    pub iterations: usize,
    /// `a_0, a_1, …` up to and including the fixed point.
    pub trace: Vec<FactorState>,
}

fn iteration_cap(n: usize) -> usize {
    (usize::BITS - n.leading_zeros()) as usize + 1
}

/// Iterates [`factorize_step`] from `{n: 1}` until the state stops changing.
pub fn prime_factorize(model: &TableModel, ops: &Selectors, n: usize) -> Result<Factorization> {
    if n == 0 {
        return Err(Error::Domain("cannot factorize 0".into()));
    }
    let mut trace = vec![FactorState::of(n)];
    loop {
        let current = trace.last().unwrap();
        let next = factorize_step(model, ops, current)?;
        if &next == current {
            break;
        }
        trace.push(next);
        if trace.len() > iteration_cap(n) + 1 {
            return Err(Error::Domain(format!("factorization of {n} does not converge")));
        }
    }
    let fixed = trace.last().unwrap();
    if fixed.value() != Some(n as u128) {
        return Err(Error::Domain(format!("factors {fixed} do not recompose to {n}")));
    }
    Ok(Factorization {
        n,
        factors: fixed.exponents.clone(),
        iterations: trace.len() - 1,
        trace,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectSearch {
    /// Prime factors in ascending order, with multiplicity.
    pub primes: Vec<u64>,
    /// Trial divisions performed.
    pub divisions: u64,
}

/// Splits at the first divisor found counting down from `⌊√n⌋`; reaching
/// the divisor 1 marks a prime.
pub fn direct_search_factorize(n: u64) -> Result<DirectSearch> {
    if n == 0 {
        return Err(Error::Domain("cannot factorize 0".into()));
    }
    let mut primes = Vec::new();
    let mut divisions = 0;
    let mut pending = vec![n];
    while let Some(x) = pending.pop() {
        if x == 1 {
            continue;
        }
        let mut d = x.isqrt();
        loop {
            divisions += 1;
            if x % d == 0 {
                break;
            }
            d -= 1;
        }
        if d == 1 {
            primes.push(x);
        } else {
            pending.push(d);
            pending.push(x / d);
        }
    }
    primes.sort_unstable();
    Ok(DirectSearch { primes, divisions })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub mchl_iters: usize,
    pub direct_divisions: u64,
}

/// Samples `count` distinct trained labels above 1 and factorizes each both ways.
pub fn bench_factorize(
    model: &TableModel,
    ops: &Selectors,
    count: usize,
    rng: &mut RngStream,
) -> Result<Vec<BenchRow>> {
    let candidates: Vec<usize> = (2..=model.m() * model.m()).filter(|&n| model.count(n) > 0).collect();
    if count > candidates.len() {
        return Err(Error::Domain(format!(
            "cannot sample {count} distinct integers from {} trained labels",
            candidates.len()
        )));
    }
    let mut chosen = BTreeSet::new();
    let mut order = Vec::with_capacity(count);
    while order.len() < count {
        let n = candidates[rng.index(candidates.len())];
        if chosen.insert(n) {
            order.push(n);
        }
    }
    order
        .into_par_iter()
        .map(|n| {
            let f = prime_factorize(model, ops, n)?;
            let d = direct_search_factorize(n as u64)?;
            Ok(BenchRow {
                n,
                mchl_iters: f.iterations,
                direct_divisions: d.divisions,
            })
        })
        .collect()
}
