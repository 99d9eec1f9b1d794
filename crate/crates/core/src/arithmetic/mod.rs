//! Multiplication-table memory.
//!
//! Factor pairs `(a, b)` with `1 <= a, b <= M` are one-hot encoded over
//! `2M` inputs and stored one per output neuron, in the bucket of their
//! product. Labels (products), factors and in-bucket slots are one-based
//! in this module's API.

mod factor;
mod store;

use sha2::{Digest, Sha256};

use crate::engine::{activation_prob, frozen_step, BucketLayout, NeuronParams, UpdateParams, WriteVector};
use crate::mnist::argmax;
use crate::{Error, Result, TernaryMatrix};

pub use factor::{
    bench_factorize, build_selectors, direct_search_factorize, factorize_step, prime_factorize, BenchRow, DirectSearch,
    FactorState, Factorization, Selectors,
};
pub use store::{sidecar_path, TableSidecar};

pub const DEFAULT_TEMPERATURE: f64 = 0.01;
pub const DEFAULT_BIAS: f64 = 3.0;

/// Largest supported table side; keeps `M²` and every product within `u32`.
pub const MAX_M: usize = 4096;

fn check_m(m: usize) -> Result<()> {
    if m == 0 || m > MAX_M {
        return Err(Error::Domain(format!("table size M={m} must be in 1..={MAX_M}")));
    }
    Ok(())
}

fn check_factor(x: usize, m: usize) -> Result<()> {
    if x == 0 || x > m {
        return Err(Error::Domain(format!("factor {x} out of range 1..={m}")));
    }
    Ok(())
}

/// One-hot at `a` in the first half and at `M + b` in the second half.
pub fn encode_pair(a: usize, b: usize, m: usize) -> Result<Vec<u8>> {
    check_m(m)?;
    check_factor(a, m)?;
    check_factor(b, m)?;
    let mut u = vec![0u8; 2 * m];
    u[a - 1] = 1;
    u[m + b - 1] = 1;
    Ok(u)
}

/// Ordered factor-pair count of every product, indexed by `product - 1`.
fn pair_counts(m: usize) -> Vec<u32> {
    let mut counts = vec![0u32; m * m];
    for a in 1..=m {
        for b in 1..=m {
            counts[a * b - 1] += 1;
        }
    }
    counts
}

/// Smallest bucket size that holds every ordered factor pair of every product.
pub fn required_bucket_size(m: usize) -> Result<usize> {
    check_m(m)?;
    Ok(pair_counts(m).into_iter().max().unwrap_or(0) as usize)
}

pub fn count_distinct_products(m: usize) -> Result<usize> {
    check_m(m)?;
    Ok(pair_counts(m).into_iter().filter(|&c| c > 0).count())
}

/// A memorized table.
#[derive(Clone, Debug, PartialEq)]
pub struct TableModel {
    m: usize,
    layout: BucketLayout,
    weights: TernaryMatrix,
    /// `index[c - 1]` is the number of pairs stored under product `c`.
    index: Vec<u32>,
    training_order_hash: String,
    tau: f64,
    bias: f64,
}

/// Divisors read back from the transposed matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Aliquot {
    pub divisors: Vec<usize>,
    /// `wᵀ u` over all `2M` inputs.
    pub z: Vec<i64>,
}

/// Trains all `M²` pairs once, `a` ascending and then `b` ascending, each
/// into the next free slot of its product's bucket.
pub fn memorize_table(m: usize, h: usize, tau: f64) -> Result<TableModel> {
    check_m(m)?;
    let labels = m * m;
    let layout = BucketLayout::new(labels, h)?;
    let neurons = NeuronParams::uniform(DEFAULT_BIAS, tau)?;
    let update = UpdateParams::new(1.0, 0.0)?;
    let mut weights = TernaryMatrix::new_zero(layout.width(), 2 * m)?;
    let mut index = vec![0u32; labels];
    let mut hasher = Sha256::new();
    let mut u = vec![0.0; 2 * m];
    for a in 1..=m {
        for b in 1..=m {
            let c = a * b;
            let slot = index[c - 1] as usize + 1;
            if slot > h {
                return Err(Error::BucketOverflow {
                    product: c,
                    slot,
                    bucket_size: h,
                });
            }
            u[a - 1] = 1.0;
            u[m + b - 1] = 1.0;
            let v = WriteVector::single(layout.width(), layout.index(c - 1, slot - 1))?;
            frozen_step(&mut weights, &u, &v, &neurons, &update)?;
            u[a - 1] = 0.0;
            u[m + b - 1] = 0.0;
            index[c - 1] = slot as u32;
            for x in [a, b, slot] {
                hasher.update((x as u32).to_le_bytes());
            }
        }
    }
    Ok(TableModel {
        m,
        layout,
        weights,
        index,
        training_order_hash: hex::encode(hasher.finalize()),
        tau,
        bias: DEFAULT_BIAS,
    })
}

impl TableModel {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn bucket_size(&self) -> usize {
        self.layout.bucket_size()
    }

    pub fn layout(&self) -> &BucketLayout {
        &self.layout
    }

    pub fn weights(&self) -> &TernaryMatrix {
        &self.weights
    }

    pub fn temperature(&self) -> f64 {
        self.tau
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn training_order_hash(&self) -> &str {
        &self.training_order_hash
    }

    /// `A[c]` for `c = 1..=M²`.
    pub fn index_vector(&self) -> &[u32] {
        &self.index
    }

    /// `A[c]`, zero outside `1..=M²`.
    pub fn count(&self, c: usize) -> u32 {
        if c == 0 {
            return 0;
        }
        self.index.get(c - 1).copied().unwrap_or(0)
    }

    pub fn trained_labels(&self) -> usize {
        self.index.iter().filter(|&&a| a > 0).count()
    }

    /// Output row of the pair stored in slot `slot` of product `c`.
    pub fn row_of(&self, c: usize, slot: usize) -> usize {
        self.layout.index(c - 1, slot - 1)
    }

    fn check_label(&self, n: usize) -> Result<()> {
        let top = self.m * self.m;
        if n == 0 || n > top {
            return Err(Error::Domain(format!("label {n} out of range 1..={top}")));
        }
        if self.count(n) == 0 {
            return Err(Error::Untrained(n));
        }
        Ok(())
    }

    /// Bucket-summed firing probabilities for the pair `(a, b)`, one per product.
    pub fn product_scores(&self, a: usize, b: usize) -> Result<Vec<f64>> {
        let u: Vec<i64> = encode_pair(a, b, self.m)?.into_iter().map(i64::from).collect();
        let z = self.weights.matvec_int(&u)?;
        let mut scores = vec![0.0; self.layout.labels()];
        for (i, &zi) in z.iter().enumerate() {
            if zi > 0 {
                scores[i / self.layout.bucket_size()] += activation_prob(zi as f64, self.bias, self.tau)?;
            }
        }
        Ok(scores)
    }

    pub fn query_product(&self, a: usize, b: usize) -> Result<usize> {
        if self.index.iter().all(|&x| x == 0) {
            return Err(Error::Domain("table has no trained pairs".into()));
        }
        let scores = self.product_scores(a, b)?;
        let best = argmax(&scores);
        if scores[best] < 0.5 {
            return Err(Error::Untrained(a * b));
        }
        Ok(best + 1)
    }

    /// Drives the whole bucket of `n` and reads the inputs back through `wᵀ`.
    pub fn aliquot_parts(&self, n: usize) -> Result<Aliquot> {
        self.check_label(n)?;
        let u: Vec<(usize, i64)> = self.layout.bucket(n - 1).map(|i| (i, 1)).collect();
        let z = self.weights.transpose_matvec_sparse(&u)?;
        let divisors = (1..=self.m).filter(|&d| z[d - 1] == 1).collect();
        Ok(Aliquot { divisors, z })
    }

    /// Prime test by aliquot count, for `n <= M`.
    pub fn is_prime_lookup(&self, n: usize) -> Result<bool> {
        if n > self.m {
            return Err(Error::Domain(format!("prime lookup needs n <= M = {}", self.m)));
        }
        let z = self.aliquot_parts(n)?.z;
        let ones = |half: &[i64]| half.iter().filter(|&&x| x == 1).count();
        Ok(ones(&z[..self.m]) == 2 && ones(&z[self.m..]) == 2)
    }

    /// Recomputes `A` from the matrix and checks the table invariants.
    fn validate(&self) -> Result<()> {
        let h = self.layout.bucket_size();
        for c in 1..=self.m * self.m {
            let a = self.count(c) as usize;
            if a > h {
                return Err(Error::Format(format!("A[{c}] = {a} exceeds bucket size {h}")));
            }
            for slot in 1..=h {
                let row = self.weights.row(self.row_of(c, slot));
                if row.iter().any(|&x| x < 0) {
                    return Err(Error::Format(format!("negative weight in row of product {c}")));
                }
                let first: Vec<usize> = (0..self.m).filter(|&j| row[j] == 1).collect();
                let second: Vec<usize> = (0..self.m).filter(|&j| row[self.m + j] == 1).collect();
                if slot > a {
                    if !first.is_empty() || !second.is_empty() {
                        return Err(Error::Format(format!(
                            "untrained slot {slot} of product {c} is not empty"
                        )));
                    }
                    continue;
                }
                match (first.as_slice(), second.as_slice()) {
                    ([x], [y]) if (x + 1) * (y + 1) == c => {}
                    _ => {
                        return Err(Error::Format(format!(
                            "slot {slot} of product {c} is not a factor pair"
                        )))
                    }
                }
            }
        }
        let total: u64 = self.index.iter().map(|&x| x as u64).sum();
        if total != (self.m * self.m) as u64 {
            return Err(Error::Format(format!(
                "index vector sums to {total}, expected {}",
                self.m * self.m
            )));
        }
        Ok(())
    }
}
