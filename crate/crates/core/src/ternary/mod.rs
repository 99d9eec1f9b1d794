//! Dense ternary matrices packed two bits per element.
//!
//! Codes: `00` is 0, `01` is +1, `10` is -1 and `11` is reserved. In memory
//! every row starts on a fresh `u64` word with 32 elements per word, element
//! `j` of a word occupying bits `2j` (plus plane) and `2j + 1` (minus plane).
//! The row padding stays zero. See [`io`] for the canonical byte stream.

mod io;

pub use io::{MatrixFile, HEADER_LEN, MAGIC, VERSION};

use crate::{Error, Result};

const ELEMS_PER_WORD: usize = 32;
const LOW_BITS: u64 = 0x5555_5555_5555_5555;

#[inline]
fn encode(value: i8) -> u64 {
    match value {
        0 => 0b00,
        1 => 0b01,
        -1 => 0b10,
        _ => unreachable!("non-ternary value {value}"),
    }
}

#[inline]
fn decode(code: u64) -> i8 {
    match code {
        0b00 => 0,
        0b01 => 1,
        0b10 => -1,
        _ => unreachable!("reserved code in matrix storage"),
    }
}

/// Validates and narrows a ternary value.
pub fn ternary(value: i64) -> Result<i8> {
    match value {
        -1..=1 => Ok(value as i8),
        _ => Err(Error::NotTernary(value)),
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct TernaryMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl std::fmt::Debug for TernaryMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TernaryMatrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("nonzero", &self.nonzero_count())
            .finish()
    }
}

/// Nonzero positions of an input vector, laid out like a matrix row so that
/// `row_word & mask_word` keeps only the elements the input can touch.
#[derive(Clone, Debug)]
pub struct InputMask {
    words: Vec<u64>,
}

impl InputMask {
    pub fn from_real(u: &[f64]) -> Self {
        Self::build(u.len(), |j| u[j] != 0.0)
    }

    pub fn from_int(u: &[i64]) -> Self {
        Self::build(u.len(), |j| u[j] != 0)
    }

    fn build(len: usize, nonzero: impl Fn(usize) -> bool) -> Self {
        let mut words = vec![0u64; len.div_ceil(ELEMS_PER_WORD)];
        for j in 0..len {
            if nonzero(j) {
                words[j / ELEMS_PER_WORD] |= 0b11 << (2 * (j % ELEMS_PER_WORD));
            }
        }
        InputMask { words }
    }
}

impl TernaryMatrix {
    pub fn new_zero(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("{rows}x{cols} matrix has a zero dimension")));
        }
        let words_per_row = cols.div_ceil(ELEMS_PER_WORD);
        let total = rows
            .checked_mul(words_per_row)
            .filter(|w| w.checked_mul(8).is_some())
            .ok_or_else(|| Error::Dimension(format!("{rows}x{cols} matrix overflows")))?;
        Ok(TernaryMatrix {
            rows,
            cols,
            words_per_row,
            words: vec![0; total],
        })
    }

    /// Builds a matrix from row-major values.
    pub fn from_rows(rows: usize, cols: usize, values: &[i8]) -> Result<Self> {
        if values.len() != rows.saturating_mul(cols) {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        let mut m = Self::new_zero(rows, cols)?;
        for (k, &v) in values.iter().enumerate() {
            m.set(k / cols, k % cols, v as i64)?;
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Bytes taken by the dense two-bit payload, `ceil(2 * rows * cols / 8)`.
    pub fn packed_bytes(&self) -> usize {
        (self.rows * self.cols).div_ceil(4)
    }

    fn check(&self, row: usize, col: usize) -> Result<()> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::IndexOutOfRange {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }

    pub fn get(&self, row: usize, col: usize) -> Result<i8> {
        self.check(row, col)?;
        Ok(self.value(row, col))
    }

    pub fn set(&mut self, row: usize, col: usize, value: i64) -> Result<()> {
        self.check(row, col)?;
        let v = ternary(value)?;
        self.put(row, col, v);
        Ok(())
    }

    #[inline]
    pub(crate) fn value(&self, row: usize, col: usize) -> i8 {
        let word = self.words[row * self.words_per_row + col / ELEMS_PER_WORD];
        decode((word >> (2 * (col % ELEMS_PER_WORD))) & 0b11)
    }

    #[inline]
    pub(crate) fn put(&mut self, row: usize, col: usize, value: i8) {
        let shift = 2 * (col % ELEMS_PER_WORD);
        let word = &mut self.words[row * self.words_per_row + col / ELEMS_PER_WORD];
        *word = (*word & !(0b11 << shift)) | (encode(value) << shift);
    }

    #[inline]
    fn row_words(&self, row: usize) -> &[u64] {
        &self.words[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    pub(crate) fn raw_words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, words: Vec<u64>) -> Self {
        let words_per_row = cols.div_ceil(ELEMS_PER_WORD);
        debug_assert_eq!(words.len(), rows * words_per_row);
        TernaryMatrix {
            rows,
            cols,
            words_per_row,
            words,
        }
    }

    pub fn row(&self, row: usize) -> Vec<i8> {
        (0..self.cols).map(|j| self.value(row, j)).collect()
    }

    pub fn nonzero_count(&self) -> usize {
        self.words
            .iter()
            .map(|w| ((w | (w >> 1)) & LOW_BITS).count_ones() as usize)
            .sum()
    }

    pub fn row_nonzero_count(&self, row: usize) -> usize {
        self.row_words(row)
            .iter()
            .map(|w| ((w | (w >> 1)) & LOW_BITS).count_ones() as usize)
            .sum()
    }

    /// Number of positions at which the two matrices differ.
    pub fn hamming_distance(&self, other: &TernaryMatrix) -> Result<usize> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| {
                let x = a ^ b;
                ((x | (x >> 1)) & LOW_BITS).count_ones() as usize
            })
            .sum())
    }

    fn check_len(&self, got: usize, want: usize, what: &str) -> Result<()> {
        if got != want {
            return Err(Error::Dimension(format!(
                "{what} of length {got}, matrix is {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    /// `Σ_j w[row, j] u[j]`, visiting columns in ascending order and only
    /// where both the weight and the mask are nonzero.
    #[inline]
    pub fn row_dot_masked(&self, row: usize, u: &[f64], mask: &InputMask) -> f64 {
        let mut acc = 0.0;
        for (k, (&w, &m)) in self.row_words(row).iter().zip(&mask.words).enumerate() {
            let mut live = (w | (w >> 1)) & LOW_BITS & m;
            let base = k * ELEMS_PER_WORD;
            while live != 0 {
                let bit = live.trailing_zeros();
                let j = base + (bit as usize >> 1);
                // flip the sign bit for -1 weights; exact, and free of a data-dependent branch
                let neg = ((w >> (bit + 1)) & 1) << 63;
                acc += f64::from_bits(u[j].to_bits() ^ neg);
                live &= live - 1;
            }
        }
        acc
    }

    #[inline]
    fn row_dot_int_masked(&self, row: usize, u: &[i64], mask: &InputMask) -> i64 {
        let mut acc = 0i64;
        for (k, (&w, &m)) in self.row_words(row).iter().zip(&mask.words).enumerate() {
            let mut live = (w | (w >> 1)) & LOW_BITS & m;
            let base = k * ELEMS_PER_WORD;
            while live != 0 {
                let bit = live.trailing_zeros();
                let j = base + (bit as usize >> 1);
                let sign = ((w >> bit) & 1) as i64 - ((w >> (bit + 1)) & 1) as i64;
                acc += sign * u[j];
                live &= live - 1;
            }
        }
        acc
    }

    pub fn row_dot(&self, row: usize, u: &[f64]) -> Result<f64> {
        self.check_len(u.len(), self.cols, "input")?;
        if row >= self.rows {
            return Err(Error::IndexOutOfRange {
                row,
                col: 0,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(self.row_dot_masked(row, u, &InputMask::from_real(u)))
    }

    /// `z = w u` for a real input.
    pub fn matvec(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u.len(), self.cols, "input")?;
        let mask = InputMask::from_real(u);
        Ok((0..self.rows).map(|i| self.row_dot_masked(i, u, &mask)).collect())
    }

    /// `z = w u` with exact integer accumulation.
    pub fn matvec_int(&self, u: &[i64]) -> Result<Vec<i64>> {
        self.check_len(u.len(), self.cols, "input")?;
        let mask = InputMask::from_int(u);
        Ok((0..self.rows).map(|i| self.row_dot_int_masked(i, u, &mask)).collect())
    }

    /// `z = wᵀ u` for a real input without materializing the transpose.
    pub fn transpose_matvec(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u.len(), self.rows, "input")?;
        let mut z = vec![0.0; self.cols];
        for (i, &ui) in u.iter().enumerate() {
            if ui != 0.0 {
                self.scatter_row(i, |j, sign| if sign > 0 { z[j] += ui } else { z[j] -= ui });
            }
        }
        Ok(z)
    }

    /// `z = wᵀ u` with exact integer accumulation.
    pub fn transpose_matvec_int(&self, u: &[i64]) -> Result<Vec<i64>> {
        self.check_len(u.len(), self.rows, "input")?;
        let mut z = vec![0i64; self.cols];
        for (i, &ui) in u.iter().enumerate() {
            if ui != 0 {
                self.scatter_row(i, |j, sign| z[j] += sign as i64 * ui);
            }
        }
        Ok(z)
    }

    /// `z = wᵀ u` where `u` is given by its nonzero `(row, value)` entries.
    pub fn transpose_matvec_sparse(&self, u: &[(usize, i64)]) -> Result<Vec<i64>> {
        let mut z = vec![0i64; self.cols];
        for &(i, ui) in u {
            if i >= self.rows {
                return Err(Error::IndexOutOfRange {
                    row: i,
                    col: 0,
                    rows: self.rows,
                    cols: self.cols,
                });
            }
            self.scatter_row(i, |j, sign| z[j] += sign as i64 * ui);
        }
        Ok(z)
    }

    #[inline]
    fn scatter_row(&self, row: usize, mut f: impl FnMut(usize, i8)) {
        for (k, &w) in self.row_words(row).iter().enumerate() {
            let mut live = (w | (w >> 1)) & LOW_BITS;
            let base = k * ELEMS_PER_WORD;
            while live != 0 {
                let bit = live.trailing_zeros();
                f(base + (bit as usize >> 1), if (w >> bit) & 1 == 1 { 1 } else { -1 });
                live &= live - 1;
            }
        }
    }
}
