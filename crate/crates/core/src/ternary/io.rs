//! `TWM1` matrix files.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "TWM1"
//! 4       2     version (u16, = 1)
//! 6       8     rows (u64)
//! 14      8     cols (u64)
//! 22      4     labels L (u32)
//! 26      4     bucket size H (u32)
//! 30      ..    payload: ceil(2 * rows * cols / 8) bytes
//! ```
//!
//! Integers are little-endian. The payload is the row-major sequence of
//! two-bit codes with no row padding; element `k` sits in bits
//! `2 (k mod 4)` and `2 (k mod 4) + 1` of byte `k / 4`, least significant
//! first. Bits after the last element are zero.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{TernaryMatrix, ELEMS_PER_WORD, LOW_BITS};
use crate::engine::BucketLayout;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TWM1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 30;

/// A matrix together with the bucket layout recorded in its header.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixFile {
    pub matrix: TernaryMatrix,
    pub layout: BucketLayout,
}

struct BitSink {
    out: Vec<u8>,
    acc: u64,
    fill: u32,
}

impl BitSink {
    fn push(&mut self, bits: u64, n: u32) {
        if n == 0 {
            return;
        }
        self.acc |= bits << self.fill;
        let total = self.fill + n;
        if total >= 64 {
            self.out.extend_from_slice(&self.acc.to_le_bytes());
            self.acc = if self.fill == 0 { 0 } else { bits >> (64 - self.fill) };
            self.fill = total - 64;
        } else {
            self.fill = total;
        }
    }

    fn finish(mut self) -> Vec<u8> {
        let tail = self.fill.div_ceil(8) as usize;
        self.out.extend_from_slice(&self.acc.to_le_bytes()[..tail]);
        self.out
    }
}

/// Reads `n <= 64` bits starting at bit `pos`.
fn read_bits(payload: &[u8], pos: usize, n: u32) -> u64 {
    let start = pos / 8;
    let mut buf = [0u8; 16];
    let end = (start + 9).min(payload.len());
    buf[..end - start].copy_from_slice(&payload[start..end]);
    let wide = u128::from_le_bytes(buf) >> (pos % 8);
    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    (wide as u64) & mask
}

fn expected_payload(rows: usize, cols: usize) -> Option<usize> {
    rows.checked_mul(cols)?.checked_mul(2).map(|bits| bits.div_ceil(8))
}

impl TernaryMatrix {
    pub fn to_bytes(&self, layout: &BucketLayout) -> Result<Vec<u8>> {
        if layout.width() != self.rows {
            return Err(Error::Dimension(format!(
                "layout {}x{} does not cover {} rows",
                layout.labels(),
                layout.bucket_size(),
                self.rows
            )));
        }
        let labels = u32::try_from(layout.labels()).map_err(|_| Error::Dimension("label count exceeds u32".into()))?;
        let bucket =
            u32::try_from(layout.bucket_size()).map_err(|_| Error::Dimension("bucket size exceeds u32".into()))?;

        let mut header = Vec::with_capacity(HEADER_LEN + self.packed_bytes());
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&VERSION.to_le_bytes());
        header.extend_from_slice(&(self.rows as u64).to_le_bytes());
        header.extend_from_slice(&(self.cols as u64).to_le_bytes());
        header.extend_from_slice(&labels.to_le_bytes());
        header.extend_from_slice(&bucket.to_le_bytes());

        let mut sink = BitSink {
            out: header,
            acc: 0,
            fill: 0,
        };
        let wpr = self.words_per_row();
        let last_bits = 2 * (self.cols - ELEMS_PER_WORD * (wpr - 1)) as u32;
        for row in self.raw_words().chunks_exact(wpr) {
            for &w in &row[..wpr - 1] {
                sink.push(w, 64);
            }
            sink.push(row[wpr - 1], last_bits);
        }
        Ok(sink.finish())
    }

    pub fn save(&self, layout: &BucketLayout, mut writer: impl Write) -> Result<()> {
        writer.write_all(&self.to_bytes(layout)?)?;
        Ok(())
    }

    pub fn save_to_path(&self, layout: &BucketLayout, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes(layout)?)?;
        Ok(())
    }
}

impl MatrixFile {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("truncated header ({} bytes)", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format(format!("bad magic {:02x?}", &bytes[..4])));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let too_big = || Error::Format("dimensions do not fit in memory".into());
        let rows = usize::try_from(u64_at(6)).map_err(|_| too_big())?;
        let cols = usize::try_from(u64_at(14)).map_err(|_| too_big())?;
        let labels = u32_at(22) as usize;
        let bucket = u32_at(26) as usize;
        if rows == 0 || cols == 0 {
            return Err(Error::Format(format!("{rows}x{cols} matrix has a zero dimension")));
        }
        let layout = BucketLayout::new(labels, bucket)
            .map_err(|_| Error::Format(format!("invalid layout {labels}x{bucket}")))?;
        if layout.width() != rows {
            return Err(Error::Format(format!(
                "layout {labels}x{bucket} does not cover {rows} rows"
            )));
        }

        let payload = &bytes[HEADER_LEN..];
        let want = expected_payload(rows, cols).ok_or_else(too_big)?;
        if payload.len() < want {
            return Err(Error::Format(format!(
                "truncated payload: {} of {want} bytes",
                payload.len()
            )));
        }
        if payload.len() > want {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                payload.len() - want
            )));
        }

        let wpr = cols.div_ceil(ELEMS_PER_WORD);
        let last_bits = 2 * (cols - ELEMS_PER_WORD * (wpr - 1)) as u32;
        let mut words = Vec::with_capacity(rows * wpr);
        let mut pos = 0usize;
        for _ in 0..rows {
            for k in 0..wpr {
                let n = if k + 1 == wpr { last_bits } else { 64 };
                let w = read_bits(payload, pos, n);
                if w & (w >> 1) & LOW_BITS != 0 {
                    return Err(Error::Format("reserved code 11 in payload".into()));
                }
                words.push(w);
                pos += n as usize;
            }
        }
        let used = pos % 8;
        if used != 0 && payload[payload.len() - 1] >> used != 0 {
            return Err(Error::Format("nonzero padding bits".into()));
        }
        Ok(MatrixFile {
            matrix: TernaryMatrix::from_raw(rows, cols, words),
            layout,
        })
    }

    pub fn load(mut reader: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn load_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RngStream;
    use proptest::prelude::*;

    fn layout(l: usize, h: usize) -> BucketLayout {
        BucketLayout::new(l, h).unwrap()
    }

    /// Element-by-element writer following the byte layout in the module docs.
    fn reference_payload(m: &TernaryMatrix) -> Vec<u8> {
        let mut out = vec![0u8; m.packed_bytes()];
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let k = i * m.cols() + j;
                let code = match m.get(i, j).unwrap() {
                    0 => 0u8,
                    1 => 1,
                    _ => 2,
                };
                out[k / 4] |= code << (2 * (k % 4));
            }
        }
        out
    }

    #[test]
    fn one_by_one_zero_matrix() {
        let m = TernaryMatrix::new_zero(1, 1).unwrap();
        let bytes = m.to_bytes(&layout(1, 1)).unwrap();
        let mut want = Vec::new();
        want.extend_from_slice(b"TWM1");
        want.extend_from_slice(&1u16.to_le_bytes());
        want.extend_from_slice(&1u64.to_le_bytes());
        want.extend_from_slice(&1u64.to_le_bytes());
        want.extend_from_slice(&1u32.to_le_bytes());
        want.extend_from_slice(&1u32.to_le_bytes());
        want.push(0);
        assert_eq!(bytes, want);
        assert_eq!(bytes.len(), HEADER_LEN + 1);
    }

    #[test]
    fn payload_layout_is_row_major_lsb_first() {
        // 1x3: +1, -1, 0 -> 0b00_10_01
        let m = TernaryMatrix::from_rows(1, 3, &[1, -1, 0]).unwrap();
        let bytes = m.to_bytes(&layout(1, 1)).unwrap();
        assert_eq!(&bytes[HEADER_LEN..], &[0b0000_1001]);
        // rows are not padded: 2x3 puts element (1,0) at bits 6..8 of byte 0
        let m = TernaryMatrix::from_rows(2, 3, &[0, 0, 0, -1, 0, 1]).unwrap();
        let bytes = m.to_bytes(&layout(2, 1)).unwrap();
        assert_eq!(&bytes[HEADER_LEN..], &[0b1000_0000, 0b0000_0100]);
    }

    #[test]
    fn random_round_trip_100x100() {
        let mut rng = RngStream::new(11);
        let mut m = TernaryMatrix::new_zero(100, 100).unwrap();
        for i in 0..100 {
            for j in 0..100 {
                m.set(i, j, rng.index(3) as i64 - 1).unwrap();
            }
        }
        let l = layout(10, 10);
        let bytes = m.to_bytes(&l).unwrap();
        assert_eq!(&bytes[HEADER_LEN..], reference_payload(&m).as_slice());
        let back = MatrixFile::from_bytes(&bytes).unwrap();
        assert_eq!(back.matrix, m);
        assert_eq!(back.layout, l);
        assert_eq!(back.matrix.to_bytes(&l).unwrap(), bytes);
    }

    #[test]
    fn decode_errors() {
        let m = TernaryMatrix::from_rows(1, 3, &[1, 0, 0]).unwrap();
        let good = m.to_bytes(&layout(1, 1)).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(MatrixFile::from_bytes(&bad), Err(Error::Format(_))));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(MatrixFile::from_bytes(&bad), Err(Error::Format(_))));

        assert!(MatrixFile::from_bytes(&good[..HEADER_LEN]).is_err());
        assert!(MatrixFile::from_bytes(&good[..10]).is_err());

        let mut bad = good.clone();
        bad[HEADER_LEN] = 0b11;
        let err = MatrixFile::from_bytes(&bad).unwrap_err().to_string();
        assert!(err.contains("reserved"), "{err}");

        let mut bad = good.clone();
        bad[HEADER_LEN] |= 0b1100_0000;
        assert!(MatrixFile::from_bytes(&bad).is_err());

        let mut bad = good.clone();
        bad.push(0);
        assert!(MatrixFile::from_bytes(&bad).is_err());

        // header layout must cover the rows
        let mut bad = good;
        bad[22..26].copy_from_slice(&2u32.to_le_bytes());
        assert!(MatrixFile::from_bytes(&bad).is_err());
    }

    #[test]
    fn save_rejects_mismatched_layout() {
        let m = TernaryMatrix::new_zero(4, 2).unwrap();
        assert!(m.to_bytes(&layout(3, 1)).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            (r, c, vals) in (1usize..20, 1usize..80).prop_flat_map(|(r, c)| {
                (Just(r), Just(c), proptest::collection::vec(-1i8..=1, r * c))
            })
        ) {
            let m = TernaryMatrix::from_rows(r, c, &vals).unwrap();
            let bytes = m.to_bytes(&layout(r, 1)).unwrap();
            let reference = reference_payload(&m);
            prop_assert_eq!(&bytes[HEADER_LEN..], reference.as_slice());
            let back = MatrixFile::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back.matrix, &m);
            prop_assert_eq!(back.matrix.to_bytes(&layout(r, 1)).unwrap(), bytes);
        }
    }
}
