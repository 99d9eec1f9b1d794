use super::BucketLayout;
use crate::{Error, Result, RngStream};

/// Sparse supervision vector. Entries are kept sorted by index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WriteVector {
    len: usize,
    offset: Option<usize>,
    entries: Vec<(usize, i8)>,
}

impl WriteVector {
    /// +1 at `offset` in the bucket of `label`, -1 at `offset` in every other bucket.
    pub fn classification(label: usize, offset: usize, layout: &BucketLayout) -> Result<Self> {
        if label >= layout.labels() {
            return Err(Error::Domain(format!(
                "label {label} out of range for {} labels",
                layout.labels()
            )));
        }
        if offset >= layout.bucket_size() {
            return Err(Error::Domain(format!(
                "offset {offset} out of range for bucket size {}",
                layout.bucket_size()
            )));
        }
        let entries = (0..layout.labels())
            .map(|l| (layout.index(l, offset), if l == label { 1 } else { -1 }))
            .collect();
        Ok(WriteVector {
            len: layout.width(),
            offset: Some(offset),
            entries,
        })
    }

    /// A single +1 at `index`, as used for deterministic table training.
    pub fn single(len: usize, index: usize) -> Result<Self> {
        if index >= len {
            return Err(Error::Domain(format!("index {index} out of range for length {len}")));
        }
        Ok(WriteVector {
            len,
            offset: None,
            entries: vec![(index, 1)],
        })
    }

    pub fn from_dense(values: &[i8]) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, &v) in values.iter().enumerate() {
            match v {
                0 => {}
                1 | -1 => entries.push((i, v)),
                _ => return Err(Error::NotTernary(v as i64)),
            }
        }
        Ok(WriteVector {
            len: values.len(),
            offset: None,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-bucket offset `r` for classification vectors.
    pub fn offset(&self) -> Option<usize> {
        self.offset
    }

    /// Nonzero `(index, sign)` pairs in ascending index order.
    pub fn entries(&self) -> &[(usize, i8)] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> i8 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|k| self.entries[k].1)
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> Vec<i8> {
        let mut out = vec![0; self.len];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }
}

/// Draws the offset `r` uniformly from the bucket (one draw) and builds the
/// classification write vector for `label`.
pub fn make_write_vector(label: usize, layout: &BucketLayout, rng: &mut RngStream) -> Result<WriteVector> {
    if label >= layout.labels() {
        return Err(Error::Domain(format!(
            "label {label} out of range for {} labels",
            layout.labels()
        )));
    }
    let offset = rng.index(layout.bucket_size());
    WriteVector::classification(label, offset, layout)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_layout() {
        let layout = BucketLayout::new(10, 3).unwrap();
        // label 2 / offset 1 in one-based terms
        let v = WriteVector::classification(1, 0, &layout).unwrap();
        let dense = v.to_dense();
        assert_eq!(dense[3], 1);
        let minus: Vec<usize> = (0..30).filter(|&i| dense[i] == -1).collect();
        assert_eq!(minus, vec![0, 6, 9, 12, 15, 18, 21, 24, 27]);
        assert_eq!(dense.iter().filter(|&&x| x == 0).count(), 20);
        assert_eq!(v.get(3), 1);
        assert_eq!(v.get(4), 0);
        assert_eq!(v.offset(), Some(0));
    }

    #[test]
    fn bucket_of_one() {
        let layout = BucketLayout::new(2, 1).unwrap();
        let mut rng = RngStream::new(0);
        let v = make_write_vector(0, &layout, &mut rng).unwrap();
        assert_eq!(v.to_dense(), vec![1, -1]);
    }

    #[test]
    fn rejects_out_of_range() {
        let layout = BucketLayout::new(10, 3).unwrap();
        let mut rng = RngStream::new(0);
        assert!(make_write_vector(10, &layout, &mut rng).is_err());
        assert!(WriteVector::classification(0, 3, &layout).is_err());
        assert!(WriteVector::single(3, 3).is_err());
        assert!(WriteVector::from_dense(&[0, 2]).is_err());
    }

    #[test]
    fn offsets_are_uniform() {
        let layout = BucketLayout::new(3, 5).unwrap();
        let mut rng = RngStream::new(99);
        let mut counts = [0usize; 5];
        let n = 100_000;
        for k in 0..n {
            let v = make_write_vector(k % 3, &layout, &mut rng).unwrap();
            counts[v.offset().unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 0.2).abs() < 0.01, "{counts:?}");
        }
    }
}
