//! IDX containers: big-endian magic, big-endian dimension sizes, raw bytes.

use std::fs;
use std::path::Path;

use super::{FeatureSet, MnistDataset, Split};
use crate::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Idx("truncated header".into()))
}

fn payload<'a>(bytes: &'a [u8], header: usize, want: usize, what: &str) -> Result<&'a [u8]> {
    let body = &bytes[header..];
    if body.len() < want {
        return Err(Error::Idx(format!("truncated {what}: {} of {want} bytes", body.len())));
    }
    if body.len() > want {
        return Err(Error::Idx(format!("{} trailing bytes in {what}", body.len() - want)));
    }
    Ok(body)
}

/// Returns `(rows, cols, pixels)` of an image file.
pub fn parse_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Idx(format!("bad image magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Idx(format!("image size {rows}x{cols}")));
    }
    let want = count
        .checked_mul(rows * cols)
        .ok_or_else(|| Error::Idx("image dimensions overflow".into()))?;
    Ok((count, rows, cols, payload(bytes, 16, want, "image payload")?))
}

pub fn parse_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::Idx(format!("bad label magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let labels = payload(bytes, 8, count, "label payload")?;
    if let Some(bad) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::Idx(format!("label {bad} is not a digit")));
    }
    Ok(labels)
}

impl MnistDataset {
    pub fn from_idx_bytes(images: &[u8], labels: &[u8], split: Split) -> Result<Self> {
        let (count, rows, cols, pixels) = parse_images(images)?;
        let labels = parse_labels(labels)?;
        if labels.len() != count {
            return Err(Error::Idx(format!("{count} images but {} labels", labels.len())));
        }
        let values = pixels.iter().map(|&p| p as f64 / 255.0).collect();
        Ok(MnistDataset {
            split,
            examples: FeatureSet::new(rows * cols, values, labels.to_vec())?,
        })
    }

    /// Reads an image/label file pair, rescaling pixels by `1/255`.
    pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>, split: Split) -> Result<Self> {
        Self::from_idx_bytes(&fs::read(images)?, &fs::read(labels)?, split)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn image_file(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        for x in [IMAGE_MAGIC, count, rows, cols] {
            out.extend_from_slice(&x.to_be_bytes());
        }
        out.extend_from_slice(pixels);
        out
    }

    pub(crate) fn label_file(labels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        out.extend_from_slice(labels);
        out
    }

    #[test]
    fn parses_two_images() {
        let images = image_file(2, 2, 2, &[0, 255, 128, 7, 1, 2, 3, 4]);
        let labels = label_file(&[7, 3]);
        let ds = MnistDataset::from_idx_bytes(&images, &labels, Split::Train).unwrap();
        assert_eq!(ds.examples.len(), 2);
        assert_eq!(ds.examples.dim(), 4);
        assert_eq!(ds.examples.label(0), 7);
        assert_eq!(ds.examples.label(1), 3);
        let x = ds.examples.features(0);
        assert_eq!(x[0], 0.0);
        assert_eq!(x[1], 1.0);
        assert_eq!(x[2], 128.0 / 255.0);
    }

    #[test]
    fn rejects_malformed_files() {
        let images = image_file(2, 2, 2, &[0; 8]);
        let labels = label_file(&[1, 2]);
        let mut bad = images.clone();
        bad[3] = 0x01;
        assert!(MnistDataset::from_idx_bytes(&bad, &labels, Split::Test).is_err());
        assert!(MnistDataset::from_idx_bytes(&images[..20], &labels, Split::Test).is_err());
        assert!(MnistDataset::from_idx_bytes(&images[..10], &labels, Split::Test).is_err());
        assert!(MnistDataset::from_idx_bytes(&images, &label_file(&[1]), Split::Test).is_err());
        assert!(MnistDataset::from_idx_bytes(&images, &label_file(&[1, 12]), Split::Test).is_err());
        let mut swapped = labels.clone();
        swapped[3] = 0x03;
        assert!(MnistDataset::from_idx_bytes(&images, &swapped, Split::Test).is_err());
    }
}
