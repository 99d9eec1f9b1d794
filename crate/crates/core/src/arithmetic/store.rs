use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{check_m, TableModel};
use crate::engine::BucketLayout;
use crate::ternary::MatrixFile;
use crate::{Error, Result};

/// Metadata stored next to the matrix file of a table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSidecar {
    pub m: usize,
    pub h: usize,
    pub a: Vec<u32>,
    pub training_order_hash: String,
    pub tau: f64,
    pub bias: f64,
}

/// `table.twm` → `table.json`.
pub fn sidecar_path(matrix: impl AsRef<Path>) -> PathBuf {
    matrix.as_ref().with_extension("json")
}

impl TableModel {
    pub fn sidecar(&self) -> TableSidecar {
        TableSidecar {
            m: self.m,
            h: self.layout.bucket_size(),
            a: self.index.clone(),
            training_order_hash: self.training_order_hash.clone(),
            tau: self.tau,
            bias: self.bias,
        }
    }

    /// Writes the matrix to `matrix` and the sidecar to [`sidecar_path`].
    pub fn save(&self, matrix: impl AsRef<Path>) -> Result<()> {
        self.weights.save_to_path(&self.layout, matrix.as_ref())?;
        let json = serde_json::to_string_pretty(&self.sidecar())?;
        fs::write(sidecar_path(matrix), json + "\n")?;
        Ok(())
    }

    pub fn load(matrix: impl AsRef<Path>) -> Result<Self> {
        let file = MatrixFile::load_path(matrix.as_ref())?;
        let sidecar: TableSidecar = serde_json::from_slice(&fs::read(sidecar_path(matrix))?)?;
        Self::from_parts(file, sidecar)
    }

    pub fn from_parts(file: MatrixFile, sidecar: TableSidecar) -> Result<Self> {
        check_m(sidecar.m)?;
        let labels = sidecar.m * sidecar.m;
        let layout = BucketLayout::new(labels, sidecar.h)?;
        if file.layout != layout || file.matrix.cols() != 2 * sidecar.m {
            return Err(Error::Format(format!(
                "matrix {}x{} with {}x{} buckets does not fit a table with M={} and H={}",
                file.matrix.rows(),
                file.matrix.cols(),
                file.layout.labels(),
                file.layout.bucket_size(),
                sidecar.m,
                sidecar.h
            )));
        }
        if sidecar.a.len() != labels {
            return Err(Error::Format(format!(
                "index vector of length {} for {labels} labels",
                sidecar.a.len()
            )));
        }
        let model = TableModel {
            m: sidecar.m,
            layout,
            weights: file.matrix,
            index: sidecar.a,
            training_order_hash: sidecar.training_order_hash,
            tau: sidecar.tau,
            bias: sidecar.bias,
        };
        model.validate()?;
        Ok(model)
    }
}
