use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("index ({row}, {col}) out of range for {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("value {0} is not ternary")]
    NotTernary(i64),

    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("malformed matrix file: {0}")]
    Format(String),

    #[error("malformed IDX data: {0}")]
    Idx(String),

    #[error("bucket overflow: product {product} needs slot {slot} but bucket size is {bucket_size}")]
    BucketOverflow {
        product: usize,
        slot: usize,
        bucket_size: usize,
    },

    #[error("label {0} is not representable in the table")]
    Untrained(usize),

    #[error("component {0} cannot be factorized by the table")]
    Unfactorizable(usize),

    #[error("update probability {0} is neither 0 nor 1 in a frozen step")]
    NotDeterministic(f64),

    #[error("empty dataset")]
    EmptyDataset,

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures coming from the filesystem rather than from bad input values.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
