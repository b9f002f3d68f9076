use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("point {index} maps to infinity")]
    PointAtInfinity { index: usize },

    #[error("pixel state error: {0}")]
    State(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("degenerate annotation: {0}")]
    DegenerateAnnotation(String),

    #[error("degenerate box: zero area")]
    DegenerateBox,

    #[error("corrupt TBR frame: {0}")]
    Corruption(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("line {line}: {kind}")]
    Parse { line: usize, kind: LineError },

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, kind: LineError) -> Self {
        Error::Parse { line, kind }
    }
}

/// Problems found in a single line of a text format (landmarks, labels,
/// predictions, event CSV, manifests).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LineError {
    #[error("expected {expected} fields, found {found}")]
    FieldCount { expected: usize, found: usize },

    #[error("malformed number {0:?}")]
    Malformed(String),

    #[error("unknown class id {0}")]
    UnknownClass(String),

    #[error("{field} = {value} out of range")]
    OutOfRange { field: &'static str, value: String },

    #[error("polarity must be 0 or 1, found {0}")]
    Polarity(String),

    #[error("timestamp decreases")]
    Unsorted,

    #[error("bad header, expected {0:?}")]
    Header(&'static str),

    #[error("{0}")]
    Other(String),
}

/// Diagnostics from the EVS1 binary event format. Every corruption kind maps
/// to its own variant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("bad magic {0:02x?}, expected \"EVS1\"")]
    BadMagic([u8; 4]),

    #[error("header truncated: {len} of 16 bytes")]
    TruncatedHeader { len: usize },

    #[error("record truncated at byte offset {offset}")]
    TruncatedRecord { offset: u64 },

    #[error("{extra} trailing bytes after {count} records at byte offset {offset}")]
    TrailingBytes { count: u64, offset: u64, extra: u64 },

    #[error("zero {0} in header")]
    ZeroDimension(&'static str),

    #[error("record {index}: ({x}, {y}) outside {width}x{height}")]
    OutOfBounds { index: u64, x: u16, y: u16, width: u16, height: u16 },

    #[error("record {index}: polarity byte {value}")]
    BadPolarity { index: u64, value: u8 },

    #[error("record {index}: timestamp {t} precedes {prev}")]
    DecreasingTimestamp { index: u64, t: u64, prev: u64 },
}
