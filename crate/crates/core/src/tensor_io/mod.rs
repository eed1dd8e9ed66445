//! Tensor containers, NPY files, model manifests, and checkpoint series.
//!
//! Kernel enumeration order is fixed here and used by every downstream
//! per-kernel index: conv layers in manifest order, then out-channel major,
//! then in-channel.

mod manifest;
mod npy;
mod series;
mod snapshot;

use std::path::PathBuf;

use thiserror::Error;

pub use manifest::{LayerAttrs, LayerSpec, OpKind};
pub use npy::{load_npy, parse_npy, save_npy, write_npy};
pub use series::{load_checkpoint_series, CheckpointSeries};
pub use snapshot::{load_snapshot, ConvLayerView, ModelSnapshot};

#[derive(Debug, Error)]
pub enum TensorIoError {
    #[error("malformed NPY header: {0}")]
    MalformedHeader(String),
    #[error("unsupported dtype `{0}`")]
    UnsupportedDtype(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("shape {shape:?} implies {expected} elements but {found} were supplied")]
    ElementCount { shape: Vec<usize>, expected: usize, found: usize },
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("unknown op kind `{0}`")]
    UnknownOpKind(String),
    #[error("tensor `{name}` not found (looked for {path})")]
    MissingTensor { name: String, path: PathBuf },
    #[error("shape mismatch for `{name}`: expected {expected}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: String,
        found: Vec<usize>,
    },
    #[error("layer graph contains a cycle through `{0}`")]
    CyclicGraph(String),
    #[error("invalid layer graph: {0}")]
    InvalidGraph(String),
    #[error("checkpoint series is empty: no epoch_<N> directories under {0}")]
    EmptySeries(PathBuf),
    #[error("checkpoint epoch {epoch} has a manifest that differs from epoch {reference}: {detail}")]
    InconsistentManifests {
        epoch: u64,
        reference: u64,
        detail: String,
    },
    #[error("epoch {0} appears more than once in the series")]
    DuplicateEpoch(u64),
    #[error("archive error in {path}: {message}")]
    Archive { path: PathBuf, message: String },
}

pub type Result<T, E = TensorIoError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DType {
    Float32,
    Float64,
    UInt8,
    Int64,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::Float32 => 4,
            DType::Float64 => 8,
            DType::UInt8 => 1,
            DType::Int64 => 8,
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, DType::Float32 | DType::Float64)
    }
}

#[derive(Debug, Clone)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
    I64(Vec<i64>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::U8(v) => v.len(),
            TensorData::I64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::Float32,
            TensorData::F64(_) => DType::Float64,
            TensorData::U8(_) => DType::UInt8,
            TensorData::I64(_) => DType::Int64,
        }
    }
}

/// Dense row-major tensor.
#[derive(Debug, Clone)]
pub struct Tensor {
    shape: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: TensorData) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorIoError::ElementCount {
                shape,
                expected,
                found: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn from_f64(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::new(shape, TensorData::F64(data))
    }

    pub fn from_f32(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        Self::new(shape, TensorData::F32(data))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Element `i` (flat, row-major) widened to f64.
    pub fn get_f64(&self, i: usize) -> f64 {
        match &self.data {
            TensorData::F32(v) => f64::from(v[i]),
            TensorData::F64(v) => v[i],
            TensorData::U8(v) => f64::from(v[i]),
            TensorData::I64(v) => v[i] as f64,
        }
    }

    /// All elements widened to f64.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            TensorData::F64(v) => v.clone(),
            TensorData::U8(v) => v.iter().map(|&x| f64::from(x)).collect(),
            TensorData::I64(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }

    pub fn as_i64(&self) -> Option<&[i64]> {
        match &self.data {
            TensorData::I64(v) => Some(v),
            _ => None,
        }
    }

    /// Bitwise equality of shape, dtype, and payload (NaN-safe, distinguishes -0.0).
    pub fn bits_eq(&self, other: &Tensor) -> bool {
        if self.shape != other.shape {
            return false;
        }
        match (&self.data, &other.data) {
            (TensorData::F32(a), TensorData::F32(b)) => {
                a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (TensorData::F64(a), TensorData::F64(b)) => {
                a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (TensorData::U8(a), TensorData::U8(b)) => a == b,
            (TensorData::I64(a), TensorData::I64(b)) => a == b,
            _ => false,
        }
    }
}
