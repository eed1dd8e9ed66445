//! Manifest document schema.
//!
//! ```json
//! {
//!   "label": "epoch_10",
//!   "tensor_dir": ".",
//!   "layers": [
//!     {"name": "input", "op_kind": "input", "inputs": [], "attrs": {"shape": [3, 16, 16]}},
//!     {"name": "conv1", "op_kind": "conv2d", "inputs": ["input"],
//!      "attrs": {"stride": 1, "padding": 1}, "weight_refs": {"weights": "conv1.weight"}}
//!   ],
//!   "tensors": {"conv1.weight": {"file": "conv1.weight.npy", "shape": [16, 3, 3, 3]}}
//! }
//! ```
//!
//! `tensors` is optional; a tensor without a declaration is read from
//! `<tensor_dir>/<name>.npy` and only checked against its layer's rules.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TensorIoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Input,
    Conv2d,
    Batchnorm,
    Relu,
    Add,
    GlobalAvgPool,
    Dense,
    Softmax,
}

impl OpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::Input => "input",
            OpKind::Conv2d => "conv2d",
            OpKind::Batchnorm => "batchnorm",
            OpKind::Relu => "relu",
            OpKind::Add => "add",
            OpKind::GlobalAvgPool => "global_avg_pool",
            OpKind::Dense => "dense",
            OpKind::Softmax => "softmax",
        }
    }

    /// Number of upstream layers the op consumes.
    pub fn arity(self) -> usize {
        match self {
            OpKind::Input => 0,
            OpKind::Add => 2,
            _ => 1,
        }
    }

    /// Required and optional parameter roles.
    pub(crate) fn weight_roles(self) -> (&'static [&'static str], &'static [&'static str]) {
        match self {
            OpKind::Conv2d => (&["weights"], &["bias"]),
            OpKind::Batchnorm => (&["gamma", "beta", "mean", "var"], &[]),
            OpKind::Dense => (&["weights"], &["bias"]),
            _ => (&[], &[]),
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OpKind {
    type Err = TensorIoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "input" => OpKind::Input,
            "conv2d" => OpKind::Conv2d,
            "batchnorm" => OpKind::Batchnorm,
            "relu" => OpKind::Relu,
            "add" => OpKind::Add,
            "global_avg_pool" => OpKind::GlobalAvgPool,
            "dense" => OpKind::Dense,
            "softmax" => OpKind::Softmax,
            other => return Err(TensorIoError::UnknownOpKind(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerAttrs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padding: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Per-sample input shape `[C, H, W]`; only meaningful on `input` layers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Vec<usize>>,
}

impl LayerAttrs {
    pub fn stride(&self) -> usize {
        self.stride.unwrap_or(1)
    }

    pub fn padding(&self) -> usize {
        self.padding.unwrap_or(0)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(1e-5)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub op_kind: OpKind,
    pub inputs: Vec<String>,
    pub attrs: LayerAttrs,
    pub weight_refs: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
pub(crate) struct ManifestDoc {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub tensor_dir: Option<String>,
    pub layers: Vec<LayerDoc>,
    #[serde(default)]
    pub tensors: BTreeMap<String, TensorDecl>,
}

#[derive(Debug, Deserialize)]
pub(crate) struct LayerDoc {
    pub name: String,
    pub op_kind: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub attrs: LayerAttrs,
    #[serde(default)]
    pub weight_refs: BTreeMap<String, String>,
}

#[derive(Debug, Default, Deserialize)]
pub(crate) struct TensorDecl {
    #[serde(default)]
    pub file: Option<String>,
    #[serde(default)]
    pub shape: Option<Vec<usize>>,
}

impl LayerDoc {
    pub fn into_spec(self) -> Result<LayerSpec, TensorIoError> {
        Ok(LayerSpec {
            op_kind: self.op_kind.parse()?,
            name: self.name,
            inputs: self.inputs,
            attrs: self.attrs,
            weight_refs: self.weight_refs,
        })
    }
}
