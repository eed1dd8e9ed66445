//! Inference-only forward pass over a manifest graph.
//!
//! Sums and products run in f64; every activation is stored as f32. Images
//! are evaluated one at a time, so results do not depend on batch size or
//! worker count.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::pruner::{KernelUniverse, PruneMask};
use crate::tensor_io::{load_npy, ModelSnapshot, OpKind, Tensor, TensorData, TensorIoError};

#[derive(Debug, Error)]
pub enum InferError {
    #[error("shape mismatch at `{layer}`: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        layer: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("unsupported op `{0}` in forward pass")]
    UnknownOpKind(String),
    #[error("mask was built for a different kernel universe")]
    UniverseMismatch,
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    TensorIo(#[from] TensorIoError),
    #[error("worker pool: {0}")]
    ThreadPool(String),
}

pub type Result<T, E = InferError> = std::result::Result<T, E>;

/// Images `[N, C, H, W]` and integer labels `[N]`.
#[derive(Debug, Clone)]
pub struct EvalDataset {
    images: Vec<f32>,
    image_shape: [usize; 3],
    labels: Vec<i64>,
}

impl EvalDataset {
    pub fn new(images: &Tensor, labels: &Tensor) -> Result<Self> {
        let shape = images.shape();
        if shape.len() != 4 || shape[0] == 0 {
            return Err(InferError::Dataset(format!(
                "images must be [N, C, H, W] with N >= 1, got {shape:?}"
            )));
        }
        let images_f32: Vec<f32> = match images.data() {
            TensorData::F32(v) => v.clone(),
            TensorData::F64(v) => v.iter().map(|&x| x as f32).collect(),
            _ => return Err(InferError::Dataset("images must be float32 or float64".into())),
        };
        let labels_i64: Vec<i64> = match labels.data() {
            TensorData::I64(v) => v.clone(),
            TensorData::U8(v) => v.iter().map(|&x| x as i64).collect(),
            _ => return Err(InferError::Dataset("labels must be int64".into())),
        };
        if labels.shape() != [shape[0]] {
            return Err(InferError::Dataset(format!(
                "labels shape {:?} does not match {} images",
                labels.shape(),
                shape[0]
            )));
        }
        if let Some(bad) = labels_i64.iter().find(|&&l| l < 0) {
            return Err(InferError::Dataset(format!("negative label {bad}")));
        }
        Ok(Self {
            images: images_f32,
            image_shape: [shape[1], shape[2], shape[3]],
            labels: labels_i64,
        })
    }

    /// Reads `images.npy` and `labels.npy` from `dir`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let images = load_npy(dir.join("images.npy"))?;
        let labels = load_npy(dir.join("labels.npy"))?;
        Self::new(&images, &labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_shape(&self) -> [usize; 3] {
        self.image_shape
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let n = self.image_shape.iter().product::<usize>();
        &self.images[i * n..(i + 1) * n]
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    /// The first `n` samples.
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        let per = self.image_shape.iter().product::<usize>();
        Self {
            images: self.images[..n * per].to_vec(),
            image_shape: self.image_shape,
            labels: self.labels[..n].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub top1_accuracy: f64,
    pub num_samples: usize,
    pub correct: usize,
    /// Sum of every logit, accumulated in f64 in sample order.
    pub logits_checksum: f64,
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    Conv {
        weights: Vec<f64>,
        bias: Option<Vec<f64>>,
        out_c: usize,
        in_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
    },
    BatchNorm {
        scale: Vec<f64>,
        shift: Vec<f64>,
    },
    Relu,
    Add,
    Pool,
    Dense {
        weights: Vec<f64>,
        bias: Option<Vec<f64>>,
        out: usize,
        inp: usize,
    },
    Identity,
}

#[derive(Debug, Clone)]
struct Node {
    name: String,
    op: Op,
    inputs: Vec<usize>,
    shape: [usize; 3],
}

/// A snapshot lowered to f64 parameters with an optional mask already applied.
#[derive(Debug, Clone)]
pub struct CompiledNetwork {
    nodes: Vec<Node>,
    input_shape: [usize; 3],
    output: usize,
}

fn to_f64(t: &Tensor) -> Vec<f64> {
    t.to_f64_vec()
}

impl CompiledNetwork {
    pub fn compile(snapshot: &ModelSnapshot, mask: Option<&PruneMask>) -> Result<Self> {
        if let Some(m) = mask {
            if **m.universe() != KernelUniverse::from_snapshot(snapshot) {
                return Err(InferError::UniverseMismatch);
            }
        }
        let layers = snapshot.layers();
        let input_shape: [usize; 3] = match snapshot.input_shape() {
            [c, h, w] => [*c, *h, *w],
            other => {
                return Err(InferError::ShapeMismatch {
                    layer: "input".into(),
                    expected: vec![0, 0, 0],
                    found: other.to_vec(),
                })
            }
        };
        let mut position = vec![usize::MAX; layers.len()];
        let mut nodes: Vec<Node> = Vec::with_capacity(layers.len());
        let mut kernel_offset = 0usize;
        let conv_offsets: Vec<(usize, usize)> = {
            let mut v = Vec::new();
            for c in snapshot.conv_layers() {
                v.push((c.layer_index, kernel_offset));
                kernel_offset += c.kernel_count();
            }
            v
        };

        for &li in snapshot.topo_order() {
            let spec = &layers[li];
            let inputs: Vec<usize> = spec
                .inputs
                .iter()
                .map(|n| position[layers.iter().position(|l| &l.name == n).expect("validated")])
                .collect();
            let in_shape = inputs.first().map(|&i| nodes[i].shape).unwrap_or(input_shape);
            let mismatch = |expected: Vec<usize>, found: Vec<usize>| InferError::ShapeMismatch {
                layer: spec.name.clone(),
                expected,
                found,
            };
            let (op, shape) = match spec.op_kind {
                OpKind::Input => (Op::Input, input_shape),
                OpKind::Conv2d => {
                    let w = snapshot.weight(spec, "weights").expect("validated");
                    let s = w.shape();
                    let (out_c, in_c, k) = (s[0], s[1], s[2]);
                    if in_c != in_shape[0] {
                        return Err(mismatch(vec![in_c], vec![in_shape[0]]));
                    }
                    let mut weights = to_f64(w);
                    if let Some(m) = mask {
                        let off = conv_offsets
                            .iter()
                            .find(|(i, _)| *i == li)
                            .map(|(_, o)| *o)
                            .expect("conv layer enumerated");
                        let kk = k * k;
                        for j in 0..out_c * in_c {
                            if m.contains(off + j) {
                                weights[j * kk..(j + 1) * kk].fill(0.0);
                            }
                        }
                    }
                    let stride = spec.attrs.stride().max(1);
                    let pad = spec.attrs.padding();
                    let (h, wd) = (in_shape[1] + 2 * pad, in_shape[2] + 2 * pad);
                    if h < k || wd < k {
                        return Err(mismatch(vec![k, k], vec![h, wd]));
                    }
                    let shape = [out_c, (h - k) / stride + 1, (wd - k) / stride + 1];
                    let bias = snapshot.weight(spec, "bias").map(to_f64);
                    (
                        Op::Conv {
                            weights,
                            bias,
                            out_c,
                            in_c,
                            k,
                            stride,
                            pad,
                        },
                        shape,
                    )
                }
                OpKind::Batchnorm => {
                    let get = |r| to_f64(snapshot.weight(spec, r).expect("validated"));
                    let (gamma, beta, mean, var) = (get("gamma"), get("beta"), get("mean"), get("var"));
                    if gamma.len() != in_shape[0] {
                        return Err(mismatch(vec![in_shape[0]], vec![gamma.len()]));
                    }
                    let eps = spec.attrs.epsilon();
                    let scale: Vec<f64> = gamma
                        .iter()
                        .zip(&var)
                        .map(|(g, v)| g / (v + eps).sqrt())
                        .collect();
                    let shift = beta
                        .iter()
                        .zip(&mean)
                        .zip(&scale)
                        .map(|((b, m), s)| b - m * s)
                        .collect();
                    (Op::BatchNorm { scale, shift }, in_shape)
                }
                OpKind::Relu => (Op::Relu, in_shape),
                OpKind::Add => {
                    let other = nodes[inputs[1]].shape;
                    if other != in_shape {
                        return Err(mismatch(in_shape.to_vec(), other.to_vec()));
                    }
                    (Op::Add, in_shape)
                }
                OpKind::GlobalAvgPool => (Op::Pool, [in_shape[0], 1, 1]),
                OpKind::Dense => {
                    let w = snapshot.weight(spec, "weights").expect("validated");
                    let (out, inp) = (w.shape()[0], w.shape()[1]);
                    let flat = in_shape.iter().product::<usize>();
                    if inp != flat {
                        return Err(mismatch(vec![inp], vec![flat]));
                    }
                    (
                        Op::Dense {
                            weights: to_f64(w),
                            bias: snapshot.weight(spec, "bias").map(to_f64),
                            out,
                            inp,
                        },
                        [out, 1, 1],
                    )
                }
                // argmax is unchanged by softmax, so logits pass straight through
                OpKind::Softmax => (Op::Identity, in_shape),
            };
            position[li] = nodes.len();
            nodes.push(Node {
                name: spec.name.clone(),
                op,
                inputs,
                shape,
            });
        }

        // the sink is the last node nothing else consumes
        let mut consumed = vec![false; nodes.len()];
        for n in &nodes {
            for &i in &n.inputs {
                consumed[i] = true;
            }
        }
        let mut output = (0..nodes.len()).rev().find(|&i| !consumed[i]).unwrap_or(0);
        while matches!(nodes[output].op, Op::Identity) {
            output = nodes[output].inputs[0];
        }
        Ok(Self {
            nodes,
            input_shape,
            output,
        })
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn num_outputs(&self) -> usize {
        self.nodes[self.output].shape.iter().product()
    }

    /// Logits of one image stored `[C, H, W]`.
    pub fn forward_one(&self, image: &[f32]) -> Result<Vec<f32>> {
        let expected = self.input_shape.iter().product::<usize>();
        if image.len() != expected {
            return Err(InferError::ShapeMismatch {
                layer: "input".into(),
                expected: self.input_shape.to_vec(),
                found: vec![image.len()],
            });
        }
        let mut acts: Vec<Vec<f32>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let x = node.inputs.first().map(|&i| acts[i].as_slice());
            let in_shape = node.inputs.first().map(|&i| self.nodes[i].shape);
            let y = match &node.op {
                Op::Input => image.to_vec(),
                Op::Identity => x.expect("unary").to_vec(),
                Op::Relu => x.expect("unary").iter().map(|&v| v.max(0.0)).collect(),
                Op::Add => {
                    let b = &acts[node.inputs[1]];
                    x.expect("binary")
                        .iter()
                        .zip(b)
                        .map(|(&p, &q)| (p as f64 + q as f64) as f32)
                        .collect()
                }
                Op::BatchNorm { scale, shift } => {
                    let x = x.expect("unary");
                    let plane = node.shape[1] * node.shape[2];
                    let mut out = Vec::with_capacity(x.len());
                    for c in 0..node.shape[0] {
                        for &v in &x[c * plane..(c + 1) * plane] {
                            out.push((v as f64 * scale[c] + shift[c]) as f32);
                        }
                    }
                    out
                }
                Op::Pool => {
                    let x = x.expect("unary");
                    let [c, h, w] = in_shape.expect("unary");
                    let plane = h * w;
                    (0..c)
                        .map(|ci| {
                            let s: f64 = x[ci * plane..(ci + 1) * plane].iter().map(|&v| v as f64).sum();
                            (s / plane as f64) as f32
                        })
                        .collect()
                }
                Op::Dense {
                    weights,
                    bias,
                    out,
                    inp,
                } => {
                    let x = x.expect("unary");
                    (0..*out)
                        .map(|o| {
                            let row = &weights[o * inp..(o + 1) * inp];
                            let mut s: f64 = bias.as_ref().map_or(0.0, |b| b[o]);
                            for (w, &v) in row.iter().zip(x) {
                                s += w * v as f64;
                            }
                            s as f32
                        })
                        .collect()
                }
                Op::Conv {
                    weights,
                    bias,
                    out_c,
                    in_c,
                    k,
                    stride,
                    pad,
                } => conv2d(
                    x.expect("unary"),
                    in_shape.expect("unary"),
                    node.shape,
                    weights,
                    bias.as_deref(),
                    (*out_c, *in_c, *k, *stride, *pad),
                ),
            };
            debug_assert_eq!(y.len(), node.shape.iter().product::<usize>(), "{}", node.name);
            acts.push(y);
        }
        Ok(std::mem::take(&mut acts[self.output]))
    }
}

fn conv2d(
    x: &[f32],
    [_, h, w]: [usize; 3],
    [_, oh, ow]: [usize; 3],
    weights: &[f64],
    bias: Option<&[f64]>,
    (out_c, in_c, k, stride, pad): (usize, usize, usize, usize, usize),
) -> Vec<f32> {
    let xd: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let mut out = Vec::with_capacity(out_c * oh * ow);
    let mut acc = vec![0.0f64; oh * ow];
    for o in 0..out_c {
        acc.fill(bias.map_or(0.0, |b| b[o]));
        for i in 0..in_c {
            let plane = &xd[i * h * w..(i + 1) * h * w];
            let kern = &weights[(o * in_c + i) * k * k..(o * in_c + i + 1) * k * k];
            if kern.iter().all(|&v| v == 0.0) {
                continue;
            }
            for ky in 0..k {
                for kx in 0..k {
                    let wv = kern[ky * k + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    for oy in 0..oh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let row = &plane[iy as usize * w..(iy as usize + 1) * w];
                        let dst = &mut acc[oy * ow..(oy + 1) * ow];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix >= 0 && ix < w as isize {
                                *d += wv * row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        out.extend(acc.iter().map(|&v| v as f32));
    }
    out
}

/// Logits `[N, classes]` for a batch `[N, C, H, W]`.
pub fn forward(snapshot: &ModelSnapshot, batch: &Tensor) -> Result<Tensor> {
    forward_masked(snapshot, batch, None, 0)
}

pub fn forward_masked(snapshot: &ModelSnapshot, batch: &Tensor, mask: Option<&PruneMask>, jobs: usize) -> Result<Tensor> {
    let net = CompiledNetwork::compile(snapshot, mask)?;
    let shape = batch.shape();
    let per: usize = net.input_shape.iter().product();
    if shape.len() != 4 || shape[1..] != net.input_shape {
        return Err(InferError::ShapeMismatch {
            layer: "input".into(),
            expected: [&[0][..], &net.input_shape[..]].concat(),
            found: shape.to_vec(),
        });
    }
    let data: Vec<f32> = batch.to_f64_vec().into_iter().map(|v| v as f32).collect();
    let n = shape[0];
    let rows = run_images(&net, n, |i| &data[i * per..(i + 1) * per], jobs)?;
    let classes = net.num_outputs();
    Ok(Tensor::from_f32(vec![n, classes], rows.concat()).expect("logit count"))
}

fn run_images<'a>(
    net: &CompiledNetwork,
    n: usize,
    image: impl Fn(usize) -> &'a [f32] + Sync,
    jobs: usize,
) -> Result<Vec<Vec<f32>>> {
    crate::parallel::install(jobs, || {
        (0..n)
            .into_par_iter()
            .map(|i| net.forward_one(image(i)))
            .collect::<Result<Vec<_>>>()
    })
    .map_err(InferError::ThreadPool)?
}

/// First index of the largest value.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Top-1 accuracy with pruned kernels zeroed.
pub fn evaluate(snapshot: &ModelSnapshot, dataset: &EvalDataset, mask: Option<&PruneMask>, jobs: usize) -> Result<EvalResult> {
    let net = CompiledNetwork::compile(snapshot, mask)?;
    evaluate_compiled(&net, dataset, jobs)
}

pub fn evaluate_compiled(net: &CompiledNetwork, dataset: &EvalDataset, jobs: usize) -> Result<EvalResult> {
    if dataset.image_shape() != net.input_shape {
        return Err(InferError::ShapeMismatch {
            layer: "input".into(),
            expected: net.input_shape.to_vec(),
            found: dataset.image_shape().to_vec(),
        });
    }
    let logits = run_images(net, dataset.len(), |i| dataset.image(i), jobs)?;
    let mut correct = 0;
    let mut checksum = 0.0f64;
    for (row, &label) in logits.iter().zip(dataset.labels()) {
        if argmax(row) as i64 == label {
            correct += 1;
        }
        checksum += row.iter().map(|&v| v as f64).sum::<f64>();
    }
    Ok(EvalResult {
        top1_accuracy: correct as f64 / dataset.len() as f64,
        num_samples: dataset.len(),
        correct,
        logits_checksum: checksum,
    })
}
