use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::Read;
use std::path::{Component, Path, PathBuf};

use super::manifest::{ManifestDoc, TensorDecl};
use super::{npy, LayerSpec, OpKind, Result, Tensor, TensorIoError};

/// A validated model: layer graph plus every referenced tensor.
///
/// Immutable after construction; share freely across threads.
#[derive(Debug, Clone)]
pub struct ModelSnapshot {
    label: String,
    layers: Vec<LayerSpec>,
    tensors: BTreeMap<String, Tensor>,
    topo_order: Vec<usize>,
}

/// Borrowed view of one conv2d layer's weight tensor `[out, in, k, k]`.
#[derive(Debug, Clone, Copy)]
pub struct ConvLayerView<'a> {
    pub name: &'a str,
    pub layer_index: usize,
    pub weights: &'a Tensor,
    pub out_channels: usize,
    pub in_channels: usize,
    pub size: usize,
}

impl ConvLayerView<'_> {
    pub fn kernel_count(&self) -> usize {
        self.out_channels * self.in_channels
    }

    /// Writes kernel `(out, in)` widened to f64, row-major, into `dst[..k*k]`.
    pub fn kernel_into(&self, out_channel: usize, in_channel: usize, dst: &mut [f64]) {
        let kk = self.size * self.size;
        let base = (out_channel * self.in_channels + in_channel) * kk;
        for (j, d) in dst[..kk].iter_mut().enumerate() {
            *d = self.weights.get_f64(base + j);
        }
    }
}

impl ModelSnapshot {
    pub fn new(
        label: impl Into<String>,
        layers: Vec<LayerSpec>,
        tensors: BTreeMap<String, Tensor>,
    ) -> Result<Self> {
        let topo_order = validate_graph(&layers)?;
        for layer in &layers {
            validate_weights(layer, &tensors)?;
        }
        Ok(Self {
            label: label.into(),
            layers,
            tensors,
            topo_order,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn layer(&self, name: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn tensors(&self) -> &BTreeMap<String, Tensor> {
        &self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    /// Tensor bound to `role` on `layer`.
    pub fn weight(&self, layer: &LayerSpec, role: &str) -> Option<&Tensor> {
        layer.weight_refs.get(role).and_then(|n| self.tensors.get(n))
    }

    /// Layer indices in a dependency-respecting order (manifest order among ties).
    pub fn topo_order(&self) -> &[usize] {
        &self.topo_order
    }

    /// Per-sample input shape declared on the `input` layer.
    pub fn input_shape(&self) -> &[usize] {
        self.layers
            .iter()
            .find(|l| l.op_kind == OpKind::Input)
            .and_then(|l| l.attrs.shape.as_deref())
            .unwrap_or(&[])
    }

    /// Conv layers in manifest order.
    pub fn conv_layers(&self) -> Vec<ConvLayerView<'_>> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.op_kind == OpKind::Conv2d)
            .map(|(i, l)| {
                let w = self.weight(l, "weights").expect("validated conv weights");
                let s = w.shape();
                ConvLayerView {
                    name: &l.name,
                    layer_index: i,
                    weights: w,
                    out_channels: s[0],
                    in_channels: s[1],
                    size: s[2],
                }
            })
            .collect()
    }

    pub fn kernel_count(&self) -> usize {
        self.conv_layers().iter().map(|c| c.kernel_count()).sum()
    }

    /// Total conv weight count (biases, batchnorm and dense parameters excluded).
    pub fn conv_weight_count(&self) -> usize {
        self.conv_layers()
            .iter()
            .map(|c| c.kernel_count() * c.size * c.size)
            .sum()
    }

    /// Describes the first structural difference (layers, attrs, tensor shapes), if any.
    pub fn structure_diff(&self, other: &ModelSnapshot) -> Option<String> {
        if self.layers.len() != other.layers.len() {
            return Some(format!(
                "{} layers vs {}",
                self.layers.len(),
                other.layers.len()
            ));
        }
        for (a, b) in self.layers.iter().zip(&other.layers) {
            if a != b {
                return Some(format!("layer `{}` differs from `{}`", a.name, b.name));
            }
            for (role, name) in &a.weight_refs {
                let sa = self.tensors.get(name).map(|t| t.shape());
                let sb = other.weight(b, role).map(|t| t.shape());
                if sa != sb {
                    return Some(format!("tensor `{name}` has shape {sa:?} vs {sb:?}"));
                }
            }
        }
        None
    }
}

fn validate_graph(layers: &[LayerSpec]) -> Result<Vec<usize>> {
    let graph_err = |m: String| TensorIoError::InvalidGraph(m);
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, l) in layers.iter().enumerate() {
        if index.insert(l.name.as_str(), i).is_some() {
            return Err(graph_err(format!("duplicate layer name `{}`", l.name)));
        }
    }
    let inputs = layers.iter().filter(|l| l.op_kind == OpKind::Input).count();
    if inputs != 1 {
        return Err(graph_err(format!(
            "expected exactly one input layer, found {inputs}"
        )));
    }
    let mut deps: Vec<Vec<usize>> = Vec::with_capacity(layers.len());
    for l in layers {
        if l.inputs.len() != l.op_kind.arity() {
            return Err(graph_err(format!(
                "`{}` ({}) takes {} input(s), manifest lists {}",
                l.name,
                l.op_kind,
                l.op_kind.arity(),
                l.inputs.len()
            )));
        }
        let mut d = Vec::with_capacity(l.inputs.len());
        for src in &l.inputs {
            match index.get(src.as_str()) {
                Some(&j) => d.push(j),
                None => {
                    return Err(graph_err(format!(
                        "`{}` consumes unknown layer `{src}`",
                        l.name
                    )))
                }
            }
        }
        deps.push(d);
        if l.op_kind == OpKind::Input {
            match l.attrs.shape.as_deref() {
                Some([c, h, w]) if *c > 0 && *h > 0 && *w > 0 => {}
                other => {
                    return Err(graph_err(format!(
                        "input layer `{}` needs attrs.shape [C, H, W], got {other:?}",
                        l.name
                    )))
                }
            }
        }
    }

    // Kahn's algorithm, always taking the lowest manifest index that is ready.
    let n = layers.len();
    let mut pending: Vec<usize> = deps.iter().map(|d| d.len()).collect();
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, d) in deps.iter().enumerate() {
        for &j in d {
            consumers[j].push(i);
        }
    }
    let mut ready: std::collections::BTreeSet<usize> =
        (0..n).filter(|&i| pending[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &c in &consumers[i] {
            pending[c] -= 1;
            if pending[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() != n {
        let stuck = (0..n).find(|&i| pending[i] > 0).unwrap();
        return Err(TensorIoError::CyclicGraph(layers[stuck].name.clone()));
    }
    Ok(order)
}

fn validate_weights(layer: &LayerSpec, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
    let (required, optional) = layer.op_kind.weight_roles();
    for role in layer.weight_refs.keys() {
        if !required.contains(&role.as_str()) && !optional.contains(&role.as_str()) {
            return Err(TensorIoError::InvalidGraph(format!(
                "`{}` ({}) has no parameter role `{role}`",
                layer.name, layer.op_kind
            )));
        }
    }
    let get = |role: &str| -> Result<Option<&Tensor>> {
        let Some(name) = layer.weight_refs.get(role) else {
            if required.contains(&role) {
                return Err(TensorIoError::InvalidGraph(format!(
                    "`{}` ({}) lacks required weight_ref `{role}`",
                    layer.name, layer.op_kind
                )));
            }
            return Ok(None);
        };
        let t = tensors
            .get(name)
            .ok_or_else(|| TensorIoError::MissingTensor {
                name: name.clone(),
                path: PathBuf::from(name),
            })?;
        if !t.dtype().is_float() {
            return Err(TensorIoError::UnsupportedDtype(format!(
                "{name}: weight tensors must be float32 or float64, found {:?}",
                t.dtype()
            )));
        }
        Ok(Some(t))
    };
    let mismatch = |role: &str, expected: String, found: &[usize]| TensorIoError::ShapeMismatch {
        name: layer.weight_refs[role].clone(),
        expected,
        found: found.to_vec(),
    };

    match layer.op_kind {
        OpKind::Conv2d => {
            let w = get("weights")?.unwrap();
            let s = w.shape();
            let ok = s.len() == 4 && s[2] == s[3] && (1..=3).contains(&s[2]) && s[0] > 0 && s[1] > 0;
            if !ok {
                return Err(mismatch(
                    "weights",
                    "[out, in, k, k] with k in {1, 2, 3}".into(),
                    s,
                ));
            }
            if let Some(b) = get("bias")? {
                if b.shape() != [s[0]] {
                    return Err(mismatch("bias", format!("[{}]", s[0]), b.shape()));
                }
            }
        }
        OpKind::Batchnorm => {
            let gamma = get("gamma")?.unwrap();
            let c = match gamma.shape() {
                [c] => *c,
                other => return Err(mismatch("gamma", "[C]".into(), other)),
            };
            for role in ["beta", "mean", "var"] {
                let t = get(role)?.unwrap();
                if t.shape() != [c] {
                    return Err(mismatch(role, format!("[{c}]"), t.shape()));
                }
            }
        }
        OpKind::Dense => {
            let w = get("weights")?.unwrap();
            let out = match w.shape() {
                [o, _] => *o,
                other => return Err(mismatch("weights", "[out, in]".into(), other)),
            };
            if let Some(b) = get("bias")? {
                if b.shape() != [out] {
                    return Err(mismatch("bias", format!("[{out}]"), b.shape()));
                }
            }
        }
        _ => {}
    }
    Ok(())
}

/// Where manifest-relative files are read from.
enum Source {
    Dir(PathBuf),
    Zip {
        path: PathBuf,
        archive: Box<zip::ZipArchive<File>>,
    },
}

impl Source {
    fn read(&mut self, rel: &Path) -> Result<Option<Vec<u8>>> {
        match self {
            Source::Dir(dir) => {
                let path = dir.join(rel);
                match fs::read(&path) {
                    Ok(b) => Ok(Some(b)),
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
                    Err(source) => Err(TensorIoError::Io { path, source }),
                }
            }
            Source::Zip { path, archive } => {
                let name = normalize(rel);
                let mut entry = match archive.by_name(&name) {
                    Ok(e) => e,
                    Err(zip::result::ZipError::FileNotFound) => return Ok(None),
                    Err(e) => {
                        return Err(TensorIoError::Archive {
                            path: path.clone(),
                            message: e.to_string(),
                        })
                    }
                };
                let mut buf = Vec::with_capacity(entry.size() as usize);
                entry
                    .read_to_end(&mut buf)
                    .map_err(|source| TensorIoError::Io {
                        path: path.join(&name),
                        source,
                    })?;
                Ok(Some(buf))
            }
        }
    }

    fn display(&self, rel: &Path) -> PathBuf {
        match self {
            Source::Dir(dir) => dir.join(rel),
            Source::Zip { path, .. } => path.join(normalize(rel)),
        }
    }
}

fn normalize(rel: &Path) -> String {
    rel.components()
        .filter_map(|c| match c {
            Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
            _ => None,
        })
        .collect::<Vec<_>>()
        .join("/")
}

/// Loads a snapshot from a manifest file, a directory holding `manifest.json`,
/// or a `.zip`/`.npz` archive with `manifest.json` at its root.
pub fn load_snapshot(path: impl AsRef<Path>) -> Result<ModelSnapshot> {
    let path = path.as_ref();
    let is_archive = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("zip") || e.eq_ignore_ascii_case("npz"))
        .unwrap_or(false);

    let (mut source, manifest_rel, manifest_path) = if path.is_dir() {
        (
            Source::Dir(path.to_path_buf()),
            PathBuf::from("manifest.json"),
            path.join("manifest.json"),
        )
    } else if is_archive {
        let file = File::open(path).map_err(|source| TensorIoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let archive = zip::ZipArchive::new(file).map_err(|e| TensorIoError::Archive {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        (
            Source::Zip {
                path: path.to_path_buf(),
                archive: Box::new(archive),
            },
            PathBuf::from("manifest.json"),
            path.join("manifest.json"),
        )
    } else {
        let dir = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let file = PathBuf::from(path.file_name().unwrap_or_default());
        (Source::Dir(dir), file, path.to_path_buf())
    };

    let bytes = source
        .read(&manifest_rel)?
        .ok_or_else(|| TensorIoError::Io {
            path: manifest_path.clone(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "manifest not found"),
        })?;
    let doc: ManifestDoc =
        serde_json::from_slice(&bytes).map_err(|e| TensorIoError::Manifest {
            path: manifest_path.clone(),
            message: e.to_string(),
        })?;

    let default_label = match &source {
        Source::Dir(_) => manifest_path
            .parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().into_owned()),
        Source::Zip { path, .. } => path.file_stem().map(|s| s.to_string_lossy().into_owned()),
    };
    let label = doc
        .label
        .clone()
        .or(default_label)
        .unwrap_or_else(|| "snapshot".to_string());
    let tensor_dir = PathBuf::from(doc.tensor_dir.as_deref().unwrap_or("."));
    let layers = doc
        .layers
        .into_iter()
        .map(|l| l.into_spec())
        .collect::<Result<Vec<_>>>()?;

    let mut tensors = BTreeMap::new();
    let empty = TensorDecl::default();
    for layer in &layers {
        for name in layer.weight_refs.values() {
            if tensors.contains_key(name) {
                continue;
            }
            let decl = doc.tensors.get(name).unwrap_or(&empty);
            let rel = tensor_dir.join(decl.file.clone().unwrap_or_else(|| format!("{name}.npy")));
            let bytes = source
                .read(&rel)?
                .ok_or_else(|| TensorIoError::MissingTensor {
                    name: name.clone(),
                    path: source.display(&rel),
                })?;
            let tensor = npy::parse_npy(&bytes)?;
            if let Some(shape) = &decl.shape {
                if tensor.shape() != shape.as_slice() {
                    return Err(TensorIoError::ShapeMismatch {
                        name: name.clone(),
                        expected: format!("{shape:?}"),
                        found: tensor.shape().to_vec(),
                    });
                }
            }
            tensors.insert(name.clone(), tensor);
        }
    }
    ModelSnapshot::new(label, layers, tensors)
}
