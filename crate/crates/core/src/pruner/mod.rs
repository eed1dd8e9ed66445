//! Whole-model pruning decisions and their statistics.
//!
//! Per-kernel work fans out over a worker pool; every aggregate is reduced in
//! kernel enumeration order so output does not depend on `jobs`.

mod activity;
mod complex;
mod history;
mod sets;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::infer::InferError;
use crate::modes::{scores, CompressionMode, ThresholdTable};
use crate::spectra::{summarize, InvariantViolation, Kernel, SpectraError, SpectralSummary};
use crate::tensor_io::{DType, ModelSnapshot, Tensor};

pub use activity::{layer_activity, ActivityMap, LayerActivity};
pub use complex::{complex_stats, complex_stats_by_layer, deciding_eigenvalue, EIGENVALUE_MODES, ComplexStats, ModeComplexStats};
pub use history::{epoch_history, EpochModeRecord, EpochRecord};
pub use sets::{
    conformance, set_partition, vanilla_projection, Conformance, ConformanceRow, SetSignature,
    LISTED_SETS, NOTED_EXCEPTIONS,
};

#[derive(Debug, Error)]
pub enum PrunerError {
    #[error("kernel {index}: {source}")]
    Kernel {
        index: KernelIndex,
        #[source]
        source: SpectraError,
    },
    #[error("kernel {index}: {violation}")]
    Invariant {
        index: KernelIndex,
        violation: InvariantViolation,
    },
    #[error("kernel universe is empty")]
    EmptyUniverse,
    #[error("vanilla accuracy is zero; compression score undefined")]
    ZeroVanillaAccuracy,
    #[error("masks do not share one kernel universe")]
    UniverseMismatch,
    #[error("expected one mask per compression mode, got {0}")]
    MaskCount(usize),
    #[error("worker pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Infer(#[from] InferError),
    #[error("checkpoint at epoch {epoch}: {source}")]
    Checkpoint {
        epoch: u64,
        #[source]
        source: Box<PrunerError>,
    },
}

impl PrunerError {
    pub fn is_invariant_violation(&self) -> bool {
        match self {
            PrunerError::Invariant { .. } => true,
            PrunerError::Checkpoint { source, .. } => source.is_invariant_violation(),
            _ => false,
        }
    }
}

pub type Result<T, E = PrunerError> = std::result::Result<T, E>;

/// Position of one kernel inside a conv layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct KernelIndex {
    pub layer_name: String,
    pub out_channel: usize,
    pub in_channel: usize,
    pub size: usize,
}

impl fmt::Display for KernelIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}[{}, {}] ({}x{})",
            self.layer_name, self.out_channel, self.in_channel, self.size, self.size
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerSlot {
    pub name: String,
    pub out_channels: usize,
    pub in_channels: usize,
    pub size: usize,
    /// Flat index of this layer's first kernel.
    pub offset: usize,
}

impl LayerSlot {
    pub fn kernel_count(&self) -> usize {
        self.out_channels * self.in_channels
    }

    pub fn weight_count(&self) -> usize {
        self.kernel_count() * self.size * self.size
    }
}

/// Every conv kernel of a model, flattened in enumeration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelUniverse {
    layers: Vec<LayerSlot>,
    len: usize,
}

impl KernelUniverse {
    pub fn from_snapshot(snapshot: &ModelSnapshot) -> Self {
        Self::from_layers(
            snapshot
                .conv_layers()
                .iter()
                .map(|c| (c.name.to_string(), c.out_channels, c.in_channels, c.size)),
        )
    }

    /// Builds a universe from `(name, out, in, size)` tuples.
    pub fn from_layers(layers: impl IntoIterator<Item = (String, usize, usize, usize)>) -> Self {
        let mut offset = 0;
        let layers: Vec<LayerSlot> = layers
            .into_iter()
            .map(|(name, out_channels, in_channels, size)| {
                let slot = LayerSlot {
                    name,
                    out_channels,
                    in_channels,
                    size,
                    offset,
                };
                offset += slot.kernel_count();
                slot
            })
            .collect();
        Self {
            layers,
            len: offset,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn layers(&self) -> &[LayerSlot] {
        &self.layers
    }

    fn slot_of(&self, flat: usize) -> &LayerSlot {
        let pos = self.layers.partition_point(|l| l.offset + l.kernel_count() <= flat);
        &self.layers[pos]
    }

    pub fn index(&self, flat: usize) -> KernelIndex {
        let slot = self.slot_of(flat);
        let local = flat - slot.offset;
        KernelIndex {
            layer_name: slot.name.clone(),
            out_channel: local / slot.in_channels,
            in_channel: local % slot.in_channels,
            size: slot.size,
        }
    }

    /// Number of weights in kernel `flat` (`size²`).
    pub fn kernel_weights(&self, flat: usize) -> usize {
        let s = self.slot_of(flat).size;
        s * s
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(LayerSlot::weight_count).sum()
    }
}

/// Spectral summaries and scores for every kernel of one model.
#[derive(Debug, Clone)]
pub struct KernelAnalysis {
    universe: Arc<KernelUniverse>,
    kernels: Vec<Kernel>,
    summaries: Vec<SpectralSummary>,
    scores: Vec<[f64; 8]>,
}

impl KernelAnalysis {
    pub fn analyze(snapshot: &ModelSnapshot, jobs: usize) -> Result<Self> {
        let universe = KernelUniverse::from_snapshot(snapshot);
        let mut kernels = Vec::with_capacity(universe.len());
        let mut buf = [0.0; 9];
        for conv in snapshot.conv_layers() {
            let kk = conv.size * conv.size;
            for o in 0..conv.out_channels {
                for i in 0..conv.in_channels {
                    conv.kernel_into(o, i, &mut buf);
                    let k = Kernel::new(conv.size, &buf[..kk]).map_err(|source| {
                        PrunerError::Kernel {
                            index: KernelIndex {
                                layer_name: conv.name.to_string(),
                                out_channel: o,
                                in_channel: i,
                                size: conv.size,
                            },
                            source,
                        }
                    })?;
                    kernels.push(k);
                }
            }
        }
        Self::with_universe(Arc::new(universe), kernels, jobs)
    }

    /// Analysis of loose kernels; each becomes a one-kernel layer `k<i>`.
    pub fn from_kernels(kernels: Vec<Kernel>, jobs: usize) -> Result<Self> {
        let universe = KernelUniverse::from_layers(
            kernels
                .iter()
                .enumerate()
                .map(|(i, k)| (format!("k{i}"), 1, 1, k.n())),
        );
        Self::with_universe(Arc::new(universe), kernels, jobs)
    }

    fn with_universe(universe: Arc<KernelUniverse>, kernels: Vec<Kernel>, jobs: usize) -> Result<Self> {
        let (summaries, scores): (Vec<_>, Vec<_>) = crate::parallel::install(jobs, || {
            kernels
                .par_iter()
                .map(|k| {
                    let s = summarize(k);
                    let sc = scores(&s, k);
                    (s, sc)
                })
                .unzip()
        })
        .map_err(PrunerError::ThreadPool)?;
        Ok(Self {
            universe,
            kernels,
            summaries,
            scores,
        })
    }

    pub fn universe(&self) -> &Arc<KernelUniverse> {
        &self.universe
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn summaries(&self) -> &[SpectralSummary] {
        &self.summaries
    }

    /// Scores of kernel `i`, indexed by [`CompressionMode::index`].
    pub fn scores(&self, i: usize) -> &[f64; 8] {
        &self.scores[i]
    }

    pub fn score(&self, i: usize, mode: CompressionMode) -> f64 {
        self.scores[i][mode.index()]
    }

    /// First kernel whose summary breaks a spectral identity.
    pub fn check_invariants(&self) -> Result<()> {
        for (i, (s, k)) in self.summaries.iter().zip(&self.kernels).enumerate() {
            s.check_invariants(k).map_err(|violation| PrunerError::Invariant {
                index: self.universe.index(i),
                violation,
            })?;
        }
        Ok(())
    }

    pub fn mask(&self, mode: CompressionMode, thresholds: &ThresholdTable) -> PruneMask {
        let pruned = self
            .scores
            .iter()
            .zip(&self.kernels)
            .map(|(sc, k)| sc[mode.index()] < thresholds.get(mode, k.n()))
            .collect();
        PruneMask {
            mode,
            pruned,
            universe: Arc::clone(&self.universe),
        }
    }

    /// One mask per mode, canonical order.
    pub fn masks(&self, thresholds: &ThresholdTable) -> Vec<PruneMask> {
        CompressionMode::ALL
            .iter()
            .map(|&m| self.mask(m, thresholds))
            .collect()
    }

    /// Mask with a single threshold applied to every kernel size.
    pub fn mask_at(&self, mode: CompressionMode, threshold: f64) -> PruneMask {
        PruneMask {
            mode,
            pruned: self.scores.iter().map(|sc| sc[mode.index()] < threshold).collect(),
            universe: Arc::clone(&self.universe),
        }
    }
}

pub fn build_masks(snapshot: &ModelSnapshot, thresholds: &ThresholdTable, jobs: usize) -> Result<Vec<PruneMask>> {
    Ok(KernelAnalysis::analyze(snapshot, jobs)?.masks(thresholds))
}

/// Kernels one mode deems prunable.
#[derive(Debug, Clone)]
pub struct PruneMask {
    pub mode: CompressionMode,
    pruned: Vec<bool>,
    universe: Arc<KernelUniverse>,
}

impl PruneMask {
    pub fn empty(mode: CompressionMode, universe: Arc<KernelUniverse>) -> Self {
        Self {
            mode,
            pruned: vec![false; universe.len()],
            universe,
        }
    }

    pub fn from_flags(mode: CompressionMode, universe: Arc<KernelUniverse>, pruned: Vec<bool>) -> Result<Self> {
        if pruned.len() != universe.len() {
            return Err(PrunerError::UniverseMismatch);
        }
        Ok(Self {
            mode,
            pruned,
            universe,
        })
    }

    pub fn universe(&self) -> &Arc<KernelUniverse> {
        &self.universe
    }

    pub fn universe_size(&self) -> usize {
        self.pruned.len()
    }

    pub fn flags(&self) -> &[bool] {
        &self.pruned
    }

    pub fn contains(&self, flat: usize) -> bool {
        self.pruned[flat]
    }

    pub fn pruned_count(&self) -> usize {
        self.pruned.iter().filter(|&&p| p).count()
    }

    pub fn pruned_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.pruned
            .iter()
            .enumerate()
            .filter_map(|(i, &p)| p.then_some(i))
    }

    pub fn same_universe(&self, other: &PruneMask) -> bool {
        Arc::ptr_eq(&self.universe, &other.universe) || self.universe == other.universe
    }

    pub fn is_subset_of(&self, other: &PruneMask) -> Result<bool> {
        if !self.same_universe(other) {
            return Err(PrunerError::UniverseMismatch);
        }
        Ok(self.pruned.iter().zip(&other.pruned).all(|(&a, &b)| !a || b))
    }

    /// One `uint8 [out, in]` tensor per conv layer, `1` marking a pruned kernel.
    pub fn layer_tensors(&self) -> Vec<(String, Tensor)> {
        self.universe
            .layers()
            .iter()
            .map(|slot| {
                let flags: Vec<u8> = self.pruned[slot.offset..slot.offset + slot.kernel_count()]
                    .iter()
                    .map(|&p| p as u8)
                    .collect();
                let t = Tensor::new(
                    vec![slot.out_channels, slot.in_channels],
                    crate::tensor_io::TensorData::U8(flags),
                )
                .expect("flag count matches layer shape");
                debug_assert_eq!(t.dtype(), DType::UInt8);
                (slot.name.clone(), t)
            })
            .collect()
    }
}

pub fn kernel_prune_ratio(mask: &PruneMask) -> Result<f64> {
    if mask.universe_size() == 0 {
        return Err(PrunerError::EmptyUniverse);
    }
    Ok(mask.pruned_count() as f64 / mask.universe_size() as f64)
}

/// Pruned weights over all conv weights, each kernel counting `size²`.
pub fn weight_prune_ratio(mask: &PruneMask) -> Result<f64> {
    let universe = mask.universe();
    let total = universe.weight_count();
    if universe.is_empty() || total == 0 {
        return Err(PrunerError::EmptyUniverse);
    }
    let mut pruned = 0usize;
    for slot in universe.layers() {
        let n = mask.pruned[slot.offset..slot.offset + slot.kernel_count()]
            .iter()
            .filter(|&&p| p)
            .count();
        pruned += n * slot.size * slot.size;
    }
    Ok(pruned as f64 / total as f64)
}

/// `c = (acc_pruned / acc_vanilla) · weight_prune_ratio`; may exceed 1.
pub fn compression_score(acc_pruned: f64, acc_vanilla: f64, weight_prune_ratio: f64) -> Result<f64> {
    if acc_vanilla == 0.0 {
        return Err(PrunerError::ZeroVanillaAccuracy);
    }
    Ok(acc_pruned / acc_vanilla * weight_prune_ratio)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressionReport {
    pub mode: CompressionMode,
    pub acc_vanilla: f64,
    pub acc_pruned: f64,
    pub kernel_prune_ratio: f64,
    pub weight_prune_ratio: f64,
    pub compression_score: f64,
}

impl CompressionReport {
    pub fn new(mask: &PruneMask, acc_vanilla: f64, acc_pruned: f64) -> Result<Self> {
        let wpr = weight_prune_ratio(mask)?;
        Ok(Self {
            mode: mask.mode,
            acc_vanilla,
            acc_pruned,
            kernel_prune_ratio: kernel_prune_ratio(mask)?,
            weight_prune_ratio: wpr,
            compression_score: compression_score(acc_pruned, acc_vanilla, wpr)?,
        })
    }
}

pub(crate) fn check_mask_set(masks: &[PruneMask]) -> Result<()> {
    if masks.len() != CompressionMode::ALL.len()
        || masks.iter().zip(CompressionMode::ALL).any(|(m, mode)| m.mode != mode)
    {
        return Err(PrunerError::MaskCount(masks.len()));
    }
    if masks.iter().any(|m| !m.same_universe(&masks[0])) {
        return Err(PrunerError::UniverseMismatch);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::default_thresholds;
    use CompressionMode::*;

    fn analysis(ks: Vec<Kernel>) -> KernelAnalysis {
        KernelAnalysis::from_kernels(ks, 1).unwrap()
    }

    #[test]
    fn ratios_basic() {
        let u = Arc::new(KernelUniverse::from_layers([("a".to_string(), 2, 5, 3)]));
        let mut m = PruneMask::empty(Det, u.clone());
        assert_eq!(kernel_prune_ratio(&m).unwrap(), 0.0);
        m.pruned = vec![true; 10];
        assert_eq!(kernel_prune_ratio(&m).unwrap(), 1.0);
        m.pruned = (0..10).map(|i| i % 2 == 0).collect();
        assert_eq!(weight_prune_ratio(&m).unwrap(), 0.5);
        assert_eq!(kernel_prune_ratio(&m).unwrap(), 0.5);
    }

    #[test]
    fn mixed_sizes_weight_ratio() {
        let u = Arc::new(KernelUniverse::from_layers([
            ("big".to_string(), 1, 1, 3),
            ("small".to_string(), 1, 1, 1),
        ]));
        let m = PruneMask::from_flags(Weight, u, vec![false, true]).unwrap();
        assert_eq!(weight_prune_ratio(&m).unwrap(), 0.1);
    }

    #[test]
    fn empty_universe() {
        let u = Arc::new(KernelUniverse::from_layers(Vec::new()));
        let m = PruneMask::empty(Det, u);
        assert!(matches!(kernel_prune_ratio(&m), Err(PrunerError::EmptyUniverse)));
        assert!(matches!(weight_prune_ratio(&m), Err(PrunerError::EmptyUniverse)));
    }

    #[test]
    fn score_arithmetic() {
        assert!((compression_score(0.45, 0.90, 0.80).unwrap() - 0.40).abs() < 1e-15);
        assert_eq!(compression_score(0.7, 0.7, 0.0).unwrap(), 0.0);
        assert!(matches!(
            compression_score(0.5, 0.0, 0.5),
            Err(PrunerError::ZeroVanillaAccuracy)
        ));
    }

    #[test]
    fn zero_kernels_prune_everything() {
        let a = analysis(vec![Kernel::new(3, &[0.0; 9]).unwrap(); 4]);
        for m in a.masks(&default_thresholds()) {
            assert_eq!(kernel_prune_ratio(&m).unwrap(), 1.0);
            assert_eq!(weight_prune_ratio(&m).unwrap(), 1.0);
        }
    }

    #[test]
    fn index_lookup() {
        let u = KernelUniverse::from_layers([
            ("a".to_string(), 2, 3, 3),
            ("b".to_string(), 4, 2, 1),
        ]);
        assert_eq!(u.len(), 14);
        let k = u.index(7);
        assert_eq!((k.layer_name.as_str(), k.out_channel, k.in_channel, k.size), ("b", 0, 1, 1));
        let k = u.index(5);
        assert_eq!((k.layer_name.as_str(), k.out_channel, k.in_channel), ("a", 1, 2));
        assert_eq!(u.weight_count(), 6 * 9 + 8);
    }

    #[test]
    fn mask_layer_tensors() {
        let u = Arc::new(KernelUniverse::from_layers([("a".to_string(), 2, 2, 3)]));
        let m = PruneMask::from_flags(Det, u, vec![true, false, false, true]).unwrap();
        let t = m.layer_tensors();
        assert_eq!(t[0].0, "a");
        assert_eq!(t[0].1.shape(), &[2, 2]);
        assert_eq!(t[0].1.to_f64_vec(), vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn universe_mismatch_detected() {
        let a = analysis(vec![Kernel::new(1, &[1.0]).unwrap()]);
        let b = analysis(vec![Kernel::new(3, &[0.0; 9]).unwrap()]);
        let ma = a.mask(Det, &default_thresholds());
        let mb = b.mask(Det, &default_thresholds());
        assert!(matches!(ma.is_subset_of(&mb), Err(PrunerError::UniverseMismatch)));
    }
}
