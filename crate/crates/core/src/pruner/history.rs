use serde::Serialize;

use super::{compression_score, kernel_prune_ratio, weight_prune_ratio, KernelAnalysis, PrunerError, Result};
use crate::infer::{evaluate, EvalDataset};
use crate::modes::{CompressionMode, ThresholdTable};
use crate::tensor_io::CheckpointSeries;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochModeRecord {
    pub mode: CompressionMode,
    pub pruned_kernels: usize,
    pub kernel_prune_ratio: f64,
    pub weight_prune_ratio: f64,
    pub accuracy: Option<f64>,
    pub compression_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub vanilla_accuracy: Option<f64>,
    pub modes: Vec<EpochModeRecord>,
}

/// Prunes every checkpoint as though training had stopped there.
///
/// Accuracies are computed only when `dataset` is given.
pub fn epoch_history(
    series: &CheckpointSeries,
    thresholds: &ThresholdTable,
    dataset: Option<&EvalDataset>,
    jobs: usize,
) -> Result<Vec<EpochRecord>> {
    series
        .iter()
        .map(|(epoch, snapshot)| {
            let at_epoch = |source: PrunerError| PrunerError::Checkpoint {
                epoch,
                source: Box::new(source),
            };
            let analysis = KernelAnalysis::analyze(snapshot, jobs).map_err(at_epoch)?;
            analysis.check_invariants().map_err(at_epoch)?;
            let vanilla = match dataset {
                Some(d) => Some(
                    evaluate(snapshot, d, None, jobs)
                        .map_err(|e| at_epoch(e.into()))?
                        .top1_accuracy,
                ),
                None => None,
            };
            let modes = analysis
                .masks(thresholds)
                .iter()
                .map(|mask| {
                    let wpr = weight_prune_ratio(mask)?;
                    let (accuracy, score) = match (dataset, vanilla) {
                        (Some(d), Some(acc_v)) => {
                            let acc = evaluate(snapshot, d, Some(mask), jobs)?.top1_accuracy;
                            (Some(acc), Some(compression_score(acc, acc_v, wpr)?))
                        }
                        _ => (None, None),
                    };
                    Ok(EpochModeRecord {
                        mode: mask.mode,
                        pruned_kernels: mask.pruned_count(),
                        kernel_prune_ratio: kernel_prune_ratio(mask)?,
                        weight_prune_ratio: wpr,
                        accuracy,
                        compression_score: score,
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map_err(at_epoch)?;
            Ok(EpochRecord {
                epoch,
                vanilla_accuracy: vanilla,
                modes,
            })
        })
        .collect()
}
