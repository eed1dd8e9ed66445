//! Pruning ratio as a function of the significance threshold.
//!
//! A sweep point is a base threshold `τ`. Kernels of side `n` are compared
//! against `τⁿ` in det mode, `τ²ⁿ` in det_gram mode and `τ` otherwise, the same
//! scaling the default table follows at `τ = 1e-4`.

use kernelspect_core::modes::{CompressionMode, ThresholdTable, KERNEL_SIZES};
use kernelspect_core::pruner::{kernel_prune_ratio, weight_prune_ratio, KernelAnalysis, PrunerError};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("threshold grid is empty")]
    EmptyGrid,
    #[error("threshold grid must be positive and strictly increasing (offending value {0})")]
    InvalidGrid(f64),
    #[error(transparent)]
    Pruner(#[from] PrunerError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub mode: CompressionMode,
    pub threshold: f64,
    pub pruned_kernels: usize,
    pub kernel_prune_ratio: f64,
    pub weight_prune_ratio: f64,
}

/// `points` values evenly spaced in log10 between `lo` and `hi`, inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
            .collect(),
    }
}

/// Threshold table for `mode` at base threshold `tau`.
pub fn scaled_table(mode: CompressionMode, tau: f64) -> ThresholdTable {
    let mut t = ThresholdTable::default();
    for n in KERNEL_SIZES {
        let v = match mode {
            CompressionMode::Det => tau.powi(n as i32),
            CompressionMode::DetGram => tau.powi(2 * n as i32),
            _ => tau,
        };
        // τⁿ can underflow to 0 for extreme grids; keep the smallest positive value
        t.set(mode, n, v.max(f64::MIN_POSITIVE)).expect("positive finite threshold");
    }
    t
}

pub fn threshold_sweep(analysis: &KernelAnalysis, mode: CompressionMode, grid: &[f64]) -> Result<Vec<SweepPoint>, SweepError> {
    if grid.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    let mut prev = 0.0;
    for &t in grid {
        if !(t.is_finite() && t > prev) {
            return Err(SweepError::InvalidGrid(t));
        }
        prev = t;
    }
    grid.iter()
        .map(|&tau| {
            let mask = analysis.mask(mode, &scaled_table(mode, tau));
            Ok(SweepPoint {
                mode,
                threshold: tau,
                pruned_kernels: mask.pruned_count(),
                kernel_prune_ratio: kernel_prune_ratio(&mask)?,
                weight_prune_ratio: weight_prune_ratio(&mask)?,
            })
        })
        .collect()
}
