use std::ops::Range;

use serde::Serialize;

use super::{check_mask_set, KernelAnalysis, PruneMask, PrunerError, Result};
use crate::modes::CompressionMode::{self, *};
use crate::spectra::SpectralSummary;

/// Modes whose decision is made by a single eigenvalue.
pub const EIGENVALUE_MODES: [CompressionMode; 4] = [MinEig, MinEigReal, SpectralRadius, SpectralRadiusReal];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeComplexStats {
    pub mode: CompressionMode,
    /// Fraction of kernels whose deciding eigenvalue is non-real.
    pub targeted_complex_ratio: f64,
    pub pruned_kernels: usize,
    /// Fraction of this mode's pruned kernels whose deciding eigenvalue is non-real; 0 when none are pruned.
    pub pruned_via_complex_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexStats {
    pub eigenvalues: usize,
    pub complex_eigenvalues: usize,
    pub total_complex_ratio: f64,
    pub modes: Vec<ModeComplexStats>,
}

/// Index (into the canonically ordered eigenvalues) of the eigenvalue that
/// decides `mode`; the earliest wins a tie. `None` for modes not driven by one eigenvalue.
pub fn deciding_eigenvalue(mode: CompressionMode, summary: &SpectralSummary) -> Option<usize> {
    let (key, want_min): (fn(&num_complex::Complex64) -> f64, bool) = match mode {
        MinEig => (|z| z.norm(), true),
        MinEigReal => (|z| z.re.abs(), true),
        SpectralRadius => (|z| z.norm(), false),
        SpectralRadiusReal => (|z| z.re.abs(), false),
        _ => return None,
    };
    let mut best: Option<(usize, f64)> = None;
    for (i, z) in summary.eigenvalues.iter().enumerate() {
        let v = key(z);
        let better = match best {
            None => true,
            Some((_, b)) => {
                if want_min {
                    v < b
                } else {
                    v > b
                }
            }
        };
        if better {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

pub fn complex_stats(analysis: &KernelAnalysis, masks: &[PruneMask]) -> Result<ComplexStats> {
    check_analysis_masks(analysis, masks)?;
    Ok(stats_over(analysis, masks, 0..analysis.len()))
}

/// [`complex_stats`] restricted to each conv layer, in enumeration order.
pub fn complex_stats_by_layer(analysis: &KernelAnalysis, masks: &[PruneMask]) -> Result<Vec<(String, ComplexStats)>> {
    check_analysis_masks(analysis, masks)?;
    Ok(analysis
        .universe()
        .layers()
        .iter()
        .map(|slot| {
            let range = slot.offset..slot.offset + slot.kernel_count();
            (slot.name.clone(), stats_over(analysis, masks, range))
        })
        .collect())
}

fn check_analysis_masks(analysis: &KernelAnalysis, masks: &[PruneMask]) -> Result<()> {
    check_mask_set(masks)?;
    if !std::sync::Arc::ptr_eq(masks[0].universe(), analysis.universe())
        && **masks[0].universe() != **analysis.universe()
    {
        return Err(PrunerError::UniverseMismatch);
    }
    Ok(())
}

fn stats_over(analysis: &KernelAnalysis, masks: &[PruneMask], range: Range<usize>) -> ComplexStats {
    let summaries = &analysis.summaries()[range.clone()];
    let eigenvalues: usize = summaries.iter().map(|s| s.eigenvalues.len()).sum();
    let complex_eigenvalues: usize = summaries.iter().map(|s| s.complex_count()).sum();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };

    let modes = EIGENVALUE_MODES
        .iter()
        .map(|&mode| {
            let mask = &masks[mode.index()];
            let mut targeted = 0;
            let mut pruned = 0;
            let mut pruned_complex = 0;
            for (k, s) in range.clone().zip(summaries) {
                let i = deciding_eigenvalue(mode, s).expect("eigenvalue mode");
                let is_complex = s.is_complex(&s.eigenvalues[i]);
                targeted += is_complex as usize;
                if mask.contains(k) {
                    pruned += 1;
                    pruned_complex += is_complex as usize;
                }
            }
            ModeComplexStats {
                mode,
                targeted_complex_ratio: ratio(targeted, summaries.len()),
                pruned_kernels: pruned,
                pruned_via_complex_ratio: ratio(pruned_complex, pruned),
            }
        })
        .collect();

    ComplexStats {
        eigenvalues,
        complex_eigenvalues,
        total_complex_ratio: ratio(complex_eigenvalues, eigenvalues),
        modes,
    }
}
