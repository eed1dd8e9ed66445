use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};

use super::{check_mask_set, PruneMask, Result};
use crate::modes::CompressionMode::{self, *};

/// The exact set of modes that prune a given kernel, as a bitset over canonical mode indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SetSignature(pub u8);

impl SetSignature {
    pub fn from_modes(modes: &[CompressionMode]) -> Self {
        SetSignature(modes.iter().fold(0, |acc, m| acc | 1 << m.index()))
    }

    pub fn contains(self, mode: CompressionMode) -> bool {
        self.0 & (1 << mode.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn modes(self) -> Vec<CompressionMode> {
        CompressionMode::ALL
            .into_iter()
            .filter(|&m| self.contains(m))
            .collect()
    }
}

impl fmt::Display for SetSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.modes().iter().map(|m| m.as_str()).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

impl Serialize for SetSignature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.modes().iter().map(|m| m.as_str()))
    }
}

/// Counts of pruned kernels per exact signature. Unpruned kernels are not counted.
pub fn set_partition(masks: &[PruneMask]) -> Result<BTreeMap<SetSignature, usize>> {
    check_mask_set(masks)?;
    let mut out = BTreeMap::new();
    for k in 0..masks[0].universe_size() {
        let sig = masks
            .iter()
            .filter(|m| m.contains(k))
            .fold(0u8, |acc, m| acc | 1 << m.mode.index());
        if sig != 0 {
            *out.entry(SetSignature(sig)).or_insert(0) += 1;
        }
    }
    Ok(out)
}

/// Drops the two real-part variants from a signature.
pub fn vanilla_projection(sig: SetSignature) -> SetSignature {
    let real = SetSignature::from_modes(&[MinEigReal, SpectralRadiusReal]);
    SetSignature(sig.0 & !real.0)
}

/// Vanilla-mode sets observed in the reference experiments.
pub const LISTED_SETS: [&[CompressionMode]; 10] = [
    &[MinEig, Weight, Det, SpectralRadius, SpectralNorm, DetGram],
    &[MinEig, Weight, Det, SpectralRadius, DetGram],
    &[MinEig, Weight, Det, DetGram],
    &[MinEig, Det, SpectralRadius, DetGram],
    &[MinEig, Det, DetGram],
    &[MinEig, DetGram],
    &[MinEig, Weight],
    &[MinEig, Det],
    &[MinEig],
    &[Weight],
];

/// Sets the reference experiments saw only occasionally.
pub const NOTED_EXCEPTIONS: [&[CompressionMode]; 2] = [&[MinEig, Det, SpectralRadius], &[DetGram]];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conformance {
    /// 1-based position in [`LISTED_SETS`].
    Listed(usize),
    Exception,
    Unlisted,
    /// Only real variants prune the kernel; no vanilla mode does.
    RealVariantsOnly,
}

impl Conformance {
    pub fn as_str(self) -> &'static str {
        match self {
            Conformance::Listed(_) => "listed",
            Conformance::Exception => "exception",
            Conformance::Unlisted => "unlisted",
            Conformance::RealVariantsOnly => "real_variants_only",
        }
    }
}

impl Serialize for Conformance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformanceRow {
    pub projected: SetSignature,
    pub count: usize,
    pub status: Conformance,
    /// Position in the reference list when `status` is `listed`.
    pub listed_rank: Option<usize>,
}

/// Projects a partition onto the six vanilla modes and classifies each projected set.
pub fn conformance(partition: &BTreeMap<SetSignature, usize>) -> Vec<ConformanceRow> {
    let mut merged: BTreeMap<SetSignature, usize> = BTreeMap::new();
    for (&sig, &count) in partition {
        *merged.entry(vanilla_projection(sig)).or_insert(0) += count;
    }
    merged
        .into_iter()
        .map(|(projected, count)| {
            let status = if projected.is_empty() {
                Conformance::RealVariantsOnly
            } else if let Some(pos) = LISTED_SETS
                .iter()
                .position(|s| SetSignature::from_modes(s) == projected)
            {
                Conformance::Listed(pos + 1)
            } else if NOTED_EXCEPTIONS
                .iter()
                .any(|s| SetSignature::from_modes(s) == projected)
            {
                Conformance::Exception
            } else {
                Conformance::Unlisted
            };
            let listed_rank = match status {
                Conformance::Listed(r) => Some(r),
                _ => None,
            };
            ConformanceRow {
                projected,
                count,
                status,
                listed_rank,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::default_thresholds;
    use crate::pruner::KernelAnalysis;
    use crate::spectra::Kernel;

    #[test]
    fn zero_snapshot_single_signature() {
        let a = KernelAnalysis::from_kernels(vec![Kernel::new(3, &[0.0; 9]).unwrap(); 5], 1).unwrap();
        let p = set_partition(&a.masks(&default_thresholds())).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[&SetSignature(0xff)], 5);
    }

    #[test]
    fn diagonal_kernel_signature() {
        let a = KernelAnalysis::from_kernels(vec![Kernel::diagonal(&[1e-5, 1.0, 1.0]).unwrap()], 1).unwrap();
        let p = set_partition(&a.masks(&default_thresholds())).unwrap();
        let sig = SetSignature::from_modes(&[MinEig, MinEigReal]);
        assert_eq!(p.into_iter().collect::<Vec<_>>(), vec![(sig, 1)]);
        assert_eq!(sig.to_string(), "{min_eig,min_eig_real}");
    }

    #[test]
    fn partition_requires_eight_masks() {
        let a = KernelAnalysis::from_kernels(vec![Kernel::new(1, &[0.0]).unwrap()], 1).unwrap();
        let mut masks = a.masks(&default_thresholds());
        masks.pop();
        assert!(set_partition(&masks).is_err());
    }

    #[test]
    fn conformance_classes() {
        let mut part = BTreeMap::new();
        part.insert(SetSignature(0xff), 3);
        part.insert(SetSignature::from_modes(&[MinEigReal]), 2);
        part.insert(SetSignature::from_modes(&[MinEig, Det, SpectralRadius, MinEigReal]), 1);
        part.insert(SetSignature::from_modes(&[SpectralNorm]), 1);
        let rows = conformance(&part);
        let status: Vec<_> = rows.iter().map(|r| (r.status, r.count)).collect();
        assert!(status.contains(&(Conformance::Listed(1), 3)));
        assert!(status.contains(&(Conformance::RealVariantsOnly, 2)));
        assert!(status.contains(&(Conformance::Exception, 1)));
        assert!(status.contains(&(Conformance::Unlisted, 1)));
    }
}
