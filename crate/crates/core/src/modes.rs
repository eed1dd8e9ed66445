//! The eight compression modes and their significance thresholds.
//!
//! With the default thresholds the pruning decisions nest. For n ∈ {1, 3},
//! `max|λ| < 1e-4` gives `|det| < 1e-4ⁿ`, the det threshold; and
//! `min|λ|ⁿ ≤ |det|` gives the step from det to min_eig. Since the spectral
//! norm bounds both `max|λ|` and `mean|w|` from above, a spectral_norm
//! decision implies spectral_radius and weight decisions, and `|Re λ| ≤ |λ|`
//! makes each real variant prune a superset of its plain counterpart.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::spectra::{Kernel, SpectralSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CompressionMode {
    Det,
    DetGram,
    MinEig,
    MinEigReal,
    SpectralRadius,
    SpectralRadiusReal,
    SpectralNorm,
    Weight,
}

impl CompressionMode {
    /// Canonical order; every report iterates modes in this order.
    pub const ALL: [CompressionMode; 8] = [
        CompressionMode::Det,
        CompressionMode::DetGram,
        CompressionMode::MinEig,
        CompressionMode::MinEigReal,
        CompressionMode::SpectralRadius,
        CompressionMode::SpectralRadiusReal,
        CompressionMode::SpectralNorm,
        CompressionMode::Weight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CompressionMode::Det => "det",
            CompressionMode::DetGram => "det_gram",
            CompressionMode::MinEig => "min_eig",
            CompressionMode::MinEigReal => "min_eig_real",
            CompressionMode::SpectralRadius => "spectral_radius",
            CompressionMode::SpectralRadiusReal => "spectral_radius_real",
            CompressionMode::SpectralNorm => "spectral_norm",
            CompressionMode::Weight => "weight",
        }
    }

    /// Position in [`CompressionMode::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    /// Whether the mode is one of the two real-part variants.
    pub fn is_real_variant(self) -> bool {
        matches!(
            self,
            CompressionMode::MinEigReal | CompressionMode::SpectralRadiusReal
        )
    }
}

impl fmt::Display for CompressionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CompressionMode {
    type Err = ModesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CompressionMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ModesError::UnknownMode(s.to_string()))
    }
}

impl Serialize for CompressionMode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum ModesError {
    #[error("unknown compression mode `{0}`")]
    UnknownMode(String),
    #[error("threshold for {mode} must be a finite positive number, got {value}")]
    InvalidThreshold { mode: CompressionMode, value: f64 },
    #[error("kernel size {0} has no thresholds; expected 1, 2 or 3")]
    InvalidKernelSize(usize),
    #[error("malformed threshold override `{0}`; expected mode=value[:ksize]")]
    MalformedOverride(String),
    #[error("threshold config {path}: {message}")]
    Config { path: String, message: String },
}

/// Significance score of one kernel; nonnegative.
pub fn score(mode: CompressionMode, summary: &SpectralSummary, kernel: &Kernel) -> f64 {
    let ev = &summary.eigenvalues;
    let min = |f: &dyn Fn(&num_complex::Complex64) -> f64| ev.iter().map(f).fold(f64::INFINITY, f64::min);
    let max = |f: &dyn Fn(&num_complex::Complex64) -> f64| ev.iter().map(f).fold(0.0, f64::max);
    match mode {
        CompressionMode::Det => summary.determinant.abs(),
        CompressionMode::DetGram => summary.gram_determinant.abs(),
        CompressionMode::MinEig => min(&|z| z.norm()),
        CompressionMode::MinEigReal => min(&|z| z.re.abs()),
        CompressionMode::SpectralRadius => max(&|z| z.norm()),
        CompressionMode::SpectralRadiusReal => max(&|z| z.re.abs()),
        CompressionMode::SpectralNorm => summary.spectral_norm,
        CompressionMode::Weight => kernel.mean_abs(),
    }
}

/// All eight scores in canonical order.
pub fn scores(summary: &SpectralSummary, kernel: &Kernel) -> [f64; 8] {
    CompressionMode::ALL.map(|m| score(m, summary, kernel))
}

/// Per-(mode, kernel size) significance thresholds. All entries are finite and > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    values: BTreeMap<(CompressionMode, usize), f64>,
}

pub const KERNEL_SIZES: [usize; 3] = [1, 2, 3];

impl Default for ThresholdTable {
    fn default() -> Self {
        default_thresholds()
    }
}

/// det uses `1e-4ⁿ`, det_gram `1e-4²ⁿ`, every other mode `1e-4`.
pub fn default_thresholds() -> ThresholdTable {
    let mut values = BTreeMap::new();
    for mode in CompressionMode::ALL {
        for n in KERNEL_SIZES {
            let v = match (mode, n) {
                (CompressionMode::Det, 1) => 1e-4,
                (CompressionMode::Det, 2) => 1e-8,
                (CompressionMode::Det, _) => 1e-12,
                (CompressionMode::DetGram, 1) => 1e-8,
                (CompressionMode::DetGram, 2) => 1e-16,
                (CompressionMode::DetGram, _) => 1e-24,
                _ => 1e-4,
            };
            values.insert((mode, n), v);
        }
    }
    ThresholdTable { values }
}

impl ThresholdTable {
    pub fn get(&self, mode: CompressionMode, n: usize) -> f64 {
        self.values[&(mode, n)]
    }

    pub fn set(&mut self, mode: CompressionMode, n: usize, value: f64) -> Result<(), ModesError> {
        if !KERNEL_SIZES.contains(&n) {
            return Err(ModesError::InvalidKernelSize(n));
        }
        if !(value.is_finite() && value > 0.0) {
            return Err(ModesError::InvalidThreshold { mode, value });
        }
        self.values.insert((mode, n), value);
        Ok(())
    }

    /// Sets one mode's threshold for every kernel size.
    pub fn set_all_sizes(&mut self, mode: CompressionMode, value: f64) -> Result<(), ModesError> {
        KERNEL_SIZES
            .into_iter()
            .try_for_each(|n| self.set(mode, n, value))
    }

    /// Applies `mode=value` or `mode=value:ksize`.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ModesError> {
        let bad = || ModesError::MalformedOverride(spec.to_string());
        let (mode, rest) = spec.split_once('=').ok_or_else(bad)?;
        let mode: CompressionMode = mode.trim().parse()?;
        let (value, size) = match rest.split_once(':') {
            Some((v, k)) => (v, Some(k.trim().parse::<usize>().map_err(|_| bad())?)),
            None => (rest, None),
        };
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        match size {
            Some(n) => self.set(mode, n, value),
            None => self.set_all_sizes(mode, value),
        }
    }

    /// Reads overrides from a JSON object.
    ///
    /// ```json
    /// {"det": {"3": 1e-10, "1": 1e-3}, "weight": 5e-4}
    /// ```
    /// A bare number applies to all kernel sizes. Unlisted entries keep
    /// their current value.
    pub fn apply_json(&mut self, doc: &serde_json::Value) -> Result<(), ModesError> {
        let cfg = |m: String| ModesError::Config {
            path: "<inline>".into(),
            message: m,
        };
        let obj = doc
            .as_object()
            .ok_or_else(|| cfg("top level must be an object".into()))?;
        for (key, val) in obj {
            let mode: CompressionMode = key.parse()?;
            match val {
                serde_json::Value::Number(n) => {
                    self.set_all_sizes(mode, n.as_f64().unwrap_or(f64::NAN))?
                }
                serde_json::Value::Object(per_size) => {
                    for (size, v) in per_size {
                        let n: usize = size
                            .parse()
                            .map_err(|_| cfg(format!("{key}: kernel size `{size}` is not an integer")))?;
                        let v = v
                            .as_f64()
                            .ok_or_else(|| cfg(format!("{key}.{size}: expected a number")))?;
                        self.set(mode, n, v)?;
                    }
                }
                _ => return Err(cfg(format!("{key}: expected a number or an object"))),
            }
        }
        Ok(())
    }

    pub fn load_json(&mut self, path: impl AsRef<Path>) -> Result<(), ModesError> {
        let path = path.as_ref();
        let with_path = |message: String| ModesError::Config {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| with_path(e.to_string()))?;
        let doc: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| with_path(e.to_string()))?;
        self.apply_json(&doc).map_err(|e| match e {
            ModesError::Config { message, .. } => with_path(message),
            other => other,
        })
    }

    /// `(mode, size, value)` in canonical mode order, then size.
    pub fn entries(&self) -> impl Iterator<Item = (CompressionMode, usize, f64)> + '_ {
        self.values.iter().map(|(&(m, n), &v)| (m, n, v))
    }
}

/// Strict comparison: a score equal to its threshold survives.
pub fn is_pruned(
    mode: CompressionMode,
    summary: &SpectralSummary,
    kernel: &Kernel,
    thresholds: &ThresholdTable,
) -> bool {
    score(mode, summary, kernel) < thresholds.get(mode, kernel.n())
}
