use std::fs;
use std::path::Path;

use super::{load_snapshot, ModelSnapshot, Result, TensorIoError};

/// Snapshots of one training run, ordered by epoch. All share one manifest structure.
#[derive(Debug, Clone)]
pub struct CheckpointSeries {
    snapshots: Vec<(u64, ModelSnapshot)>,
}

impl CheckpointSeries {
    pub fn new(mut snapshots: Vec<(u64, ModelSnapshot)>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(TensorIoError::EmptySeries(Default::default()));
        }
        snapshots.sort_by_key(|(e, _)| *e);
        for pair in snapshots.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(TensorIoError::DuplicateEpoch(pair[0].0));
            }
        }
        let (ref_epoch, reference) = &snapshots[0];
        for (epoch, snap) in &snapshots[1..] {
            if let Some(detail) = reference.structure_diff(snap) {
                return Err(TensorIoError::InconsistentManifests {
                    epoch: *epoch,
                    reference: *ref_epoch,
                    detail,
                });
            }
        }
        Ok(Self { snapshots })
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn epochs(&self) -> Vec<u64> {
        self.snapshots.iter().map(|(e, _)| *e).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &ModelSnapshot)> {
        self.snapshots.iter().map(|(e, s)| (*e, s))
    }
}

/// Loads every `epoch_<N>/` subdirectory of `dir`.
pub fn load_checkpoint_series(dir: impl AsRef<Path>) -> Result<CheckpointSeries> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|source| TensorIoError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut found = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| TensorIoError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let name = entry.file_name();
        let Some(epoch) = name
            .to_str()
            .and_then(|n| n.strip_prefix("epoch_"))
            .and_then(|n| n.parse::<u64>().ok())
        else {
            continue;
        };
        if entry.path().is_dir() {
            found.push((epoch, entry.path()));
        }
    }
    if found.is_empty() {
        return Err(TensorIoError::EmptySeries(dir.to_path_buf()));
    }
    found.sort();
    let snapshots = found
        .into_iter()
        .map(|(epoch, path)| Ok((epoch, load_snapshot(&path)?)))
        .collect::<Result<Vec<_>>>()?;
    CheckpointSeries::new(snapshots)
}
