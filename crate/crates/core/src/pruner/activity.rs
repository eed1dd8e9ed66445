use serde::Serialize;

use super::PruneMask;
use crate::modes::CompressionMode;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerActivity {
    pub layer: String,
    pub active_params: usize,
    pub total_params: usize,
    /// `active_params / total_params`
    pub activity: f64,
}

/// Fraction of unpruned conv weights in each layer, in enumeration order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivityMap {
    pub mode: CompressionMode,
    pub layers: Vec<LayerActivity>,
}

impl ActivityMap {
    pub fn total_params(&self) -> usize {
        self.layers.iter().map(|l| l.total_params).sum()
    }

    pub fn active_params(&self) -> usize {
        self.layers.iter().map(|l| l.active_params).sum()
    }
}

pub fn layer_activity(mask: &PruneMask) -> ActivityMap {
    let flags = mask.flags();
    let layers = mask
        .universe()
        .layers()
        .iter()
        .map(|slot| {
            let pruned = flags[slot.offset..slot.offset + slot.kernel_count()]
                .iter()
                .filter(|&&p| p)
                .count();
            let total = slot.weight_count();
            let active = total - pruned * slot.size * slot.size;
            LayerActivity {
                layer: slot.name.clone(),
                active_params: active,
                total_params: total,
                activity: if total == 0 { 1.0 } else { active as f64 / total as f64 },
            }
        })
        .collect();
    ActivityMap {
        mode: mask.mode,
        layers,
    }
}
