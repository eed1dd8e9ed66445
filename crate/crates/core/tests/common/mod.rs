#![allow(dead_code)]

use std::path::PathBuf;

use kernelspect_core::tensor_io::{load_snapshot, ModelSnapshot};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn meta() -> serde_json::Value {
    let text = std::fs::read_to_string(fixtures().join("meta.json")).expect("fixtures/meta.json");
    serde_json::from_str(&text).unwrap()
}

pub fn snapshot(name: &str) -> ModelSnapshot {
    load_snapshot(fixtures().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub const MODELS: [&str; 2] = ["tinynet", "tinynet-l1"];
