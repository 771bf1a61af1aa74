//! Checkpoint bundles: a directory holding the selector config, encoder
//! spec and parameter layout (`selector.json`) next to the flattened
//! weights (`weights.bin`, little-endian f64 in registration order).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderSpec;
use crate::error::{KcsError, Result};

use super::model::SelectorModel;
use super::SelectorConfig;

pub const CHECKPOINT_VERSION: u32 = 1;
const META_FILE: &str = "selector.json";
const WEIGHTS_FILE: &str = "weights.bin";

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    version: u32,
    selector: SelectorConfig,
    encoder: EncoderSpec,
    layout: Vec<(String, usize, usize)>,
}

pub fn save_checkpoint(model: &SelectorModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| KcsError::io(dir, e))?;
    let meta = CheckpointMeta {
        version: CHECKPOINT_VERSION,
        selector: model.config.clone(),
        encoder: model.encoder.spec().clone(),
        layout: model.params.layout(),
    };
    let meta_path = dir.join(META_FILE);
    let text = serde_json::to_string_pretty(&meta)
        .map_err(|e| KcsError::Data(format!("serializing checkpoint metadata: {e}")))?;
    fs::write(&meta_path, text).map_err(|e| KcsError::io(&meta_path, e))?;

    let weights_path = dir.join(WEIGHTS_FILE);
    let flat = model.params.to_flat();
    let mut bytes = Vec::with_capacity(flat.len() * 8);
    for v in flat {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&weights_path, bytes).map_err(|e| KcsError::io(&weights_path, e))?;
    Ok(())
}

/// Rebuild the model from a checkpoint directory. `cache_dir` supplies the
/// embedding cache for frozen encoder backends.
pub fn load_checkpoint(dir: &Path, cache_dir: Option<&Path>) -> Result<SelectorModel> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| KcsError::io(&meta_path, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&text)
        .map_err(|e| KcsError::Data(format!("malformed checkpoint metadata: {e}")))?;
    if meta.version != CHECKPOINT_VERSION {
        return Err(KcsError::Data(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            meta.version
        )));
    }
    let mut model = SelectorModel::new(meta.selector, meta.encoder, cache_dir)?;
    if model.params.layout() != meta.layout {
        return Err(KcsError::Data(
            "checkpoint parameter layout does not match the rebuilt model".into(),
        ));
    }
    let weights_path = dir.join(WEIGHTS_FILE);
    let bytes = fs::read(&weights_path).map_err(|e| KcsError::io(&weights_path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(KcsError::Data(format!(
            "weights file has {} bytes, not a multiple of 8",
            bytes.len()
        )));
    }
    let flat: Vec<f64> =
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    model.params.load_flat(&flat).map_err(KcsError::Data)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testutil::tiny_sample;
    use crate::encoder::BackendKind;

    fn small_model() -> SelectorModel {
        let config = SelectorConfig { d: 16, dropout: 0.0, ..Default::default() };
        let spec = EncoderSpec {
            kind: BackendKind::Hash,
            d: 16,
            vocab_buckets: 128,
            ..Default::default()
        };
        SelectorModel::new(config, spec, None).unwrap()
    }

    #[test]
    fn round_trip_preserves_weights_and_outputs() {
        let model = small_model();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&model, dir.path()).unwrap();
        let loaded = load_checkpoint(dir.path(), None).unwrap();
        assert_eq!(model.params.to_flat(), loaded.params.to_flat());
        let sample = tiny_sample();
        let gold = sample.supporting_facts.clone();
        let a = model.forward_teacher_forced(&sample, &gold).unwrap();
        let b = loaded.forward_teacher_forced(&sample, &gold).unwrap();
        assert_eq!(a.logits, b.logits);
        assert_eq!(a.z, b.z);
    }

    #[test]
    fn truncated_weights_are_rejected() {
        let model = small_model();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&model, dir.path()).unwrap();
        let weights = dir.path().join("weights.bin");
        let bytes = fs::read(&weights).unwrap();
        fs::write(&weights, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(load_checkpoint(dir.path(), None), Err(KcsError::Data(_))));
    }

    #[test]
    fn missing_checkpoint_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope");
        assert!(matches!(load_checkpoint(&missing, None), Err(KcsError::Io { .. })));
    }
}
