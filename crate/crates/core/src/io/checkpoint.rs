use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{TensorContainer, TensorData};
use crate::data::Featurizer;
use crate::error::{Error, Result};
use crate::model::{FeatureNorm, GraphemeInventory, ModelConfig, TransducerModel};
use crate::params::Params;

pub const CHECKPOINT_VERSION: u32 = 1;

/// A model with everything needed to decode with it.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: TransducerModel,
    pub inventory: GraphemeInventory,
    pub featurizer: Featurizer,
    /// Free-form metadata such as the training step.
    pub info: BTreeMap<String, String>,
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("config serializes")
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    if ck.inventory.size() != ck.model.config.vocab_size {
        return Err(Error::ConfigError(format!(
            "inventory has {} labels but the model outputs {}",
            ck.inventory.size(),
            ck.model.config.vocab_size
        )));
    }
    let mut c = TensorContainer::new();
    c.set_attr("checkpoint_version", CHECKPOINT_VERSION.to_string());
    c.set_attr("model_config", json(&ck.model.config));
    c.set_attr("featurizer", json(&ck.featurizer));
    c.set_attr("inventory", json(&ck.inventory));
    for (k, v) in &ck.info {
        c.set_attr(format!("info/{k}"), v.clone());
    }
    let norm = &ck.model.norm;
    c.push("norm/mean", &[norm.mean.len()], TensorData::F64(norm.mean.clone()))?;
    c.push("norm/inv_std", &[norm.inv_std.len()], TensorData::F64(norm.inv_std.clone()))?;
    for (name, t) in ck.model.params() {
        c.push(format!("param/{name}"), t.shape(), TensorData::F64(t.data().to_vec()))?;
    }
    c.write(path)
}

fn parse_attr<T: serde::de::DeserializeOwned>(c: &TensorContainer, key: &str) -> Result<T> {
    let raw = c
        .attr(key)
        .ok_or_else(|| Error::IncompatibleCheckpoint(format!("missing `{key}` header")))?;
    serde_json::from_str(raw).map_err(|e| Error::IncompatibleCheckpoint(format!("`{key}` header: {e}")))
}

/// Loads a checkpoint. With `expect` set, the stored model configuration
/// must equal it.
pub fn load_checkpoint(path: &Path, expect: Option<&ModelConfig>) -> Result<Checkpoint> {
    let c = TensorContainer::read(path)?;
    let version = c.attr("checkpoint_version").unwrap_or("missing");
    if version != CHECKPOINT_VERSION.to_string() {
        return Err(Error::IncompatibleCheckpoint(format!(
            "checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let config: ModelConfig = parse_attr(&c, "model_config")?;
    if let Some(want) = expect {
        if *want != config {
            return Err(Error::IncompatibleCheckpoint(format!(
                "stored model config differs from the requested one: {config:?}"
            )));
        }
    }
    config.validate().map_err(|e| Error::IncompatibleCheckpoint(e.to_string()))?;
    let featurizer: Featurizer = parse_attr(&c, "featurizer")?;
    let inventory: GraphemeInventory = parse_attr(&c, "inventory")?;
    if inventory.size() != config.vocab_size {
        return Err(Error::IncompatibleCheckpoint("inventory size differs from the model output size".into()));
    }
    // the values are overwritten below; the seed only fixes the allocation
    let mut model = TransducerModel::new(config, &mut ChaCha8Rng::seed_from_u64(0))?;
    let mut loaded = 0;
    for (name, t) in model.params_mut() {
        let e = c
            .get(&format!("param/{name}"))
            .ok_or_else(|| Error::IncompatibleCheckpoint(format!("missing parameter `{name}`")))?;
        if e.shape != t.shape() {
            return Err(Error::IncompatibleCheckpoint(format!(
                "parameter `{name}` has shape {:?}, model expects {:?}",
                e.shape,
                t.shape()
            )));
        }
        t.data_mut().copy_from_slice(&e.data.to_f64());
        loaded += 1;
    }
    let stored = c.entries.iter().filter(|e| e.name.starts_with("param/")).count();
    if stored != loaded {
        return Err(Error::IncompatibleCheckpoint(format!("{stored} stored parameters, model has {loaded}")));
    }
    let mean = c.require("norm/mean")?.data.to_f64();
    let inv_std = c.require("norm/inv_std")?.data.to_f64();
    if mean.len() != model.config.audio_dim || inv_std.len() != model.config.audio_dim {
        return Err(Error::IncompatibleCheckpoint("feature normalization has the wrong width".into()));
    }
    model.norm = FeatureNorm { mean, inv_std };
    let info = c
        .attrs
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("info/").map(|k| (k.to_string(), v.clone())))
        .collect();
    Ok(Checkpoint {
        model,
        inventory,
        featurizer,
        info,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let inventory = GraphemeInventory::from_symbols("abc".chars()).unwrap();
        let featurizer = Featurizer::default();
        let cfg = ModelConfig::toy(featurizer.audio.feature_dim(), inventory.size());
        let mut model = TransducerModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        model.norm.mean[3] = 0.25;
        Checkpoint {
            model,
            inventory,
            featurizer,
            info: [("step".to_string(), "7".to_string())].into(),
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let ck = sample();
        save_checkpoint(&path, &ck).unwrap();
        let back = load_checkpoint(&path, Some(&ck.model.config)).unwrap();
        assert_eq!(back.model, ck.model);
        assert_eq!(back.inventory, ck.inventory);
        assert_eq!(back.featurizer, ck.featurizer);
        assert_eq!(back.info["step"], "7");
    }

    #[test]
    fn mismatches_are_incompatible() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let ck = sample();
        save_checkpoint(&path, &ck).unwrap();
        let mut other = ck.model.config.clone();
        other.joint_dim += 1;
        assert!(matches!(load_checkpoint(&path, Some(&other)), Err(Error::IncompatibleCheckpoint(_))));

        let mut c = TensorContainer::read(&path).unwrap();
        c.set_attr("checkpoint_version", "99");
        c.write(&path).unwrap();
        assert!(matches!(load_checkpoint(&path, None), Err(Error::IncompatibleCheckpoint(_))));
        assert_eq!(Error::IncompatibleCheckpoint(String::new()).exit_code(), 1);
    }
}
