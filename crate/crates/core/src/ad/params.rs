use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable tensors. Frozen entries still take part in forward passes
/// but are skipped by optimizers.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    frozen: Vec<bool>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(tensor);
        self.frozen.push(false);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn set_frozen(&mut self, id: ParamId, frozen: bool) {
        self.frozen[id.0] = frozen;
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.frozen[id.0]
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            params: self
                .names
                .iter()
                .zip(&self.tensors)
                .map(|(name, t)| CheckpointEntry {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                    values: t.values().to_vec(),
                })
                .collect(),
        }
    }

    /// Overwrites values from a checkpoint. Every stored name must exist with
    /// an identical shape.
    pub fn load_checkpoint(&mut self, ckpt: &Checkpoint) -> Result<()> {
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Contract(format!("unsupported checkpoint version {}", ckpt.version)));
        }
        for entry in &ckpt.params {
            let id = self
                .find(&entry.name)
                .ok_or_else(|| Error::Contract(format!("checkpoint parameter {} not in model", entry.name)))?;
            let t = Tensor::new(entry.shape.clone(), entry.values.clone())?;
            if t.shape() != self.get(id).shape() {
                return Err(Error::Shape(format!(
                    "{}: checkpoint shape {:?}, model shape {:?}",
                    entry.name,
                    t.shape(),
                    self.get(id).shape()
                )));
            }
            self.tensors[id.0] = t;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// JSON parameter checkpoint: versioned list of named row-major tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub params: Vec<CheckpointEntry>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::format(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let mut store = ParamStore::new();
        store.add("a/w", Tensor::matrix(2, 2, vec![0.1, -1.0 / 3.0, 1e-300, 7.0]).unwrap());
        store.add("a/b", Tensor::vector(vec![std::f64::consts::PI]));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        store.to_checkpoint().save(&path).unwrap();

        let mut other = ParamStore::new();
        other.add("a/w", Tensor::zeros(&[2, 2]));
        other.add("a/b", Tensor::zeros(&[1]));
        other.load_checkpoint(&Checkpoint::load(&path).unwrap()).unwrap();
        assert_eq!(other.get(ParamId(0)), store.get(ParamId(0)));
        assert_eq!(other.get(ParamId(1)), store.get(ParamId(1)));
    }

    #[test]
    fn checkpoint_rejects_shape_and_version_mismatch() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::zeros(&[3]));
        let mut ckpt = store.to_checkpoint();
        ckpt.params[0].shape = vec![1, 3];
        assert!(matches!(store.load_checkpoint(&ckpt), Err(Error::Shape(_))));
        ckpt.version = 99;
        assert!(matches!(store.load_checkpoint(&ckpt), Err(Error::Contract(_))));
    }
}
