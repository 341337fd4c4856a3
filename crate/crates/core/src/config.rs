//! Run configuration: the representation, model and training settings in
//! one strict JSON document, with `section.key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::backbone::ModelConfig;
use crate::error::{Error, Result};
use crate::representation::ReprConfig;
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub repr: ReprConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    /// Parses a document; absent keys take their defaults, unknown keys
    /// are errors.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.repr.validate()?;
        self.model.validate()?;
        self.train.validate()
    }

    /// Applies one `section.key=value` override. The value is read as JSON
    /// when it parses as JSON and as a bare string otherwise.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} lacks '='")))?;
        let value: Value =
            serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
        let mut doc = serde_json::to_value(&*self)?;
        let mut slot = &mut doc;
        for key in path.trim().split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|o| o.get_mut(key))
                .ok_or_else(|| Error::Config(format!("unknown config key {path:?}")))?;
        }
        *slot = value;
        let next: Self = serde_json::from_value(doc)
            .map_err(|e| Error::Config(format!("override {assignment:?}: {e}")))?;
        next.validate()?;
        *self = next;
        Ok(())
    }
}
