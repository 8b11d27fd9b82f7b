use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MdnModel, ModelError};
use crate::features::{Behaviour, FeatureSchema, MAX_FRONT, MAX_SIDE};

pub const MODEL_FORMAT: &str = "goalpred-mdn";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    schema_id: String,
    model: MdnModel,
}

/// Schema of the expert specialised for the given context; counts beyond
/// the largest expert are clamped.
pub fn select_schema(behaviour: Behaviour, n_front: usize, n_side: usize) -> FeatureSchema {
    match behaviour {
        Behaviour::Follow => FeatureSchema::follow(n_front.min(MAX_FRONT)),
        Behaviour::Change => FeatureSchema::change(n_front.min(MAX_FRONT), n_side.min(MAX_SIDE)),
    }
}

/// Four follow-lane experts keyed by front-agent count and sixteen
/// change-lane experts keyed by (front, side) counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertCollection {
    models: BTreeMap<FeatureSchema, MdnModel>,
}

impl ExpertCollection {
    pub fn new(models: impl IntoIterator<Item = MdnModel>) -> Result<Self, ModelError> {
        let models: BTreeMap<_, _> = models.into_iter().map(|m| (m.schema, m)).collect();
        for s in FeatureSchema::all() {
            if !models.contains_key(&s) {
                return Err(ModelError::MissingExpert(s));
            }
        }
        Ok(Self { models })
    }

    pub fn select_expert(&self, behaviour: Behaviour, n_front: usize, n_side: usize) -> &MdnModel {
        &self.models[&select_schema(behaviour, n_front, n_side)]
    }

    pub fn get(&self, schema: FeatureSchema) -> Option<&MdnModel> {
        self.models.get(&schema)
    }

    pub fn models(&self) -> impl Iterator<Item = &MdnModel> {
        self.models.values()
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), ModelError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for (schema, model) in &self.models {
            let file = ModelFile {
                format: MODEL_FORMAT.to_string(),
                version: MODEL_FORMAT_VERSION,
                schema_id: schema.id(),
                model: model.clone(),
            };
            fs::write(dir.join(format!("{}.json", schema.id())), serde_json::to_string(&file)?)?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, ModelError> {
        let dir = dir.as_ref();
        let mut models = Vec::new();
        for schema in FeatureSchema::all() {
            let path = dir.join(format!("{}.json", schema.id()));
            if !path.exists() {
                return Err(ModelError::MissingExpert(schema));
            }
            let file: ModelFile = serde_json::from_str(&fs::read_to_string(&path)?)?;
            let bad = |reason: String| ModelError::Format {
                path: path.display().to_string(),
                reason,
            };
            if file.format != MODEL_FORMAT || file.version != MODEL_FORMAT_VERSION {
                return Err(bad(format!("unsupported format {} v{}", file.format, file.version)));
            }
            if file.schema_id != schema.id() || file.model.schema != schema {
                return Err(bad(format!("schema {} stored under {}", file.model.schema, schema)));
            }
            let m = &file.model;
            let expected: usize = m.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
            if m.sizes.first() != Some(&schema.len())
                || m.sizes.last() != Some(&(m.components * (1 + 2 * m.horizon)))
                || m.params.len() != expected
                || m.input_shift.len() != schema.len()
                || m.input_scale.len() != schema.len()
                || m.output_shift.len() != m.horizon
                || m.output_scale.len() != m.horizon
            {
                return Err(bad("inconsistent layer sizes".into()));
            }
            if m.params.iter().any(|p| !p.is_finite()) {
                return Err(bad("non-finite parameter".into()));
            }
            models.push(file.model);
        }
        Self::new(models)
    }
}
